//! Exploded-sequence synthesis: filtering, explosion optimization,
//! interpolation, normalization, rejection and manifests.

mod annotate;
pub mod assembly;
mod explosion;
mod filter;
mod manifest;
mod pipeline;
mod sequence;

pub use annotate::{
    annotate_asset, AnnotationClient, AnnotationOutcome, AttributeRecord, DefaultAnnotator,
    DensityClass, RemoteAnnotator,
};
pub use explosion::{optimize_explosion, ExplosionConfig, ExplosionResult};
pub use filter::{filter_asset, filter_parts, FilterDecision, FilterRules};
pub use manifest::{ManifestFlags, SequenceManifest, TransformRecord};
pub use pipeline::{synthesize_asset, synthesize_parts, SynthConfig, SynthOutcome, DEFAULT_TIMES};
pub use sequence::{
    expansion_ratio, interpolate_sequence, normalize_sequence, reject_sequence, uniform_times,
    ExplodedSequence, NormalizeTransform, RejectDecision,
};
