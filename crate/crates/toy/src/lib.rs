//! Small randomly initialized transformer stack for exploded-sequence generation:
//! point-cloud encoder and SDF decoder, time and part-count conditioned adapter,
//! injection branches, temporal attention, spatial prompts and a DDPM sampler.
//! Everything runs on a tiny reverse-mode tape so gradients can be checked
//! against finite differences.

pub mod check;
pub mod embed;
pub mod error;
pub mod graph;
pub mod model;
pub mod params;
pub mod sampler;
pub mod tokens;

pub use check::{run_toycheck, CheckResult, ToyCheckConfig, ToyCheckReport};
pub use error::{Result, ToyError};
pub use model::{TimeMode, ToyDims, ToyModel};
pub use sampler::{sample_sequence, sample_unconditional, SampleConfig};
pub use tokens::{merge_frames, split_frames, PromptSet, TokenBatch, TokenKind};
