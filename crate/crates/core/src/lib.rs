//! Geometry substrate and numerical pipeline for exploded-view dynamics.
//!
//! * [`mesh`]: OBJ loading, connected-component part decomposition, surface
//!   sampling and regular-grid signed distance fields.
//! * [`synth`]: rule-based asset filtering, explosion-vector optimization and
//!   exploded sequence construction with JSON manifests.
//! * [`track`]: SDF-driven recovery of per-part linear trajectories from an
//!   exploded sequence, with optional masking of overlapped points.
//! * [`eval`]: weighted IoU, SDF objective, dataset statistics and the
//!   frame-count study.

pub mod assign;
pub mod error;
pub mod eval;
pub mod geom;
pub mod mesh;
pub mod synth;
pub mod track;

pub use error::{Error, Result};
pub use geom::{Aabb, Vec3};
