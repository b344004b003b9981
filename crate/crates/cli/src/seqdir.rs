//! On-disk sequence layout: `frame_<i>.obj` (one `g part_<j>` group per part)
//! and `manifest.json`, with `trajectory.json` and `eval.json` added by later stages.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bangkit_core::mesh::{load_mesh, write_obj_groups};
use bangkit_core::synth::{ExplodedSequence, SequenceManifest};
use bangkit_core::track::TrajectorySolution;
use bangkit_core::Vec3;
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";
pub const TRAJECTORY: &str = "trajectory.json";
pub const EVAL_REPORT: &str = "eval.json";

pub fn frame_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("frame_{i}.obj"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_sequence_dir(dir: &Path, seq: &ExplodedSequence, manifest: &SequenceManifest) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let groups: Vec<(String, usize)> = match &seq.part_triangle_counts {
        Some(counts) => counts.iter().enumerate().map(|(j, &n)| (format!("part_{j}"), n)).collect(),
        None => Vec::new(),
    };
    for (i, frame) in seq.frames.iter().enumerate() {
        let path = frame_path(dir, i);
        std::fs::write(&path, write_obj_groups(frame, &groups)).with_context(|| format!("writing {}", path.display()))?;
    }
    manifest.write(&dir.join(MANIFEST))?;
    Ok(())
}

/// Load a sequence directory. Part boundaries come from the `g` records of the
/// first frame when they agree with the manifest's part count.
pub fn read_sequence_dir(dir: &Path) -> Result<(SequenceManifest, ExplodedSequence)> {
    let mpath = dir.join(MANIFEST);
    if !mpath.is_file() {
        bail!("{} has no {MANIFEST}", dir.display());
    }
    let manifest = SequenceManifest::read(&mpath).with_context(|| format!("malformed manifest {}", mpath.display()))?;
    let missing: Vec<String> = (0..manifest.times.len())
        .map(|i| frame_path(dir, i))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        bail!("missing frames: {}", missing.join(", "));
    }
    let mut frames = Vec::with_capacity(manifest.times.len());
    let mut counts = None;
    for i in 0..manifest.times.len() {
        let load = load_mesh(frame_path(dir, i))?;
        if i == 0 {
            let groups = load.group_triangles();
            let mut contiguous = groups.iter().scan(0usize, |next, (_, tris)| {
                let ok = tris.iter().enumerate().all(|(k, &t)| t == *next + k);
                *next += tris.len();
                Some(ok)
            });
            if groups.len() == manifest.part_count && contiguous.all(|ok| ok) {
                counts = Some(groups.iter().map(|(_, t)| t.len()).collect::<Vec<_>>());
            }
        }
        frames.push(load.mesh);
    }
    let seq = ExplodedSequence {
        times: manifest.times.clone(),
        frames,
        translations: Some(manifest.translations.iter().map(|t| Vec3::from(*t)).collect()),
        part_count: manifest.part_count,
        part_triangle_counts: counts,
    };
    seq.validate().with_context(|| format!("invalid sequence in {}", dir.display()))?;
    Ok((manifest, seq))
}

/// `trajectory.json`: one straight-line translation per exploded part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub v: Vec<[f64; 3]>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub mask_overlaps: bool,
    pub part_objectives: Vec<f64>,
}

impl From<&TrajectorySolution> for TrajectoryFile {
    fn from(s: &TrajectorySolution) -> Self {
        TrajectoryFile {
            v: s.translations.clone(),
            objective: s.objective,
            converged: s.converged,
            iterations: s.iterations,
            mask_overlaps: s.mask_overlaps,
            part_objectives: s.part_objectives.clone(),
        }
    }
}

impl From<&TrajectoryFile> for TrajectorySolution {
    fn from(f: &TrajectoryFile) -> Self {
        TrajectorySolution {
            translations: f.v.clone(),
            objective: f.objective,
            part_objectives: f.part_objectives.clone(),
            iterations: f.iterations,
            converged: f.converged,
            mask_overlaps: f.mask_overlaps,
            masked_fraction_history: Vec::new(),
        }
    }
}
