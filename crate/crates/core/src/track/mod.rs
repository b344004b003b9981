//! Recover per-part straight-line trajectories from an exploded sequence by
//! fitting each part's surface samples to every frame's signed distance field.

use serde::{Deserialize, Serialize};

use crate::assign::min_cost_assignment;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{connected_components, default_weld_eps, sample_surface_uniform, PartSet, SdfGrid};
use crate::synth::ExplodedSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    pub samples_per_part: usize,
    pub lr_init: f64,
    /// Multiplies the learning rate after every accepted step.
    pub lr_decay: f64,
    pub momentum: f64,
    pub max_iters: usize,
    /// Relative objective change below which a part counts as converged.
    pub convergence_tol: f64,
    pub mask_overlaps: bool,
    pub seed: u64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig {
            samples_per_part: 4096,
            lr_init: 0.01,
            lr_decay: 0.995,
            momentum: 0.9,
            max_iters: 2000,
            convergence_tol: 1e-6,
            mask_overlaps: true,
            seed: 0,
        }
    }
}

impl TrackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_part < 16 {
            return Err(Error::InvalidArgument(format!(
                "samples_per_part must be >= 16, got {}",
                self.samples_per_part
            )));
        }
        if !(self.lr_init > 0.0) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidArgument("learning rate and decay must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(self.convergence_tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidArgument("momentum in [0,1), positive tol and max_iters required".into()));
        }
        Ok(())
    }
}

/// Tracked vectors point from the exploded (`t = 1`) pose towards assembly:
/// a part sits at `exploded + v * (1 - t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySolution {
    pub translations: Vec<[f64; 3]>,
    /// Mean of the per-part objectives at the returned iterate.
    pub objective: f64,
    pub part_objectives: Vec<f64>,
    /// Largest per-part iteration count.
    pub iterations: usize,
    pub converged: bool,
    pub mask_overlaps: bool,
    /// Per part, fraction of masked samples at each accepted iterate.
    pub masked_fraction_history: Vec<Vec<f64>>,
}

impl TrajectorySolution {
    pub fn translation(&self, i: usize) -> Vec3 {
        Vec3::from(self.translations[i])
    }
}

#[derive(Debug, Clone)]
pub struct ExtractedParts {
    pub parts: PartSet,
    /// Set when fewer components than expected were found, or only one.
    pub warning: Option<String>,
}

/// Connected components of the last (fully exploded) frame.
pub fn extract_exploded_parts(seq: &ExplodedSequence) -> Result<ExtractedParts> {
    seq.validate()?;
    let last = seq.frames.last().expect("validated sequence");
    let parts = connected_components(last, default_weld_eps(last))?;
    let warning = if parts.len() == 1 {
        Some("t=1 frame has a single component; nothing to track".to_string())
    } else if parts.len() < seq.part_count {
        Some(format!(
            "t=1 frame has {} components but the sequence has {} parts; touching parts merged",
            parts.len(),
            seq.part_count
        ))
    } else {
        None
    };
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(ExtractedParts { parts, warning })
}

/// Starting vectors from the earliest frame that splits into as many
/// components as there are parts, matched frame to frame from `t = 1` down.
fn initial_translations(seq: &ExplodedSequence, parts: &PartSet) -> Result<Vec<Vec3>> {
    let n = parts.len();
    let c1: Vec<Vec3> = parts.parts.iter().map(|p| p.centroid).collect();
    let e1: Vec<Vec3> = parts.parts.iter().map(|p| p.aabb.extent()).collect();
    let mut v = vec![Vec3::zeros(); n];
    let last = seq.frames.len() - 1;
    for k in (0..last).rev() {
        let frame = &seq.frames[k];
        let comps = connected_components(frame, default_weld_eps(frame))?;
        if comps.len() != n {
            log::debug!("frame {k}: {} components for {n} parts, skipped for init", comps.len());
            continue;
        }
        let lever = 1.0 - seq.times[k];
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let predicted = c1[i] + v[i] * lever;
                comps
                    .parts
                    .iter()
                    .map(|c| (c.centroid - predicted).norm() + (c.aabb.extent() - e1[i]).norm())
                    .collect()
            })
            .collect();
        let assignment = min_cost_assignment(&cost);
        for i in 0..n {
            v[i] = (comps.parts[assignment[i]].centroid - c1[i]) / lever;
        }
    }
    Ok(v)
}

struct PartProblem<'a> {
    points: &'a [Vec3],
    grids: &'a [SdfGrid],
    times: &'a [f64],
    masked: bool,
}

struct Evaluation {
    value: f64,
    grad: Vec3,
    masked_fraction: f64,
    fully_masked_frames: Vec<usize>,
}

impl PartProblem<'_> {
    fn evaluate(&self, v: &Vec3) -> Evaluation {
        let count = (self.points.len() * self.grids.len()) as f64;
        let mut value = 0.0;
        let mut grad = Vec3::zeros();
        let mut masked_total = 0usize;
        let mut fully_masked_frames = Vec::new();
        for (f, (grid, &t)) in self.grids.iter().zip(self.times).enumerate() {
            let lever = 1.0 - t;
            let shift = v * lever;
            let mut masked_here = 0usize;
            for p in self.points {
                let (s, g) = grid.value_and_gradient(&(p + shift));
                if self.masked {
                    if s < 0.0 {
                        masked_here += 1;
                    } else if s > 0.0 {
                        value += s;
                        grad += g * lever;
                    }
                } else {
                    value += s.abs();
                    if s != 0.0 {
                        grad += g * (s.signum() * lever);
                    }
                }
            }
            if masked_here == self.points.len() {
                fully_masked_frames.push(f);
            }
            masked_total += masked_here;
        }
        Evaluation {
            value: value / count,
            grad: grad / count,
            masked_fraction: masked_total as f64 / count,
            fully_masked_frames,
        }
    }
}

struct PartResult {
    v: Vec3,
    objective: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn optimize_part(problem: &PartProblem, start: Vec3, cfg: &TrackConfig, label: usize) -> PartResult {
    let mut v = start;
    let mut cur = problem.evaluate(&v);
    let mut history = vec![cur.masked_fraction];
    let mut velocity = Vec3::zeros();
    let mut lr = cfg.lr_init;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=cfg.max_iters {
        iterations = iter;
        if cur.value <= 1e-15 || cur.grad.norm() == 0.0 {
            converged = true;
            break;
        }
        let step = velocity * cfg.momentum - cur.grad * lr;
        let cand = v + step;
        let next = problem.evaluate(&cand);
        if next.value <= cur.value {
            let change = (cur.value - next.value) / cur.value.max(1e-300);
            v = cand;
            velocity = step;
            cur = next;
            history.push(cur.masked_fraction);
            lr *= cfg.lr_decay;
            if change < cfg.convergence_tol && step.norm() < 1e-7 {
                converged = true;
                break;
            }
        } else {
            velocity = Vec3::zeros();
            lr *= 0.5;
        }
        if lr < cfg.lr_init * 1e-9 {
            // no descent left at any useful step size
            converged = true;
            break;
        }
    }
    if !cur.fully_masked_frames.is_empty() {
        log::warn!(
            "part {label}: every sample masked in frame(s) {:?}; those frames contribute nothing",
            cur.fully_masked_frames
        );
    }
    PartResult { v, objective: cur.value, iterations, converged, history }
}

/// Fit one straight-line trajectory per part of the exploded frame.
///
/// `grids[k]` must be the field of `seq.frames[k]`.
pub fn track_parts(seq: &ExplodedSequence, grids: &[SdfGrid], cfg: &TrackConfig) -> Result<TrajectorySolution> {
    cfg.validate()?;
    seq.validate()?;
    if grids.len() != seq.frames.len() {
        return Err(Error::LengthMismatch { what: "grids vs frames", left: grids.len(), right: seq.frames.len() });
    }
    let extracted = extract_exploded_parts(seq)?;
    track_extracted(seq, &extracted.parts, grids, cfg)
}

/// [`track_parts`] with the exploded parts already extracted.
pub fn track_extracted(
    seq: &ExplodedSequence,
    parts: &PartSet,
    grids: &[SdfGrid],
    cfg: &TrackConfig,
) -> Result<TrajectorySolution> {
    let init = initial_translations(seq, parts)?;
    let mut out = TrajectorySolution {
        translations: Vec::with_capacity(parts.len()),
        objective: 0.0,
        part_objectives: Vec::with_capacity(parts.len()),
        iterations: 0,
        converged: true,
        mask_overlaps: cfg.mask_overlaps,
        masked_fraction_history: Vec::with_capacity(parts.len()),
    };
    for (i, part) in parts.parts.iter().enumerate() {
        let cloud = sample_surface_uniform(&part.mesh, cfg.samples_per_part, cfg.seed.wrapping_add(i as u64))?;
        let problem = PartProblem { points: &cloud.points, grids, times: &seq.times, masked: cfg.mask_overlaps };
        let r = optimize_part(&problem, init[i], cfg, i);
        out.translations.push([r.v.x, r.v.y, r.v.z]);
        out.part_objectives.push(r.objective);
        out.iterations = out.iterations.max(r.iterations);
        out.converged &= r.converged;
        out.masked_fraction_history.push(r.history);
    }
    out.objective = out.part_objectives.iter().sum::<f64>() / parts.len().max(1) as f64;
    Ok(out)
}

/// Parts of the exploded frame moved to time `t` along the solution.
pub fn reassemble(seq: &ExplodedSequence, sol: &TrajectorySolution, t: f64) -> Result<PartSet> {
    let extracted = extract_exploded_parts(seq)?;
    reassemble_parts(&extracted.parts, sol, t)
}

pub fn reassemble_parts(parts: &PartSet, sol: &TrajectorySolution, t: f64) -> Result<PartSet> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t must be in [0, 1], got {t}")));
    }
    let lever = 1.0 - t;
    let offsets: Vec<Vec3> = (0..sol.translations.len()).map(|i| sol.translation(i) * lever).collect();
    parts.translated(&offsets)
}
