//! Evaluation metrics: box wIoU, SDF objective, dataset statistics and the
//! frame-count study.

mod stats;
mod study;

pub use stats::{dataset_stats, DatasetStats, Histogram, StatsConfig, OVERLAP_FLOOR};
pub use study::{frame_count_study, FrameStudyRow, StudyConfig};

use serde::{Deserialize, Serialize};

use crate::assign::min_cost_assignment;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::mesh::{build_sdf, sample_surface_uniform, PartSet, SdfGrid, TriangleMesh};
use crate::synth::ExplodedSequence;
use crate::track::{reassemble_parts, TrajectorySolution};

pub use crate::synth::expansion_ratio;

/// Volume-weighted IoU of index-matched boxes: `sum V_i IoU_i / sum V_i`.
pub fn weighted_iou(pred: &[(Aabb, f64)], gt: &[Aabb]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch { what: "predicted vs ground-truth boxes", left: pred.len(), right: gt.len() });
    }
    let total: f64 = pred.iter().map(|(_, v)| *v).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroVolume);
    }
    let num: f64 = pred.iter().zip(gt).map(|((b, v), g)| v * b.iou(g)).sum();
    Ok((num / total).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartMatch {
    pub predicted: usize,
    /// `None` when there were fewer ground-truth parts than predictions.
    pub ground_truth: Option<usize>,
    pub iou: f64,
    pub volume: f64,
}

/// Hungarian matching maximizing total IoU, then [`weighted_iou`]. Unmatched
/// predictions score zero but keep their weight.
pub fn matched_weighted_iou(pred: &[(Aabb, f64)], gt: &[Aabb]) -> Result<(f64, Vec<PartMatch>)> {
    let total: f64 = pred.iter().map(|(_, v)| *v).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroVolume);
    }
    let mut table: Vec<PartMatch> = pred
        .iter()
        .enumerate()
        .map(|(i, (_, v))| PartMatch { predicted: i, ground_truth: None, iou: 0.0, volume: *v })
        .collect();
    if !gt.is_empty() {
        let iou: Vec<Vec<f64>> = pred.iter().map(|(b, _)| gt.iter().map(|g| b.iou(g)).collect()).collect();
        if pred.len() <= gt.len() {
            let cost: Vec<Vec<f64>> = iou.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
            for (i, j) in min_cost_assignment(&cost).into_iter().enumerate() {
                table[i].ground_truth = Some(j);
                table[i].iou = iou[i][j];
            }
        } else {
            let cost: Vec<Vec<f64>> = (0..gt.len()).map(|j| (0..pred.len()).map(|i| -iou[i][j]).collect()).collect();
            for (j, i) in min_cost_assignment(&cost).into_iter().enumerate() {
                table[i].ground_truth = Some(j);
                table[i].iou = iou[i][j];
            }
        }
    }
    let num: f64 = table.iter().map(|m| m.volume * m.iou).sum();
    Ok(((num / total).clamp(0.0, 1.0), table))
}

/// Mean absolute field value over the points.
pub fn sdf_objective(grid: &SdfGrid, points: &[Vec3]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("sdf_objective needs at least one point".into()));
    }
    Ok(points.iter().map(|p| grid.value(p).abs()).sum::<f64>() / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Resolution of each ground-truth part's own field.
    pub part_grid_res: usize,
    pub samples_per_part: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { part_grid_res: 64, samples_per_part: 2048, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub wiou: f64,
    pub sdf_objective: f64,
    pub parts: Vec<PartMatch>,
    pub frame_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

/// Score a trajectory solution against a ground-truth sequence at `t = 0`.
///
/// `parts` are the exploded parts the solution was fitted to. The predicted
/// assembled parts are matched to ground-truth parts by box IoU; each
/// predicted part's samples are scored against its matched part's own field.
pub fn evaluate_tracking(
    truth: &ExplodedSequence,
    parts: &PartSet,
    sol: &TrajectorySolution,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let predicted = reassemble_parts(parts, sol, 0.0)?;
    let gt_meshes = truth.frame_parts(0)?;
    let gt_boxes: Vec<Aabb> = gt_meshes.iter().map(|m| m.aabb()).collect();
    let pred_boxes: Vec<(Aabb, f64)> = predicted.parts.iter().map(|p| (p.aabb, p.volume)).collect();
    let (wiou, table) = matched_weighted_iou(&pred_boxes, &gt_boxes)?;

    let mut union_grid: Option<SdfGrid> = None;
    let mut total = 0.0;
    let mut count = 0usize;
    for m in &table {
        let mesh: &TriangleMesh = &predicted.parts[m.predicted].mesh;
        let cloud = sample_surface_uniform(mesh, cfg.samples_per_part, cfg.seed.wrapping_add(m.predicted as u64))?;
        let grid = match m.ground_truth {
            Some(j) => build_sdf(&gt_meshes[j], cfg.part_grid_res)?,
            None => match &union_grid {
                Some(g) => g.clone(),
                None => {
                    let g = build_sdf(&truth.frames[0], cfg.part_grid_res)?;
                    union_grid = Some(g.clone());
                    g
                }
            },
        };
        total += sdf_objective(&grid, &cloud.points)? * cloud.len() as f64;
        count += cloud.len();
    }
    Ok(EvalReport {
        wiou,
        sdf_objective: total / count.max(1) as f64,
        parts: table,
        frame_count: truth.frames.len(),
        seconds: None,
    })
}
