use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{evaluate_tracking, EvalConfig};
use crate::error::{Error, Result};
use crate::mesh::{build_sdf, PartSet};
use crate::synth::{interpolate_sequence, normalize_sequence, optimize_explosion, uniform_times, ExplosionConfig};
use crate::track::{extract_exploded_parts, track_extracted, TrackConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub explosion: ExplosionConfig,
    pub track: TrackConfig,
    pub eval: EvalConfig,
    pub sdf_res: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            explosion: ExplosionConfig::default(),
            track: TrackConfig::default(),
            eval: EvalConfig::default(),
            sdf_res: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStudyRow {
    pub frames: usize,
    pub mean_wiou: f64,
    pub mean_sdf_objective: f64,
    /// Field construction plus tracking, averaged over assets.
    pub mean_seconds: f64,
}

/// Track every assembly with uniformly spaced frames, once per frame count.
pub fn frame_count_study(assets: &[PartSet], frame_counts: &[usize], cfg: &StudyConfig) -> Result<Vec<FrameStudyRow>> {
    if let Some(&bad) = frame_counts.iter().find(|&&f| f < 2) {
        return Err(Error::InvalidArgument(format!("frame counts must be >= 2, got {bad}")));
    }
    if assets.is_empty() {
        return Err(Error::InvalidArgument("frame study needs at least one asset".into()));
    }
    let explosions = assets
        .iter()
        .map(|a| optimize_explosion(a, &cfg.explosion))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(frame_counts.len());
    for &frames in frame_counts {
        let times = uniform_times(frames)?;
        let (mut wiou, mut sdf, mut secs) = (0.0, 0.0, 0.0);
        for (asset, ex) in assets.iter().zip(&explosions) {
            let raw = interpolate_sequence(asset, &ex.translations, &times)?;
            let (seq, _) = normalize_sequence(&raw)?;
            let start = Instant::now();
            let grids = seq
                .frames
                .iter()
                .map(|f| build_sdf(f, cfg.sdf_res))
                .collect::<Result<Vec<_>>>()?;
            let parts = extract_exploded_parts(&seq)?.parts;
            let sol = track_extracted(&seq, &parts, &grids, &cfg.track)?;
            secs += start.elapsed().as_secs_f64();
            let report = evaluate_tracking(&seq, &parts, &sol, &cfg.eval)?;
            wiou += report.wiou;
            sdf += report.sdf_objective;
        }
        let n = assets.len() as f64;
        log::info!("frames {frames}: wIoU {:.4}, sdf {:.5}, {:.2}s", wiou / n, sdf / n, secs / n);
        rows.push(FrameStudyRow { frames, mean_wiou: wiou / n, mean_sdf_objective: sdf / n, mean_seconds: secs / n });
    }
    Ok(rows)
}
