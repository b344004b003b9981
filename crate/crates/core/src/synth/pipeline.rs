use serde::{Deserialize, Serialize};

use super::explosion::{optimize_explosion, ExplosionConfig, ExplosionResult};
use super::filter::{filter_parts, FilterDecision, FilterRules};
use super::manifest::{ManifestFlags, SequenceManifest};
use super::sequence::{interpolate_sequence, normalize_sequence, reject_sequence, ExplodedSequence, RejectDecision};
use crate::error::{Error, Result};
use crate::geom::arr3;
use crate::mesh::{connected_components, default_weld_eps, PartSet, TriangleMesh};

pub const DEFAULT_TIMES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub filter: FilterRules,
    pub explosion: ExplosionConfig,
    pub times: Vec<f64>,
    /// Smallest allowed box gap at `t = 1`, in normalized units.
    pub min_gap: f64,
    pub max_expansion: f64,
    /// Vertex weld tolerance for part splitting; relative default when unset.
    pub weld_eps: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            filter: FilterRules::default(),
            explosion: ExplosionConfig::default(),
            times: DEFAULT_TIMES.to_vec(),
            min_gap: 0.01,
            max_expansion: 4.0,
            weld_eps: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.explosion.validate()?;
        if !(self.min_gap >= 0.0) || !(self.max_expansion >= 1.0) {
            return Err(Error::InvalidArgument("min_gap must be >= 0 and max_expansion >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutcome {
    pub asset_id: String,
    pub filter: Option<FilterDecision>,
    pub explosion: Option<ExplosionResult>,
    /// Normalized sequence.
    pub sequence: Option<ExplodedSequence>,
    pub rejection: Option<RejectDecision>,
    pub manifest: Option<SequenceManifest>,
}

impl SynthOutcome {
    /// Produced a sequence that passed every check.
    pub fn accepted(&self) -> bool {
        self.manifest.as_ref().is_some_and(|m| !m.flags.rejected)
    }
}

/// Split, filter and explode one asset.
pub fn synthesize_asset(asset_id: &str, mesh: &TriangleMesh, cfg: &SynthConfig) -> Result<SynthOutcome> {
    cfg.validate()?;
    let eps = cfg.weld_eps.unwrap_or_else(|| default_weld_eps(mesh));
    let parts = connected_components(mesh, eps)?;
    let decision = filter_parts(&parts, &cfg.filter);
    if !decision.accepted {
        log::info!("{asset_id}: filtered out: {}", decision.reasons.join("; "));
        return Ok(SynthOutcome {
            asset_id: asset_id.to_string(),
            filter: Some(decision),
            explosion: None,
            sequence: None,
            rejection: None,
            manifest: None,
        });
    }
    let mut out = synthesize_parts(asset_id, &parts, cfg)?;
    out.filter = Some(decision);
    Ok(out)
}

/// Explode an already split assembly; the asset filter is not applied.
pub fn synthesize_parts(asset_id: &str, parts: &PartSet, cfg: &SynthConfig) -> Result<SynthOutcome> {
    cfg.validate()?;
    let explosion = optimize_explosion(parts, &cfg.explosion)?;
    let raw = interpolate_sequence(parts, &explosion.translations, &cfg.times)?;
    let (sequence, transform) = normalize_sequence(&raw)?;
    let rejection = reject_sequence(&sequence, cfg.min_gap, cfg.max_expansion)?;
    let mut reasons = Vec::new();
    if !explosion.converged {
        reasons.push(format!("explosion unconverged after {} iterations", explosion.iterations));
    }
    reasons.extend(rejection.reasons.iter().cloned());
    let translations = sequence
        .translations
        .as_ref()
        .expect("interpolated sequences carry translations")
        .iter()
        .map(arr3)
        .collect();
    let manifest = SequenceManifest {
        asset_id: asset_id.to_string(),
        times: sequence.times.clone(),
        translations,
        transform: transform.into(),
        flags: ManifestFlags { converged: explosion.converged, rejected: !reasons.is_empty(), reasons },
        expansion_ratio: rejection.expansion_ratio,
        part_count: parts.len(),
    };
    Ok(SynthOutcome {
        asset_id: asset_id.to_string(),
        filter: None,
        explosion: Some(explosion),
        sequence: Some(sequence),
        rejection: Some(rejection),
        manifest: Some(manifest),
    })
}
