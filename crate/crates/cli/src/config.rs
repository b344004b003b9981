use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bangkit_core::eval::StatsConfig;
use bangkit_core::eval::EvalConfig;
use bangkit_core::synth::{ExplosionConfig, FilterRules, SynthConfig};
use bangkit_core::track::TrackConfig;
use bangkit_toy::ToyDims;
use serde::{Deserialize, Serialize};

/// Sequence construction settings that are not part of the filter or the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceSettings {
    pub times: Vec<f64>,
    pub min_gap: f64,
    pub max_expansion: f64,
    pub weld_eps: Option<f64>,
}

impl Default for SequenceSettings {
    fn default() -> Self {
        let s = SynthConfig::default();
        SequenceSettings { times: s.times, min_gap: s.min_gap, max_expansion: s.max_expansion, weld_eps: s.weld_eps }
    }
}

/// Everything one run needs, loadable from a single TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub sdf_res: usize,
    pub threads: usize,
    pub filter: FilterRules,
    pub explosion: ExplosionConfig,
    pub sequence: SequenceSettings,
    pub track: TrackConfig,
    pub eval: EvalConfig,
    pub stats: StatsConfig,
    pub toy: ToyDims,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out: PathBuf::from("out"),
            sdf_res: 128,
            threads: 1,
            filter: FilterRules::default(),
            explosion: ExplosionConfig::default(),
            sequence: SequenceSettings::default(),
            track: TrackConfig::default(),
            eval: EvalConfig::default(),
            stats: StatsConfig::default(),
            toy: ToyDims::default(),
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub sdf_res: Option<usize>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Config file (if any) with flag overrides applied, validated.
    pub fn resolve(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = o.seed {
            cfg.seed = s;
        }
        if let Some(out) = &o.out {
            cfg.out = out.clone();
        }
        if let Some(t) = o.threads {
            cfg.threads = t;
        }
        if let Some(r) = o.sdf_res {
            cfg.sdf_res = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            bail!("threads must be >= 1");
        }
        if !(16..=512).contains(&self.sdf_res) {
            bail!("sdf_res must be within [16, 512], got {}", self.sdf_res);
        }
        self.synth_config().validate()?;
        self.track.validate()?;
        self.toy.validate()?;
        if self.stats.bins == 0 {
            bail!("stats.bins must be >= 1");
        }
        Ok(())
    }

    /// Module seeds are offsets from the global seed.
    pub fn synth_config(&self) -> SynthConfig {
        let mut explosion = self.explosion.clone();
        explosion.seed = explosion.seed.wrapping_add(self.seed);
        SynthConfig {
            filter: self.filter.clone(),
            explosion,
            times: self.sequence.times.clone(),
            min_gap: self.sequence.min_gap,
            max_expansion: self.sequence.max_expansion,
            weld_eps: self.sequence.weld_eps,
        }
    }

    pub fn track_config(&self) -> TrackConfig {
        TrackConfig { seed: self.track.seed.wrapping_add(self.seed), ..self.track.clone() }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig { seed: self.eval.seed.wrapping_add(self.seed), ..self.eval.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
        assert!(PipelineConfig::from_toml("[track]\nbogus = 1").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 4\nsdf_res = 64\n[track]\nmask_overlaps = false\n").unwrap();
        let cfg = PipelineConfig::resolve(Some(&path), &Overrides::default()).unwrap();
        assert_eq!((cfg.seed, cfg.sdf_res, cfg.track.mask_overlaps), (4, 64, false));
        let o = Overrides { seed: Some(9), sdf_res: Some(32), ..Overrides::default() };
        let cfg = PipelineConfig::resolve(Some(&path), &o).unwrap();
        assert_eq!((cfg.seed, cfg.sdf_res), (9, 32));
        assert_eq!(cfg.track_config().seed, 9);
        let bad = Overrides { sdf_res: Some(8), ..Overrides::default() };
        assert!(PipelineConfig::resolve(None, &bad).is_err());
    }
}
