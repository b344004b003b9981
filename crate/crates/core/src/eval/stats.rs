use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::PartSet;
use crate::synth::SequenceManifest;

/// Floor for zero or tiny overlap volumes before taking the log.
pub const OVERLAP_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub bins: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig { bins: 30 }
    }
}

/// Uniform bins over `[lo, hi]`; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            lo = 0.0;
            hi = 1.0;
        } else if hi <= lo {
            lo -= 0.5;
            hi += 0.5;
        }
        let mut counts = vec![0; bins];
        for &v in values {
            let idx = (((v - lo) / (hi - lo)) * bins as f64).floor();
            counts[(idx.max(0.0) as usize).min(bins - 1)] += 1;
        }
        Histogram { lo, hi, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        let n = self.counts.len();
        (0..=n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / n as f64).collect()
    }

    /// `lo,hi,count` rows with a header.
    pub fn to_csv(&self) -> String {
        let edges = self.bin_edges();
        let mut s = String::from("lo,hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", edges[i], edges[i + 1], c));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub asset_count: usize,
    pub part_count: Histogram,
    pub expansion_ratio: Histogram,
    /// log10 of smallest over largest part hull volume.
    pub log_volume_ratio: Histogram,
    /// log10 of the summed pairwise box overlap at `t = 0`, in normalized units.
    pub log_initial_overlap: Histogram,
}

/// `parts[i]` is the assembled part set behind `manifests[i]`, in source units.
pub fn dataset_stats(manifests: &[SequenceManifest], parts: &[PartSet], cfg: &StatsConfig) -> Result<DatasetStats> {
    if manifests.is_empty() {
        return Err(Error::InvalidArgument("dataset_stats needs at least one asset".into()));
    }
    if manifests.len() != parts.len() {
        return Err(Error::LengthMismatch { what: "manifests vs part sets", left: manifests.len(), right: parts.len() });
    }
    let mut counts = Vec::new();
    let mut ratios = Vec::new();
    let mut volumes = Vec::new();
    let mut overlaps = Vec::new();
    for (m, set) in manifests.iter().zip(parts) {
        counts.push(m.part_count as f64);
        ratios.push(m.expansion_ratio);
        let vmin = set.parts.iter().map(|p| p.volume).fold(f64::INFINITY, f64::min);
        let vmax = set.parts.iter().map(|p| p.volume).fold(0.0, f64::max);
        volumes.push(if vmax > 0.0 && vmin > 0.0 { (vmin / vmax).log10() } else { OVERLAP_FLOOR.log10() });
        let mut overlap = 0.0;
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                overlap += set.parts[i].aabb.intersection_volume(&set.parts[j].aabb);
            }
        }
        let normalized = overlap * m.transform.scale.powi(3);
        overlaps.push(normalized.max(OVERLAP_FLOOR).log10());
    }
    Ok(DatasetStats {
        asset_count: manifests.len(),
        part_count: Histogram::from_values(&counts, cfg.bins),
        expansion_ratio: Histogram::from_values(&ratios, cfg.bins),
        log_volume_ratio: Histogram::from_values(&volumes, cfg.bins),
        log_initial_overlap: Histogram::from_values(&overlaps, cfg.bins),
    })
}
