use serde::{Deserialize, Serialize};

use super::sequence::NormalizeTransform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub center: [f64; 3],
    pub scale: f64,
}

impl From<NormalizeTransform> for TransformRecord {
    fn from(t: NormalizeTransform) -> Self {
        TransformRecord { center: t.center, scale: t.scale }
    }
}

impl From<TransformRecord> for NormalizeTransform {
    fn from(t: TransformRecord) -> Self {
        NormalizeTransform { center: t.center, scale: t.scale }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ManifestFlags {
    pub converged: bool,
    pub rejected: bool,
    pub reasons: Vec<String>,
}

/// Everything needed to rebuild a stored exploded sequence from its parts.
///
/// Translations are in normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub asset_id: String,
    pub times: Vec<f64>,
    pub translations: Vec<[f64; 3]>,
    pub transform: TransformRecord,
    pub flags: ManifestFlags,
    pub expansion_ratio: f64,
    pub part_count: usize,
}

impl SequenceManifest {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: SequenceManifest = serde_json::from_str(text)?;
        if m.translations.len() != m.part_count {
            return Err(Error::LengthMismatch {
                what: "manifest translations vs part_count",
                left: m.translations.len(),
                right: m.part_count,
            });
        }
        Ok(m)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(values: [f64; 4]) -> SequenceManifest {
        SequenceManifest {
            asset_id: "chair_017".into(),
            times: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            translations: vec![[values[0], values[1], -values[2]], [0.1, 1.0 / 3.0, values[3]]],
            transform: TransformRecord { center: [values[3], 0.0, -1e-17], scale: 0.7 },
            flags: ManifestFlags { converged: true, rejected: false, reasons: vec![] },
            expansion_ratio: 1.0 + values[0].abs(),
            part_count: 2,
        }
    }

    #[test]
    fn field_names() {
        let json = sample([0.5, 0.25, 0.125, 2.0]).to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["asset_id", "times", "translations", "transform", "flags", "expansion_ratio", "part_count"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["transform"].get("center").is_some() && v["transform"].get("scale").is_some());
        assert!(v["flags"].get("reasons").is_some());
    }

    #[test]
    fn mismatched_translations_rejected() {
        let mut m = sample([0.0; 4]);
        m.part_count = 3;
        let json = m.to_json().unwrap();
        assert!(SequenceManifest::from_json(&json).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip_is_lossless(a in any::<f64>(), b in -1e300f64..1e300, c in -1e-300f64..1e-300, d in -10.0f64..10.0) {
            prop_assume!(a.is_finite());
            let m = sample([a, b, c, d]);
            let text = m.to_json().unwrap();
            let back = SequenceManifest::from_json(&text).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(back.to_json().unwrap(), text);
        }
    }
}
