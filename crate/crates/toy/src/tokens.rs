use bangkit_core::mesh::PointCloud;
use bangkit_core::Aabb;
use ndarray::{s, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ToyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    Latent,
    GeometryCond,
    Prompt,
}

/// Dense `(batch, tokens, channels)` block.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenBatch {
    pub data: Array3<f64>,
    pub frame_ids: Option<Vec<usize>>,
    pub kind: TokenKind,
}

impl TokenBatch {
    pub fn from_matrix(m: Array2<f64>, kind: TokenKind) -> Self {
        TokenBatch { data: m.insert_axis(Axis(0)), frame_ids: None, kind }
    }

    pub fn tokens(&self) -> usize {
        self.data.dim().1
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    /// The first batch entry as a `tokens x channels` matrix.
    pub fn matrix(&self) -> Array2<f64> {
        self.data.index_axis(Axis(0), 0).to_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn bitwise_eq(&self, other: &TokenBatch) -> bool {
        self.data.dim() == other.data.dim()
            && self.data.iter().zip(other.data.iter()).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Stack frames along the token axis, tagging each token with its frame.
pub fn merge_frames(frames: &[TokenBatch]) -> Result<TokenBatch> {
    let first = frames.first().ok_or_else(|| ToyError::ShapeMismatch("no frames".into()))?;
    let (l, c) = (first.tokens(), first.channels());
    if frames.iter().any(|f| f.tokens() != l || f.channels() != c) {
        return Err(ToyError::ShapeMismatch("frames differ in token or channel count".into()));
    }
    let views: Vec<_> = frames.iter().map(|f| f.data.view()).collect();
    let data = ndarray::concatenate(Axis(1), &views).expect("checked shapes");
    let frame_ids = (0..frames.len()).flat_map(|f| std::iter::repeat_n(f, l)).collect();
    Ok(TokenBatch { data, frame_ids: Some(frame_ids), kind: first.kind })
}

/// Inverse of [`merge_frames`].
pub fn split_frames(merged: &TokenBatch) -> Result<Vec<TokenBatch>> {
    let ids = merged
        .frame_ids
        .as_ref()
        .ok_or_else(|| ToyError::ShapeMismatch("merged batch has no frame ids".into()))?;
    let mut out = Vec::new();
    let mut start = 0;
    while start < ids.len() {
        let f = ids[start];
        let mut end = start;
        while end < ids.len() && ids[end] == f {
            end += 1;
        }
        if f != out.len() {
            return Err(ToyError::ShapeMismatch("frame ids are not contiguous".into()));
        }
        out.push(TokenBatch {
            data: merged.data.slice(s![.., start..end, ..]).to_owned(),
            frame_ids: None,
            kind: merged.kind,
        });
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub bboxes: Vec<Aabb>,
    pub region_clouds: Vec<PointCloud>,
    pub covers_all_parts: bool,
}

impl PromptSet {
    pub fn prompt_count(&self) -> usize {
        self.bboxes.len() + self.region_clouds.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn merge_split_round_trip() {
        let frames: Vec<TokenBatch> = (0..3)
            .map(|f| TokenBatch {
                data: Array3::from_shape_fn((1, 4, 2), |(_, t, c)| (f * 100 + t * 10 + c) as f64),
                frame_ids: None,
                kind: TokenKind::Latent,
            })
            .collect();
        let merged = merge_frames(&frames).unwrap();
        assert_eq!(merged.tokens(), 12);
        assert_eq!(merged.frame_ids.as_ref().unwrap()[4..8], [1, 1, 1, 1]);
        assert_eq!(split_frames(&merged).unwrap(), frames);
    }
}
