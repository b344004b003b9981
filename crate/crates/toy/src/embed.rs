use bangkit_core::Vec3;
use ndarray::Array2;

use crate::error::{Result, ToyError};

/// Per-axis sinusoidal embedding: for each axis, `channels / 6` frequencies
/// `2^k * pi`, sines then cosines.
pub fn pos_emb(points: &[Vec3], channels: usize) -> Result<Array2<f64>> {
    if channels == 0 || !channels.is_multiple_of(6) {
        return Err(ToyError::ChannelDivisibility { channels, divisor: 6 });
    }
    let freqs = channels / 6;
    let mut out = Array2::zeros((points.len(), channels));
    for (r, p) in points.iter().enumerate() {
        for axis in 0..3 {
            let base = axis * 2 * freqs;
            for k in 0..freqs {
                let phase = p[axis] * std::f64::consts::PI * (1u64 << k) as f64;
                out[[r, base + k]] = phase.sin();
                out[[r, base + freqs + k]] = phase.cos();
            }
        }
    }
    Ok(out)
}

/// Transformer-style embedding of a scalar into a `1 x width` row.
pub fn scalar_embedding(x: f64, width: usize) -> Array2<f64> {
    let half = width / 2;
    let mut out = Array2::zeros((1, width));
    for k in 0..half {
        let w = (-(10_000f64).ln() * k as f64 / half as f64).exp();
        out[[0, k]] = (x * w).sin();
        out[[0, half + k]] = (x * w).cos();
    }
    out
}

/// Rotation angles per token: `x * w_k` for each column pair.
pub fn rotary_angles(xs: &[f64], width: usize) -> Array2<f64> {
    let half = width / 2;
    Array2::from_shape_fn((xs.len(), half), |(r, k)| {
        xs[r] * (-(10_000f64).ln() * k as f64 / half as f64).exp()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_zero_phase() {
        let e = pos_emb(&[Vec3::zeros()], 12).unwrap();
        for axis in 0..3 {
            for k in 0..2 {
                assert_eq!(e[[0, axis * 4 + k]], 0.0);
                assert_eq!(e[[0, axis * 4 + 2 + k]], 1.0);
            }
        }
        assert!(pos_emb(&[Vec3::zeros()], 16).is_err());
    }

    #[test]
    fn x_shift_touches_x_lanes_only() {
        let a = Vec3::new(0.3, -0.2, 0.7);
        let b = a + Vec3::new(1e-3, 0.0, 0.0);
        let e = pos_emb(&[a, b, a], 24).unwrap();
        assert_eq!(e.row(0), e.row(2));
        for c in 0..24 {
            let changed = e[[0, c]] != e[[1, c]];
            assert_eq!(changed, c < 8, "lane {c}");
        }
    }
}
