use bangkit_core::mesh::PointCloud;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ToyError};
use crate::graph::Var;
use crate::model::ToyModel;
use crate::tokens::{PromptSet, TokenBatch, TokenKind};

pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 2e-2;
/// Downsampling factor for the geometry condition cloud.
pub const GEOMETRY_FACTOR: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub steps: usize,
    pub cfg_scale: f64,
    pub times: Vec<f64>,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { steps: 50, cfg_scale: 7.0, times: vec![0.0, 0.25, 0.5, 0.75, 1.0], seed: 0 }
    }
}

/// Linear beta schedule with cumulative alpha products.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub betas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl Schedule {
    pub fn linear(steps: usize) -> Self {
        let betas: Vec<f64> = (0..steps)
            .map(|i| {
                if steps == 1 {
                    BETA_START
                } else {
                    BETA_START + (BETA_END - BETA_START) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        let mut acc = 1.0;
        let alpha_bars = betas
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect();
        Schedule { betas, alpha_bars }
    }

    /// Posterior mean coefficients for `x0` and `x_t`, and the posterior variance.
    fn posterior(&self, tau: usize) -> (f64, f64, f64) {
        let ab = self.alpha_bars[tau];
        let ab_prev = if tau == 0 { 1.0 } else { self.alpha_bars[tau - 1] };
        let beta = self.betas[tau];
        let c0 = ab_prev.sqrt() * beta / (1.0 - ab);
        let ct = (1.0 - beta).sqrt() * (1.0 - ab_prev) / (1.0 - ab);
        let var = beta * (1.0 - ab_prev) / (1.0 - ab);
        (c0, ct, var)
    }
}

fn check_times(times: &[f64], steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(ToyError::InvalidArgument("steps must be >= 1".into()));
    }
    if times.is_empty() || times.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(ToyError::InvalidArgument("times must be non-empty and within [0, 1]".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ToyError::InvalidArgument("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Conditional DDPM sampling with classifier-free guidance over all frames jointly.
pub fn sample_sequence(
    model: &ToyModel,
    geometry: &PointCloud,
    times: &[f64],
    prompts: Option<&PromptSet>,
    steps: usize,
    cfg_scale: f64,
    seed: u64,
) -> Result<Vec<TokenBatch>> {
    check_times(times, steps)?;
    let mut g = model.encode_geometry(geometry, GEOMETRY_FACTOR, TokenKind::GeometryCond)?;
    let mut parts_count = 1;
    if let Some(p) = prompts {
        let tokens = model.prompt_tokens(p)?;
        g = model.prompt_inject(&g, Some(&tokens))?;
        parts_count = p.prompt_count().max(1);
    }
    let conds = times
        .iter()
        .map(|&t| model.adapter_condition(&g, t, parts_count))
        .collect::<Result<Vec<_>>>()?;
    run(model, times, steps, seed, Some((&conds, cfg_scale)))
}

/// The same loop with only the unconditioned denoiser.
pub fn sample_unconditional(model: &ToyModel, times: &[f64], steps: usize, seed: u64) -> Result<Vec<TokenBatch>> {
    check_times(times, steps)?;
    run(model, times, steps, seed, None)
}

fn predict(model: &ToyModel, z: &[Array2<f64>], tau: usize, times: &[f64], cond: Option<&[TokenBatch]>) -> Vec<Array2<f64>> {
    let mut f = model.fwd();
    let zs: Vec<Var> = z.iter().map(|m| f.g.leaf(m.clone())).collect();
    let cs: Option<Vec<Var>> = cond.map(|c| c.iter().map(|t| f.g.leaf(t.matrix())).collect());
    let out = f.denoise(&zs, tau, cs.as_deref(), Some(times));
    out.into_iter().map(|v| f.g.value(v).clone()).collect()
}

fn run(
    model: &ToyModel,
    times: &[f64],
    steps: usize,
    seed: u64,
    guidance: Option<(&[TokenBatch], f64)>,
) -> Result<Vec<TokenBatch>> {
    let (l, c) = (model.dims.latent_tokens, model.dims.channels);
    let sched = Schedule::linear(steps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = |rng: &mut ChaCha8Rng| Array2::from_shape_fn((l, c), |_| StandardNormal.sample(rng));
    let mut z: Vec<Array2<f64>> = times.iter().map(|_| noise(&mut rng)).collect();
    for tau in (0..steps).rev() {
        let uncond = predict(model, &z, tau, times, None);
        let x0: Vec<Array2<f64>> = match guidance {
            None => uncond,
            Some((conds, s)) => {
                let cond = predict(model, &z, tau, times, Some(conds));
                uncond.iter().zip(&cond).map(|(u, cv)| u + &((cv - u) * s)).collect()
            }
        };
        if tau == 0 {
            z = x0;
        } else {
            let (c0, ct, var) = sched.posterior(tau);
            z = x0
                .iter()
                .zip(&z)
                .map(|(x0, zt)| x0 * c0 + zt * ct + noise(&mut rng) * var.sqrt())
                .collect();
        }
    }
    Ok(z.into_iter().map(|m| TokenBatch::from_matrix(m, TokenKind::Latent)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_bounds() {
        let s = Schedule::linear(50);
        assert_eq!(s.betas[0], BETA_START);
        assert!((s.betas[49] - BETA_END).abs() < 1e-15);
        assert!(s.alpha_bars.windows(2).all(|w| w[1] < w[0]));
        let (c0, ct, var) = s.posterior(10);
        assert!(c0 > 0.0 && ct > 0.0 && var > 0.0 && var < s.betas[10]);
    }

    #[test]
    fn time_validation() {
        assert!(check_times(&[0.0, 0.5, 1.0], 3).is_ok());
        assert!(check_times(&[0.5, 0.2], 3).is_err());
        assert!(check_times(&[0.0], 0).is_err());
        assert!(check_times(&[], 5).is_err());
    }
}
