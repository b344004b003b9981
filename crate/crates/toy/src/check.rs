//! Invariant and gradient suite run by `toycheck`.

use std::time::Instant;

use bangkit_core::mesh::PointCloud;
use bangkit_core::{Aabb, Vec3};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ToyError};
use crate::graph::{relative_error, Graph, Var};
use crate::model::{Fwd, TimeMode, ToyDims, ToyModel};
use crate::sampler::{sample_sequence, sample_unconditional};
use crate::tokens::{merge_frames, split_frames, PromptSet, TokenBatch, TokenKind};

pub const FD_STEP: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-4;
pub const REDUCTION_TOL: f64 = 1e-6;
const MAX_INPUT_ENTRIES: usize = 64;
const MAX_PARAM_ENTRIES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyCheckConfig {
    pub dims: ToyDims,
    pub seed: u64,
    pub steps: usize,
    pub cfg_scale: f64,
    pub times: Vec<f64>,
}

impl Default for ToyCheckConfig {
    fn default() -> Self {
        ToyCheckConfig {
            dims: ToyDims::default(),
            seed: 0,
            steps: 50,
            cfg_scale: 7.0,
            times: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured error, mismatch count or difference, depending on the check.
    pub measured: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyCheckReport {
    pub dims: ToyDims,
    pub seed: u64,
    pub steps: usize,
    pub cfg_scale: f64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub seconds: f64,
}

impl ToyCheckReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Suite(Vec<CheckResult>);

impl Suite {
    fn at_most(&mut self, name: &str, measured: f64, tolerance: f64) {
        let passed = measured.is_finite() && measured <= tolerance;
        self.0.push(CheckResult { name: name.to_string(), passed, measured, tolerance });
    }

    /// Passes when `measured` is strictly positive.
    fn positive(&mut self, name: &str, measured: f64) {
        let passed = measured.is_finite() && measured > 0.0;
        self.0.push(CheckResult { name: name.to_string(), passed, measured, tolerance: 0.0 });
    }

    fn flag(&mut self, name: &str, ok: bool) {
        self.0.push(CheckResult { name: name.to_string(), passed: ok, measured: if ok { 0.0 } else { 1.0 }, tolerance: 0.0 });
    }
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut rng))
}

pub fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
        .collect();
    PointCloud { points, seed }
}

fn tokens(m: Array2<f64>, kind: TokenKind) -> TokenBatch {
    TokenBatch::from_matrix(m, kind)
}

fn max_abs_diff(a: &TokenBatch, b: &TokenBatch) -> f64 {
    if a.data.dim() != b.data.dim() {
        return f64::INFINITY;
    }
    a.data.iter().zip(b.data.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn bit_mismatches(a: &[TokenBatch], b: &[TokenBatch]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if x.data.dim() != y.data.dim() {
                return f64::INFINITY;
            }
            x.data.iter().zip(y.data.iter()).filter(|(p, q)| p.to_bits() != q.to_bits()).count() as f64
        })
        .sum()
}

type Build<'a> = dyn Fn(&mut Fwd, &[Var]) -> Result<Var> + 'a;

/// `mean(y * w)` with a fixed random `w`, so every output entry contributes.
fn objective(f: &mut Fwd, y: Var) -> Var {
    let (r, c) = f.g.value(y).dim();
    let w = f.g.leaf(random_matrix(r, c, 0xfeed + (r * 131 + c) as u64));
    let p = f.g.mul(y, w);
    f.g.mean(p)
}

fn eval_objective(model: &ToyModel, inputs: &[Array2<f64>], build: &Build) -> Result<f64> {
    let mut f = model.fwd();
    let vars: Vec<Var> = inputs.iter().map(|m| f.g.leaf(m.clone())).collect();
    let y = build(&mut f, &vars)?;
    let o = objective(&mut f, y);
    Ok(f.g.value(o)[[0, 0]])
}

fn sample_indices(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        (0..len).collect()
    } else {
        (0..max).map(|i| i * len / max).collect()
    }
}

fn as_row(v: Vec<f64>) -> Array2<f64> {
    let n = v.len();
    Array2::from_shape_vec((1, n), v).expect("row shape")
}

/// Relative error between tape and central-difference gradients with respect to inputs.
pub fn input_gradient_error(model: &ToyModel, inputs: &[Array2<f64>], build: &Build) -> Result<f64> {
    let mut f = model.fwd();
    let vars: Vec<Var> = inputs.iter().map(|m| f.g.leaf(m.clone())).collect();
    let y = build(&mut f, &vars)?;
    let o = objective(&mut f, y);
    let grads = f.g.backward(o);
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for (i, input) in inputs.iter().enumerate() {
        let g = grads
            .get(vars[i])
            .map(|g| g.as_standard_layout().to_owned())
            .unwrap_or_else(|| Array2::zeros(input.dim()));
        for idx in sample_indices(input.len(), MAX_INPUT_ENTRIES) {
            let mut vals = inputs.to_vec();
            let flat = vals[i].as_slice_mut().expect("standard layout");
            flat[idx] += FD_STEP;
            let plus = eval_objective(model, &vals, build)?;
            vals[i].as_slice_mut().expect("standard layout")[idx] -= 2.0 * FD_STEP;
            let minus = eval_objective(model, &vals, build)?;
            numeric.push((plus - minus) / (2.0 * FD_STEP));
            analytic.push(g.as_slice().expect("standard layout")[idx]);
        }
    }
    Ok(relative_error(&as_row(analytic), &as_row(numeric)))
}

/// Same against every parameter whose name starts with `prefix`. Returns the
/// error and how many parameter tensors were exercised.
pub fn param_gradient_error(model: &ToyModel, prefix: &str, inputs: &[Array2<f64>], build: &Build) -> Result<(f64, usize)> {
    let mut f = model.fwd();
    let vars: Vec<Var> = inputs.iter().map(|m| f.g.leaf(m.clone())).collect();
    let y = build(&mut f, &vars)?;
    let o = objective(&mut f, y);
    let grads = f.g.backward(o);
    let touched: Vec<(String, Array2<f64>)> = f
        .bound()
        .iter()
        .filter(|(name, _)| name.starts_with(prefix))
        .map(|(name, v)| {
            let g = grads.get(*v).map(|g| g.as_standard_layout().to_owned()).unwrap_or_else(|| Array2::zeros(model.params.get(name).dim()));
            (name.clone(), g)
        })
        .collect();
    let mut m = model.clone();
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for (name, g) in &touched {
        for idx in sample_indices(g.len(), MAX_PARAM_ENTRIES) {
            let orig = m.params.get(name).as_slice().expect("standard layout")[idx];
            m.params.get_mut(name).as_slice_mut().expect("standard layout")[idx] = orig + FD_STEP;
            let plus = eval_objective(&m, inputs, build)?;
            m.params.get_mut(name).as_slice_mut().expect("standard layout")[idx] = orig - FD_STEP;
            let minus = eval_objective(&m, inputs, build)?;
            m.params.get_mut(name).as_slice_mut().expect("standard layout")[idx] = orig;
            numeric.push((plus - minus) / (2.0 * FD_STEP));
            analytic.push(g.as_slice().expect("standard layout")[idx]);
        }
    }
    Ok((relative_error(&as_row(analytic), &as_row(numeric)), touched.len()))
}

fn sample_prompts(seed: u64) -> PromptSet {
    PromptSet {
        bboxes: vec![
            Aabb { min: [-0.5, -0.4, -0.3], max: [0.2, 0.5, 0.1] },
            Aabb { min: [0.1, -0.2, 0.0], max: [0.6, 0.3, 0.7] },
        ],
        region_clouds: vec![random_cloud(16, seed ^ 0x51)],
        covers_all_parts: false,
    }
}

/// Run the whole suite.
pub fn run_toycheck(cfg: &ToyCheckConfig) -> Result<ToyCheckReport> {
    let start = Instant::now();
    let dims = cfg.dims.clone();
    dims.validate()?;
    if cfg.steps == 0 {
        return Err(ToyError::InvalidArgument("steps must be >= 1".into()));
    }
    let (l, c, seed) = (dims.latent_tokens, dims.channels, cfg.seed);
    let base = ToyModel::new(dims.clone(), seed)?;
    let live = base.clone().with_live_branches();
    let mut s = Suite(Vec::new());

    // Frozen-base identities.
    let x = tokens(random_matrix(l, c, seed + 1), TokenKind::Latent);
    let g = tokens(random_matrix(8, c, seed + 2), TokenKind::GeometryCond);
    let mut mism = 0.0;
    let mut live_diff = f64::INFINITY;
    for layer in 0..dims.dit_layers {
        let with = base.adapter_inject(&x, &g, layer)?;
        let without = base.base_cross(&x, layer)?;
        mism += bit_mismatches(&[with], std::slice::from_ref(&without));
        live_diff = live_diff.min(max_abs_diff(&live.adapter_inject(&x, &g, layer)?, &without));
    }
    s.at_most("inject_zero_branch_bitwise", mism, 0.0);
    s.positive("inject_live_branch_differs", live_diff);

    let prompts = sample_prompts(seed);
    let p = base.prompt_tokens(&prompts)?;
    let with = base.prompt_inject(&g, Some(&p))?;
    let without = base.prompt_inject(&g, None)?;
    s.at_most("prompt_zero_exchange_bitwise", bit_mismatches(&[with], std::slice::from_ref(&without)), 0.0);
    let live_p = live.prompt_tokens(&prompts)?;
    s.positive("prompt_live_exchange_differs", max_abs_diff(&live.prompt_inject(&g, Some(&live_p))?, &without));

    let n_tok = p.tokens();
    let expected = 2 * prompts.bboxes.len() + 16usize.div_ceil(crate::model::REGION_FACTOR) + 1;
    s.flag("prompt_token_count", n_tok == expected);

    // Time enters queries and keys only.
    let frames: Vec<TokenBatch> = (0..3).map(|i| tokens(random_matrix(l, c, seed + 10 + i), TokenKind::Latent)).collect();
    let times = [0.0, 0.4, 1.0];
    let mut zeroed = base.clone();
    zeroed.params.zero_prefix("temporal.");
    for layer in 0..dims.dit_layers {
        zeroed.params.randomize_prefix(&format!("temporal.{layer}.attn."), seed);
    }
    let mut worst: f64 = 0.0;
    for layer in 0..dims.dit_layers {
        let a = zeroed.temporal_attention(&frames, &times, layer)?;
        let b = zeroed.merged_self_attention(&frames, layer)?;
        worst = worst.max(a.iter().zip(&b).map(|(p, q)| max_abs_diff(p, q)).fold(0.0, f64::max));
    }
    s.at_most("temporal_zero_time_embedding_additive", worst, REDUCTION_TOL);

    let rotary = base.clone().with_time_mode(TimeMode::Rotary);
    let mut worst: f64 = 0.0;
    for layer in 0..dims.dit_layers {
        let a = rotary.temporal_attention(&frames, &[0.0; 3], layer)?;
        let b = rotary.merged_self_attention(&frames, layer)?;
        worst = worst.max(a.iter().zip(&b).map(|(p, q)| max_abs_diff(p, q)).fold(0.0, f64::max));
    }
    s.at_most("temporal_zero_time_embedding_rotary", worst, REDUCTION_TOL);

    let a = base.temporal_attention(&frames, &times, 0)?;
    let perm = [2usize, 0, 1];
    let pf: Vec<TokenBatch> = perm.iter().map(|&i| frames[i].clone()).collect();
    let pt: Vec<f64> = perm.iter().map(|&i| times[i]).collect();
    let b = base.temporal_attention(&pf, &pt, 0)?;
    let worst = perm.iter().enumerate().map(|(j, &i)| max_abs_diff(&b[j], &a[i])).fold(0.0, f64::max);
    s.at_most("temporal_frame_permutation", worst, REDUCTION_TOL);

    let merged = merge_frames(&frames)?;
    s.flag("frame_merge_round_trip", split_frames(&merged)? == frames);

    let mut graph = Graph::new();
    let scores = graph.leaf(random_matrix(l, 3 * l, seed + 20) * 5.0);
    let sm = graph.softmax(scores);
    let row_err = graph.value(sm).rows().into_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);
    s.at_most("softmax_rows_sum_to_one", row_err, REDUCTION_TOL);

    // Gradients with respect to inputs.
    let cloud = random_cloud(40, seed + 30);
    let queries: Vec<Vec3> = random_cloud(6, seed + 31).points;
    let latent = random_matrix(l, c, seed + 32);
    let decode = |f: &mut Fwd, v: &[Var]| f.decode_queries(v[0], &queries);
    s.at_most("grad_decode_wrt_latent", input_gradient_error(&live, std::slice::from_ref(&latent), &decode)?, GRAD_TOL);

    let inject = |f: &mut Fwd, v: &[Var]| Ok(f.cross_inject(v[0], Some(v[1]), 0));
    let xin = random_matrix(l, c, seed + 33);
    let gin = random_matrix(8, c, seed + 34);
    s.at_most(
        "grad_inject_wrt_condition",
        input_gradient_error(&live, &[xin.clone(), gin.clone()], &inject)?,
        GRAD_TOL,
    );

    let pin = random_matrix(5, c, seed + 35);
    let prompt = |f: &mut Fwd, v: &[Var]| Ok(f.prompt_inject(v[0], Some(v[1])));
    s.at_most(
        "grad_prompt_inject_wrt_prompt",
        input_gradient_error(&live, &[gin.clone(), pin.clone()], &prompt)?,
        GRAD_TOL,
    );

    let small: Vec<Array2<f64>> = (0..3).map(|i| random_matrix(4, c, seed + 40 + i)).collect();
    let temporal = |f: &mut Fwd, v: &[Var]| {
        let outs = f.temporal(v, Some(&times), 0);
        Ok(f.g.concat_rows(&outs))
    };
    s.at_most("grad_temporal_wrt_frames_additive", input_gradient_error(&live, &small, &temporal)?, GRAD_TOL);
    let live_rot = live.clone().with_time_mode(TimeMode::Rotary);
    s.at_most("grad_temporal_wrt_frames_rotary", input_gradient_error(&live_rot, &small, &temporal)?, GRAD_TOL);

    let cond = |f: &mut Fwd, v: &[Var]| Ok(f.adapter_condition(v[0], 0.3, 4));
    s.at_most("grad_adapter_condition_wrt_geometry", input_gradient_error(&live, std::slice::from_ref(&gin), &cond)?, GRAD_TOL);

    let z4 = random_matrix(4, c, seed + 50);
    let target4 = random_matrix(4, c, seed + 51);
    let denoise = |f: &mut Fwd, v: &[Var]| {
        let out = f.denoise(&[v[0]], 7, Some(&[v[1]]), None)[0];
        Ok(f.mse(out, v[2]))
    };
    let dn_inputs = [z4.clone(), gin.clone(), target4.clone()];
    s.at_most("grad_denoise_loss_wrt_inputs", input_gradient_error(&live, &dn_inputs, &denoise)?, GRAD_TOL);

    // Gradients with respect to every parameter group.
    let cloud_pts = cloud.points.clone();
    let encode = |f: &mut Fwd, _: &[Var]| f.encode_geometry(&cloud_pts, 8);
    let prompt_full = |f: &mut Fwd, v: &[Var]| {
        let p = f.prompt_tokens(&prompts)?;
        Ok(f.prompt_inject(v[0], Some(p)))
    };
    let seq = |f: &mut Fwd, v: &[Var]| {
        let outs = f.denoise(&v[..2], 3, Some(&v[2..4]), Some(&[0.0, 1.0]));
        Ok(f.g.concat_rows(&outs))
    };
    let seq_inputs = [z4.clone(), target4.clone(), gin.clone(), pin.clone()];
    let groups: [(&str, &Build, &[Array2<f64>]); 9] = [
        ("pos.", &encode, &[]),
        ("enc.", &encode, &[]),
        ("dec.", &decode, std::slice::from_ref(&latent)),
        ("cond.", &cond, std::slice::from_ref(&gin)),
        ("adapter.", &cond, std::slice::from_ref(&gin)),
        ("dit.", &denoise, &dn_inputs),
        ("inject.", &denoise, &dn_inputs),
        ("temporal.", &seq, &seq_inputs),
        ("prompt.", &prompt_full, std::slice::from_ref(&gin)),
    ];
    for (prefix, build, inputs) in groups {
        let (err, used) = param_gradient_error(&live, prefix, inputs, build)?;
        let name = format!("grad_params_{}", prefix.trim_end_matches('.'));
        s.at_most(&name, if used == 0 { f64::INFINITY } else { err }, GRAD_TOL);
    }

    // Denoiser contracts.
    let zt = tokens(z4.clone(), TokenKind::Latent);
    let gt = tokens(gin.clone(), TokenKind::GeometryCond);
    let (pred, _) = live.denoise_eval(&zt, 7, cfg.steps.max(8), &gt, &zt)?;
    let (_, self_loss) = live.denoise_eval(&zt, 7, cfg.steps.max(8), &gt, &pred)?;
    s.at_most("denoise_self_target_zero_loss", self_loss, 0.0);
    let tgt = tokens(target4.clone(), TokenKind::Latent);
    let (_, loss) = live.denoise_eval(&zt, 7, cfg.steps.max(8), &gt, &tgt)?;
    let rows = [3usize, 1, 0, 2];
    let permute = |m: &Array2<f64>| tokens(m.select(ndarray::Axis(0), &rows), TokenKind::Latent);
    let (_, ploss) = live.denoise_eval(&permute(&z4), 7, cfg.steps.max(8), &gt, &permute(&target4))?;
    s.at_most("denoise_loss_permutation", (loss - ploss).abs(), REDUCTION_TOL);

    // Sampling loop.
    let geometry = random_cloud(64, seed + 60);
    let out = sample_sequence(&live, &geometry, &cfg.times, Some(&prompts), cfg.steps, cfg.cfg_scale, seed)?;
    let shape_ok = out.len() == cfg.times.len() && out.iter().all(|t| t.data.dim() == (1, l, c) && t.is_finite());
    s.flag("sample_shape_and_finite", shape_ok);
    let again = sample_sequence(&live, &geometry, &cfg.times, Some(&prompts), cfg.steps, cfg.cfg_scale, seed)?;
    s.at_most("sample_same_seed_bitwise", bit_mismatches(&out, &again), 0.0);
    let cfg0 = sample_sequence(&live, &geometry, &cfg.times, Some(&prompts), cfg.steps, 0.0, seed)?;
    let uncond = sample_unconditional(&live, &cfg.times, cfg.steps, seed)?;
    s.at_most("cfg_zero_equals_unconditional", bit_mismatches(&cfg0, &uncond), 0.0);

    let checks = s.0;
    Ok(ToyCheckReport {
        dims,
        seed,
        steps: cfg.steps,
        cfg_scale: cfg.cfg_scale,
        passed: checks.iter().all(|c| c.passed),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}
