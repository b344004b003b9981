use std::collections::BTreeMap;

use bangkit_core::mesh::{fps_indices, PointCloud};
use bangkit_core::Vec3;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::embed::{pos_emb, rotary_angles, scalar_embedding};
use crate::error::{Result, ToyError};
use crate::graph::{Graph, Var};
use crate::params::Params;
use crate::tokens::{PromptSet, TokenBatch, TokenKind};

/// Width of the raw positional encoding before projection to the model width.
pub const POS_CHANNELS: usize = 24;
/// Downsampling factor for region-prompt clouds.
pub const REGION_FACTOR: usize = 8;
/// Number of learned context tokens the frozen denoiser cross-attends to.
pub const BASE_CONTEXT_TOKENS: usize = 4;
/// Scale applied to `t in [0,1]` before the sinusoidal embedding.
pub const TIME_SCALE: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyDims {
    pub latent_tokens: usize,
    pub channels: usize,
    pub heads: usize,
    pub dit_layers: usize,
    pub adapter_layers: usize,
    pub prompt_layers: usize,
}

impl Default for ToyDims {
    fn default() -> Self {
        ToyDims {
            latent_tokens: 32,
            channels: 16,
            heads: 4,
            dit_layers: 2,
            adapter_layers: 4,
            prompt_layers: 2,
        }
    }
}

impl ToyDims {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.latent_tokens,
            self.channels,
            self.heads,
            self.dit_layers,
            self.adapter_layers,
            self.prompt_layers,
        ];
        if all.contains(&0) {
            return Err(ToyError::InvalidDims("all dimensions must be >= 1".into()));
        }
        if !self.channels.is_multiple_of(self.heads) {
            return Err(ToyError::ChannelDivisibility { channels: self.channels, divisor: self.heads });
        }
        if !(self.channels / self.heads).is_multiple_of(2) {
            return Err(ToyError::InvalidDims("per-head width must be even".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.channels / self.heads
    }
}

/// How frame times enter the temporal attention queries and keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    #[default]
    Additive,
    Rotary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub dims: ToyDims,
    pub params: Params,
    pub time_mode: TimeMode,
    pub seed: u64,
}

fn reg_linear(p: &mut Params, seed: u64, name: &str, fan_in: usize, fan_out: usize, zero: bool) {
    let (w, b) = (format!("{name}.w"), format!("{name}.b"));
    if zero {
        p.add_zeros(&w, fan_in, fan_out);
        p.add_zeros(&b, 1, fan_out);
    } else {
        p.add_gaussian(seed, &w, fan_in, fan_out);
        p.add_gaussian(seed, &b, 1, fan_out);
    }
}

fn reg_attn(p: &mut Params, seed: u64, name: &str, c: usize, zero_out: bool) {
    for proj in ["q", "k", "v"] {
        p.add_gaussian(seed, &format!("{name}.{proj}"), c, c);
    }
    reg_linear(p, seed, &format!("{name}.o"), c, c, zero_out);
}

fn reg_mlp(p: &mut Params, seed: u64, name: &str, c: usize) {
    reg_linear(p, seed, &format!("{name}.fc1"), c, 2 * c, false);
    reg_linear(p, seed, &format!("{name}.fc2"), 2 * c, c, false);
}

fn reg_block(p: &mut Params, seed: u64, name: &str, c: usize) {
    reg_attn(p, seed, &format!("{name}.attn"), c, false);
    reg_mlp(p, seed, &format!("{name}.mlp"), c);
}

impl ToyModel {
    /// Randomly initialized model with zeroed injection and exchange output projections.
    pub fn new(dims: ToyDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let c = dims.channels;
        let mut p = Params::default();
        reg_linear(&mut p, seed, "pos.proj", POS_CHANNELS, c, false);

        reg_attn(&mut p, seed, "enc.cross", c, false);
        reg_mlp(&mut p, seed, "enc.mlp", c);

        for l in 0..dims.dit_layers {
            reg_block(&mut p, seed, &format!("dec.self.{l}"), c);
        }
        reg_attn(&mut p, seed, "dec.cross", c, false);
        reg_linear(&mut p, seed, "dec.head", c, 1, false);

        reg_linear(&mut p, seed, "cond.t", c, c, false);
        reg_linear(&mut p, seed, "cond.parts", c, c, false);
        for l in 0..dims.adapter_layers {
            reg_linear(&mut p, seed, &format!("adapter.{l}.mod"), c, 4 * c, false);
            reg_attn(&mut p, seed, &format!("adapter.{l}.attn"), c, false);
            reg_mlp(&mut p, seed, &format!("adapter.{l}.mlp"), c);
        }

        reg_linear(&mut p, seed, "dit.tau", c, c, false);
        p.add_gaussian(seed, "dit.ctx", BASE_CONTEXT_TOKENS, c);
        for l in 0..dims.dit_layers {
            reg_attn(&mut p, seed, &format!("dit.{l}.attn"), c, false);
            reg_attn(&mut p, seed, &format!("dit.{l}.cross"), c, false);
            reg_mlp(&mut p, seed, &format!("dit.{l}.mlp"), c);
            reg_attn(&mut p, seed, &format!("inject.{l}.cross"), c, true);
            reg_linear(&mut p, seed, &format!("temporal.{l}.time"), c, c, false);
            reg_attn(&mut p, seed, &format!("temporal.{l}.attn"), c, false);
        }
        reg_linear(&mut p, seed, "dit.out", c, c, false);

        p.add_gaussian(seed, "prompt.flag", 2, c);
        for l in 0..dims.prompt_layers {
            reg_block(&mut p, seed, &format!("prompt.{l}.adapter"), c);
            reg_block(&mut p, seed, &format!("prompt.{l}.self"), c);
            reg_attn(&mut p, seed, &format!("prompt.{l}.gather"), c, false);
            reg_attn(&mut p, seed, &format!("prompt.{l}.exchange"), c, true);
        }

        Ok(ToyModel { dims, params: p, time_mode: TimeMode::Additive, seed })
    }

    pub fn with_time_mode(mut self, mode: TimeMode) -> Self {
        self.time_mode = mode;
        self
    }

    /// Give the zero-initialized injection and exchange branches random weights.
    pub fn with_live_branches(mut self) -> Self {
        for l in 0..self.dims.dit_layers {
            self.params.randomize_prefix(&format!("inject.{l}.cross.o."), self.seed);
        }
        for l in 0..self.dims.prompt_layers {
            self.params.randomize_prefix(&format!("prompt.{l}.exchange.o."), self.seed);
        }
        self
    }

    pub fn fwd(&self) -> Fwd<'_> {
        Fwd { g: Graph::new(), model: self, bound: BTreeMap::new() }
    }

    fn check_channels(&self, tb: &TokenBatch) -> Result<()> {
        if tb.channels() != self.dims.channels {
            return Err(ToyError::ShapeMismatch(format!(
                "expected {} channels, got {}",
                self.dims.channels,
                tb.channels()
            )));
        }
        Ok(())
    }

    pub fn encode_geometry(&self, cloud: &PointCloud, factor: usize, kind: TokenKind) -> Result<TokenBatch> {
        let mut f = self.fwd();
        let out = f.encode_geometry(&cloud.points, factor)?;
        Ok(TokenBatch::from_matrix(f.g.value(out).clone(), kind))
    }

    pub fn decode_queries(&self, latent: &TokenBatch, queries: &[Vec3]) -> Result<Vec<f64>> {
        if latent.kind != TokenKind::Latent {
            return Err(ToyError::InvalidArgument("decoder expects latent tokens".into()));
        }
        self.check_channels(latent)?;
        let mut f = self.fwd();
        let z = f.g.leaf(latent.matrix());
        let out = f.decode_queries(z, queries)?;
        Ok(f.g.value(out).column(0).to_vec())
    }

    pub fn adapter_condition(&self, g: &TokenBatch, t: f64, parts_count: usize) -> Result<TokenBatch> {
        if !(0.0..=1.0).contains(&t) || parts_count == 0 {
            return Err(ToyError::InvalidArgument(format!("t={t}, parts_count={parts_count}")));
        }
        self.check_channels(g)?;
        let mut f = self.fwd();
        let gv = f.g.leaf(g.matrix());
        let out = f.adapter_condition(gv, t, parts_count);
        Ok(TokenBatch::from_matrix(f.g.value(out).clone(), TokenKind::GeometryCond))
    }

    /// One denoiser cross-attention layer with the parallel injection branch added.
    pub fn adapter_inject(&self, block_input: &TokenBatch, g_explode: &TokenBatch, layer: usize) -> Result<TokenBatch> {
        self.inject_impl(block_input, Some(g_explode), layer)
    }

    /// The frozen cross-attention path alone.
    pub fn base_cross(&self, block_input: &TokenBatch, layer: usize) -> Result<TokenBatch> {
        self.inject_impl(block_input, None, layer)
    }

    fn inject_impl(&self, x: &TokenBatch, g: Option<&TokenBatch>, layer: usize) -> Result<TokenBatch> {
        if layer >= self.dims.dit_layers {
            return Err(ToyError::InvalidArgument(format!("layer {layer} out of range")));
        }
        self.check_channels(x)?;
        if let Some(g) = g {
            self.check_channels(g)?;
        }
        let mut f = self.fwd();
        let xv = f.g.leaf(x.matrix());
        let gv = g.map(|g| f.g.leaf(g.matrix()));
        let out = f.cross_inject(xv, gv, layer);
        Ok(TokenBatch::from_matrix(f.g.value(out).clone(), x.kind))
    }

    pub fn temporal_attention(&self, frames: &[TokenBatch], times: &[f64], layer: usize) -> Result<Vec<TokenBatch>> {
        self.temporal_impl(frames, Some(times), layer)
    }

    /// Self-attention over the merged frames with no time signal.
    pub fn merged_self_attention(&self, frames: &[TokenBatch], layer: usize) -> Result<Vec<TokenBatch>> {
        self.temporal_impl(frames, None, layer)
    }

    fn temporal_impl(&self, frames: &[TokenBatch], times: Option<&[f64]>, layer: usize) -> Result<Vec<TokenBatch>> {
        if let Some(times) = times {
            if times.len() != frames.len() {
                return Err(ToyError::ShapeMismatch(format!("{} frames, {} times", frames.len(), times.len())));
            }
        }
        let first = frames.first().ok_or_else(|| ToyError::ShapeMismatch("no frames".into()))?;
        for fr in frames {
            self.check_channels(fr)?;
            if fr.tokens() != first.tokens() {
                return Err(ToyError::ShapeMismatch("frames differ in token count".into()));
            }
        }
        if layer >= self.dims.dit_layers {
            return Err(ToyError::InvalidArgument(format!("layer {layer} out of range")));
        }
        let mut f = self.fwd();
        let vars: Vec<Var> = frames.iter().map(|fr| f.g.leaf(fr.matrix())).collect();
        let outs = f.temporal(&vars, times, layer);
        Ok(outs
            .into_iter()
            .zip(frames)
            .map(|(o, fr)| TokenBatch::from_matrix(f.g.value(o).clone(), fr.kind))
            .collect())
    }

    pub fn prompt_tokens(&self, prompts: &PromptSet) -> Result<TokenBatch> {
        let mut f = self.fwd();
        let out = f.prompt_tokens(prompts)?;
        Ok(TokenBatch::from_matrix(f.g.value(out).clone(), TokenKind::Prompt))
    }

    pub fn prompt_inject(&self, g: &TokenBatch, prompt: Option<&TokenBatch>) -> Result<TokenBatch> {
        self.check_channels(g)?;
        if let Some(p) = prompt {
            self.check_channels(p)?;
        }
        let mut f = self.fwd();
        let gv = f.g.leaf(g.matrix());
        let pv = prompt.map(|p| f.g.leaf(p.matrix()));
        let out = f.prompt_inject(gv, pv);
        Ok(TokenBatch::from_matrix(f.g.value(out).clone(), g.kind))
    }

    /// Single-frame denoiser pass and its mean squared error to `target`.
    pub fn denoise_eval(
        &self,
        latent_noisy: &TokenBatch,
        tau: usize,
        steps: usize,
        g_explode: &TokenBatch,
        target: &TokenBatch,
    ) -> Result<(TokenBatch, f64)> {
        if tau >= steps {
            return Err(ToyError::InvalidArgument(format!("tau {tau} not below step count {steps}")));
        }
        self.check_channels(latent_noisy)?;
        self.check_channels(g_explode)?;
        if target.data.dim() != latent_noisy.data.dim() {
            return Err(ToyError::ShapeMismatch("target shape differs from input".into()));
        }
        let mut f = self.fwd();
        let z = f.g.leaf(latent_noisy.matrix());
        let gv = f.g.leaf(g_explode.matrix());
        let tv = f.g.leaf(target.matrix());
        let out = f.denoise(&[z], tau, Some(&[gv]), None)[0];
        let loss = f.mse(out, tv);
        let loss_val = f.g.value(loss)[[0, 0]];
        Ok((TokenBatch::from_matrix(f.g.value(out).clone(), TokenKind::Latent), loss_val))
    }
}

/// A forward pass under construction. Parameters become tape leaves on first use.
pub struct Fwd<'m> {
    pub g: Graph,
    model: &'m ToyModel,
    bound: BTreeMap<String, Var>,
}

impl<'m> Fwd<'m> {
    pub fn model(&self) -> &'m ToyModel {
        self.model
    }

    /// Parameters touched so far and their tape nodes.
    pub fn bound(&self) -> &BTreeMap<String, Var> {
        &self.bound
    }

    pub fn p(&mut self, name: &str) -> Var {
        if let Some(v) = self.bound.get(name) {
            return *v;
        }
        let v = self.g.leaf(self.model.params.get(name).clone());
        self.bound.insert(name.to_string(), v);
        v
    }

    pub fn linear(&mut self, x: Var, name: &str) -> Var {
        let w = self.p(&format!("{name}.w"));
        let b = self.p(&format!("{name}.b"));
        let y = self.g.matmul(x, w);
        self.g.add_row(y, b)
    }

    /// Multi-head scaled dot-product attention on already projected inputs.
    pub fn attend(&mut self, q: Var, k: Var, v: Var) -> Var {
        let dh = self.model.dims.head_dim();
        let inv = 1.0 / (dh as f64).sqrt();
        let heads: Vec<Var> = (0..self.model.dims.heads)
            .map(|h| {
                let (a, b) = (h * dh, (h + 1) * dh);
                let qh = self.g.slice_cols(q, a, b);
                let kh = self.g.slice_cols(k, a, b);
                let vh = self.g.slice_cols(v, a, b);
                let kt = self.g.transpose(kh);
                let s = self.g.matmul(qh, kt);
                let s = self.g.scale(s, inv);
                let w = self.g.softmax(s);
                self.g.matmul(w, vh)
            })
            .collect();
        self.g.concat_cols(&heads)
    }

    /// Projected attention. `qk_add` is added to both queries and keys, `qk_rot`
    /// rotates both; values see neither.
    pub fn attention(&mut self, xq: Var, xkv: Var, name: &str, qk_add: Option<Var>, qk_rot: Option<&Array2<f64>>) -> Var {
        let wq = self.p(&format!("{name}.q"));
        let wk = self.p(&format!("{name}.k"));
        let wv = self.p(&format!("{name}.v"));
        let mut q = self.g.matmul(xq, wq);
        let mut k = self.g.matmul(xkv, wk);
        let v = self.g.matmul(xkv, wv);
        if let Some(te) = qk_add {
            q = self.g.add(q, te);
            k = self.g.add(k, te);
        }
        if let Some(angles) = qk_rot {
            q = self.g.rotary(q, angles.clone());
            k = self.g.rotary(k, angles.clone());
        }
        let o = self.attend(q, k, v);
        self.linear(o, &format!("{name}.o"))
    }

    pub fn mlp(&mut self, x: Var, name: &str) -> Var {
        let h = self.linear(x, &format!("{name}.fc1"));
        let h = self.g.silu(h);
        self.linear(h, &format!("{name}.fc2"))
    }

    /// Pre-norm self-attention plus MLP, both residual.
    pub fn self_block(&mut self, x: Var, name: &str) -> Var {
        let n = self.g.layer_norm(x);
        let a = self.attention(n, n, &format!("{name}.attn"), None, None);
        let h = self.g.add(x, a);
        let n = self.g.layer_norm(h);
        let m = self.mlp(n, &format!("{name}.mlp"));
        self.g.add(h, m)
    }

    /// Residual pre-norm cross-attention from `x` to `ctx`.
    pub fn cross_residual(&mut self, x: Var, ctx: Var, name: &str) -> Var {
        let nx = self.g.layer_norm(x);
        let nc = self.g.layer_norm(ctx);
        let a = self.attention(nx, nc, name, None, None);
        self.g.add(x, a)
    }

    pub fn embed_points(&mut self, points: &[Vec3]) -> Result<Var> {
        let e = pos_emb(points, POS_CHANNELS)?;
        let e = self.g.leaf(e);
        Ok(self.linear(e, "pos.proj"))
    }

    pub fn encode_geometry(&mut self, points: &[Vec3], factor: usize) -> Result<Var> {
        if factor == 0 || points.len() < factor {
            return Err(ToyError::CloudTooSmall { points: points.len(), factor: factor.max(1) });
        }
        let m = points.len().div_ceil(factor);
        let picked: Vec<Vec3> = fps_indices(points, m).into_iter().map(|i| points[i]).collect();
        let all = self.embed_points(points)?;
        let q = self.embed_points(&picked)?;
        let h = self.cross_residual(q, all, "enc.cross");
        let n = self.g.layer_norm(h);
        let m = self.mlp(n, "enc.mlp");
        Ok(self.g.add(h, m))
    }

    /// One scalar per query, as a `k x 1` column.
    pub fn decode_queries(&mut self, latent: Var, queries: &[Vec3]) -> Result<Var> {
        let mut h = latent;
        for l in 0..self.model.dims.dit_layers {
            h = self.self_block(h, &format!("dec.self.{l}"));
        }
        let qe = self.embed_points(queries)?;
        let o = self.cross_residual(qe, h, "dec.cross");
        let o = self.g.layer_norm(o);
        Ok(self.linear(o, "dec.head"))
    }

    fn scalar_row(&mut self, x: f64) -> Var {
        let e = scalar_embedding(x, self.model.dims.channels);
        self.g.leaf(e)
    }

    /// adaLN-modulated transformer stack conditioned on time and part count.
    pub fn adapter_condition(&mut self, g: Var, t: f64, parts_count: usize) -> Var {
        let c = self.model.dims.channels;
        let te = self.scalar_row(TIME_SCALE * t);
        let pe = self.scalar_row(parts_count as f64);
        let te = self.linear(te, "cond.t");
        let pe = self.linear(pe, "cond.parts");
        let cond = self.g.add(te, pe);
        let cond = self.g.silu(cond);
        let mut h = g;
        for l in 0..self.model.dims.adapter_layers {
            let m = self.linear(cond, &format!("adapter.{l}.mod"));
            let shift1 = self.g.slice_cols(m, 0, c);
            let scale1 = self.g.slice_cols(m, c, 2 * c);
            let shift2 = self.g.slice_cols(m, 2 * c, 3 * c);
            let scale2 = self.g.slice_cols(m, 3 * c, 4 * c);
            let n = self.modulate(h, shift1, scale1);
            let a = self.attention(n, n, &format!("adapter.{l}.attn"), None, None);
            h = self.g.add(h, a);
            let n = self.modulate(h, shift2, scale2);
            let f = self.mlp(n, &format!("adapter.{l}.mlp"));
            h = self.g.add(h, f);
        }
        h
    }

    /// `LN(x) * (1 + scale) + shift`
    fn modulate(&mut self, x: Var, shift: Var, scale: Var) -> Var {
        let n = self.g.layer_norm(x);
        let s = self.g.mul_row(n, scale);
        let n = self.g.add(n, s);
        self.g.add_row(n, shift)
    }

    /// Frozen cross-attention to the base context, plus the injection branch to `g` if given.
    pub fn cross_inject(&mut self, x: Var, g: Option<Var>, layer: usize) -> Var {
        let nx = self.g.layer_norm(x);
        let ctx = self.p("dit.ctx");
        let base = self.attention(nx, ctx, &format!("dit.{layer}.cross"), None, None);
        let out = self.g.add(x, base);
        match g {
            Some(g) => {
                let branch = self.attention(nx, g, &format!("inject.{layer}.cross"), None, None);
                self.g.add(out, branch)
            }
            None => out,
        }
    }

    /// Residual self-attention over all frames' tokens jointly. With `times`,
    /// each token's frame time enters its query and key.
    pub fn temporal(&mut self, frames: &[Var], times: Option<&[f64]>, layer: usize) -> Vec<Var> {
        let rows: Vec<usize> = frames.iter().map(|f| self.g.value(*f).nrows()).collect();
        let x = self.g.concat_rows(frames);
        let n = self.g.layer_norm(x);
        let name = format!("temporal.{layer}.attn");
        let a = match (times, self.model.time_mode) {
            (None, _) => self.attention(n, n, &name, None, None),
            (Some(times), TimeMode::Additive) => {
                let c = self.model.dims.channels;
                let blocks: Vec<Var> = times
                    .iter()
                    .zip(&rows)
                    .map(|(&t, &r)| {
                        let e = self.scalar_row(TIME_SCALE * t);
                        let e = self.linear(e, &format!("temporal.{layer}.time"));
                        let z = self.g.leaf(Array2::zeros((r, c)));
                        self.g.add_row(z, e)
                    })
                    .collect();
                let te = self.g.concat_rows(&blocks);
                self.attention(n, n, &name, Some(te), None)
            }
            (Some(times), TimeMode::Rotary) => {
                let per_token: Vec<f64> = times
                    .iter()
                    .zip(&rows)
                    .flat_map(|(&t, &r)| std::iter::repeat_n(TIME_SCALE * t, r))
                    .collect();
                let angles = rotary_angles(&per_token, self.model.dims.channels);
                self.attention(n, n, &name, None, Some(&angles))
            }
        };
        let y = self.g.add(x, a);
        let mut start = 0;
        rows.iter()
            .map(|&r| {
                let s = self.g.slice_rows(y, start, start + r);
                start += r;
                s
            })
            .collect()
    }

    pub fn prompt_tokens(&mut self, prompts: &PromptSet) -> Result<Var> {
        if prompts.prompt_count() == 0 {
            return Err(ToyError::EmptyPrompts);
        }
        let mut blocks = Vec::new();
        let mut slot = 0usize;
        for b in &prompts.bboxes {
            let e = self.embed_points(&[Vec3::from(b.min), Vec3::from(b.max)])?;
            blocks.push(self.with_slot(e, slot));
            slot += 1;
        }
        for cloud in &prompts.region_clouds {
            let e = self.encode_geometry(&cloud.points, REGION_FACTOR)?;
            blocks.push(self.with_slot(e, slot));
            slot += 1;
        }
        let flag = self.p("prompt.flag");
        let row = usize::from(prompts.covers_all_parts);
        blocks.push(self.g.slice_rows(flag, row, row + 1));
        Ok(self.g.concat_rows(&blocks))
    }

    fn with_slot(&mut self, x: Var, slot: usize) -> Var {
        let e = self.scalar_row((slot + 1) as f64);
        self.g.add_row(x, e)
    }

    /// Geometry-side blocks, interleaved with prompt-side blocks when a prompt is given.
    pub fn prompt_inject(&mut self, g: Var, prompt: Option<Var>) -> Var {
        let mut h = g;
        let mut p = prompt;
        for l in 0..self.model.dims.prompt_layers {
            h = self.self_block(h, &format!("prompt.{l}.adapter"));
            if let Some(pv) = p {
                let pv = self.self_block(pv, &format!("prompt.{l}.self"));
                let pv = self.cross_residual(pv, h, &format!("prompt.{l}.gather"));
                let nh = self.g.layer_norm(h);
                let np = self.g.layer_norm(pv);
                let a = self.attention(nh, np, &format!("prompt.{l}.exchange"), None, None);
                h = self.g.add(h, a);
                p = Some(pv);
            }
        }
        h
    }

    /// Denoiser forward over one or more frames; predicts the clean latent.
    /// Temporal attention runs after each cross-attention when `times` is given.
    pub fn denoise(&mut self, frames: &[Var], tau: usize, cond: Option<&[Var]>, times: Option<&[f64]>) -> Vec<Var> {
        let te = self.scalar_row(tau as f64);
        let te = self.linear(te, "dit.tau");
        let mut h: Vec<Var> = frames.iter().map(|&x| self.g.add_row(x, te)).collect();
        for l in 0..self.model.dims.dit_layers {
            for (i, hv) in h.iter_mut().enumerate() {
                let n = self.g.layer_norm(*hv);
                let a = self.attention(n, n, &format!("dit.{l}.attn"), None, None);
                let x = self.g.add(*hv, a);
                *hv = self.cross_inject(x, cond.map(|c| c[i]), l);
            }
            if times.is_some() {
                h = self.temporal(&h, times, l);
            }
            for hv in h.iter_mut() {
                let n = self.g.layer_norm(*hv);
                let m = self.mlp(n, &format!("dit.{l}.mlp"));
                *hv = self.g.add(*hv, m);
            }
        }
        h.into_iter()
            .map(|hv| {
                let n = self.g.layer_norm(hv);
                self.linear(n, "dit.out")
            })
            .collect()
    }

    pub fn mse(&mut self, a: Var, b: Var) -> Var {
        let d = self.g.sub(a, b);
        let s = self.g.square(d);
        self.g.mean(s)
    }
}

#[cfg(test)]
mod tests;
