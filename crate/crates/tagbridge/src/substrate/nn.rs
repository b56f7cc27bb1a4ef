//! Layers used by the bridge model: linear heads, embeddings, layer norm,
//! a GRU cell, and a small pre-norm transformer encoder.
//!
//! Each layer owns plain [`Tensor`] parameters and exposes `bind`, which
//! registers them on a [`Tape`] and returns a bound twin holding `VarId`s;
//! forward passes run on the bound form. Parameter traversal for the
//! optimizer and serialization goes through [`Params`], using the same
//! names as `bind` so gradients can be matched up by name.

use crate::error::{Error, Result};
use crate::substrate::rng::Rng;
use crate::substrate::tape::{Tape, VarId};
use crate::substrate::tensor::Tensor;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Named parameter traversal.
pub trait Params {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));

    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit(&mut |n, _| names.push(n.to_string()));
        names
    }

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.numel());
        n
    }
}

/// Flat bag of named tensors; handy for op-level gradient checks.
pub struct TensorBag(pub Vec<(String, Tensor)>);

impl TensorBag {
    pub fn get(&self, name: &str) -> &Tensor {
        &self.0.iter().find(|(n, _)| n == name).expect("name").1
    }
}

impl Params for TensorBag {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (n, t) in &self.0 {
            f(n, t);
        }
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (n, t) in &mut self.0 {
            f(n, t);
        }
    }
}

// ── Linear ───────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Tensor, // [input, output]
    pub b: Tensor, // [output]
}

pub struct BoundLinear {
    pub w: VarId,
    pub b: VarId,
}

impl Linear {
    pub fn init(input: usize, output: usize, rng: &mut Rng) -> Self {
        Linear {
            w: Tensor::uniform_init(vec![input, output], rng),
            b: Tensor::zeros_param(vec![output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape[0]
    }

    pub fn output_dim(&self) -> usize {
        self.w.shape[1]
    }

    pub fn bind(&self, tape: &mut Tape, prefix: &str) -> BoundLinear {
        BoundLinear {
            w: tape.param(&format!("{prefix}.w"), &self.w),
            b: tape.param(&format!("{prefix}.b"), &self.b),
        }
    }

    fn visit_inner(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        f(&format!("{prefix}.w"), &self.w);
        f(&format!("{prefix}.b"), &self.b);
    }

    fn visit_inner_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}.w"), &mut self.w);
        f(&format!("{prefix}.b"), &mut self.b);
    }
}

impl BoundLinear {
    pub fn forward(&self, tape: &mut Tape, x: VarId) -> VarId {
        let y = tape.matmul(x, self.w);
        tape.add_row(y, self.b)
    }
}

// ── LayerNorm ────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: Tensor,
    pub bias: Tensor,
}

pub struct BoundLayerNorm {
    gain: VarId,
    bias: VarId,
}

impl LayerNorm {
    /// Gain starts at one, not at the small-uniform weight init; a near-zero
    /// gain would wipe out the residual stream.
    pub fn init(dim: usize) -> Self {
        let mut gain = Tensor::new(vec![dim], vec![1.0; dim]).unwrap();
        gain.requires_grad = true;
        LayerNorm {
            gain,
            bias: Tensor::zeros_param(vec![dim]),
        }
    }

    pub fn bind(&self, tape: &mut Tape, prefix: &str) -> BoundLayerNorm {
        BoundLayerNorm {
            gain: tape.param(&format!("{prefix}.gain"), &self.gain),
            bias: tape.param(&format!("{prefix}.bias"), &self.bias),
        }
    }

    fn visit_inner(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        f(&format!("{prefix}.gain"), &self.gain);
        f(&format!("{prefix}.bias"), &self.bias);
    }

    fn visit_inner_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}.gain"), &mut self.gain);
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}

impl BoundLayerNorm {
    pub fn forward(&self, tape: &mut Tape, x: VarId) -> VarId {
        tape.layer_norm(x, self.gain, self.bias, LAYER_NORM_EPS)
    }
}

// ── GRU cell ─────────────────────────────────────────────────────────

/// Gate convention, fixed for the repository:
///   r  = σ(x·W_r + h·U_r + b_r)
///   u  = σ(x·W_u + h·U_u + b_u)
///   c  = tanh(x·W_c + (r∘h)·U_c + b_c)
///   h' = u∘h + (1−u)∘c
#[derive(Debug, Clone)]
pub struct GruCell {
    pub w_r: Tensor,
    pub u_r: Tensor,
    pub b_r: Tensor,
    pub w_u: Tensor,
    pub u_u: Tensor,
    pub b_u: Tensor,
    pub w_c: Tensor,
    pub u_c: Tensor,
    pub b_c: Tensor,
}

pub struct BoundGruCell {
    w_r: VarId,
    u_r: VarId,
    b_r: VarId,
    w_u: VarId,
    u_u: VarId,
    b_u: VarId,
    w_c: VarId,
    u_c: VarId,
    b_c: VarId,
}

impl GruCell {
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w = |rng: &mut Rng| Tensor::uniform_init(vec![input, hidden], rng);
        let u = |rng: &mut Rng| Tensor::uniform_init(vec![hidden, hidden], rng);
        GruCell {
            w_r: w(rng),
            u_r: u(rng),
            b_r: Tensor::zeros_param(vec![hidden]),
            w_u: w(rng),
            u_u: u(rng),
            b_u: Tensor::zeros_param(vec![hidden]),
            w_c: w(rng),
            u_c: u(rng),
            b_c: Tensor::zeros_param(vec![hidden]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_r.shape[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_r.shape[1]
    }

    pub fn bind(&self, tape: &mut Tape, prefix: &str) -> BoundGruCell {
        BoundGruCell {
            w_r: tape.param(&format!("{prefix}.w_r"), &self.w_r),
            u_r: tape.param(&format!("{prefix}.u_r"), &self.u_r),
            b_r: tape.param(&format!("{prefix}.b_r"), &self.b_r),
            w_u: tape.param(&format!("{prefix}.w_u"), &self.w_u),
            u_u: tape.param(&format!("{prefix}.u_u"), &self.u_u),
            b_u: tape.param(&format!("{prefix}.b_u"), &self.b_u),
            w_c: tape.param(&format!("{prefix}.w_c"), &self.w_c),
            u_c: tape.param(&format!("{prefix}.u_c"), &self.u_c),
            b_c: tape.param(&format!("{prefix}.b_c"), &self.b_c),
        }
    }

    fn visit_inner(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        for (n, t) in [
            ("w_r", &self.w_r),
            ("u_r", &self.u_r),
            ("b_r", &self.b_r),
            ("w_u", &self.w_u),
            ("u_u", &self.u_u),
            ("b_u", &self.b_u),
            ("w_c", &self.w_c),
            ("u_c", &self.u_c),
            ("b_c", &self.b_c),
        ] {
            f(&format!("{prefix}.{n}"), t);
        }
    }

    fn visit_inner_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (n, t) in [
            ("w_r", &mut self.w_r),
            ("u_r", &mut self.u_r),
            ("b_r", &mut self.b_r),
            ("w_u", &mut self.w_u),
            ("u_u", &mut self.u_u),
            ("b_u", &mut self.b_u),
            ("w_c", &mut self.w_c),
            ("u_c", &mut self.u_c),
            ("b_c", &mut self.b_c),
        ] {
            f(&format!("{prefix}.{n}"), t);
        }
    }
}

impl BoundGruCell {
    /// One step; `x` is [1, input], `h` is [1, hidden].
    pub fn step(&self, tape: &mut Tape, x: VarId, h: VarId) -> VarId {
        let r = {
            let xi = tape.matmul(x, self.w_r);
            let hi = tape.matmul(h, self.u_r);
            let s = tape.add(xi, hi);
            let s = tape.add_row(s, self.b_r);
            tape.sigmoid(s)
        };
        let u = {
            let xi = tape.matmul(x, self.w_u);
            let hi = tape.matmul(h, self.u_u);
            let s = tape.add(xi, hi);
            let s = tape.add_row(s, self.b_u);
            tape.sigmoid(s)
        };
        let c = {
            let xi = tape.matmul(x, self.w_c);
            let rh = tape.mul(r, h);
            let hi = tape.matmul(rh, self.u_c);
            let s = tape.add(xi, hi);
            let s = tape.add_row(s, self.b_c);
            tape.tanh(s)
        };
        let uh = tape.mul(u, h);
        let one_minus_u = tape.affine(u, -1.0, 1.0);
        let uc = tape.mul(one_minus_u, c);
        tape.add(uh, uc)
    }
}

/// One GRU step as a plain function of values. Dimension mismatches are
/// reported rather than asserted; gradients come from running the same
/// cell on a tape.
pub fn gru_step(cell: &GruCell, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if x.len() != cell.input_dim() {
        return Err(Error::Shape(format!(
            "gru_step input length {} != {}",
            x.len(),
            cell.input_dim()
        )));
    }
    if h.len() != cell.hidden_dim() {
        return Err(Error::Shape(format!(
            "gru_step hidden length {} != {}",
            h.len(),
            cell.hidden_dim()
        )));
    }
    let mut tape = Tape::new();
    let bound = cell.bind(&mut tape, "gru");
    let xv = tape.value(1, x.len(), x.to_vec());
    let hv = tape.value(1, h.len(), h.to_vec());
    let out = bound.step(&mut tape, xv, hv);
    Ok(tape.data(out).to_vec())
}

// ── Transformer encoder ──────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncoderConfig {
    pub vocab: usize,
    pub dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub max_len: usize,
}

#[derive(Debug, Clone)]
pub struct Attention {
    pub heads: usize,
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
}

pub struct BoundAttention {
    heads: usize,
    wq: BoundLinear,
    wk: BoundLinear,
    wv: BoundLinear,
    wo: BoundLinear,
}

impl Attention {
    fn init(dim: usize, heads: usize, rng: &mut Rng) -> Self {
        Attention {
            heads,
            wq: Linear::init(dim, dim, rng),
            wk: Linear::init(dim, dim, rng),
            wv: Linear::init(dim, dim, rng),
            wo: Linear::init(dim, dim, rng),
        }
    }

    fn bind(&self, tape: &mut Tape, prefix: &str) -> BoundAttention {
        BoundAttention {
            heads: self.heads,
            wq: self.wq.bind(tape, &format!("{prefix}.wq")),
            wk: self.wk.bind(tape, &format!("{prefix}.wk")),
            wv: self.wv.bind(tape, &format!("{prefix}.wv")),
            wo: self.wo.bind(tape, &format!("{prefix}.wo")),
        }
    }

    fn visit_inner(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        self.wq.visit_inner(&format!("{prefix}.wq"), f);
        self.wk.visit_inner(&format!("{prefix}.wk"), f);
        self.wv.visit_inner(&format!("{prefix}.wv"), f);
        self.wo.visit_inner(&format!("{prefix}.wo"), f);
    }

    fn visit_inner_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.wq.visit_inner_mut(&format!("{prefix}.wq"), f);
        self.wk.visit_inner_mut(&format!("{prefix}.wk"), f);
        self.wv.visit_inner_mut(&format!("{prefix}.wv"), f);
        self.wo.visit_inner_mut(&format!("{prefix}.wo"), f);
    }
}

impl BoundAttention {
    /// Bidirectional multi-head self-attention over the full sequence.
    pub fn forward(&self, tape: &mut Tape, x: VarId) -> VarId {
        let dim = tape.cols(x);
        let dh = dim / self.heads;
        let q = self.wq.forward(tape, x);
        let k = self.wk.forward(tape, x);
        let v = self.wv.forward(tape, x);
        let scale = 1.0 / (dh as f64).sqrt();
        let mut ctx = None;
        for h in 0..self.heads {
            let (from, to) = (h * dh, (h + 1) * dh);
            let qh = tape.cols_slice(q, from, to);
            let kh = tape.cols_slice(k, from, to);
            let vh = tape.cols_slice(v, from, to);
            let kt = tape.transpose(kh);
            let scores = tape.matmul(qh, kt);
            let scores = tape.affine(scores, scale, 0.0);
            let probs = tape.softmax_rows(scores);
            let head_ctx = tape.matmul(probs, vh);
            ctx = Some(match ctx {
                None => head_ctx,
                Some(acc) => tape.concat_cols(acc, head_ctx),
            });
        }
        self.wo.forward(tape, ctx.expect("at least one head"))
    }
}

#[derive(Debug, Clone)]
pub struct Block {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub ffn1: Linear,
    pub ffn2: Linear,
}

pub struct BoundBlock {
    ln1: BoundLayerNorm,
    attn: BoundAttention,
    ln2: BoundLayerNorm,
    ffn1: BoundLinear,
    ffn2: BoundLinear,
}

impl BoundBlock {
    pub fn forward(&self, tape: &mut Tape, x: VarId) -> VarId {
        let normed = self.ln1.forward(tape, x);
        let attended = self.attn.forward(tape, normed);
        let x = tape.add(x, attended);
        let normed = self.ln2.forward(tape, x);
        let hidden = self.ffn1.forward(tape, normed);
        let hidden = tape.gelu(hidden);
        let ffn_out = self.ffn2.forward(tape, hidden);
        tape.add(x, ffn_out)
    }
}

/// Token embedding + learned positional embedding + pre-norm
/// self-attention blocks + a final layer norm.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub cfg: EncoderConfig,
    pub tok: Tensor, // [vocab, dim]
    pub pos: Tensor, // [max_len, dim]
    pub blocks: Vec<Block>,
    pub ln_f: LayerNorm,
}

pub struct BoundEncoder {
    max_len: usize,
    vocab: usize,
    tok: VarId,
    pos: VarId,
    blocks: Vec<BoundBlock>,
    ln_f: BoundLayerNorm,
}

impl Encoder {
    pub fn init(cfg: EncoderConfig, rng: &mut Rng) -> Self {
        assert!(cfg.dim % cfg.heads == 0, "dim must divide into heads");
        let blocks = (0..cfg.layers)
            .map(|_| Block {
                ln1: LayerNorm::init(cfg.dim),
                attn: Attention::init(cfg.dim, cfg.heads, rng),
                ln2: LayerNorm::init(cfg.dim),
                ffn1: Linear::init(cfg.dim, 2 * cfg.dim, rng),
                ffn2: Linear::init(2 * cfg.dim, cfg.dim, rng),
            })
            .collect();
        Encoder {
            cfg,
            tok: Tensor::uniform_init(vec![cfg.vocab, cfg.dim], rng),
            pos: Tensor::uniform_init(vec![cfg.max_len, cfg.dim], rng),
            blocks,
            ln_f: LayerNorm::init(cfg.dim),
        }
    }

    pub fn bind(&self, tape: &mut Tape, prefix: &str) -> BoundEncoder {
        BoundEncoder {
            max_len: self.cfg.max_len,
            vocab: self.cfg.vocab,
            tok: tape.param(&format!("{prefix}.tok"), &self.tok),
            pos: tape.param(&format!("{prefix}.pos"), &self.pos),
            blocks: self
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| BoundBlock {
                    ln1: b.ln1.bind(tape, &format!("{prefix}.block{i}.ln1")),
                    attn: b.attn.bind(tape, &format!("{prefix}.block{i}.attn")),
                    ln2: b.ln2.bind(tape, &format!("{prefix}.block{i}.ln2")),
                    ffn1: b.ffn1.bind(tape, &format!("{prefix}.block{i}.ffn1")),
                    ffn2: b.ffn2.bind(tape, &format!("{prefix}.block{i}.ffn2")),
                })
                .collect(),
            ln_f: self.ln_f.bind(tape, &format!("{prefix}.ln_f")),
        }
    }

    pub fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::Data("cannot encode an empty sentence".into()));
        }
        if ids.len() > self.cfg.max_len {
            return Err(Error::Data(format!(
                "sequence length {} exceeds max {}",
                ids.len(),
                self.cfg.max_len
            )));
        }
        if let Some(bad) = ids.iter().find(|id| **id >= self.cfg.vocab) {
            return Err(Error::Data(format!(
                "token id {bad} out of range for vocab {}",
                self.cfg.vocab
            )));
        }
        Ok(())
    }
}

impl Params for Encoder {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("encoder.tok", &self.tok);
        f("encoder.pos", &self.pos);
        for (i, b) in self.blocks.iter().enumerate() {
            b.ln1.visit_inner(&format!("encoder.block{i}.ln1"), f);
            b.attn.visit_inner(&format!("encoder.block{i}.attn"), f);
            b.ln2.visit_inner(&format!("encoder.block{i}.ln2"), f);
            b.ffn1.visit_inner(&format!("encoder.block{i}.ffn1"), f);
            b.ffn2.visit_inner(&format!("encoder.block{i}.ffn2"), f);
        }
        self.ln_f.visit_inner("encoder.ln_f", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("encoder.tok", &mut self.tok);
        f("encoder.pos", &mut self.pos);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.ln1.visit_inner_mut(&format!("encoder.block{i}.ln1"), f);
            b.attn.visit_inner_mut(&format!("encoder.block{i}.attn"), f);
            b.ln2.visit_inner_mut(&format!("encoder.block{i}.ln2"), f);
            b.ffn1.visit_inner_mut(&format!("encoder.block{i}.ffn1"), f);
            b.ffn2.visit_inner_mut(&format!("encoder.block{i}.ffn2"), f);
        }
        self.ln_f.visit_inner_mut("encoder.ln_f", f);
    }
}

impl BoundEncoder {
    /// Per-token embedding matrix for one sentence, shape [n, dim].
    pub fn forward(&self, tape: &mut Tape, ids: &[usize]) -> VarId {
        assert!(!ids.is_empty() && ids.len() <= self.max_len);
        assert!(ids.iter().all(|id| *id < self.vocab));
        let tok = tape.embed_rows(self.tok, ids);
        let positions: Vec<usize> = (0..ids.len()).collect();
        let pos = tape.embed_rows(self.pos, &positions);
        let mut x = tape.add(tok, pos);
        for b in &self.blocks {
            x = b.forward(tape, x);
        }
        self.ln_f.forward(tape, x)
    }
}

/// Encoder forward as a plain function of values; validates ids and length.
pub fn encoder_forward(encoder: &Encoder, ids: &[usize]) -> Result<Tensor> {
    encoder.check_ids(ids)?;
    let mut tape = Tape::new();
    let bound = encoder.bind(&mut tape, "encoder");
    let e = bound.forward(&mut tape, ids);
    Tensor::new(vec![ids.len(), encoder.cfg.dim], tape.data(e).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_cell(input: usize, hidden: usize) -> GruCell {
        let mut rng = Rng::new(0);
        let mut cell = GruCell::init(input, hidden, &mut rng);
        cell.visit_inner_mut("g", &mut |_, t| t.data.iter_mut().for_each(|v| *v = 0.0));
        cell
    }

    #[test]
    fn gru_zero_params_halves_hidden() {
        // gates are sigmoid(0)=0.5, candidate tanh(0)=0, so h' = 0.5*h
        let cell = zero_cell(3, 1);
        let h = gru_step(&cell, &[0.3, -2.0, 9.0], &[0.8]).unwrap();
        assert!((h[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn gru_zero_hidden_stays_zero_with_zero_params() {
        let cell = zero_cell(2, 4);
        let h = gru_step(&cell, &[1.0, -1.0], &[0.0; 4]).unwrap();
        assert!(h.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gru_rejects_dim_mismatch() {
        let cell = zero_cell(2, 4);
        assert!(gru_step(&cell, &[1.0], &[0.0; 4]).is_err());
        assert!(gru_step(&cell, &[1.0, 2.0], &[0.0; 3]).is_err());
    }

    #[test]
    fn encoder_shape_single_token() {
        let mut rng = Rng::new(1);
        let enc = Encoder::init(
            EncoderConfig {
                vocab: 11,
                dim: 8,
                heads: 2,
                layers: 1,
                max_len: 6,
            },
            &mut rng,
        );
        let e = encoder_forward(&enc, &[3]).unwrap();
        assert_eq!(e.shape, vec![1, 8]);
    }

    #[test]
    fn encoder_rejects_bad_input() {
        let mut rng = Rng::new(1);
        let enc = Encoder::init(
            EncoderConfig {
                vocab: 11,
                dim: 8,
                heads: 2,
                layers: 1,
                max_len: 3,
            },
            &mut rng,
        );
        assert!(encoder_forward(&enc, &[11]).is_err());
        assert!(encoder_forward(&enc, &[0, 1, 2, 3]).is_err());
        assert!(encoder_forward(&enc, &[]).is_err());
    }

    #[test]
    fn encoder_permutation_equivariant_without_positions() {
        let mut rng = Rng::new(5);
        let mut enc = Encoder::init(
            EncoderConfig {
                vocab: 16,
                dim: 8,
                heads: 2,
                layers: 2,
                max_len: 8,
            },
            &mut rng,
        );
        enc.pos.data.iter_mut().for_each(|v| *v = 0.0);
        let ids = [4, 9, 1, 13, 7];
        let perm = [2usize, 0, 4, 1, 3];
        let permuted: Vec<usize> = perm.iter().map(|&p| ids[p]).collect();
        let e = encoder_forward(&enc, &ids).unwrap();
        let ep = encoder_forward(&enc, &permuted).unwrap();
        for (t, &p) in perm.iter().enumerate() {
            for j in 0..8 {
                let a = e.data[p * 8 + j];
                let b = ep.data[t * 8 + j];
                assert!((a - b).abs() < 1e-12, "row {t} col {j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn encoder_deterministic() {
        let mut rng = Rng::new(9);
        let enc = Encoder::init(
            EncoderConfig {
                vocab: 10,
                dim: 8,
                heads: 2,
                layers: 1,
                max_len: 8,
            },
            &mut rng,
        );
        let a = encoder_forward(&enc, &[1, 2, 3]).unwrap();
        let b = encoder_forward(&enc, &[1, 2, 3]).unwrap();
        assert_eq!(a.data, b.data);
    }
}
