//! Reverse-mode differentiation over a recorded operation list.
//!
//! Forward calls allocate value slots in an arena and push one record per
//! operation; `backward` replays the records in reverse, accumulating
//! vector-Jacobian products. Everything is f64 and single-threaded with a
//! fixed reduction order, so results are bitwise reproducible.

use crate::error::{Error, Result};
use crate::substrate::tensor::Tensor;

pub type VarId = usize;

#[derive(Debug, Clone, Copy)]
pub struct TapeMark {
    slots: usize,
    ops: usize,
}

struct Slot {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

enum Op {
    /// out = a @ b
    MatMul { a: VarId, b: VarId, out: VarId },
    /// out = aᵀ
    Transpose { a: VarId, out: VarId },
    /// out = a + b (same shape)
    Add { a: VarId, b: VarId, out: VarId },
    /// out[i,:] = a[i,:] + v
    AddRow { a: VarId, v: VarId, out: VarId },
    /// out = a ⊙ b
    Mul { a: VarId, b: VarId, out: VarId },
    /// out = mul·a + add, elementwise with scalar constants; only the
    /// multiplier matters on the way back
    Affine { a: VarId, mul: f64, out: VarId },
    Sigmoid { a: VarId, out: VarId },
    Tanh { a: VarId, out: VarId },
    Gelu { a: VarId, out: VarId },
    /// Per-row normalization with learned gain and bias.
    LayerNorm {
        a: VarId,
        gamma: VarId,
        beta: VarId,
        out: VarId,
        rstd: Vec<f64>,
    },
    /// Row-wise stable softmax.
    SoftmaxRows { a: VarId, out: VarId },
    /// out (scalar) = Σ_t w_t · (logsumexp(logits[t]) − logits[t][target_t])
    CeWeighted {
        logits: VarId,
        targets: Vec<usize>,
        weights: Vec<f64>,
        out: VarId,
    },
    /// out (scalar) = mean of all entries
    MeanAll { a: VarId, out: VarId },
    /// Row slice starting at `from`; extent is recovered from the output
    Rows {
        a: VarId,
        from: usize,
        out: VarId,
    },
    /// Column slice [from, to)
    Cols {
        a: VarId,
        from: usize,
        to: usize,
        out: VarId,
    },
    /// Horizontal concatenation of two matrices with equal row counts.
    ConcatCols { a: VarId, b: VarId, out: VarId },
    /// Vertical stack; every part has the same column count.
    ConcatRows { parts: Vec<VarId>, out: VarId },
    /// out[t,:] = table[ids[t],:]
    EmbedRows {
        table: VarId,
        ids: Vec<usize>,
        out: VarId,
    },
}

#[derive(Default)]
pub struct Tape {
    slots: Vec<Slot>,
    ops: Vec<Op>,
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(String, VarId)>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, data: Vec<f64>, rows: usize, cols: usize) -> VarId {
        debug_assert_eq!(data.len(), rows * cols);
        self.slots.push(Slot { data, rows, cols });
        self.grads.push(None);
        self.slots.len() - 1
    }

    /// Register a tracked parameter. Names must be unique per tape.
    pub fn param(&mut self, name: &str, t: &Tensor) -> VarId {
        debug_assert!(
            self.params.iter().all(|(n, _)| n != name),
            "duplicate parameter name {name}"
        );
        let id = self.push(t.data.clone(), t.rows(), t.cols());
        self.params.push((name.to_string(), id));
        id
    }

    /// A constant input; no gradient is accumulated for it.
    pub fn value(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> VarId {
        self.push(data, rows, cols)
    }

    /// Watermark for [`Tape::truncate`].
    pub fn mark(&self) -> TapeMark {
        TapeMark {
            slots: self.slots.len(),
            ops: self.ops.len(),
        }
    }

    /// Discard every slot and op recorded after `mark`. Lets evaluation
    /// loops reuse one tape (and its registered parameters) across many
    /// sentences without the arena growing; never call after `backward`.
    pub fn truncate(&mut self, mark: TapeMark) {
        self.slots.truncate(mark.slots);
        self.grads.truncate(mark.slots);
        self.ops.truncate(mark.ops);
    }

    pub fn data(&self, v: VarId) -> &[f64] {
        &self.slots[v].data
    }

    pub fn rows(&self, v: VarId) -> usize {
        self.slots[v].rows
    }

    pub fn cols(&self, v: VarId) -> usize {
        self.slots[v].cols
    }

    pub fn grad(&self, v: VarId) -> Option<&[f64]> {
        self.grads[v].as_deref()
    }

    /// Tracked parameters with their accumulated gradients (zeros where no
    /// gradient flowed).
    pub fn param_grads(&self) -> Vec<(&str, Vec<f64>)> {
        self.params
            .iter()
            .map(|(name, id)| {
                let g = match &self.grads[*id] {
                    Some(g) => g.clone(),
                    None => vec![0.0; self.slots[*id].data.len()],
                };
                (name.as_str(), g)
            })
            .collect()
    }

    // ── forward ops ──────────────────────────────────────────────────

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let (m, k) = (self.rows(a), self.cols(a));
        let (k2, n) = (self.rows(b), self.cols(b));
        assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
        let mut out = vec![0.0; m * n];
        matmul_into(&self.slots[a].data, &self.slots[b].data, &mut out, m, k, n);
        let id = self.push(out, m, n);
        self.ops.push(Op::MatMul { a, b, out: id });
        id
    }

    pub fn transpose(&mut self, a: VarId) -> VarId {
        let (m, n) = (self.rows(a), self.cols(a));
        let mut out = vec![0.0; m * n];
        transpose_into(&self.slots[a].data, &mut out, m, n);
        let id = self.push(out, n, m);
        self.ops.push(Op::Transpose { a, out: id });
        id
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        assert_eq!(self.slots[a].data.len(), self.slots[b].data.len());
        let data: Vec<f64> = self.slots[a]
            .data
            .iter()
            .zip(&self.slots[b].data)
            .map(|(x, y)| x + y)
            .collect();
        let (m, n) = (self.rows(a), self.cols(a));
        let id = self.push(data, m, n);
        self.ops.push(Op::Add { a, b, out: id });
        id
    }

    pub fn add_row(&mut self, a: VarId, v: VarId) -> VarId {
        let (m, n) = (self.rows(a), self.cols(a));
        assert_eq!(self.slots[v].data.len(), n, "bias length vs columns");
        let mut data = self.slots[a].data.clone();
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] += self.slots[v].data[j];
            }
        }
        let id = self.push(data, m, n);
        self.ops.push(Op::AddRow { a, v, out: id });
        id
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        assert_eq!(self.slots[a].data.len(), self.slots[b].data.len());
        let data: Vec<f64> = self.slots[a]
            .data
            .iter()
            .zip(&self.slots[b].data)
            .map(|(x, y)| x * y)
            .collect();
        let (m, n) = (self.rows(a), self.cols(a));
        let id = self.push(data, m, n);
        self.ops.push(Op::Mul { a, b, out: id });
        id
    }

    pub fn affine(&mut self, a: VarId, mul: f64, add: f64) -> VarId {
        let data: Vec<f64> = self.slots[a].data.iter().map(|x| mul * x + add).collect();
        let (m, n) = (self.rows(a), self.cols(a));
        let id = self.push(data, m, n);
        self.ops.push(Op::Affine { a, mul, out: id });
        id
    }

    pub fn sigmoid(&mut self, a: VarId) -> VarId {
        let data: Vec<f64> = self.slots[a].data.iter().map(|x| sigmoid(*x)).collect();
        let (m, n) = (self.rows(a), self.cols(a));
        let id = self.push(data, m, n);
        self.ops.push(Op::Sigmoid { a, out: id });
        id
    }

    pub fn tanh(&mut self, a: VarId) -> VarId {
        let data: Vec<f64> = self.slots[a].data.iter().map(|x| x.tanh()).collect();
        let (m, n) = (self.rows(a), self.cols(a));
        let id = self.push(data, m, n);
        self.ops.push(Op::Tanh { a, out: id });
        id
    }

    pub fn gelu(&mut self, a: VarId) -> VarId {
        let data: Vec<f64> = self.slots[a].data.iter().map(|x| gelu(*x)).collect();
        let (m, n) = (self.rows(a), self.cols(a));
        let id = self.push(data, m, n);
        self.ops.push(Op::Gelu { a, out: id });
        id
    }

    pub fn layer_norm(&mut self, a: VarId, gamma: VarId, beta: VarId, eps: f64) -> VarId {
        let (m, n) = (self.rows(a), self.cols(a));
        assert_eq!(self.slots[gamma].data.len(), n);
        assert_eq!(self.slots[beta].data.len(), n);
        let mut data = vec![0.0; m * n];
        let mut rstd = vec![0.0; m];
        for i in 0..m {
            let row = &self.slots[a].data[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            let r = 1.0 / (var + eps).sqrt();
            rstd[i] = r;
            for j in 0..n {
                let xhat = (row[j] - mean) * r;
                data[i * n + j] = self.slots[gamma].data[j] * xhat + self.slots[beta].data[j];
            }
        }
        let id = self.push(data, m, n);
        self.ops.push(Op::LayerNorm {
            a,
            gamma,
            beta,
            out: id,
            rstd,
        });
        id
    }

    pub fn softmax_rows(&mut self, a: VarId) -> VarId {
        let (m, n) = (self.rows(a), self.cols(a));
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &self.slots[a].data[i * n..(i + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..n {
                let e = (row[j] - max).exp();
                data[i * n + j] = e;
                sum += e;
            }
            for j in 0..n {
                data[i * n + j] /= sum;
            }
        }
        let id = self.push(data, m, n);
        self.ops.push(Op::SoftmaxRows { a, out: id });
        id
    }

    /// Weighted cross-entropy over rows of a logits matrix, fused with the
    /// softmax for stability. `weights[t]` is the contribution of row `t`
    /// (use 1/num_tokens for a mean, 0 to mask).
    pub fn ce_weighted(&mut self, logits: VarId, targets: &[usize], weights: &[f64]) -> VarId {
        let (m, n) = (self.rows(logits), self.cols(logits));
        assert_eq!(targets.len(), m);
        assert_eq!(weights.len(), m);
        let mut total = 0.0;
        for t in 0..m {
            assert!(targets[t] < n, "target {} out of range {}", targets[t], n);
            let row = &self.slots[logits].data[t * n..(t + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += weights[t] * (lse - row[targets[t]]);
        }
        let id = self.push(vec![total], 1, 1);
        self.ops.push(Op::CeWeighted {
            logits,
            targets: targets.to_vec(),
            weights: weights.to_vec(),
            out: id,
        });
        id
    }

    pub fn mean_all(&mut self, a: VarId) -> VarId {
        let n = self.slots[a].data.len();
        let mean = self.slots[a].data.iter().sum::<f64>() / n as f64;
        let id = self.push(vec![mean], 1, 1);
        self.ops.push(Op::MeanAll { a, out: id });
        id
    }

    pub fn rows_slice(&mut self, a: VarId, from: usize, to: usize) -> VarId {
        let (m, n) = (self.rows(a), self.cols(a));
        assert!(from < to && to <= m);
        let data = self.slots[a].data[from * n..to * n].to_vec();
        let id = self.push(data, to - from, n);
        self.ops.push(Op::Rows { a, from, out: id });
        id
    }

    pub fn cols_slice(&mut self, a: VarId, from: usize, to: usize) -> VarId {
        let (m, n) = (self.rows(a), self.cols(a));
        assert!(from < to && to <= n);
        let w = to - from;
        let mut data = vec![0.0; m * w];
        for i in 0..m {
            data[i * w..(i + 1) * w]
                .copy_from_slice(&self.slots[a].data[i * n + from..i * n + to]);
        }
        let id = self.push(data, m, w);
        self.ops.push(Op::Cols { a, from, to, out: id });
        id
    }

    pub fn concat_cols(&mut self, a: VarId, b: VarId) -> VarId {
        let (m, na) = (self.rows(a), self.cols(a));
        let (mb, nb) = (self.rows(b), self.cols(b));
        assert_eq!(m, mb, "concat_cols row counts");
        let n = na + nb;
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            data[i * n..i * n + na].copy_from_slice(&self.slots[a].data[i * na..(i + 1) * na]);
            data[i * n + na..(i + 1) * n]
                .copy_from_slice(&self.slots[b].data[i * nb..(i + 1) * nb]);
        }
        let id = self.push(data, m, n);
        self.ops.push(Op::ConcatCols { a, b, out: id });
        id
    }

    pub fn concat_rows(&mut self, parts: &[VarId]) -> VarId {
        assert!(!parts.is_empty());
        let n = self.cols(parts[0]);
        let mut data = Vec::new();
        let mut m = 0;
        for &p in parts {
            assert_eq!(self.cols(p), n, "concat_rows column counts");
            data.extend_from_slice(&self.slots[p].data);
            m += self.rows(p);
        }
        let id = self.push(data, m, n);
        self.ops.push(Op::ConcatRows {
            parts: parts.to_vec(),
            out: id,
        });
        id
    }

    pub fn embed_rows(&mut self, table: VarId, ids: &[usize]) -> VarId {
        let (v, d) = (self.rows(table), self.cols(table));
        let mut data = vec![0.0; ids.len() * d];
        for (t, &id) in ids.iter().enumerate() {
            assert!(id < v, "embedding id {id} out of range {v}");
            data[t * d..(t + 1) * d].copy_from_slice(&self.slots[table].data[id * d..(id + 1) * d]);
        }
        let out = self.push(data, ids.len(), d);
        self.ops.push(Op::EmbedRows {
            table,
            ids: ids.to_vec(),
            out,
        });
        out
    }

    // ── backward ─────────────────────────────────────────────────────

    fn accumulate(&mut self, v: VarId, delta: &[f64]) {
        match &mut self.grads[v] {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => self.grads[v] = Some(delta.to_vec()),
        }
    }

    /// Run the reverse pass from a scalar loss. Errors if the loss is not
    /// a finite scalar.
    pub fn backward(&mut self, loss: VarId) -> Result<()> {
        if self.slots[loss].data.len() != 1 {
            return Err(Error::Shape("backward requires a scalar loss".into()));
        }
        let value = self.slots[loss].data[0];
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("loss value {value}")));
        }
        self.grads[loss] = Some(vec![1.0]);
        for idx in (0..self.ops.len()).rev() {
            self.backward_op(idx);
        }
        Ok(())
    }

    fn backward_op(&mut self, idx: usize) {
        // Records are immutable after the forward pass; take the op out to
        // satisfy the borrow checker and put it back unchanged.
        let op = std::mem::replace(
            &mut self.ops[idx],
            Op::MeanAll {
                a: usize::MAX,
                out: usize::MAX,
            },
        );
        match &op {
            Op::MatMul { a, b, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let (m, k) = (self.rows(*a), self.cols(*a));
                    let n = self.cols(*b);
                    // dA = dOut @ Bᵀ
                    let mut bt = vec![0.0; k * n];
                    transpose_into(&self.slots[*b].data, &mut bt, k, n);
                    let mut da = vec![0.0; m * k];
                    matmul_into(&d_out, &bt, &mut da, m, n, k);
                    self.accumulate(*a, &da);
                    // dB = Aᵀ @ dOut
                    let mut at = vec![0.0; m * k];
                    transpose_into(&self.slots[*a].data, &mut at, m, k);
                    let mut db = vec![0.0; k * n];
                    matmul_into(&at, &d_out, &mut db, k, m, n);
                    self.accumulate(*b, &db);
                }
            }
            Op::Transpose { a, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let (m, n) = (self.rows(*a), self.cols(*a));
                    let mut da = vec![0.0; m * n];
                    transpose_into(&d_out, &mut da, n, m);
                    self.accumulate(*a, &da);
                }
            }
            Op::Add { a, b, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    self.accumulate(*a, &d_out);
                    self.accumulate(*b, &d_out);
                }
            }
            Op::AddRow { a, v, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    self.accumulate(*a, &d_out);
                    let n = self.cols(*a);
                    let m = self.rows(*a);
                    let mut dv = vec![0.0; n];
                    for i in 0..m {
                        for j in 0..n {
                            dv[j] += d_out[i * n + j];
                        }
                    }
                    self.accumulate(*v, &dv);
                }
            }
            Op::Mul { a, b, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let da: Vec<f64> = d_out
                        .iter()
                        .zip(&self.slots[*b].data)
                        .map(|(g, y)| g * y)
                        .collect();
                    let db: Vec<f64> = d_out
                        .iter()
                        .zip(&self.slots[*a].data)
                        .map(|(g, x)| g * x)
                        .collect();
                    self.accumulate(*a, &da);
                    self.accumulate(*b, &db);
                }
            }
            Op::Affine { a, mul, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let da: Vec<f64> = d_out.iter().map(|g| g * mul).collect();
                    self.accumulate(*a, &da);
                }
            }
            Op::Sigmoid { a, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let da: Vec<f64> = d_out
                        .iter()
                        .zip(&self.slots[*out].data)
                        .map(|(g, y)| g * y * (1.0 - y))
                        .collect();
                    self.accumulate(*a, &da);
                }
            }
            Op::Tanh { a, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let da: Vec<f64> = d_out
                        .iter()
                        .zip(&self.slots[*out].data)
                        .map(|(g, y)| g * (1.0 - y * y))
                        .collect();
                    self.accumulate(*a, &da);
                }
            }
            Op::Gelu { a, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let da: Vec<f64> = d_out
                        .iter()
                        .zip(&self.slots[*a].data)
                        .map(|(g, x)| g * gelu_deriv(*x))
                        .collect();
                    self.accumulate(*a, &da);
                }
            }
            Op::LayerNorm {
                a,
                gamma,
                beta,
                out,
                rstd,
            } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let (m, n) = (self.rows(*a), self.cols(*a));
                    let mut da = vec![0.0; m * n];
                    let mut dgamma = vec![0.0; n];
                    let mut dbeta = vec![0.0; n];
                    for i in 0..m {
                        let row = &self.slots[*a].data[i * n..(i + 1) * n];
                        let mean = row.iter().sum::<f64>() / n as f64;
                        let r = rstd[i];
                        // xhat and the two reduction terms of the LN backward
                        let mut sum_dxhat = 0.0;
                        let mut sum_dxhat_xhat = 0.0;
                        let mut xhat = vec![0.0; n];
                        let mut dxhat = vec![0.0; n];
                        for j in 0..n {
                            xhat[j] = (row[j] - mean) * r;
                            dxhat[j] = d_out[i * n + j] * self.slots[*gamma].data[j];
                            sum_dxhat += dxhat[j];
                            sum_dxhat_xhat += dxhat[j] * xhat[j];
                            dgamma[j] += d_out[i * n + j] * xhat[j];
                            dbeta[j] += d_out[i * n + j];
                        }
                        let inv_n = 1.0 / n as f64;
                        for j in 0..n {
                            da[i * n + j] = r
                                * (dxhat[j]
                                    - inv_n * sum_dxhat
                                    - xhat[j] * inv_n * sum_dxhat_xhat);
                        }
                    }
                    self.accumulate(*a, &da);
                    self.accumulate(*gamma, &dgamma);
                    self.accumulate(*beta, &dbeta);
                }
            }
            Op::SoftmaxRows { a, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let (m, n) = (self.rows(*a), self.cols(*a));
                    let mut da = vec![0.0; m * n];
                    for i in 0..m {
                        let y = &self.slots[*out].data[i * n..(i + 1) * n];
                        let g = &d_out[i * n..(i + 1) * n];
                        let dot: f64 = y.iter().zip(g).map(|(yi, gi)| yi * gi).sum();
                        for j in 0..n {
                            da[i * n + j] = y[j] * (g[j] - dot);
                        }
                    }
                    self.accumulate(*a, &da);
                }
            }
            Op::CeWeighted {
                logits,
                targets,
                weights,
                out,
            } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let g = d_out[0];
                    let (m, n) = (self.rows(*logits), self.cols(*logits));
                    let mut dl = vec![0.0; m * n];
                    for t in 0..m {
                        if weights[t] == 0.0 {
                            continue;
                        }
                        let row = &self.slots[*logits].data[t * n..(t + 1) * n];
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let mut sum = 0.0;
                        for j in 0..n {
                            dl[t * n + j] = (row[j] - max).exp();
                            sum += dl[t * n + j];
                        }
                        for j in 0..n {
                            let p = dl[t * n + j] / sum;
                            let ind = if j == targets[t] { 1.0 } else { 0.0 };
                            dl[t * n + j] = g * weights[t] * (p - ind);
                        }
                    }
                    self.accumulate(*logits, &dl);
                }
            }
            Op::MeanAll { a, out } => {
                if *a == usize::MAX {
                    // placeholder left by the take-and-replace dance
                } else if let Some(d_out) = self.grads[*out].clone() {
                    let n = self.slots[*a].data.len();
                    let da = vec![d_out[0] / n as f64; n];
                    self.accumulate(*a, &da);
                }
            }
            Op::Rows { a, from, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let n = self.cols(*a);
                    let mut da = vec![0.0; self.slots[*a].data.len()];
                    da[from * n..from * n + d_out.len()].copy_from_slice(&d_out);
                    self.accumulate(*a, &da);
                }
            }
            Op::Cols { a, from, to, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let (m, n) = (self.rows(*a), self.cols(*a));
                    let w = to - from;
                    let mut da = vec![0.0; m * n];
                    for i in 0..m {
                        da[i * n + from..i * n + to]
                            .copy_from_slice(&d_out[i * w..(i + 1) * w]);
                    }
                    self.accumulate(*a, &da);
                }
            }
            Op::ConcatCols { a, b, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let (m, na) = (self.rows(*a), self.cols(*a));
                    let nb = self.cols(*b);
                    let n = na + nb;
                    let mut da = vec![0.0; m * na];
                    let mut db = vec![0.0; m * nb];
                    for i in 0..m {
                        da[i * na..(i + 1) * na].copy_from_slice(&d_out[i * n..i * n + na]);
                        db[i * nb..(i + 1) * nb]
                            .copy_from_slice(&d_out[i * n + na..(i + 1) * n]);
                    }
                    self.accumulate(*a, &da);
                    self.accumulate(*b, &db);
                }
            }
            Op::ConcatRows { parts, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let n = self.cols(*out);
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.rows(p);
                        let dp = d_out[offset * n..(offset + rows) * n].to_vec();
                        self.accumulate(p, &dp);
                        offset += rows;
                    }
                }
            }
            Op::EmbedRows { table, ids, out } => {
                if let Some(d_out) = self.grads[*out].clone() {
                    let d = self.cols(*table);
                    let mut dt = vec![0.0; self.slots[*table].data.len()];
                    for (t, &id) in ids.iter().enumerate() {
                        for j in 0..d {
                            dt[id * d + j] += d_out[t * d + j];
                        }
                    }
                    self.accumulate(*table, &dt);
                }
            }
        }
        self.ops[idx] = op;
    }
}

fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    // i-k-j loop order keeps the inner loop contiguous in b and out.
    for i in 0..m {
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += aik * brow[j];
            }
        }
    }
}

fn transpose_into(a: &[f64], out: &mut [f64], m: usize, n: usize) {
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_deriv(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_known_values() {
        let mut tape = Tape::new();
        let a = tape.value(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = tape.value(2, 2, vec![5.0, 6.0, 7.0, 8.0]);
        let c = tape.matmul(a, b);
        assert_eq!(tape.data(c), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn backward_through_mul_chain() {
        // loss = mean(x * x) over 3 entries -> d/dx = 2x/3
        let mut tape = Tape::new();
        let t = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let x = tape.param("x", &t);
        let sq = tape.mul(x, x);
        let loss = tape.mean_all(sq);
        tape.backward(loss).unwrap();
        let g = tape.grad(x).unwrap();
        for (gi, xi) in g.iter().zip(&t.data) {
            assert!((gi - 2.0 * xi / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ce_weighted_matches_reference() {
        use crate::substrate::ops;
        let mut tape = Tape::new();
        let logits = tape.value(2, 3, vec![0.1, -0.4, 0.7, 1.0, 0.0, -1.0]);
        let loss = tape.ce_weighted(logits, &[2, 0], &[0.5, 0.5]);
        let want = 0.5 * ops::cross_entropy(&[0.1, -0.4, 0.7], 2).unwrap()
            + 0.5 * ops::cross_entropy(&[1.0, 0.0, -1.0], 0).unwrap();
        assert!((tape.data(loss)[0] - want).abs() < 1e-12);
    }

    #[test]
    fn backward_rejects_nonscalar_and_nonfinite() {
        let mut tape = Tape::new();
        let v = tape.value(1, 2, vec![1.0, 2.0]);
        assert!(tape.backward(v).is_err());

        let mut tape = Tape::new();
        let v = tape.value(1, 1, vec![f64::NAN]);
        assert!(tape.backward(v).is_err());
    }

    #[test]
    fn unused_param_gets_zero_grad() {
        let mut tape = Tape::new();
        let used = tape.param("used", &Tensor::new(vec![1], vec![2.0]).unwrap());
        let _unused = tape.param("unused", &Tensor::new(vec![1], vec![5.0]).unwrap());
        let sq = tape.mul(used, used);
        let loss = tape.mean_all(sq);
        tape.backward(loss).unwrap();
        let grads = tape.param_grads();
        assert_eq!(grads[1].0, "unused");
        assert_eq!(grads[1].1, vec![0.0]);
    }
}
