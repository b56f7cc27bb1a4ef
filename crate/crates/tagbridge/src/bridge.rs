//! The label-consolidation model: one shared encoder, one supervisor head
//! per tagset, and one label-conditioned GRU decoder per tagset.
//!
//! Training on a batch labeled on one side (say Y) runs four pieces over
//! the shared encoding `e`:
//!
//!   * `S_Y(e)` — supervisor logits for the batch's own tags, trained with
//!     cross entropy against gold;
//!   * `S_Z(e)` — supervisor logits for the *other* tagset, used only to
//!     sample one surrogate tag per token (the sample is detached: no
//!     gradient reaches `S_Z` from what follows);
//!   * heavy dropout on `e` (rate 0.85 by default), applied only on the
//!     decoder's encoder-input edge;
//!   * `D_Y(dropout(e), ẑ)` — the decoder consumes each encoder row
//!     concatenated with the embedding of that position's surrogate tag
//!     and is trained to recover the gold tags.
//!
//! Loss is `CE(gold, decoder) + CE(gold, supervisor)`, each term averaged
//! per token. At evaluation the decoder is fed the other side's *gold*
//! tags instead of surrogates. The deliberately broken `cheat` variant
//! derives the surrogate from the opposite decoder fed gold labels, which
//! leaks the answer and collapses at validation; it is kept to reproduce
//! that failure.

use crate::corpus::types::{Side, TagId};
use crate::error::{Error, Result};
use crate::substrate::nn::{
    BoundEncoder, BoundGruCell, BoundLinear, Encoder, EncoderConfig, GruCell, Linear, Params,
};
use crate::substrate::ops::{argmax, dropout_mask, sample_categorical, softmax};
use crate::substrate::rng::Rng;
use crate::substrate::tape::{Tape, VarId};
use crate::substrate::tensor::Tensor;

/// How a forward pass is wired; selects dropout and surrogate handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    TrainSampled,
    EvalTranslate,
    EvalSupervisorOnly,
    EvalNoLabel,
    TrainCheat,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BridgeConfig {
    pub encoder: EncoderConfig,
    pub gru_hidden: usize,
    pub label_dim: usize,
    /// Dropout rate on the decoder's encoder-input edge.
    pub dropout: f64,
    pub n_y: usize,
    pub n_z: usize,
}

impl BridgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Data(format!(
                "dropout {} outside [0,1)",
                self.dropout
            )));
        }
        if self.encoder.dim % self.encoder.heads != 0 {
            return Err(Error::Data(format!(
                "model dim {} not divisible by {} heads",
                self.encoder.dim, self.encoder.heads
            )));
        }
        if self.n_y == 0 || self.n_z == 0 {
            return Err(Error::Data("both tagsets must be non-empty".into()));
        }
        Ok(())
    }

    pub fn tags(&self, side: Side) -> usize {
        match side {
            Side::Y => self.n_y,
            Side::Z => self.n_z,
        }
    }
}

/// GRU plus output projection for one side.
#[derive(Debug, Clone)]
pub struct DecoderHead {
    pub gru: GruCell,
    pub out: Linear,
}

pub struct BridgeModel {
    pub cfg: BridgeConfig,
    /// The single encoder parameter set shared by every head.
    pub encoder: Encoder,
    pub sup_y: Linear,
    pub sup_z: Linear,
    /// Label embedding tables, [tags, label_dim].
    pub emb_y: Tensor,
    pub emb_z: Tensor,
    pub dec_y: DecoderHead,
    pub dec_z: DecoderHead,
}

impl BridgeModel {
    pub fn init(cfg: BridgeConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.encoder.dim;
        let gru_input = d + cfg.label_dim;
        Ok(BridgeModel {
            encoder: Encoder::init(cfg.encoder, rng),
            sup_y: Linear::init(d, cfg.n_y, rng),
            sup_z: Linear::init(d, cfg.n_z, rng),
            emb_y: Tensor::uniform_init(vec![cfg.n_y, cfg.label_dim], rng),
            emb_z: Tensor::uniform_init(vec![cfg.n_z, cfg.label_dim], rng),
            dec_y: DecoderHead {
                gru: GruCell::init(gru_input, cfg.gru_hidden, rng),
                out: Linear::init(cfg.gru_hidden, cfg.n_y, rng),
            },
            dec_z: DecoderHead {
                gru: GruCell::init(gru_input, cfg.gru_hidden, rng),
                out: Linear::init(cfg.gru_hidden, cfg.n_z, rng),
            },
            cfg,
        })
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundBridge {
        BoundBridge {
            cfg: self.cfg,
            encoder: self.encoder.bind(tape, "encoder"),
            sup_y: self.sup_y.bind(tape, "sup_y"),
            sup_z: self.sup_z.bind(tape, "sup_z"),
            emb_y: tape.param("emb_y", &self.emb_y),
            emb_z: tape.param("emb_z", &self.emb_z),
            dec_y: BoundDecoder {
                gru: self.dec_y.gru.bind(tape, "dec_y.gru"),
                out: self.dec_y.out.bind(tape, "dec_y.out"),
            },
            dec_z: BoundDecoder {
                gru: self.dec_z.gru.bind(tape, "dec_z.gru"),
                out: self.dec_z.out.bind(tape, "dec_z.out"),
            },
        }
    }

    fn check_labels(&self, labels: &[TagId], side: Side) -> Result<()> {
        let k = self.cfg.tags(side);
        if let Some(bad) = labels.iter().find(|l| **l >= k) {
            return Err(Error::Data(format!(
                "label id {bad} out of range for side {side} ({k} tags)"
            )));
        }
        Ok(())
    }

    // ── value-level forward passes (evaluation) ──────────────────────

    /// Per-token embedding matrix, shape [n, dim].
    pub fn encode(&self, token_ids: &[usize]) -> Result<Tensor> {
        self.encoder.check_ids(token_ids)?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let e = bound.encoder.forward(&mut tape, token_ids);
        Tensor::new(
            vec![token_ids.len(), self.cfg.encoder.dim],
            tape.data(e).to_vec(),
        )
    }

    /// Supervisor logits over `side`'s tagset for an encoding from
    /// [`BridgeModel::encode`].
    pub fn supervise(&self, e: &Tensor, side: Side) -> Result<Tensor> {
        if e.cols() != self.cfg.encoder.dim {
            return Err(Error::Shape(format!(
                "encoding width {} does not match model dim {}",
                e.cols(),
                self.cfg.encoder.dim
            )));
        }
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let ev = tape.value(e.rows(), e.cols(), e.data.clone());
        let logits = bound.supervise(&mut tape, ev, side);
        Tensor::new(
            vec![e.rows(), self.cfg.tags(side)],
            tape.data(logits).to_vec(),
        )
    }

    /// Decoder logits for `side` given the other side's labels. Dropout on
    /// the encoder rows is applied only when `dropout_rng` is supplied
    /// (training); evaluation passes `None` and is deterministic.
    pub fn decode(
        &self,
        e: &Tensor,
        other_labels: &[TagId],
        side: Side,
        dropout_rng: Option<&mut Rng>,
    ) -> Result<Tensor> {
        if other_labels.len() != e.rows() {
            return Err(Error::Shape(format!(
                "{} labels for {} encoder rows",
                other_labels.len(),
                e.rows()
            )));
        }
        self.check_labels(other_labels, side.other())?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let ev = tape.value(e.rows(), e.cols(), e.data.clone());
        let mask = match dropout_rng {
            Some(rng) => Some(dropout_mask(e.numel(), self.cfg.dropout, rng)?),
            None => None,
        };
        let logits = bound.decode(&mut tape, ev, other_labels, side, mask.as_deref());
        Tensor::new(
            vec![e.rows(), self.cfg.tags(side)],
            tape.data(logits).to_vec(),
        )
    }

    /// Decoder prediction from the other side's gold labels (the
    /// evaluation dataflow). Deterministic; dropout off.
    pub fn eval_translate(
        &self,
        token_ids: &[usize],
        other_gold: &[TagId],
        target: Side,
    ) -> Result<Vec<TagId>> {
        if token_ids.len() != other_gold.len() {
            return Err(Error::Shape(format!(
                "{} tokens vs {} labels",
                token_ids.len(),
                other_gold.len()
            )));
        }
        self.encoder.check_ids(token_ids)?;
        self.check_labels(other_gold, target.other())?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        Ok(bound.predict_translate(&mut tape, token_ids, other_gold, target))
    }

    /// Argmax of the side's supervisor head; the plain tagger view.
    pub fn eval_supervisor_only(&self, token_ids: &[usize], side: Side) -> Result<Vec<TagId>> {
        self.encoder.check_ids(token_ids)?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        Ok(bound.predict_supervisor(&mut tape, token_ids, side))
    }

    /// Sample surrogate other-side labels from the other supervisor head
    /// (one draw per token, seeded), then decode as in `eval_translate`.
    pub fn eval_no_label(
        &self,
        token_ids: &[usize],
        target: Side,
        rng: &mut Rng,
    ) -> Result<Vec<TagId>> {
        self.encoder.check_ids(token_ids)?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        bound.predict_no_label(&mut tape, token_ids, target, rng)
    }

    // ── training forward passes ──────────────────────────────────────

    /// Training step for a batch labeled on `origin`: sampled surrogates,
    /// heavy dropout, summed decoder and supervisor CE.
    pub fn train_forward(
        &self,
        batch: &[LabeledSequence],
        origin: Side,
        rng: &mut Rng,
    ) -> Result<TrainStep> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let (loss, diagnostics) =
            bound.train_loss(&mut tape, batch, origin, rng, SurrogateSource::Sampled)?;
        Ok(TrainStep {
            tape,
            loss,
            diagnostics,
        })
    }

    /// The label-leaking variant: surrogates come from the opposite
    /// decoder fed gold labels. Flagged experimental; used only to
    /// reproduce the training-collapse failure mode.
    pub fn cheat_forward(
        &self,
        batch: &[LabeledSequence],
        origin: Side,
        rng: &mut Rng,
    ) -> Result<TrainStep> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let (loss, diagnostics) =
            bound.train_loss(&mut tape, batch, origin, rng, SurrogateSource::DecoderArgmax)?;
        Ok(TrainStep {
            tape,
            loss,
            diagnostics,
        })
    }
}

impl Params for BridgeModel {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        self.encoder.visit(f);
        f("sup_y.w", &self.sup_y.w);
        f("sup_y.b", &self.sup_y.b);
        f("sup_z.w", &self.sup_z.w);
        f("sup_z.b", &self.sup_z.b);
        f("emb_y", &self.emb_y);
        f("emb_z", &self.emb_z);
        for (prefix, head) in [("dec_y", &self.dec_y), ("dec_z", &self.dec_z)] {
            for (suffix, t) in [
                ("gru.w_r", &head.gru.w_r),
                ("gru.u_r", &head.gru.u_r),
                ("gru.b_r", &head.gru.b_r),
                ("gru.w_u", &head.gru.w_u),
                ("gru.u_u", &head.gru.u_u),
                ("gru.b_u", &head.gru.b_u),
                ("gru.w_c", &head.gru.w_c),
                ("gru.u_c", &head.gru.u_c),
                ("gru.b_c", &head.gru.b_c),
                ("out.w", &head.out.w),
                ("out.b", &head.out.b),
            ] {
                f(&format!("{prefix}.{suffix}"), t);
            }
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.encoder.visit_mut(f);
        f("sup_y.w", &mut self.sup_y.w);
        f("sup_y.b", &mut self.sup_y.b);
        f("sup_z.w", &mut self.sup_z.w);
        f("sup_z.b", &mut self.sup_z.b);
        f("emb_y", &mut self.emb_y);
        f("emb_z", &mut self.emb_z);
        for (prefix, head) in [("dec_y", &mut self.dec_y), ("dec_z", &mut self.dec_z)] {
            for (suffix, t) in [
                ("gru.w_r", &mut head.gru.w_r),
                ("gru.u_r", &mut head.gru.u_r),
                ("gru.b_r", &mut head.gru.b_r),
                ("gru.w_u", &mut head.gru.w_u),
                ("gru.u_u", &mut head.gru.u_u),
                ("gru.b_u", &mut head.gru.b_u),
                ("gru.w_c", &mut head.gru.w_c),
                ("gru.u_c", &mut head.gru.u_c),
                ("gru.b_c", &mut head.gru.b_c),
                ("out.w", &mut head.out.w),
                ("out.b", &mut head.out.b),
            ] {
                f(&format!("{prefix}.{suffix}"), t);
            }
        }
    }
}

/// One training sentence: token ids plus gold tags for the origin side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    pub token_ids: Vec<usize>,
    pub tags: Vec<TagId>,
}

/// Result of a training forward pass; the tape is kept so the caller can
/// run backward and harvest gradients.
pub struct TrainStep {
    pub tape: Tape,
    pub loss: VarId,
    pub diagnostics: TrainDiagnostics,
}

impl TrainStep {
    pub fn loss_value(&self) -> f64 {
        self.tape.data(self.loss)[0]
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainDiagnostics {
    pub decoder_ce: f64,
    pub supervisor_ce: f64,
    pub decoder_correct: usize,
    pub supervisor_correct: usize,
    pub tokens: usize,
    /// Surrogate other-side tags drawn per sentence.
    pub surrogates: Vec<Vec<TagId>>,
}

impl TrainDiagnostics {
    pub fn decoder_accuracy(&self) -> f64 {
        self.decoder_correct as f64 / self.tokens as f64
    }

    pub fn supervisor_accuracy(&self) -> f64 {
        self.supervisor_correct as f64 / self.tokens as f64
    }
}

pub enum SurrogateSource {
    /// Sampled per token from the other supervisor's softmax.
    Sampled,
    /// Argmax of the opposite decoder fed gold labels (the cheat).
    DecoderArgmax,
}

pub struct BoundDecoder {
    gru: BoundGruCell,
    out: BoundLinear,
}

/// Tape-bound model; all forward wiring lives here.
pub struct BoundBridge {
    cfg: BridgeConfig,
    pub encoder: BoundEncoder,
    sup_y: BoundLinear,
    sup_z: BoundLinear,
    emb_y: VarId,
    emb_z: VarId,
    dec_y: BoundDecoder,
    dec_z: BoundDecoder,
}

impl BoundBridge {
    pub fn encode(&self, tape: &mut Tape, token_ids: &[usize]) -> VarId {
        self.encoder.forward(tape, token_ids)
    }

    pub fn supervise(&self, tape: &mut Tape, e: VarId, side: Side) -> VarId {
        match side {
            Side::Y => self.sup_y.forward(tape, e),
            Side::Z => self.sup_z.forward(tape, e),
        }
    }

    /// Left-to-right GRU over positions; input at t is the (optionally
    /// dropped) encoder row concatenated with the other side's label
    /// embedding. Returns [n, tags(side)] logits.
    pub fn decode(
        &self,
        tape: &mut Tape,
        e: VarId,
        other_labels: &[TagId],
        side: Side,
        mask: Option<&[f64]>,
    ) -> VarId {
        let n = tape.rows(e);
        assert_eq!(other_labels.len(), n, "labels must align with encoder rows");
        let e_in = match mask {
            Some(m) => {
                assert_eq!(m.len(), n * tape.cols(e));
                let mv = tape.value(n, tape.cols(e), m.to_vec());
                tape.mul(e, mv)
            }
            None => e,
        };
        let emb_table = match side.other() {
            Side::Y => self.emb_y,
            Side::Z => self.emb_z,
        };
        let labels = tape.embed_rows(emb_table, other_labels);
        let x = tape.concat_cols(e_in, labels);
        let decoder = match side {
            Side::Y => &self.dec_y,
            Side::Z => &self.dec_z,
        };
        let mut h = tape.value(1, self.cfg.gru_hidden, vec![0.0; self.cfg.gru_hidden]);
        let mut logit_rows = Vec::with_capacity(n);
        for t in 0..n {
            let x_t = tape.rows_slice(x, t, t + 1);
            h = decoder.gru.step(tape, x_t, h);
            logit_rows.push(decoder.out.forward(tape, h));
        }
        tape.concat_rows(&logit_rows)
    }

    fn sample_surrogates(
        &self,
        tape: &Tape,
        other_logits: VarId,
        rng: &mut Rng,
    ) -> Result<Vec<TagId>> {
        let k = tape.cols(other_logits);
        let n = tape.rows(other_logits);
        let data = tape.data(other_logits);
        (0..n)
            .map(|t| {
                let probs = softmax(&data[t * k..(t + 1) * k])?;
                sample_categorical(&probs, rng)
            })
            .collect()
    }

    /// Shared body of `train_forward`/`cheat_forward`. Per sentence the
    /// stream is consumed in a fixed order: surrogate draws (sampled
    /// variant only), then the dropout mask row-major.
    pub fn train_loss(
        &self,
        tape: &mut Tape,
        batch: &[LabeledSequence],
        origin: Side,
        rng: &mut Rng,
        source: SurrogateSource,
    ) -> Result<(VarId, TrainDiagnostics)> {
        if batch.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let total_tokens: usize = batch.iter().map(|s| s.token_ids.len()).sum();
        let weight = 1.0 / total_tokens as f64;
        let mut diag = TrainDiagnostics {
            tokens: total_tokens,
            ..Default::default()
        };
        let mut dec_terms = Vec::with_capacity(batch.len());
        let mut sup_terms = Vec::with_capacity(batch.len());

        for sentence in batch {
            let n = sentence.token_ids.len();
            if n == 0 || sentence.tags.len() != n {
                return Err(Error::Data(
                    "batch sentence with empty tokens or misaligned tags".into(),
                ));
            }
            let e = self.encode(tape, &sentence.token_ids);
            let weights = vec![weight; n];

            let sup_logits = self.supervise(tape, e, origin);
            sup_terms.push(tape.ce_weighted(sup_logits, &sentence.tags, &weights));
            count_argmax_hits(
                tape,
                sup_logits,
                &sentence.tags,
                &mut diag.supervisor_correct,
            );

            // Surrogate labels for the missing side; both variants detach
            // them (a discrete id carries no gradient).
            let surrogate = match source {
                SurrogateSource::Sampled => {
                    let other_logits = self.supervise(tape, e, origin.other());
                    self.sample_surrogates(tape, other_logits, rng)?
                }
                SurrogateSource::DecoderArgmax => {
                    let leak_logits = self.decode(tape, e, &sentence.tags, origin.other(), None);
                    argmax_rows(tape, leak_logits)
                }
            };

            let mask = dropout_mask(n * self.cfg.encoder.dim, self.cfg.dropout, rng)?;
            let dec_logits = self.decode(tape, e, &surrogate, origin, Some(&mask));
            dec_terms.push(tape.ce_weighted(dec_logits, &sentence.tags, &weights));
            count_argmax_hits(tape, dec_logits, &sentence.tags, &mut diag.decoder_correct);
            diag.surrogates.push(surrogate);
        }

        let dec_loss = sum_terms(tape, &dec_terms);
        let sup_loss = sum_terms(tape, &sup_terms);
        diag.decoder_ce = tape.data(dec_loss)[0];
        diag.supervisor_ce = tape.data(sup_loss)[0];
        let loss = tape.add(dec_loss, sup_loss);
        let value = tape.data(loss)[0];
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("training loss {value}")));
        }
        Ok((loss, diag))
    }

    // ── prediction helpers (shared by eval paths and the trainer) ────

    pub fn predict_translate(
        &self,
        tape: &mut Tape,
        token_ids: &[usize],
        other_gold: &[TagId],
        target: Side,
    ) -> Vec<TagId> {
        let e = self.encode(tape, token_ids);
        let logits = self.decode(tape, e, other_gold, target, None);
        argmax_rows(tape, logits)
    }

    pub fn predict_supervisor(
        &self,
        tape: &mut Tape,
        token_ids: &[usize],
        side: Side,
    ) -> Vec<TagId> {
        let e = self.encode(tape, token_ids);
        let logits = self.supervise(tape, e, side);
        argmax_rows(tape, logits)
    }

    pub fn predict_no_label(
        &self,
        tape: &mut Tape,
        token_ids: &[usize],
        target: Side,
        rng: &mut Rng,
    ) -> Result<Vec<TagId>> {
        let e = self.encode(tape, token_ids);
        let other_logits = self.supervise(tape, e, target.other());
        let surrogate = self.sample_surrogates(tape, other_logits, rng)?;
        let logits = self.decode(tape, e, &surrogate, target, None);
        Ok(argmax_rows(tape, logits))
    }
}

fn sum_terms(tape: &mut Tape, terms: &[VarId]) -> VarId {
    let mut acc = terms[0];
    for t in &terms[1..] {
        acc = tape.add(acc, *t);
    }
    acc
}

fn argmax_rows(tape: &Tape, logits: VarId) -> Vec<TagId> {
    let k = tape.cols(logits);
    let data = tape.data(logits);
    (0..tape.rows(logits))
        .map(|t| argmax(&data[t * k..(t + 1) * k]))
        .collect()
}

fn count_argmax_hits(tape: &Tape, logits: VarId, gold: &[TagId], hits: &mut usize) {
    for (pred, g) in argmax_rows(tape, logits).iter().zip(gold) {
        if pred == g {
            *hits += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::gradcheck::grad_check;

    pub(crate) fn tiny_config() -> BridgeConfig {
        BridgeConfig {
            encoder: EncoderConfig {
                vocab: 12,
                dim: 8,
                heads: 2,
                layers: 1,
                max_len: 8,
            },
            gru_hidden: 6,
            label_dim: 4,
            dropout: 0.85,
            n_y: 3,
            n_z: 4,
        }
    }

    fn tiny_model(seed: u64) -> BridgeModel {
        BridgeModel::init(tiny_config(), &mut Rng::new(seed)).unwrap()
    }

    fn tiny_batch() -> Vec<LabeledSequence> {
        vec![
            LabeledSequence {
                token_ids: vec![2, 5, 7],
                tags: vec![0, 2, 1],
            },
            LabeledSequence {
                token_ids: vec![1, 4],
                tags: vec![2, 0],
            },
            LabeledSequence {
                token_ids: vec![9, 3, 6, 8],
                tags: vec![1, 1, 0, 2],
            },
        ]
    }

    #[test]
    fn encode_shapes_and_determinism() {
        let model = tiny_model(3);
        let e = model.encode(&[1, 2, 3]).unwrap();
        assert_eq!(e.shape, vec![3, 8]);
        let e2 = model.encode(&[1, 2, 3]).unwrap();
        assert_eq!(e.data, e2.data);
    }

    #[test]
    fn supervise_shapes_per_side() {
        let model = tiny_model(3);
        let e = model.encode(&[1, 2]).unwrap();
        assert_eq!(model.supervise(&e, Side::Y).unwrap().shape, vec![2, 3]);
        assert_eq!(model.supervise(&e, Side::Z).unwrap().shape, vec![2, 4]);
    }

    #[test]
    fn zero_supervisor_head_gives_uniform_softmax() {
        let mut model = tiny_model(3);
        model.sup_y.w.data.iter_mut().for_each(|v| *v = 0.0);
        model.sup_y.b.data.iter_mut().for_each(|v| *v = 0.0);
        let e = model.encode(&[1, 2]).unwrap();
        let logits = model.supervise(&e, Side::Y).unwrap();
        assert!(logits.data.iter().all(|v| *v == 0.0));
        let probs = softmax(&logits.data[0..3]).unwrap();
        for p in probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_shape_and_eval_determinism() {
        let model = tiny_model(4);
        let e = model.encode(&[1, 2, 3]).unwrap();
        let logits = model.decode(&e, &[0, 3, 2], Side::Y, None).unwrap();
        assert_eq!(logits.shape, vec![3, 3]);
        let logits2 = model.decode(&e, &[0, 3, 2], Side::Y, None).unwrap();
        assert_eq!(logits.data, logits2.data);
    }

    #[test]
    fn decode_validates_labels_and_length() {
        let model = tiny_model(4);
        let e = model.encode(&[1, 2]).unwrap();
        assert!(model.decode(&e, &[0], Side::Y, None).is_err());
        // side Y conditions on Z labels (4 tags): id 4 is out of range
        assert!(model.decode(&e, &[0, 4], Side::Y, None).is_err());
        assert!(model.decode(&e, &[0, 3], Side::Y, None).is_ok());
    }

    #[test]
    fn train_forward_loss_near_two_ln_k_at_init() {
        // Near-zero heads at init: logits are small, so each CE term sits
        // near ln K and the sum near 2 ln K.
        let model = tiny_model(5);
        let batch = tiny_batch();
        let step = model
            .train_forward(&batch, Side::Y, &mut Rng::new(11))
            .unwrap();
        let want = 2.0 * 3.0f64.ln();
        let got = step.loss_value();
        assert!(
            (got - want).abs() / want < 0.05,
            "loss {got} vs 2 ln 3 = {want}"
        );
    }

    #[test]
    fn train_forward_mirrored_on_z_side() {
        let model = tiny_model(5);
        let batch = vec![LabeledSequence {
            token_ids: vec![2, 5, 7],
            tags: vec![0, 3, 1], // z tags, 4 classes
        }];
        let step = model
            .train_forward(&batch, Side::Z, &mut Rng::new(11))
            .unwrap();
        let want = 2.0 * 4.0f64.ln();
        let got = step.loss_value();
        assert!((got - want).abs() / want < 0.05, "loss {got} vs {want}");
        // surrogates are Y ids for a Z-origin batch
        assert!(step.diagnostics.surrogates[0].iter().all(|s| *s < 3));
    }

    #[test]
    fn sampled_surrogates_leave_other_supervisor_without_gradient() {
        let model = tiny_model(6);
        let batch = tiny_batch();
        let mut step = model
            .train_forward(&batch, Side::Y, &mut Rng::new(2))
            .unwrap();
        step.tape.backward(step.loss).unwrap();
        for (name, grad) in step.tape.param_grads() {
            if name.starts_with("sup_z") {
                assert!(
                    grad.iter().all(|g| *g == 0.0),
                    "{name} received gradient through the sampled path"
                );
            }
            if name == "sup_y.w" {
                assert!(grad.iter().any(|g| *g != 0.0), "sup_y.w got no gradient");
            }
            if name == "emb_z" {
                // the label embedder *is* on the decoder path
                assert!(grad.iter().any(|g| *g != 0.0), "emb_z got no gradient");
            }
        }
    }

    #[test]
    fn train_forward_deterministic_given_seed() {
        let model = tiny_model(6);
        let batch = tiny_batch();
        let a = model
            .train_forward(&batch, Side::Y, &mut Rng::new(9))
            .unwrap();
        let b = model
            .train_forward(&batch, Side::Y, &mut Rng::new(9))
            .unwrap();
        assert_eq!(a.loss_value().to_bits(), b.loss_value().to_bits());
        assert_eq!(a.diagnostics.surrogates, b.diagnostics.surrogates);
    }

    #[test]
    fn loss_decreases_over_twenty_steps() {
        use crate::substrate::adam::{Adam, AdamConfig};
        let mut model = tiny_model(7);
        let batch = tiny_batch();
        let mut adam = Adam::new(AdamConfig::default());
        let mut rng = Rng::new(1);
        let mut first = 0.0;
        let mut last = 0.0;
        for step_idx in 0..20 {
            let mut step = model.train_forward(&batch, Side::Y, &mut rng).unwrap();
            if step_idx == 0 {
                first = step.loss_value();
            }
            last = step.loss_value();
            step.tape.backward(step.loss).unwrap();
            let grads: std::collections::BTreeMap<String, Vec<f64>> = step
                .tape
                .param_grads()
                .into_iter()
                .map(|(n, g)| (n.to_string(), g))
                .collect();
            model.visit_mut(&mut |name, t| {
                t.grad = Some(grads[name].clone());
            });
            adam.step(&mut model).unwrap();
        }
        assert!(last < first, "loss did not decrease: {first} -> {last}");
    }

    #[test]
    fn cheat_surrogates_depend_on_gold_labels() {
        let mut model = tiny_model(8);
        // Amplify the Y label embeddings so the label path dominates the
        // argmax; the probe is about wiring, not about the init scale.
        model.emb_y.data.iter_mut().for_each(|v| *v *= 50.0);
        let base = vec![LabeledSequence {
            token_ids: vec![2, 5, 7, 4],
            tags: vec![0, 2, 1, 0],
        }];
        let perturbed = vec![LabeledSequence {
            token_ids: vec![2, 5, 7, 4],
            tags: vec![2, 0, 2, 1],
        }];
        let a = model
            .cheat_forward(&base, Side::Y, &mut Rng::new(3))
            .unwrap();
        let b = model
            .cheat_forward(&perturbed, Side::Y, &mut Rng::new(3))
            .unwrap();
        assert_ne!(
            a.diagnostics.surrogates, b.diagnostics.surrogates,
            "cheat surrogate ignored the gold labels"
        );
        // loss keeps the two-term shape: finite scalar, comparable range
        assert!(a.loss_value().is_finite() && a.loss_value() > 0.0);
    }

    #[test]
    fn eval_translate_is_deterministic_and_sized() {
        let model = tiny_model(9);
        let pred = model
            .eval_translate(&[1, 2, 3], &[0, 1, 3], Side::Y)
            .unwrap();
        assert_eq!(pred.len(), 3);
        assert_eq!(
            pred,
            model
                .eval_translate(&[1, 2, 3], &[0, 1, 3], Side::Y)
                .unwrap()
        );
        assert!(pred.iter().all(|p| *p < 3));
    }

    #[test]
    fn eval_supervisor_matches_supervise_argmax() {
        let model = tiny_model(9);
        let ids = [1, 5, 7];
        let pred = model.eval_supervisor_only(&ids, Side::Z).unwrap();
        let e = model.encode(&ids).unwrap();
        let logits = model.supervise(&e, Side::Z).unwrap();
        let manual: Vec<usize> = (0..3)
            .map(|t| argmax(&logits.data[t * 4..(t + 1) * 4]))
            .collect();
        assert_eq!(pred, manual);
    }

    #[test]
    fn eval_no_label_seeded_determinism() {
        let model = tiny_model(10);
        let a = model
            .eval_no_label(&[1, 2, 3], Side::Y, &mut Rng::new(4))
            .unwrap();
        let b = model
            .eval_no_label(&[1, 2, 3], Side::Y, &mut Rng::new(4))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn confident_supervisor_makes_no_label_equal_translate() {
        // Push the Z supervisor toward a constant, near-one-hot
        // prediction: sampling then always returns that tag, so the
        // no-label path equals translate fed those labels.
        let mut model = tiny_model(11);
        model.sup_z.w.data.iter_mut().for_each(|v| *v = 0.0);
        model.sup_z.b.data.iter_mut().for_each(|v| *v = 0.0);
        model.sup_z.b.data[2] = 50.0;
        let ids = [1, 2, 3, 4];
        let no_label = model
            .eval_no_label(&ids, Side::Y, &mut Rng::new(5))
            .unwrap();
        let translate = model.eval_translate(&ids, &[2, 2, 2, 2], Side::Y).unwrap();
        assert_eq!(no_label, translate);
    }

    #[test]
    fn shared_encoder_feeds_every_mode() {
        let mut model = tiny_model(12);
        let ids = [1, 2, 3];
        let outputs = |m: &BridgeModel| {
            (
                m.eval_translate(&ids, &[0, 1, 2], Side::Y).unwrap(),
                m.eval_supervisor_only(&ids, Side::Y).unwrap(),
                m.eval_no_label(&ids, Side::Y, &mut Rng::new(1)).unwrap(),
                m.train_forward(&tiny_batch(), Side::Y, &mut Rng::new(1))
                    .unwrap()
                    .loss_value(),
                m.cheat_forward(&tiny_batch(), Side::Y, &mut Rng::new(1))
                    .unwrap()
                    .loss_value(),
            )
        };
        let before = outputs(&model);
        // One encoder weight moves; every mode must notice.
        model.encoder.tok.data[13] += 2.5;
        let after = outputs(&model);
        assert!(before.3 != after.3, "train_forward ignored the encoder");
        assert!(before.4 != after.4, "cheat_forward ignored the encoder");
        // Argmax outputs can coincide by chance; the losses above prove the
        // logits moved. Require at least one prediction path to move too.
        assert!(
            before.0 != after.0 || before.1 != after.1 || before.2 != after.2,
            "no evaluation output changed"
        );
    }

    #[test]
    fn gradients_check_through_the_full_training_graph() {
        // Covers encode, supervise, decode and the loss assembly in one
        // finite-difference pass.
        let mut model = tiny_model(13);
        let batch = tiny_batch();
        let report = grad_check(&mut model, 1e-5, |m, tape| {
            let bound = m.bind(tape);
            let (loss, _) = bound.train_loss(
                tape,
                &batch,
                Side::Y,
                &mut Rng::new(77),
                SurrogateSource::Sampled,
            )?;
            Ok(loss)
        })
        .unwrap();
        assert!(
            report.max_rel_err < 1e-4,
            "max rel err {} at {}",
            report.max_rel_err,
            report.worst_param
        );
    }
}
