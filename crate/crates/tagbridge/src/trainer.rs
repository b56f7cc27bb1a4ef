//! Mixed-dataset batching, the epoch loop, checkpointing, and the
//! evaluation harness producing per-epoch metric records.
//!
//! One epoch shuffles both corpora, chunks each into single-origin
//! batches, and interleaves the two batch lists in proportion to corpus
//! sizes, so every mini-batch round draws on both datasets and every
//! sentence appears exactly once. All randomness is derived from
//! (seed, epoch) streams, which is what makes resumed runs bitwise equal
//! to uninterrupted ones.

use std::collections::BTreeMap;
use std::path::Path;

use crate::baseline::{apply_map, DirectMap};
use crate::bridge::{BridgeConfig, BridgeModel, LabeledSequence, TrainStep};
use crate::corpus::types::{Side, TagId, PAD_ID};
use crate::error::{Error, Result};
use crate::substrate::adam::{Adam, AdamConfig};
use crate::substrate::io::{self, Manifest};
use crate::substrate::nn::{Encoder, EncoderConfig, Linear, Params};
use crate::substrate::rng::Rng;
use crate::substrate::tensor::Tensor;

// ── metric records ───────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Val,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Val => "val",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    Supervised,
    Ours,
    SupervisorOnly,
    NoLabel,
    DirectMap,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Supervised => "supervised",
            Variant::Ours => "ours",
            Variant::SupervisorOnly => "supervisor_only",
            Variant::NoLabel => "no_label",
            Variant::DirectMap => "direct_map",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub dataset: String,
    pub variant: Variant,
    pub loss: Option<f64>,
    pub accuracy: f64,
}

/// Fraction of positions where the prediction equals gold.
pub fn token_accuracy(pred: &[TagId], gold: &[TagId]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!(
            "token_accuracy over {} predictions vs {} gold tags",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Data("token_accuracy of empty sequences".into()));
    }
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / pred.len() as f64)
}

// ── batching ─────────────────────────────────────────────────────────

/// Padded single-origin mini-batch. The padded matrices satisfy the
/// storage contract; forward passes consume the unpadded views so padding
/// never enters the loss or accuracy counts.
#[derive(Debug, Clone)]
pub struct Batch {
    pub origin: Side,
    pub rows: usize,
    pub cols: usize,
    /// Row-major [rows, cols] token ids, PAD-filled.
    pub tokens: Vec<usize>,
    /// Row-major gold tags for the origin side, zero-filled on padding.
    pub tags: Vec<TagId>,
    /// True on real positions.
    pub mask: Vec<bool>,
    lengths: Vec<usize>,
}

impl Batch {
    pub fn from_sequences(seqs: &[LabeledSequence], origin: Side) -> Result<Batch> {
        if seqs.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let rows = seqs.len();
        let cols = seqs.iter().map(|s| s.token_ids.len()).max().unwrap();
        let mut tokens = vec![PAD_ID; rows * cols];
        let mut tags = vec![0usize; rows * cols];
        let mut mask = vec![false; rows * cols];
        let mut lengths = Vec::with_capacity(rows);
        for (i, s) in seqs.iter().enumerate() {
            if s.token_ids.len() != s.tags.len() || s.token_ids.is_empty() {
                return Err(Error::Data(format!(
                    "batch row {i}: {} tokens vs {} tags",
                    s.token_ids.len(),
                    s.tags.len()
                )));
            }
            lengths.push(s.token_ids.len());
            for (t, (&id, &tag)) in s.token_ids.iter().zip(&s.tags).enumerate() {
                tokens[i * cols + t] = id;
                tags[i * cols + t] = tag;
                mask[i * cols + t] = true;
            }
        }
        Ok(Batch {
            origin,
            rows,
            cols,
            tokens,
            tags,
            mask,
            lengths,
        })
    }

    /// Unpadded per-sentence views.
    pub fn sequences(&self) -> Vec<LabeledSequence> {
        (0..self.rows)
            .map(|i| {
                let n = self.lengths[i];
                LabeledSequence {
                    token_ids: self.tokens[i * self.cols..i * self.cols + n].to_vec(),
                    tags: self.tags[i * self.cols..i * self.cols + n].to_vec(),
                }
            })
            .collect()
    }
}

fn chunk_shuffled(
    seqs: &[LabeledSequence],
    origin: Side,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Vec<Batch>> {
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    rng.shuffle(&mut order);
    order
        .chunks(batch_size)
        .map(|chunk| {
            let items: Vec<LabeledSequence> = chunk.iter().map(|&i| seqs[i].clone()).collect();
            Batch::from_sequences(&items, origin)
        })
        .collect()
}

/// One epoch's batch sequence: both corpora shuffled, chunked, and
/// interleaved in proportion to their batch counts (alternating when
/// equal, ties toward Y). Every sentence appears exactly once.
pub fn make_batches(
    train_y: &[LabeledSequence],
    train_z: &[LabeledSequence],
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Vec<Batch>> {
    if train_y.is_empty() || train_z.is_empty() {
        return Err(Error::Data(
            "make_batches requires both corpora non-empty".into(),
        ));
    }
    if batch_size == 0 {
        return Err(Error::Data("batch_size must be positive".into()));
    }
    let y_batches = chunk_shuffled(train_y, Side::Y, batch_size, rng)?;
    let z_batches = chunk_shuffled(train_z, Side::Z, batch_size, rng)?;
    let (ny, nz) = (y_batches.len(), z_batches.len());
    let mut merged = Vec::with_capacity(ny + nz);
    let (mut iy, mut iz) = (0usize, 0usize);
    let mut y_iter = y_batches.into_iter();
    let mut z_iter = z_batches.into_iter();
    while iy < ny || iz < nz {
        let y_progress = (iy + 1) as f64 / ny as f64;
        let z_progress = (iz + 1) as f64 / nz as f64;
        if iz >= nz || (iy < ny && y_progress <= z_progress) {
            merged.push(y_iter.next().unwrap());
            iy += 1;
        } else {
            merged.push(z_iter.next().unwrap());
            iz += 1;
        }
    }
    Ok(merged)
}

// ── evaluation ───────────────────────────────────────────────────────

/// A validation pair with tokens already mapped to vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub token_ids: Vec<usize>,
    pub y_tags: Vec<TagId>,
    pub z_tags: Vec<TagId>,
}

impl EncodedPair {
    pub fn tags(&self, side: Side) -> &[TagId] {
        match side {
            Side::Y => &self.y_tags,
            Side::Z => &self.z_tags,
        }
    }
}

/// Direct maps to score alongside the model, one per direction.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalMaps<'a> {
    /// Map consuming Z tags, producing Y tags.
    pub z_to_y: Option<&'a DirectMap>,
    /// Map consuming Y tags, producing Z tags.
    pub y_to_z: Option<&'a DirectMap>,
}

/// Accuracy aggregation from an arbitrary per-pair predictor; the seam the
/// model evaluation and the oracle-stub tests share. The predictor is
/// called once per (pair, target side, variant).
pub fn evaluate_with<F>(
    pairs: &[EncodedPair],
    datasets: (&str, &str),
    epoch: usize,
    maps: EvalMaps,
    mut predict: F,
) -> Result<Vec<MetricsRecord>>
where
    F: FnMut(&EncodedPair, Side, Variant) -> Result<Vec<TagId>>,
{
    if pairs.is_empty() {
        return Err(Error::Data("evaluate over empty pair list".into()));
    }
    let mut hits: BTreeMap<(Side, Variant), usize> = BTreeMap::new();
    let mut total = 0usize;
    for pair in pairs {
        total += pair.token_ids.len();
        for side in [Side::Y, Side::Z] {
            for variant in [Variant::Ours, Variant::SupervisorOnly, Variant::NoLabel] {
                let pred = predict(pair, side, variant)?;
                if pred.len() != pair.token_ids.len() {
                    return Err(Error::Shape(format!(
                        "{} predictions for {} tokens",
                        pred.len(),
                        pair.token_ids.len()
                    )));
                }
                let h = pred
                    .iter()
                    .zip(pair.tags(side))
                    .filter(|(p, g)| p == g)
                    .count();
                *hits.entry((side, variant)).or_insert(0) += h;
            }
            let map = match side {
                Side::Y => maps.z_to_y,
                Side::Z => maps.y_to_z,
            };
            if let Some(map) = map {
                let pred = apply_map(map, pair.tags(side.other()))?;
                let h = pred
                    .iter()
                    .zip(pair.tags(side))
                    .filter(|(p, g)| p == g)
                    .count();
                *hits.entry((side, Variant::DirectMap)).or_insert(0) += h;
            }
        }
    }
    let mut records = Vec::new();
    for ((side, variant), h) in hits {
        records.push(MetricsRecord {
            epoch,
            phase: Phase::Val,
            dataset: match side {
                Side::Y => datasets.0.to_string(),
                Side::Z => datasets.1.to_string(),
            },
            variant,
            loss: None,
            accuracy: h as f64 / total as f64,
        });
    }
    Ok(records)
}

/// Score the variants on the validation pairs: the decoder fed gold
/// other-side labels ("ours"), the supervisor head alone, the decoder fed
/// sampled surrogates ("no_label", seeded), and optional direct maps.
/// One encoder pass is shared per pair.
pub fn evaluate(
    model: &BridgeModel,
    pairs: &[EncodedPair],
    datasets: (&str, &str),
    epoch: usize,
    maps: EvalMaps,
    rng: &mut Rng,
) -> Result<Vec<MetricsRecord>> {
    if pairs.is_empty() {
        return Err(Error::Data("evaluate over empty pair list".into()));
    }
    // Precompute all predictions in one tape pass per pair, in a fixed
    // order (Y then Z; translate, supervisor, no-label), so the rng stream
    // does not depend on the aggregation order.
    let mut tape = crate::substrate::tape::Tape::new();
    let bound = model.bind(&mut tape);
    let mut cache: Vec<BTreeMap<(Side, Variant), Vec<TagId>>> = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let mark = tape.mark();
        let mut per_pair = BTreeMap::new();
        let e = bound.encode(&mut tape, &pair.token_ids);
        for side in [Side::Y, Side::Z] {
            let logits = bound.supervise(&mut tape, e, side);
            let sup_pred = argmax_of_rows(&tape, logits);

            let translate = bound.decode(&mut tape, e, pair.tags(side.other()), side, None);
            per_pair.insert((side, Variant::Ours), argmax_of_rows(&tape, translate));
            per_pair.insert((side, Variant::SupervisorOnly), sup_pred);

            let other_logits = bound.supervise(&mut tape, e, side.other());
            let k = model.cfg.tags(side.other());
            let surrogate: Vec<TagId> = (0..pair.token_ids.len())
                .map(|t| {
                    let row = &tape.data(other_logits)[t * k..(t + 1) * k];
                    crate::substrate::ops::sample_categorical(
                        &crate::substrate::ops::softmax(row)?,
                        rng,
                    )
                })
                .collect::<Result<_>>()?;
            let no_label = bound.decode(&mut tape, e, &surrogate, side, None);
            per_pair.insert((side, Variant::NoLabel), argmax_of_rows(&tape, no_label));
        }
        cache.push(per_pair);
        tape.truncate(mark);
    }
    let mut calls = 0usize;
    evaluate_with(pairs, datasets, epoch, maps, move |_pair, side, variant| {
        // evaluate_with walks pairs in order, six calls per pair.
        let per_pair = &cache[calls / 6];
        calls += 1;
        Ok(per_pair[&(side, variant)].clone())
    })
}

fn argmax_of_rows(tape: &crate::substrate::tape::Tape, logits: usize) -> Vec<TagId> {
    let k = tape.cols(logits);
    let data = tape.data(logits);
    (0..tape.rows(logits))
        .map(|t| crate::substrate::ops::argmax(&data[t * k..(t + 1) * k]))
        .collect()
}

// ── the epoch loop ───────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Use the label-leaking cheat forward instead of sampled surrogates.
    pub cheat: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 25,
            batch_size: 16,
            seed: 1,
            adam: AdamConfig::default(),
            cheat: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainData {
    pub train_y: Vec<LabeledSequence>,
    pub train_z: Vec<LabeledSequence>,
    pub val: Vec<EncodedPair>,
    pub dataset_y: String,
    pub dataset_z: String,
}

/// Apply tape gradients (keyed by name) to the model and step Adam.
pub fn apply_step(model: &mut BridgeModel, step: &mut TrainStep, adam: &mut Adam) -> Result<()> {
    step.tape.backward(step.loss)?;
    let grads: BTreeMap<String, Vec<f64>> = step
        .tape
        .param_grads()
        .into_iter()
        .map(|(n, g)| (n.to_string(), g))
        .collect();
    let mut missing = None;
    model.visit_mut(&mut |name, t| match grads.get(name) {
        Some(g) => t.grad = Some(g.clone()),
        None => missing = Some(name.to_string()),
    });
    if let Some(name) = missing {
        return Err(Error::Shape(format!("no gradient recorded for {name}")));
    }
    adam.step(model)
}

/// Run epochs `start_epoch..opts.epochs` (zero-based internally; records
/// are one-based). `on_epoch` receives each epoch's records as they are
/// produced, so callers can append to a metrics file incrementally.
pub fn train_epochs(
    model: &mut BridgeModel,
    adam: &mut Adam,
    data: &TrainData,
    opts: &TrainOptions,
    start_epoch: usize,
    maps: EvalMaps,
    mut on_epoch: impl FnMut(usize, &[MetricsRecord], &BridgeModel, &Adam) -> Result<()>,
) -> Result<Vec<MetricsRecord>> {
    if opts.epochs == 0 {
        return Err(Error::Data("epochs must be at least 1".into()));
    }
    let mut history = Vec::new();
    for epoch in start_epoch..opts.epochs {
        let mut batch_rng = Rng::derive_indexed(opts.seed, "batches", epoch as u64);
        let batches = make_batches(&data.train_y, &data.train_z, opts.batch_size, &mut batch_rng)?;
        let mut step_rng = Rng::derive_indexed(opts.seed, "train", epoch as u64);

        let mut loss_sum: BTreeMap<Side, (f64, usize)> = BTreeMap::new();
        let mut acc_sum: BTreeMap<Side, (usize, usize)> = BTreeMap::new();
        for (batch_idx, batch) in batches.iter().enumerate() {
            let seqs = batch.sequences();
            let step = if opts.cheat {
                model.cheat_forward(&seqs, batch.origin, &mut step_rng)
            } else {
                model.train_forward(&seqs, batch.origin, &mut step_rng)
            };
            let mut step = step.map_err(|e| {
                Error::Numeric(format!("epoch {} batch {batch_idx}: {e}", epoch + 1))
            })?;
            apply_step(model, &mut step, adam).map_err(|e| {
                Error::Numeric(format!("epoch {} batch {batch_idx}: {e}", epoch + 1))
            })?;
            let entry = loss_sum.entry(batch.origin).or_insert((0.0, 0));
            entry.0 += step.loss_value();
            entry.1 += 1;
            let acc = acc_sum.entry(batch.origin).or_insert((0, 0));
            acc.0 += step.diagnostics.decoder_correct;
            acc.1 += step.diagnostics.tokens;
        }

        let mut records = Vec::new();
        for side in [Side::Y, Side::Z] {
            let (lsum, ln) = loss_sum.get(&side).copied().unwrap_or((0.0, 0));
            let (hits, tokens) = acc_sum.get(&side).copied().unwrap_or((0, 0));
            if ln > 0 {
                records.push(MetricsRecord {
                    epoch: epoch + 1,
                    phase: Phase::Train,
                    dataset: match side {
                        Side::Y => data.dataset_y.clone(),
                        Side::Z => data.dataset_z.clone(),
                    },
                    variant: Variant::Ours,
                    loss: Some(lsum / ln as f64),
                    accuracy: hits as f64 / tokens as f64,
                });
            }
        }

        let mut eval_rng = Rng::derive_indexed(opts.seed, "eval", epoch as u64);
        records.extend(evaluate(
            model,
            &data.val,
            (&data.dataset_y, &data.dataset_z),
            epoch + 1,
            maps,
            &mut eval_rng,
        )?);

        on_epoch(epoch + 1, &records, model, adam)?;
        history.extend(records);
    }
    Ok(history)
}

// ── supervised baseline ──────────────────────────────────────────────

/// Plain tagger: the same encoder topology plus one linear head, trained
/// on a single dataset with supervised cross entropy.
pub struct SupervisedModel {
    pub encoder: Encoder,
    pub head: Linear,
    pub side: Side,
}

impl SupervisedModel {
    pub fn init(encoder_cfg: EncoderConfig, n_tags: usize, side: Side, rng: &mut Rng) -> Self {
        SupervisedModel {
            encoder: Encoder::init(encoder_cfg, rng),
            head: Linear::init(encoder_cfg.dim, n_tags, rng),
            side,
        }
    }

    pub fn predict(&self, token_ids: &[usize]) -> Result<Vec<TagId>> {
        self.encoder.check_ids(token_ids)?;
        let mut tape = crate::substrate::tape::Tape::new();
        let enc = self.encoder.bind(&mut tape, "encoder");
        let head = self.head.bind(&mut tape, "head");
        let e = enc.forward(&mut tape, token_ids);
        let logits = head.forward(&mut tape, e);
        Ok(argmax_of_rows(&tape, logits))
    }
}

impl Params for SupervisedModel {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        self.encoder.visit(f);
        f("head.w", &self.head.w);
        f("head.b", &self.head.b);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.encoder.visit_mut(f);
        f("head.w", &mut self.head.w);
        f("head.b", &mut self.head.b);
    }
}

/// Mean-per-token supervised CE over a batch; returns (loss value, hits).
fn supervised_batch_step(
    model: &mut SupervisedModel,
    adam: &mut Adam,
    seqs: &[LabeledSequence],
) -> Result<(f64, usize)> {
    let mut tape = crate::substrate::tape::Tape::new();
    let enc = model.encoder.bind(&mut tape, "encoder");
    let head = model.head.bind(&mut tape, "head");
    let total_tokens: usize = seqs.iter().map(|s| s.token_ids.len()).sum();
    let weight = 1.0 / total_tokens as f64;
    let mut terms = Vec::with_capacity(seqs.len());
    let mut hits = 0usize;
    for s in seqs {
        let e = enc.forward(&mut tape, &s.token_ids);
        let logits = head.forward(&mut tape, e);
        for (pred, gold) in argmax_of_rows(&tape, logits).iter().zip(&s.tags) {
            if pred == gold {
                hits += 1;
            }
        }
        terms.push(tape.ce_weighted(logits, &s.tags, &vec![weight; s.token_ids.len()]));
    }
    let mut loss = terms[0];
    for t in &terms[1..] {
        loss = tape.add(loss, *t);
    }
    let value = tape.data(loss)[0];
    tape.backward(loss)?;
    let grads: BTreeMap<String, Vec<f64>> = tape
        .param_grads()
        .into_iter()
        .map(|(n, g)| (n.to_string(), g))
        .collect();
    model.visit_mut(&mut |name, t| t.grad = Some(grads[name].clone()));
    adam.step(model)?;
    Ok((value, hits))
}

/// Train the supervised baseline on one side's corpus; the record stream
/// contains only the `supervised` variant.
pub fn supervised_baseline_train(
    encoder_cfg: EncoderConfig,
    n_tags: usize,
    side: Side,
    train: &[LabeledSequence],
    val: &[EncodedPair],
    dataset: &str,
    opts: &TrainOptions,
) -> Result<(SupervisedModel, Vec<MetricsRecord>)> {
    if train.is_empty() {
        return Err(Error::Data("supervised training corpus is empty".into()));
    }
    let mut init_rng = Rng::derive(opts.seed, "supervised-init");
    let mut model = SupervisedModel::init(encoder_cfg, n_tags, side, &mut init_rng);
    let mut adam = Adam::new(opts.adam);
    let mut history = Vec::new();
    for epoch in 0..opts.epochs {
        let mut shuffle_rng = Rng::derive_indexed(opts.seed, "supervised-batches", epoch as u64);
        let mut order: Vec<usize> = (0..train.len()).collect();
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut hits = 0usize;
        let mut tokens = 0usize;
        for chunk in order.chunks(opts.batch_size) {
            let seqs: Vec<LabeledSequence> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (loss, h) = supervised_batch_step(&mut model, &mut adam, &seqs)
                .map_err(|e| Error::Numeric(format!("epoch {}: {e}", epoch + 1)))?;
            loss_sum += loss;
            batches += 1;
            hits += h;
            tokens += seqs.iter().map(|s| s.token_ids.len()).sum::<usize>();
        }
        history.push(MetricsRecord {
            epoch: epoch + 1,
            phase: Phase::Train,
            dataset: dataset.to_string(),
            variant: Variant::Supervised,
            loss: Some(loss_sum / batches as f64),
            accuracy: hits as f64 / tokens as f64,
        });
        if !val.is_empty() {
            let mut vhits = 0usize;
            let mut vtokens = 0usize;
            for pair in val {
                let pred = model.predict(&pair.token_ids)?;
                vhits += pred
                    .iter()
                    .zip(pair.tags(side))
                    .filter(|(p, g)| p == g)
                    .count();
                vtokens += pred.len();
            }
            history.push(MetricsRecord {
                epoch: epoch + 1,
                phase: Phase::Val,
                dataset: dataset.to_string(),
                variant: Variant::Supervised,
                loss: None,
                accuracy: vhits as f64 / vtokens as f64,
            });
        }
    }
    Ok((model, history))
}

// ── checkpointing ────────────────────────────────────────────────────

/// Write model parameters, Adam state, and the epoch counter as one
/// manifest. Extra metadata (vocab, tagsets) rides along as meta lines.
pub fn save_checkpoint(
    path: &Path,
    model: &BridgeModel,
    adam: &Adam,
    epochs_done: usize,
    extra_meta: &[(String, String)],
) -> Result<()> {
    let mut manifest = Manifest::default();
    manifest.meta.insert("epoch".into(), epochs_done.to_string());
    manifest.meta.insert("adam_t".into(), adam.t.to_string());
    manifest.meta.insert(
        "config".into(),
        serde_json::to_string(&model.cfg).expect("config serializes"),
    );
    manifest.meta.insert(
        "adam_config".into(),
        serde_json::to_string(&adam.cfg).expect("config serializes"),
    );
    for (k, v) in extra_meta {
        manifest.meta.insert(k.clone(), v.clone());
    }
    model.visit(&mut |name, t| {
        manifest.tensors.push((format!("model.{name}"), t.clone()));
    });
    for (name, slot) in &adam.slots {
        manifest.tensors.push((
            format!("adam.m.{name}"),
            Tensor::new(vec![slot.m.len()], slot.m.clone())?,
        ));
        manifest.tensors.push((
            format!("adam.v.{name}"),
            Tensor::new(vec![slot.v.len()], slot.v.clone())?,
        ));
    }
    io::save(path, &manifest)
}

pub struct Checkpoint {
    pub model: BridgeModel,
    pub adam: Adam,
    pub epochs_done: usize,
    pub manifest: Manifest,
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let manifest = io::load(path)?;
    let cfg: BridgeConfig = serde_json::from_str(
        manifest
            .meta
            .get("config")
            .ok_or_else(|| Error::Data(format!("{}: missing config meta", path.display())))?,
    )
    .map_err(|e| Error::Data(format!("{}: bad config meta: {e}", path.display())))?;
    let adam_cfg: AdamConfig = match manifest.meta.get("adam_config") {
        Some(s) => serde_json::from_str(s)
            .map_err(|e| Error::Data(format!("{}: bad adam_config meta: {e}", path.display())))?,
        None => AdamConfig::default(),
    };
    let mut model = BridgeModel::init(cfg, &mut Rng::new(0))?;
    let mut missing = Vec::new();
    model.visit_mut(&mut |name, t| match manifest.tensor(&format!("model.{name}")) {
        Some(saved) if saved.data.len() == t.data.len() => {
            t.data.copy_from_slice(&saved.data);
        }
        _ => missing.push(name.to_string()),
    });
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "{}: checkpoint missing tensors {missing:?}",
            path.display()
        )));
    }
    let mut adam = Adam::new(adam_cfg);
    adam.t = manifest.meta_u64("adam_t").unwrap_or(0);
    model.visit(&mut |name, _| {
        let m = manifest.tensor(&format!("adam.m.{name}"));
        let v = manifest.tensor(&format!("adam.v.{name}"));
        if let (Some(m), Some(v)) = (m, v) {
            adam.slots.insert(
                name.to_string(),
                crate::substrate::adam::AdamSlot {
                    m: m.data.clone(),
                    v: v.data.clone(),
                },
            );
        }
    });
    let epochs_done = manifest.meta_u64("epoch").unwrap_or(0) as usize;
    Ok(Checkpoint {
        model,
        adam,
        epochs_done,
        manifest,
    })
}
