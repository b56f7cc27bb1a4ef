//! Synthetic parallel corpora with analytically known joint label
//! structure.
//!
//! Sentences are drawn from a latent Markov chain: latent tag sequences
//! follow `initial`/`transition`, each latent tag emits a vocabulary word
//! from its row of `emission`, and the two observable tagsets Y and Z are
//! (possibly stochastic) channels of the same latent tag. Because both
//! tagsets mediate through one latent state, they are correlated exactly
//! the way the config says, and optimal-predictor accuracies are
//! computable (see [`crate::corpus::oracle`]).

use crate::corpus::types::{ParallelPair, Sentence, Tagset};
use crate::error::{Error, Result};
use crate::substrate::ops::sample_categorical;
use crate::substrate::rng::Rng;

pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    /// Number of latent tags L.
    pub latents: usize,
    /// Emission vocabulary size V; tokens are the strings "w0".."w{V-1}".
    pub vocab: usize,
    /// Initial latent distribution, length L.
    pub initial: Vec<f64>,
    /// Latent transition matrix, L×L, rows sum to one.
    pub transition: Vec<Vec<f64>>,
    /// Per-latent emission distributions, L×V.
    pub emission: Vec<Vec<f64>>,
    /// Channel latent→Y, L×|Y|; one-hot rows make it a deterministic
    /// coarsening map.
    pub coarsen_y: Vec<Vec<f64>>,
    /// Channel latent→Z, L×|Z|.
    pub coarsen_z: Vec<Vec<f64>>,
    /// Sentence lengths are uniform over this inclusive range.
    pub len_range: (usize, usize),
    pub sentences_y: usize,
    pub sentences_z: usize,
    pub val_pairs: usize,
}

fn check_rows(name: &str, rows: &[Vec<f64>], want_rows: usize, want_cols: usize) -> Result<()> {
    if rows.len() != want_rows {
        return Err(Error::Data(format!(
            "{name}: expected {want_rows} rows, got {}",
            rows.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != want_cols {
            return Err(Error::Data(format!(
                "{name} row {i}: expected {want_cols} entries, got {}",
                row.len()
            )));
        }
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Data(format!("{name} row {i}: entries outside [0,1]")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Data(format!("{name} row {i} sums to {sum}, not 1")));
        }
    }
    Ok(())
}

impl SynthConfig {
    pub fn n_y(&self) -> usize {
        self.coarsen_y[0].len()
    }

    pub fn n_z(&self) -> usize {
        self.coarsen_z[0].len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.latents == 0 || self.vocab == 0 {
            return Err(Error::Data("latents and vocab must be positive".into()));
        }
        if self.len_range.0 == 0 || self.len_range.0 > self.len_range.1 {
            return Err(Error::Data(format!(
                "bad sentence length range {:?}",
                self.len_range
            )));
        }
        check_rows("initial", std::slice::from_ref(&self.initial), 1, self.latents)?;
        check_rows("transition", &self.transition, self.latents, self.latents)?;
        check_rows("emission", &self.emission, self.latents, self.vocab)?;
        if self.coarsen_y.is_empty() || self.coarsen_z.is_empty() {
            return Err(Error::Data("coarsening channels must be non-empty".into()));
        }
        check_rows("coarsen_y", &self.coarsen_y, self.latents, self.n_y())?;
        check_rows("coarsen_z", &self.coarsen_z, self.latents, self.n_z())?;
        Ok(())
    }

    /// Stationary distribution of the transition matrix by power iteration.
    pub fn stationary(&self) -> Vec<f64> {
        let l = self.latents;
        let mut pi = vec![1.0 / l as f64; l];
        for _ in 0..10_000 {
            let mut next = vec![0.0; l];
            for (i, p) in pi.iter().enumerate() {
                for j in 0..l {
                    next[j] += p * self.transition[i][j];
                }
            }
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < 1e-14 {
                break;
            }
        }
        pi
    }

    /// True when every row of the latent→Z channel is one-hot.
    pub fn z_channel_deterministic(&self) -> bool {
        channel_deterministic(&self.coarsen_z)
    }

    pub fn y_tagset(&self) -> Tagset {
        Tagset::new(
            "synth-y",
            (0..self.n_y()).map(|i| format!("Y{i}")).collect(),
        )
        .expect("generated names are unique")
    }

    pub fn z_tagset(&self) -> Tagset {
        Tagset::new(
            "synth-z",
            (0..self.n_z()).map(|i| format!("Z{i}")).collect(),
        )
        .expect("generated names are unique")
    }
}

pub fn channel_deterministic(channel: &[Vec<f64>]) -> bool {
    channel
        .iter()
        .all(|row| row.iter().filter(|p| **p > 0.0).count() == 1)
}

/// Everything a synthetic draw produces, including the hidden latent
/// sequences so tests can audit the generator itself.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub seed: u64,
    pub train_y: Vec<Sentence>,
    pub train_z: Vec<Sentence>,
    pub val: Vec<ParallelPair>,
    pub latents_y: Vec<Vec<usize>>,
    pub latents_z: Vec<Vec<usize>>,
    pub latents_val: Vec<Vec<usize>>,
    pub y_tagset: Tagset,
    pub z_tagset: Tagset,
}

struct Draw {
    tokens: Vec<String>,
    emissions: Vec<usize>,
    latents: Vec<usize>,
    y: Vec<usize>,
    z: Vec<usize>,
}

fn draw_sentence(cfg: &SynthConfig, rng: &mut Rng) -> Result<Draw> {
    let (lo, hi) = cfg.len_range;
    let len = lo + rng.below(hi - lo + 1);
    let mut latents: Vec<usize> = Vec::with_capacity(len);
    let mut emissions = Vec::with_capacity(len);
    let mut y = Vec::with_capacity(len);
    let mut z = Vec::with_capacity(len);
    for t in 0..len {
        let latent = if t == 0 {
            sample_categorical(&cfg.initial, rng)?
        } else {
            sample_categorical(&cfg.transition[latents[t - 1]], rng)?
        };
        latents.push(latent);
        emissions.push(sample_categorical(&cfg.emission[latent], rng)?);
        y.push(sample_categorical(&cfg.coarsen_y[latent], rng)?);
        z.push(sample_categorical(&cfg.coarsen_z[latent], rng)?);
    }
    let tokens = emissions.iter().map(|e| format!("w{e}")).collect();
    Ok(Draw {
        tokens,
        emissions,
        latents,
        y,
        z,
    })
}

const MAX_REDRAWS: usize = 200;

/// Generate disjoint Y-labeled and Z-labeled training corpora plus a
/// parallel validation set, deterministically per seed. Z-side sentences
/// whose text already occurs in the Y corpus are redrawn so the two train
/// corpora share no sentences; validation pairs are independent draws.
pub fn gen_synthetic(cfg: &SynthConfig, seed: u64) -> Result<SynthCorpus> {
    cfg.validate()?;

    let generate_block = |label: &str,
                          count: usize,
                          avoid: Option<&std::collections::HashSet<String>>|
     -> Result<Vec<Draw>> {
        let mut draws = Vec::with_capacity(count);
        for i in 0..count {
            let mut rng = Rng::derive_indexed(seed, label, i as u64);
            let mut attempts = 0;
            let draw = loop {
                let d = draw_sentence(cfg, &mut rng)?;
                match avoid {
                    Some(texts) if texts.contains(&d.tokens.join(" ")) => {
                        attempts += 1;
                        if attempts > MAX_REDRAWS {
                            return Err(Error::Data(format!(
                                "cannot draw disjoint corpora: sentence {i} of {label} \
                                 collided {MAX_REDRAWS} times; enlarge vocab or lengths"
                            )));
                        }
                    }
                    _ => break d,
                }
            };
            draws.push(draw);
        }
        Ok(draws)
    };

    let y_draws = generate_block("synth-y", cfg.sentences_y, None)?;
    let texts_y: std::collections::HashSet<String> =
        y_draws.iter().map(|d| d.tokens.join(" ")).collect();
    let z_draws = generate_block("synth-z", cfg.sentences_z, Some(&texts_y))?;
    let val_draws = generate_block("synth-val", cfg.val_pairs, None)?;

    let train_y = y_draws
        .iter()
        .map(|d| Sentence {
            tokens: d.tokens.clone(),
            y_tags: Some(d.y.clone()),
            z_tags: None,
            source: "synth-y".into(),
        })
        .collect();
    let train_z = z_draws
        .iter()
        .map(|d| Sentence {
            tokens: d.tokens.clone(),
            y_tags: None,
            z_tags: Some(d.z.clone()),
            source: "synth-z".into(),
        })
        .collect();
    let val = val_draws
        .iter()
        .map(|d| ParallelPair::new(d.tokens.clone(), d.y.clone(), d.z.clone()))
        .collect::<Result<Vec<_>>>()?;

    Ok(SynthCorpus {
        config: cfg.clone(),
        seed,
        latents_y: y_draws.into_iter().map(|d| d.latents).collect(),
        latents_z: z_draws.into_iter().map(|d| d.latents).collect(),
        latents_val: val_draws.into_iter().map(|d| d.latents).collect(),
        train_y,
        train_z,
        val,
        y_tagset: cfg.y_tagset(),
        z_tagset: cfg.z_tagset(),
    })
}

/// Recover the emission index from a synthetic token ("w17" → 17).
pub fn emission_id(token: &str, vocab: usize) -> Result<usize> {
    let id: usize = token
        .strip_prefix('w')
        .and_then(|rest| rest.parse().ok())
        .ok_or_else(|| Error::Data(format!("not a synthetic token: {token:?}")))?;
    if id >= vocab {
        return Err(Error::Data(format!("token {token:?} outside vocab {vocab}")));
    }
    Ok(id)
}

pub fn emission_ids(tokens: &[String], vocab: usize) -> Result<Vec<usize>> {
    tokens.iter().map(|t| emission_id(t, vocab)).collect()
}

// ── Preset configurations ────────────────────────────────────────────

/// Ready-made configurations for the experiments and tests.
pub mod presets {
    use super::SynthConfig;

    /// Uniform mixture knob: rows are `sharpness`-weighted blocks plus the
    /// complement spread uniformly, so ambiguity is one number.
    fn block_emissions(latents: usize, vocab: usize, sharpness: f64) -> Vec<Vec<f64>> {
        let block = vocab / latents;
        assert!(block >= 1, "vocab must be at least latents");
        (0..latents)
            .map(|l| {
                let mut row = vec![(1.0 - sharpness) / vocab as f64; vocab];
                let start = l * block;
                let end = if l == latents - 1 { vocab } else { start + block };
                let width = end - start;
                for item in row.iter_mut().take(end).skip(start) {
                    *item += sharpness / width as f64;
                }
                row
            })
            .collect()
    }

    /// Doubly stochastic transition: stay, step forward, or jump anywhere.
    fn cyclic_transitions(latents: usize, stay: f64, step: f64) -> Vec<Vec<f64>> {
        let rest = (1.0 - stay - step) / latents as f64;
        (0..latents)
            .map(|i| {
                let mut row = vec![rest; latents];
                row[i] += stay;
                row[(i + 1) % latents] += step;
                row
            })
            .collect()
    }

    fn identity_channel(latents: usize) -> Vec<Vec<f64>> {
        (0..latents)
            .map(|i| {
                let mut row = vec![0.0; latents];
                row[i] = 1.0;
                row
            })
            .collect()
    }

    fn shifted_channel(latents: usize, shift: usize) -> Vec<Vec<f64>> {
        (0..latents)
            .map(|i| {
                let mut row = vec![0.0; latents];
                row[(i + shift) % latents] = 1.0;
                row
            })
            .collect()
    }

    /// The shipped 3-latent, 4-word fixture: Y is the latent identity, Z a
    /// deterministic 3→2 coarsening, emissions informative but overlapping.
    pub fn tiny_fixture() -> SynthConfig {
        SynthConfig {
            latents: 3,
            vocab: 4,
            initial: vec![0.5, 0.3, 0.2],
            transition: vec![
                vec![0.6, 0.3, 0.1],
                vec![0.2, 0.5, 0.3],
                vec![0.3, 0.2, 0.5],
            ],
            emission: vec![
                vec![0.5, 0.3, 0.1, 0.1],
                vec![0.1, 0.5, 0.3, 0.1],
                vec![0.1, 0.1, 0.3, 0.5],
            ],
            coarsen_y: identity_channel(3),
            coarsen_z: vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            len_range: (1, 6),
            sentences_y: 40,
            sentences_z: 40,
            val_pairs: 20,
        }
    }

    /// Emissions fully reveal the latent tag: every observable predictor
    /// ceiling is 1.0. Used by the supervised-baseline smoke test.
    pub fn separable(latents: usize, per_latent_words: usize) -> SynthConfig {
        let vocab = latents * per_latent_words;
        SynthConfig {
            latents,
            vocab,
            initial: vec![1.0 / latents as f64; latents],
            transition: cyclic_transitions(latents, 0.3, 0.3),
            emission: block_emissions(latents, vocab, 1.0),
            coarsen_y: identity_channel(latents),
            coarsen_z: identity_channel(latents),
            len_range: (4, 10),
            sentences_y: 160,
            sentences_z: 160,
            val_pairs: 120,
        }
    }

    /// Z is strictly more informative about Y than the emissions: z equals
    /// the latent (so knowing z pins y exactly) while emissions are
    /// ambiguous. The bayes(x,z) − bayes(x) gap is wide by construction.
    pub fn label_informative(seed_sizes: bool) -> SynthConfig {
        let latents = 6;
        let vocab = 24;
        SynthConfig {
            latents,
            vocab,
            initial: vec![1.0 / latents as f64; latents],
            transition: cyclic_transitions(latents, 0.35, 0.35),
            emission: block_emissions(latents, vocab, 0.55),
            coarsen_y: identity_channel(latents),
            coarsen_z: identity_channel(latents),
            len_range: (4, 10),
            sentences_y: if seed_sizes { 240 } else { 60 },
            sentences_z: if seed_sizes { 240 } else { 60 },
            val_pairs: if seed_sizes { 500 } else { 40 },
        }
    }

    /// Y and Z mutually determine each other (Z is a relabeled Y) while
    /// emissions stay ambiguous; the configuration for reproducing the
    /// cheat-mode collapse.
    pub fn ambiguous_bijective() -> SynthConfig {
        let latents = 6;
        let vocab = 24;
        SynthConfig {
            latents,
            vocab,
            initial: vec![1.0 / latents as f64; latents],
            transition: cyclic_transitions(latents, 0.35, 0.35),
            emission: block_emissions(latents, vocab, 0.55),
            coarsen_y: identity_channel(latents),
            coarsen_z: shifted_channel(latents, 2),
            len_range: (4, 10),
            sentences_y: 240,
            sentences_z: 240,
            val_pairs: 500,
        }
    }

    /// Moderate config for the generator chi-square audits.
    pub fn statistics_audit() -> SynthConfig {
        let mut cfg = label_informative(true);
        cfg.sentences_y = 8000;
        cfg.sentences_z = 8000;
        cfg.val_pairs = 10;
        cfg.len_range = (6, 9);
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for cfg in [
            presets::tiny_fixture(),
            presets::separable(4, 3),
            presets::label_informative(true),
            presets::ambiguous_bijective(),
            presets::statistics_audit(),
        ] {
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn same_seed_identical_corpora() {
        let cfg = presets::tiny_fixture();
        let a = gen_synthetic(&cfg, 33).unwrap();
        let b = gen_synthetic(&cfg, 33).unwrap();
        assert_eq!(a.train_y, b.train_y);
        assert_eq!(a.train_z, b.train_z);
        assert_eq!(a.val, b.val);
        assert_eq!(a.latents_y, b.latents_y);
    }

    #[test]
    fn different_seed_differs() {
        let cfg = presets::tiny_fixture();
        let a = gen_synthetic(&cfg, 1).unwrap();
        let b = gen_synthetic(&cfg, 2).unwrap();
        assert_ne!(a.train_y, b.train_y);
    }

    #[test]
    fn train_corpora_are_disjoint() {
        let cfg = presets::tiny_fixture();
        let c = gen_synthetic(&cfg, 5).unwrap();
        let texts_y: std::collections::HashSet<String> =
            c.train_y.iter().map(|s| s.text()).collect();
        for s in &c.train_z {
            assert!(!texts_y.contains(&s.text()), "shared sentence {}", s.text());
        }
    }

    #[test]
    fn deterministic_channels_match_latents() {
        let cfg = presets::ambiguous_bijective();
        let c = gen_synthetic(&cfg, 9).unwrap();
        for (pair, latents) in c.val.iter().zip(&c.latents_val) {
            for (t, &l) in latents.iter().enumerate() {
                let y_expected = cfg.coarsen_y[l].iter().position(|p| *p > 0.0).unwrap();
                let z_expected = cfg.coarsen_z[l].iter().position(|p| *p > 0.0).unwrap();
                assert_eq!(pair.y_tags[t], y_expected);
                assert_eq!(pair.z_tags[t], z_expected);
            }
        }
    }

    #[test]
    fn rejects_invalid_stochastic_matrix() {
        let mut cfg = presets::tiny_fixture();
        cfg.transition[0][0] += 0.01;
        assert!(gen_synthetic(&cfg, 1).is_err());
    }

    #[test]
    fn impossible_disjointness_reports_an_error() {
        // One-word vocabulary and length-1 sentences: only one possible
        // sentence, so the second block cannot avoid collisions.
        let cfg = SynthConfig {
            latents: 1,
            vocab: 1,
            initial: vec![1.0],
            transition: vec![vec![1.0]],
            emission: vec![vec![1.0]],
            coarsen_y: vec![vec![1.0]],
            coarsen_z: vec![vec![1.0]],
            len_range: (1, 1),
            sentences_y: 1,
            sentences_z: 1,
            val_pairs: 0,
        };
        assert!(gen_synthetic(&cfg, 1).is_err());
    }

    #[test]
    fn emission_id_round_trip() {
        assert_eq!(emission_id("w7", 10).unwrap(), 7);
        assert!(emission_id("w12", 10).is_err());
        assert!(emission_id("hello", 10).is_err());
    }

    #[test]
    fn stationary_of_doubly_stochastic_is_uniform() {
        let cfg = presets::ambiguous_bijective();
        let pi = cfg.stationary();
        for p in &pi {
            assert!((p - 1.0 / 6.0).abs() < 1e-10);
        }
    }
}
