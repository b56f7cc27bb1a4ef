//! Optimal-predictor accuracy on synthetic corpora.
//!
//! The generator's latent chain makes posterior decoding exact: given the
//! emissions (and optionally the other side's gold labels as extra
//! per-position evidence), forward-backward produces the per-position
//! posterior over target tags, and `max_y P(y_t | evidence)` is the
//! probability the optimal predictor is right at position t. Averaging
//! that over sequences gives a ceiling no trained model can beat, which is
//! what the experiment harness checks itself against.
//!
//! Two independent routes compute the same expectation: `expected_accuracy`
//! runs forward-backward per sequence, `expected_accuracy_brute` sums over
//! raw latent paths. They must agree to 1e-9 on enumerable configs.

use std::collections::HashMap;

use crate::corpus::synth::{channel_deterministic, emission_ids, SynthConfig};
use crate::corpus::types::{ParallelPair, Side};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Condition on emissions only (what a supervised model sees).
    XOnly,
    /// Condition on emissions plus the other side's gold labels.
    XAndZ,
}

fn channels(cfg: &SynthConfig, target: Side) -> (&[Vec<f64>], &[Vec<f64>]) {
    match target {
        Side::Y => (&cfg.coarsen_y, &cfg.coarsen_z),
        Side::Z => (&cfg.coarsen_z, &cfg.coarsen_y),
    }
}

struct Decoded {
    /// Per-position posterior over target tags.
    posteriors: Vec<Vec<f64>>,
    /// Joint probability of the conditioning evidence.
    likelihood: f64,
}

/// Scaled forward-backward over the latent chain. `other` supplies the
/// other side's tags as additional per-position evidence.
fn forward_backward(
    cfg: &SynthConfig,
    target: Side,
    emissions: &[usize],
    other: Option<&[usize]>,
) -> Result<Decoded> {
    let n = emissions.len();
    if n == 0 {
        return Err(Error::Data("empty sequence".into()));
    }
    if let Some(o) = other {
        if o.len() != n {
            return Err(Error::Data(format!(
                "conditioning labels length {} != sequence length {n}",
                o.len()
            )));
        }
    }
    let l = cfg.latents;
    let (target_ch, other_ch) = channels(cfg, target);

    let evidence = |t: usize, latent: usize| -> f64 {
        let mut e = cfg.emission[latent][emissions[t]];
        if let Some(o) = other {
            e *= other_ch[latent][o[t]];
        }
        e
    };

    // Forward with per-step normalization; the normalizers multiply back
    // into the evidence likelihood.
    let mut alpha = vec![vec![0.0; l]; n];
    let mut scale = vec![0.0; n];
    for latent in 0..l {
        alpha[0][latent] = cfg.initial[latent] * evidence(0, latent);
    }
    scale[0] = alpha[0].iter().sum();
    if scale[0] == 0.0 {
        return Ok(Decoded {
            posteriors: Vec::new(),
            likelihood: 0.0,
        });
    }
    alpha[0].iter_mut().for_each(|a| *a /= scale[0]);
    for t in 1..n {
        for latent in 0..l {
            let mut acc = 0.0;
            for prev in 0..l {
                acc += alpha[t - 1][prev] * cfg.transition[prev][latent];
            }
            alpha[t][latent] = acc * evidence(t, latent);
        }
        scale[t] = alpha[t].iter().sum();
        if scale[t] == 0.0 {
            return Ok(Decoded {
                posteriors: Vec::new(),
                likelihood: 0.0,
            });
        }
        alpha[t].iter_mut().for_each(|a| *a /= scale[t]);
    }

    let mut beta = vec![vec![1.0; l]; n];
    for t in (0..n - 1).rev() {
        for latent in 0..l {
            let mut acc = 0.0;
            for next in 0..l {
                acc += cfg.transition[latent][next] * evidence(t + 1, next) * beta[t + 1][next];
            }
            beta[t][latent] = acc / scale[t + 1];
        }
    }

    let mut posteriors = Vec::with_capacity(n);
    for t in 0..n {
        let mut gamma: Vec<f64> = (0..l).map(|s| alpha[t][s] * beta[t][s]).collect();
        let total: f64 = gamma.iter().sum();
        gamma.iter_mut().for_each(|g| *g /= total);
        let k = target_ch[0].len();
        let mut post = vec![0.0; k];
        for (latent, g) in gamma.iter().enumerate() {
            for (tag, p) in target_ch[latent].iter().enumerate() {
                post[tag] += g * p;
            }
        }
        posteriors.push(post);
    }
    Ok(Decoded {
        posteriors,
        likelihood: scale.iter().product(),
    })
}

/// Per-position posterior over `target` tags given emissions and,
/// optionally, the other side's labels. Errors on impossible evidence.
pub fn posterior_target(
    cfg: &SynthConfig,
    target: Side,
    emissions: &[usize],
    other: Option<&[usize]>,
) -> Result<Vec<Vec<f64>>> {
    let d = forward_backward(cfg, target, emissions, other)?;
    if d.likelihood == 0.0 {
        return Err(Error::Data("evidence sequence has probability zero".into()));
    }
    Ok(d.posteriors)
}

fn mean_max(posteriors: &[Vec<f64>]) -> f64 {
    let total: f64 = posteriors
        .iter()
        .map(|p| p.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .sum();
    total / posteriors.len() as f64
}

/// Expected accuracy of the optimal predictor on a concrete validation
/// sample: the mean over tokens of `max_y P(y_t | evidence)`.
pub fn sampled_ceiling(
    cfg: &SynthConfig,
    target: Side,
    mode: OracleMode,
    pairs: &[ParallelPair],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Data("no validation pairs".into()));
    }
    let mut total = 0.0;
    let mut tokens = 0usize;
    for pair in pairs {
        let emissions = emission_ids(&pair.tokens, cfg.vocab)?;
        let other = match mode {
            OracleMode::XOnly => None,
            OracleMode::XAndZ => Some(pair.tags(target.other())),
        };
        let posteriors = posterior_target(cfg, target, &emissions, other)?;
        for p in &posteriors {
            total += p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        }
        tokens += posteriors.len();
    }
    Ok(total / tokens as f64)
}

/// Odometer over sequences of `len` symbols from an alphabet of `k`.
fn for_each_sequence(len: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut seq = vec![0usize; len];
    loop {
        f(&seq);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < k {
                break;
            }
            seq[pos] = 0;
        }
    }
}

fn enumeration_cost(cfg: &SynthConfig, target: Side, mode: OracleMode, brute: bool) -> f64 {
    let (_, other_ch) = channels(cfg, target);
    let z_arity = match mode {
        OracleMode::XOnly => 1.0,
        OracleMode::XAndZ => {
            if brute && channel_deterministic(other_ch) {
                1.0
            } else {
                other_ch[0].len() as f64
            }
        }
    };
    let per_pos = if brute {
        cfg.latents as f64 * cfg.vocab as f64 * z_arity
    } else {
        // forward-backward is L^2 per position over the key space
        cfg.vocab as f64 * z_arity
    };
    let fb_cost = if brute {
        1.0
    } else {
        (cfg.latents * cfg.latents) as f64
    };
    (cfg.len_range.0..=cfg.len_range.1)
        .map(|n| per_pos.powi(n as i32) * n as f64 * fb_cost)
        .sum()
}

const ENUMERATION_BUDGET: f64 = 3e8;

/// Exact expected accuracy by enumerating every evidence sequence in the
/// configured length range and running forward-backward on each. Errors
/// when the space is too large (the guardrail on latents·vocab·length).
pub fn expected_accuracy(cfg: &SynthConfig, target: Side, mode: OracleMode) -> Result<f64> {
    cfg.validate()?;
    let cost = enumeration_cost(cfg, target, mode, false);
    if cost > ENUMERATION_BUDGET {
        return Err(Error::Data(format!(
            "config too large for exact enumeration (cost {cost:.2e})"
        )));
    }
    let (lo, hi) = cfg.len_range;
    let len_weight = 1.0 / (hi - lo + 1) as f64;
    let (_, other_ch) = channels(cfg, target);
    let k_other = other_ch[0].len();

    let mut expected = 0.0;
    for n in lo..=hi {
        let mut per_len = 0.0;
        for_each_sequence(n, cfg.vocab, |emissions| match mode {
            OracleMode::XOnly => {
                let d = forward_backward(cfg, target, emissions, None).expect("validated");
                if d.likelihood > 0.0 {
                    per_len += d.likelihood * mean_max(&d.posteriors);
                }
            }
            OracleMode::XAndZ => {
                for_each_sequence(n, k_other, |other| {
                    let d =
                        forward_backward(cfg, target, emissions, Some(other)).expect("validated");
                    if d.likelihood > 0.0 {
                        per_len += d.likelihood * mean_max(&d.posteriors);
                    }
                });
            }
        });
        expected += len_weight * per_len;
    }
    Ok(expected)
}

/// The independent route: accumulate `P(target_tag, evidence)` numerators
/// by enumerating latent paths outright, then take the per-key maxima.
/// No forward-backward is involved.
pub fn expected_accuracy_brute(cfg: &SynthConfig, target: Side, mode: OracleMode) -> Result<f64> {
    cfg.validate()?;
    let cost = enumeration_cost(cfg, target, mode, true);
    if cost > ENUMERATION_BUDGET {
        return Err(Error::Data(format!(
            "config too large for brute enumeration (cost {cost:.2e})"
        )));
    }
    let (lo, hi) = cfg.len_range;
    let len_weight = 1.0 / (hi - lo + 1) as f64;
    let (target_ch, other_ch) = channels(cfg, target);
    let k_target = target_ch[0].len();
    let k_other = other_ch[0].len();
    let other_det = channel_deterministic(other_ch);
    let det_other: Vec<usize> = other_ch
        .iter()
        .map(|row| row.iter().position(|p| *p > 0.0).unwrap_or(0))
        .collect();

    // Key = emission sequence and (for XAndZ) conditioning sequence,
    // packed positionally.
    let pack = |seq: &[usize], k: usize| -> u64 {
        seq.iter().fold(0u64, |acc, s| acc * k as u64 + *s as u64)
    };

    let mut expected = 0.0;
    for n in lo..=hi {
        // numerators[key][t * k_target + tag] = P(tag at t, evidence=key)
        let mut numerators: HashMap<(u64, u64), Vec<f64>> = HashMap::new();
        for_each_sequence(n, cfg.latents, |path| {
            let mut p_path = cfg.initial[path[0]];
            for t in 1..n {
                p_path *= cfg.transition[path[t - 1]][path[t]];
            }
            if p_path == 0.0 {
                return;
            }
            for_each_sequence(n, cfg.vocab, |emissions| {
                let mut p_emit = p_path;
                for t in 0..n {
                    p_emit *= cfg.emission[path[t]][emissions[t]];
                }
                if p_emit == 0.0 {
                    return;
                }
                let x_key = pack(emissions, cfg.vocab);
                let mut add = |z_key: u64, p: f64| {
                    let slot = numerators
                        .entry((x_key, z_key))
                        .or_insert_with(|| vec![0.0; n * k_target]);
                    for t in 0..n {
                        for tag in 0..k_target {
                            slot[t * k_target + tag] += p * target_ch[path[t]][tag];
                        }
                    }
                };
                match mode {
                    OracleMode::XOnly => add(0, p_emit),
                    OracleMode::XAndZ if other_det => {
                        let z: Vec<usize> = path.iter().map(|l| det_other[*l]).collect();
                        add(pack(&z, k_other), p_emit);
                    }
                    OracleMode::XAndZ => {
                        for_each_sequence(n, k_other, |other| {
                            let mut p_all = p_emit;
                            for t in 0..n {
                                p_all *= other_ch[path[t]][other[t]];
                            }
                            if p_all > 0.0 {
                                add(pack(other, k_other), p_all);
                            }
                        });
                    }
                }
            });
        });

        // E[acc | n] = Σ_key (1/n) Σ_t max_tag P(tag at t, key)
        let mut per_len = 0.0;
        for slot in numerators.values() {
            let mut acc = 0.0;
            for t in 0..n {
                acc += slot[t * k_target..(t + 1) * k_target]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            per_len += acc / n as f64;
        }
        expected += len_weight * per_len;
    }
    Ok(expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::presets;

    fn identity(k: usize) -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| {
                let mut row = vec![0.0; k];
                row[i] = 1.0;
                row
            })
            .collect()
    }

    #[test]
    fn revealing_emissions_reach_one_in_both_modes() {
        let cfg = SynthConfig {
            latents: 3,
            vocab: 3,
            initial: vec![0.3, 0.3, 0.4],
            transition: vec![
                vec![0.5, 0.25, 0.25],
                vec![0.25, 0.5, 0.25],
                vec![0.25, 0.25, 0.5],
            ],
            emission: identity(3),
            coarsen_y: identity(3),
            coarsen_z: identity(3),
            len_range: (1, 3),
            sentences_y: 1,
            sentences_z: 1,
            val_pairs: 1,
        };
        let x_only = expected_accuracy(&cfg, Side::Y, OracleMode::XOnly).unwrap();
        let x_and_z = expected_accuracy(&cfg, Side::Y, OracleMode::XAndZ).unwrap();
        assert!((x_only - 1.0).abs() < 1e-12);
        assert!((x_and_z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uninformative_emissions_fall_back_to_prior_decoding() {
        // Every latent shares one emission distribution, Z and Y are the
        // latent identity. The identity transition keeps the marginal at
        // the initial distribution, so emissions-only decoding scores
        // max(initial) while knowing z scores 1.
        let cfg = SynthConfig {
            latents: 2,
            vocab: 3,
            initial: vec![0.7, 0.3],
            transition: identity(2),
            emission: vec![vec![1.0 / 3.0; 3]; 2],
            coarsen_y: identity(2),
            coarsen_z: identity(2),
            len_range: (1, 4),
            sentences_y: 1,
            sentences_z: 1,
            val_pairs: 1,
        };
        let x_only = expected_accuracy(&cfg, Side::Y, OracleMode::XOnly).unwrap();
        let x_and_z = expected_accuracy(&cfg, Side::Y, OracleMode::XAndZ).unwrap();
        assert!((x_only - 0.7).abs() < 1e-12, "x_only {x_only}");
        assert!((x_and_z - 1.0).abs() < 1e-12, "x_and_z {x_and_z}");
    }

    #[test]
    fn fixture_routes_agree_small_lengths() {
        let mut cfg = presets::tiny_fixture();
        cfg.len_range = (1, 3);
        for mode in [OracleMode::XOnly, OracleMode::XAndZ] {
            let fb = expected_accuracy(&cfg, Side::Y, mode).unwrap();
            let brute = expected_accuracy_brute(&cfg, Side::Y, mode).unwrap();
            assert!(
                (fb - brute).abs() < 1e-9,
                "mode {mode:?}: fb {fb} vs brute {brute}"
            );
        }
    }

    #[test]
    fn conditioning_never_hurts_on_the_fixture() {
        let mut cfg = presets::tiny_fixture();
        cfg.len_range = (1, 4);
        for side in [Side::Y, Side::Z] {
            let x_only = expected_accuracy(&cfg, side, OracleMode::XOnly).unwrap();
            let x_and_z = expected_accuracy(&cfg, side, OracleMode::XAndZ).unwrap();
            assert!(
                x_and_z >= x_only - 1e-12,
                "side {side}: {x_and_z} < {x_only}"
            );
        }
    }

    #[test]
    fn sampled_ceiling_matches_enumeration_in_expectation() {
        // On a deterministic-channel config the sampled ceiling over many
        // pairs should land near the exact expectation.
        let mut cfg = presets::tiny_fixture();
        cfg.val_pairs = 4000;
        cfg.sentences_y = 1;
        cfg.sentences_z = 1;
        let corpus = crate::corpus::synth::gen_synthetic(&cfg, 77).unwrap();
        let sampled = sampled_ceiling(&cfg, Side::Y, OracleMode::XOnly, &corpus.val).unwrap();
        let exact = expected_accuracy(&cfg, Side::Y, OracleMode::XOnly).unwrap();
        assert!(
            (sampled - exact).abs() < 0.02,
            "sampled {sampled} vs exact {exact}"
        );
    }

    #[test]
    fn guardrail_rejects_oversized_configs() {
        let mut cfg = presets::tiny_fixture();
        cfg.len_range = (1, 60);
        assert!(expected_accuracy(&cfg, Side::Y, OracleMode::XOnly).is_err());
    }

    #[test]
    fn posterior_rejects_impossible_evidence() {
        let mut cfg = presets::tiny_fixture();
        // Word 0 becomes unemittable from any latent; mass moves to word 1.
        for row in cfg.emission.iter_mut() {
            row[1] += row[0];
            row[0] = 0.0;
        }
        assert!(posterior_target(&cfg, Side::Y, &[0], None).is_err());
        assert!(posterior_target(&cfg, Side::Y, &[1], None).is_ok());
    }

    #[test]
    fn posteriors_are_distributions() {
        let cfg = presets::tiny_fixture();
        let posts = posterior_target(&cfg, Side::Z, &[0, 2, 3, 1], None).unwrap();
        assert_eq!(posts.len(), 4);
        for p in posts {
            assert_eq!(p.len(), 2);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
