//! Stateless numeric operations: stable softmax, cross entropy, inverted
//! dropout masks, and categorical sampling. The differentiable versions
//! live on the tape; these are the reference forms used for sampling,
//! evaluation, and tests.

use crate::error::{Error, Result};
use crate::substrate::rng::Rng;
use crate::substrate::tensor::Tensor;

/// Shift-stable softmax of a non-empty finite vector.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Shape("softmax of empty vector".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.iter().map(|e| e / sum).collect())
}

/// log(sum(exp(x))) with max subtraction.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// -log softmax(logits)[target].
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::Shape(format!(
            "cross_entropy target {} out of range for {} classes",
            target,
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cross_entropy input".into()));
    }
    Ok(log_sum_exp(logits) - logits[target])
}

/// Inverted-dropout multiplier mask: each entry is 0 with probability
/// `rate` and 1/(1-rate) otherwise. At evaluation time dropout is the
/// identity, so no mask is drawn there.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Data(format!("dropout rate {rate} outside [0,1)")));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep_scale })
        .collect())
}

/// Apply dropout to a tensor. Identity when `training` is false or rate is 0.
pub fn dropout(t: &Tensor, rate: f64, rng: &mut Rng, training: bool) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Data(format!("dropout rate {rate} outside [0,1)")));
    }
    if !training || rate == 0.0 {
        return Ok(t.clone());
    }
    let mask = dropout_mask(t.numel(), rate, rng)?;
    let data = t.data.iter().zip(&mask).map(|(v, m)| v * m).collect();
    Tensor::new(t.shape.clone(), data)
}

/// Sample an index from a probability vector. The vector must sum to 1
/// within 1e-4; the draw consumes exactly one uniform variate.
pub fn sample_categorical(probs: &[f64], rng: &mut Rng) -> Result<usize> {
    let total: f64 = probs.iter().sum();
    if probs.is_empty() || total <= 0.0 {
        return Err(Error::Data("degenerate categorical distribution".into()));
    }
    if (total - 1.0).abs() > 1e-4 {
        return Err(Error::Data(format!(
            "categorical probabilities sum to {total}, expected 1"
        )));
    }
    let u = rng.next_f64() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(probs.len() - 1)
}

/// Index of the maximum entry; ties break toward the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetry() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_analytic() {
        let p = softmax(&[0.0, 3.0f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12);
        assert!((p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax(&[5.0, 5.0, 6.0]).unwrap();
        let b = softmax(&[0.0, 0.0, 1.0]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_rejects_empty_and_nonfinite() {
        assert!(softmax(&[]).is_err());
        assert!(softmax(&[1.0, f64::NAN]).is_err());
        assert!(softmax(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn cross_entropy_uniform_is_ln_k() {
        let loss = cross_entropy(&[0.7; 4], 2).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_analytic() {
        let logits = [0.0, 3.0f64.ln()];
        let l1 = cross_entropy(&logits, 1).unwrap();
        assert!((l1 - (-(0.75f64.ln()))).abs() < 1e-9);
        let l0 = cross_entropy(&logits, 0).unwrap();
        assert!((l0 - 4.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_target_out_of_range() {
        assert!(cross_entropy(&[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn dropout_rate_zero_is_identity() {
        let t = Tensor::new(vec![4], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let mut rng = Rng::new(1);
        let out = dropout(&t, 0.0, &mut rng, true).unwrap();
        assert_eq!(out.data, t.data);
    }

    #[test]
    fn dropout_eval_is_identity() {
        let t = Tensor::new(vec![4], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let mut rng = Rng::new(1);
        let out = dropout(&t, 0.85, &mut rng, false).unwrap();
        assert_eq!(out.data, t.data);
    }

    #[test]
    fn dropout_rejects_bad_rate() {
        let t = Tensor::zeros(vec![2]);
        let mut rng = Rng::new(1);
        assert!(dropout(&t, 1.0, &mut rng, true).is_err());
        assert!(dropout(&t, -0.1, &mut rng, true).is_err());
    }

    #[test]
    fn dropout_statistics_at_085() {
        let t = Tensor::new(vec![10_000], vec![1.0; 10_000]).unwrap();
        let mut rng = Rng::new(99);
        let out = dropout(&t, 0.85, &mut rng, true).unwrap();
        let kept = out.data.iter().filter(|v| **v != 0.0).count() as f64 / 10_000.0;
        assert!((kept - 0.15).abs() < 0.02, "kept fraction {kept}");
        let mean = out.data.iter().sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn sample_one_hot_always_that_index() {
        let mut rng = Rng::new(11);
        for _ in 0..50 {
            assert_eq!(sample_categorical(&[0.0, 0.0, 1.0], &mut rng).unwrap(), 2);
        }
    }

    #[test]
    fn sample_frequency_balanced() {
        let mut rng = Rng::new(4);
        let mut counts = [0usize; 2];
        for _ in 0..10_000 {
            counts[sample_categorical(&[0.5, 0.5], &mut rng).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((f - 0.5).abs() < 0.02, "frequency {f}");
        }
    }

    #[test]
    fn sample_deterministic_per_seed() {
        let draw = |seed| {
            let mut rng = Rng::new(seed);
            (0..20)
                .map(|_| sample_categorical(&[0.2, 0.3, 0.5], &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(8), draw(8));
    }

    #[test]
    fn sample_rejects_degenerate() {
        let mut rng = Rng::new(1);
        assert!(sample_categorical(&[0.0, 0.0], &mut rng).is_err());
        assert!(sample_categorical(&[0.4, 0.4], &mut rng).is_err());
    }
}
