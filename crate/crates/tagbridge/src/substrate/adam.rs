//! Adam optimizer with the usual defaults (lr 1e-3, beta1 0.9, beta2
//! 0.999, eps 1e-8) and bias correction. State is keyed by parameter name
//! so it survives checkpointing.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::substrate::nn::Params;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AdamSlot {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    pub t: u64,
    pub slots: BTreeMap<String, AdamSlot>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            t: 0,
            slots: BTreeMap::new(),
        }
    }

    /// Apply one update using the `grad` field of every parameter.
    /// Missing gradients are an error; non-finite gradients abort.
    pub fn step(&mut self, params: &mut dyn Params) -> Result<()> {
        self.t += 1;
        let bc1 = 1.0 - self.cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.cfg.beta2.powi(self.t as i32);
        let cfg = self.cfg;
        let t_slots = &mut self.slots;
        let mut failure: Option<Error> = None;
        params.visit_mut(&mut |name, tensor| {
            if failure.is_some() {
                return;
            }
            let grad = match &tensor.grad {
                Some(g) => g,
                None => {
                    failure = Some(Error::Shape(format!("parameter {name} has no gradient")));
                    return;
                }
            };
            if grad.len() != tensor.data.len() {
                failure = Some(Error::Shape(format!(
                    "parameter {name}: grad length {} != data length {}",
                    grad.len(),
                    tensor.data.len()
                )));
                return;
            }
            if grad.iter().any(|g| !g.is_finite()) {
                failure = Some(Error::NonFinite(format!("gradient of {name}")));
                return;
            }
            let slot = t_slots.entry(name.to_string()).or_insert_with(|| AdamSlot {
                m: vec![0.0; grad.len()],
                v: vec![0.0; grad.len()],
            });
            for i in 0..grad.len() {
                let g = grad[i];
                slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * g;
                slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = slot.m[i] / bc1;
                let v_hat = slot.v[i] / bc2;
                tensor.data[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::nn::TensorBag;
    use crate::substrate::tensor::Tensor;

    fn bag(value: f64) -> TensorBag {
        let mut t = Tensor::new(vec![1], vec![value]).unwrap();
        t.requires_grad = true;
        TensorBag(vec![("p".into(), t)])
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = bag(0.7);
        params.0[0].1.set_grad(vec![0.0]).unwrap();
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut params).unwrap();
        assert_eq!(params.0[0].1.data[0], 0.7);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn first_step_magnitude_is_lr_in_gradient_direction() {
        // With zero state, m_hat = g and v_hat = g^2, so the update is
        // lr * g / (|g| + eps) = lr * sign(g) up to eps.
        let mut params = bag(0.0);
        params.0[0].1.set_grad(vec![3.5]).unwrap();
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut params).unwrap();
        let moved = -params.0[0].1.data[0];
        assert!((moved - 1e-3).abs() < 1e-9, "moved {moved}");

        let mut params = bag(0.0);
        params.0[0].1.set_grad(vec![-0.01]).unwrap();
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut params).unwrap();
        assert!((params.0[0].1.data[0] - 1e-3).abs() < 1e-6);
    }

    #[test]
    fn deterministic_across_runs() {
        let run = || {
            let mut params = bag(0.25);
            let mut adam = Adam::new(AdamConfig::default());
            for k in 0..10 {
                params.0[0].1.set_grad(vec![0.1 * (k as f64 - 4.0)]).unwrap();
                adam.step(&mut params).unwrap();
            }
            params.0[0].1.data[0]
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }

    #[test]
    fn nonfinite_gradient_is_an_error() {
        let mut params = bag(0.0);
        params.0[0].1.set_grad(vec![f64::NAN]).unwrap();
        let mut adam = Adam::new(AdamConfig::default());
        assert!(adam.step(&mut params).is_err());
    }

    #[test]
    fn grad_shape_mismatch_is_an_error() {
        let mut params = bag(0.0);
        params.0[0].1.grad = Some(vec![0.0, 1.0]);
        let mut adam = Adam::new(AdamConfig::default());
        assert!(adam.step(&mut params).is_err());
    }
}
