//! Central finite-difference verification of tape gradients.
//!
//! `grad_check` runs a loss builder once with the tape to get analytic
//! gradients, then perturbs every parameter element by ±eps and compares.
//! The builder must be deterministic: any randomness inside it has to come
//! from a freshly seeded stream per call, otherwise the two perturbed
//! evaluations see different sampling decisions and the comparison is
//! meaningless.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::substrate::nn::Params;
use crate::substrate::tape::{Tape, VarId};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub params_checked: usize,
    pub elements_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Relative error with a floor so that near-zero gradient pairs compare
/// on an absolute scale.
fn rel_err(a: f64, n: f64) -> f64 {
    let denom = a.abs().max(n.abs()).max(1e-4);
    (a - n).abs() / denom
}

/// Check the gradients of a scalar loss against central differences.
///
/// `build` receives the model and a tape and must register the parameters
/// it uses with the model's canonical names (via the layer `bind` calls),
/// returning the loss variable.
pub fn grad_check<M, F>(model: &mut M, eps: f64, build: F) -> Result<GradCheckReport>
where
    M: Params,
    F: Fn(&M, &mut Tape) -> Result<VarId>,
{
    if eps <= 0.0 {
        return Err(Error::Data(format!("grad_check eps {eps} must be > 0")));
    }

    // Analytic pass.
    let mut tape = Tape::new();
    let loss = build(model, &mut tape)?;
    if tape.data(loss).len() != 1 {
        return Err(Error::Shape("grad_check loss must be scalar".into()));
    }
    tape.backward(loss)?;
    let analytic: BTreeMap<String, Vec<f64>> = tape
        .param_grads()
        .into_iter()
        .map(|(n, g)| (n.to_string(), g))
        .collect();

    let eval = |model: &M| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = build(model, &mut tape)?;
        let v = tape.data(loss)[0];
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("loss {v} during grad_check")));
        }
        Ok(v)
    };

    let names = model.param_names();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        params_checked: 0,
        elements_checked: 0,
    };

    for name in names {
        let len = {
            let mut len = 0;
            model.visit(&mut |n, t| {
                if n == name {
                    len = t.numel();
                }
            });
            len
        };
        let grads = analytic.get(&name).cloned().unwrap_or_else(|| vec![0.0; len]);
        report.params_checked += 1;
        for i in 0..len {
            let nudge = |model: &mut M, delta: f64| {
                model.visit_mut(&mut |n, t| {
                    if n == name {
                        t.data[i] += delta;
                    }
                });
            };
            nudge(model, eps);
            let f_plus = eval(model);
            nudge(model, -2.0 * eps);
            let f_minus = eval(model);
            nudge(model, eps); // restore
            let (f_plus, f_minus) = (f_plus?, f_minus?);
            let numeric = (f_plus - f_minus) / (2.0 * eps);
            let err = rel_err(grads[i], numeric);
            report.elements_checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst_param = format!("{name}[{i}]");
            }
        }
    }
    Ok(report)
}
