//! Finite-difference gradient checking.
//!
//! The reference every backward rule is held to: central differences
//! `(f(x + eps) - f(x - eps)) / 2eps` on a scalar-valued function, compared
//! coordinate by coordinate against the analytic gradient from one reverse
//! pass. The function under test must be deterministic — rerunning it on
//! perturbed input is only meaningful if the two runs differ in nothing but
//! the perturbation (fix seeds, freeze any persistent state).

use super::{Graph, TensorId};
use crate::error::{Error, Result};

/// Relative disagreement between an analytic and a numeric gradient entry:
/// `|a - n| / max(1e-4, |a| + |n|)`. Below the floor the measure degrades
/// into an absolute test: central differences on an O(10) function at
/// eps 1e-5 carry ~1e-10..1e-9 of f64 roundoff, so entries whose true
/// gradient is zero (softmax kills a per-row constant, so key biases get
/// exactly zero) would otherwise amplify pure noise into false alarms.
/// A genuinely dropped or mis-scaled gradient of any consequential size
/// still trips the 1e-4 criterion through the floored denominator.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1e-4, analytic.abs() + numeric.abs())
}

/// Worst-entry relative disagreement between two gradient vectors.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    debug_assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Check `f`'s gradient at `x`: builds one graph for the analytic gradient,
/// then evaluates `f` at `2 * len(x)` perturbed points for the central
/// differences. Returns the worst relative error over all coordinates.
///
/// `f` receives a fresh graph and the id of the input leaf and must return
/// a single-element tensor.
pub fn gradcheck<F>(f: F, x: &[f64], shape: &[usize], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, TensorId) -> Result<TensorId>,
{
    if eps <= 0.0 {
        return Err(Error::Domain {
            op: "gradcheck",
            detail: format!("eps {eps} must be positive"),
        });
    }
    let mut g = Graph::new();
    let xid = g.param(x.to_vec(), shape)?;
    let loss = f(&mut g, xid)?;
    if g.numel(loss) != 1 {
        return Err(Error::contract(format!(
            "gradcheck function must be scalar-valued, got shape {:?}",
            g.shape(loss)
        )));
    }
    g.backward(loss)?;
    let analytic = g
        .grad(xid)
        .ok_or_else(|| Error::contract("gradcheck: no gradient reached the input"))?
        .to_vec();

    let eval = |xs: &[f64]| -> Result<f64> {
        let mut g = Graph::new();
        let xid = g.param(xs.to_vec(), shape)?;
        let loss = f(&mut g, xid)?;
        Ok(g.value(loss))
    };

    let mut worst = 0.0f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let up = eval(&probe)?;
        probe[i] = orig - eps;
        let down = eval(&probe)?;
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        worst = worst.max(rel_err(analytic[i], numeric));
    }
    Ok(worst)
}

/// Central-difference gradient of a scalar function of a flat parameter
/// vector. Used by the network-level checks, where the analytic side comes
/// from a full forward/backward over a parameter store.
pub fn numeric_grad<F>(f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let up = f(&probe)?;
        probe[i] = orig - eps;
        let down = f(&probe)?;
        probe[i] = orig;
        out.push((up - down) / (2.0 * eps));
    }
    Ok(out)
}
