//! Adam with bias correction, one state per training phase.

use crate::error::{Error, Result};
use crate::params::{Grads, ParameterStore};
use indexmap::IndexMap;

/// First/second-moment estimates for the parameters one phase owns.
///
/// The step counter is shared across the phase's parameters (they are all
/// updated together every time the phase runs), which is what makes the
/// bias correction exact. Moment buffers appear the first time a parameter
/// shows up and must keep their size from then on.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Completed steps (bias correction uses `t` after increment).
    pub t: u64,
    moments: IndexMap<String, (Vec<f64>, Vec<f64>)>,
}

impl AdamState {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> AdamState {
        AdamState {
            beta1,
            beta2,
            eps,
            t: 0,
            moments: IndexMap::new(),
        }
    }

    /// One update of every parameter named in `grads`:
    /// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
    /// `θ ← θ − lr·m̂/(√v̂ + ε)` with `m̂ = m/(1−β₁ᵗ)`, `v̂ = v/(1−β₂ᵗ)`.
    ///
    /// A non-finite gradient aborts before touching anything, naming the
    /// offending parameter.
    pub fn step(&mut self, store: &mut ParameterStore, grads: &Grads, lr: f64) -> Result<()> {
        if let Some((name, i)) = grads.first_non_finite() {
            return Err(Error::Divergence(format!(
                "non-finite gradient for {name} at flat index {i}"
            )));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, g) in grads.iter() {
            let p = store
                .get_mut(name)
                .ok_or_else(|| Error::Config(format!("gradient for unknown parameter {name}")))?;
            if p.data.len() != g.len() {
                return Err(Error::Shape {
                    op: "adam_step",
                    lhs: vec![p.data.len()],
                    rhs: vec![g.len()],
                });
            }
            let (m, v) = self
                .moments
                .entry(name.to_string())
                .or_insert_with(|| (vec![0.0; g.len()], vec![0.0; g.len()]));
            if m.len() != g.len() {
                return Err(Error::Shape {
                    op: "adam_moments",
                    lhs: vec![m.len()],
                    rhs: vec![g.len()],
                });
            }
            for k in 0..g.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p.data[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    /// Moment buffers in insertion order, for checkpointing.
    pub fn moments(&self) -> impl Iterator<Item = (&str, &(Vec<f64>, Vec<f64>))> {
        self.moments.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Restore one moment pair (checkpoint loading).
    pub fn insert_moments(&mut self, name: &str, m: Vec<f64>, v: Vec<f64>) -> Result<()> {
        if m.len() != v.len() {
            return Err(Error::Integrity(format!(
                "moment buffers for {name} disagree: {} vs {}",
                m.len(),
                v.len()
            )));
        }
        self.moments.insert(name.to_string(), (m, v));
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.moments.is_empty()
    }
}
