//! Spectral normalization of rank-2 weights by power iteration.
//!
//! Training keeps one persistent left-singular estimate `u` per weight and
//! advances it a configured number of steps (one, by default) each update:
//!
//! ```text
//! v = normalize(Wᵀ u),   u' = normalize(W v),   σ ≈ u'ᵀ W v
//! ```
//!
//! The normalized weight entering a graph is `W / σ` with σ held constant
//! by backward — gradients flow through the numerator only, matching the
//! usual detached-estimate practice. The σ estimate therefore lags the true
//! spectral norm slightly between steps; [`exact_spectral_norm`] is the
//! slow, converged reference (power iteration on the Gram matrix, kept
//! deliberately separate from the training path so it can serve as its
//! oracle).

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Persistent power-iteration state for one `[m, n]` weight.
#[derive(Clone, Debug)]
pub struct SpecNormState {
    /// Left singular-vector estimate, length `m`, unit norm.
    pub u: Vec<f64>,
    /// Most recent σ estimate (refreshed by [`SpecNormState::update`]).
    pub sigma: f64,
    /// Power-iteration steps per update (the per-training-step budget).
    pub n_power_iters: usize,
}

impl SpecNormState {
    /// Fresh state with a random unit `u`. σ is unusable (NaN) until the
    /// first `update`.
    pub fn new(rows: usize, rng: &mut Rng) -> Self {
        let mut u = vec![0.0; rows];
        rng.fill_normal(&mut u);
        normalize(&mut u);
        SpecNormState {
            u,
            sigma: f64::NAN,
            n_power_iters: 1,
        }
    }

    /// Advance the persistent `u` by `n_iters` power-iteration steps on `w`
    /// and refresh the σ estimate (read out of the final step, as usual).
    /// `n_iters = 0` re-estimates σ from the current `u` without moving it.
    pub fn update(&mut self, w: &[f64], shape: &[usize], n_iters: usize) -> Result<f64> {
        let mut sigma;
        if n_iters == 0 {
            let (_, _, s) = power_iteration_step(w, shape, &self.u)?;
            sigma = s;
        } else {
            sigma = f64::NAN;
            for _ in 0..n_iters {
                let (_, u_next, s) = power_iteration_step(w, shape, &self.u)?;
                self.u = u_next;
                sigma = s;
            }
        }
        self.sigma = sigma;
        Ok(sigma)
    }
}

/// One alternating power-iteration step on `w: [m, n]` from the current
/// left estimate `u` (length `m`). Returns `(v, u_next, sigma)` where
/// `v = normalize(wᵀ u)`, `u_next = normalize(w v)`, and
/// `sigma = u_nextᵀ w v`.
pub fn power_iteration_step(
    w: &[f64],
    shape: &[usize],
    u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if shape.len() != 2 || shape[0] * shape[1] != w.len() || u.len() != shape[0] {
        return Err(Error::Shape {
            op: "power_iteration_step",
            lhs: shape.to_vec(),
            rhs: vec![u.len()],
        });
    }
    if w.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateMatrix(
            "power iteration on the zero matrix".into(),
        ));
    }
    let (m, n) = (shape[0], shape[1]);

    // v = normalize(Wᵀ u); if u happens to be orthogonal to the column
    // space, restart from a fixed direction rather than dividing by zero.
    let mut v = mat_t_vec(w, m, n, u);
    if !normalize(&mut v) {
        let ones = vec![1.0 / (m as f64).sqrt(); m];
        v = mat_t_vec(w, m, n, &ones);
        if !normalize(&mut v) {
            return Err(Error::DegenerateMatrix(
                "power iteration found no usable direction".into(),
            ));
        }
    }

    let mut u_next = mat_vec(w, m, n, &v);
    if !normalize(&mut u_next) {
        return Err(Error::DegenerateMatrix(
            "power iteration collapsed to the null space".into(),
        ));
    }

    let wv = mat_vec(w, m, n, &v);
    let sigma = dot(&u_next, &wv);
    Ok((v, u_next, sigma))
}

/// Spectral norm of `w: [m, n]` converged to full precision: power
/// iteration on the Gram matrix `wᵀw` (or `wwᵀ`, whichever is smaller)
/// until the dominant eigenvalue changes by less than 1e-12 relatively,
/// from two fixed pseudo-random starts to guard against an orthogonal
/// initialization. Independent of [`power_iteration_step`] by construction:
/// this is the oracle that path is tested against.
pub fn exact_spectral_norm(w: &[f64], shape: &[usize]) -> Result<f64> {
    if shape.len() != 2 || shape[0] * shape[1] != w.len() {
        return Err(Error::Shape {
            op: "exact_spectral_norm",
            lhs: shape.to_vec(),
            rhs: vec![w.len()],
        });
    }
    if w.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateMatrix(
            "spectral norm of the zero matrix".into(),
        ));
    }
    let (m, n) = (shape[0], shape[1]);

    // Gram matrix on the smaller side.
    let k = n.min(m);
    let mut gram = vec![0.0; k * k];
    if n <= m {
        // G = WᵀW
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for r in 0..m {
                    s += w[r * n + i] * w[r * n + j];
                }
                gram[i * n + j] = s;
                gram[j * n + i] = s;
            }
        }
    } else {
        // G = WWᵀ
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for c in 0..n {
                    s += w[i * n + c] * w[j * n + c];
                }
                gram[i * m + j] = s;
                gram[j * m + i] = s;
            }
        }
    }

    let mut best: f64 = 0.0;
    for start in 0..2u64 {
        let mut rng = Rng::substream(0x9e37_79b9_7f4a_7c15, start);
        let mut x = vec![0.0; k];
        rng.fill_normal(&mut x);
        if !normalize(&mut x) {
            continue;
        }
        let mut lambda_prev = f64::NAN;
        for _ in 0..100_000 {
            let mut gx = vec![0.0; k];
            for i in 0..k {
                let row = &gram[i * k..(i + 1) * k];
                gx[i] = dot(row, &x);
            }
            let lambda = dot(&x, &gx);
            if !normalize(&mut gx) {
                // x is in the null space of G; this start is useless.
                lambda_prev = 0.0;
                break;
            }
            x = gx;
            if lambda_prev.is_finite()
                && (lambda - lambda_prev).abs() <= 1e-12 * lambda.abs().max(1e-300)
            {
                lambda_prev = lambda;
                break;
            }
            lambda_prev = lambda;
        }
        if lambda_prev.is_finite() {
            best = best.max(lambda_prev.max(0.0));
        }
    }
    Ok(best.sqrt())
}

// ── Small dense helpers ─────────────────────────────────────────────────

fn mat_vec(w: &[f64], m: usize, n: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for i in 0..m {
        out[i] = dot(&w[i * n..(i + 1) * n], x);
    }
    out
}

fn mat_t_vec(w: &[f64], m: usize, n: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..m {
        let xi = x[i];
        if xi != 0.0 {
            for j in 0..n {
                out[j] += w[i * n + j] * xi;
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Normalize to unit ℓ2 norm in place; false if the vector is zero.
fn normalize(x: &mut [f64]) -> bool {
    let norm = dot(x, x).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    for v in x.iter_mut() {
        *v /= norm;
    }
    true
}
