//! Transformer building blocks and friends.
//!
//! Everything here is a pair of functions over a [`ParameterStore`]: a
//! `register_*` that creates the block's named parameters, and a matching
//! forward that binds them from a [`BoundParams`] and extends a graph.
//! Blocks operate on batches flattened to `[n*t, d_model]` row-major; the
//! position-wise ops run as single large matrix products, while attention
//! slices back out per sentence.
//!
//! Residual layout is post-norm: `x = LN(x + sublayer(x))` in the
//! autoencoder stacks. The adversarial stacks use the same blocks with
//! [`NormMode::SpectralOnly`]: no layer-norm parameters at all, every
//! rank-2 weight spectrally normalized at bind time, residuals left bare.

pub mod attention;
pub mod block;
pub mod lstm;
pub mod pe;

use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::rng::Rng;
use crate::tensor::{Graph, TensorId};

pub use attention::{multi_head_attention, AttnMask};
pub use block::{
    decoder_block, encoder_block, register_decoder_block, register_encoder_block,
};
pub use lstm::{lstm_cell, register_lstm_cell};
pub use pe::positional_encoding;

/// Train/eval switch: training draws dropout masks and advances spectral
/// norm estimates; evaluation does neither and consumes no randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Which normalization a transformer stack uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    /// Post-norm residuals with learned gain/bias (autoencoder stacks).
    LayerNorm,
    /// No layer norm anywhere; rank-2 weights are spectrally normalized
    /// (adversarial stacks).
    SpectralOnly,
}

/// Shared transformer geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchitectureConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    /// Blocks in each autoencoder stack (encoder and decoder).
    pub n_blocks_ae: usize,
    /// Blocks in each adversarial stack (generator and discriminator).
    pub n_blocks_gan: usize,
    /// Sequence length everything is padded/truncated to.
    pub max_len: usize,
    pub dropout_p: f64,
    pub ln_eps: f64,
    /// Power-iteration steps per training update of each σ estimate.
    pub n_power_iters: usize,
}

impl ArchitectureConfig {
    /// Small configuration for tests and quick experiments.
    pub fn desk() -> Self {
        ArchitectureConfig {
            d_model: 64,
            n_heads: 8,
            d_ff: 256,
            n_blocks_ae: 2,
            n_blocks_gan: 2,
            max_len: 20,
            dropout_p: 0.1,
            ln_eps: 1e-5,
            n_power_iters: 1,
        }
    }

    /// Full-scale configuration: embedding width 304, 8 heads, 3 blocks
    /// per stack, 50-token sequences.
    pub fn full() -> Self {
        ArchitectureConfig {
            d_model: 304,
            n_heads: 8,
            d_ff: 4 * 304,
            n_blocks_ae: 3,
            n_blocks_gan: 3,
            max_len: 50,
            dropout_p: 0.1,
            ln_eps: 1e-5,
            n_power_iters: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0
            || self.n_heads == 0
            || self.d_ff == 0
            || self.max_len == 0
            || self.n_blocks_ae == 0
            || self.n_blocks_gan == 0
        {
            return Err(Error::Config("architecture dimensions must be nonzero".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.d_model % 2 != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be even for sinusoidal positions",
                self.d_model
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p {} outside [0, 1)",
                self.dropout_p
            )));
        }
        if self.ln_eps <= 0.0 {
            return Err(Error::Config(format!("ln_eps {} must be positive", self.ln_eps)));
        }
        Ok(())
    }
}

// ── Initialization ──────────────────────────────────────────────────────

/// Glorot-uniform weight draw for a `[fan_in, fan_out]` matrix.
pub fn xavier_uniform(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_in * fan_out)
        .map(|_| rng.uniform_in(-limit, limit))
        .collect()
}

/// Register a `[d_in, d_out]` linear layer (`{prefix}.w`, `{prefix}.b`),
/// spectrally normalized when asked.
pub fn register_linear(
    store: &mut ParameterStore,
    prefix: &str,
    d_in: usize,
    d_out: usize,
    spec_norm: bool,
    rng: &mut Rng,
) -> Result<()> {
    let w = xavier_uniform(d_in, d_out, rng);
    if spec_norm {
        store.insert_spec_norm(&format!("{prefix}.w"), w, &[d_in, d_out], rng)?;
    } else {
        store.insert(&format!("{prefix}.w"), w, &[d_in, d_out])?;
    }
    store.insert(&format!("{prefix}.b"), vec![0.0; d_out], &[d_out])
}

/// `x @ w + b` for a layer registered with [`register_linear`].
pub fn linear(
    g: &mut Graph,
    bound: &crate::params::BoundParams,
    prefix: &str,
    x: TensorId,
) -> Result<TensorId> {
    linear_with(g, bound, prefix, "w", "b", x)
}

/// `x @ {prefix}.{w} + {prefix}.{b}` with explicit member names.
pub(crate) fn linear_with(
    g: &mut Graph,
    bound: &crate::params::BoundParams,
    prefix: &str,
    w: &str,
    b: &str,
    x: TensorId,
) -> Result<TensorId> {
    let h = g.matmul(x, bound.id(&format!("{prefix}.{w}")))?;
    g.add_bias(h, bound.id(&format!("{prefix}.{b}")))
}

/// Register layer-norm gain (ones) and bias (zeros) at `{prefix}.g/.b`.
pub fn register_layer_norm(store: &mut ParameterStore, prefix: &str, d: usize) -> Result<()> {
    store.insert(&format!("{prefix}.g"), vec![1.0; d], &[d])?;
    store.insert(&format!("{prefix}.b"), vec![0.0; d], &[d])
}

/// Apply a layer norm registered at `prefix`.
pub fn layer_norm(
    g: &mut Graph,
    bound: &crate::params::BoundParams,
    prefix: &str,
    x: TensorId,
    eps: f64,
) -> Result<TensorId> {
    g.layer_norm(
        x,
        bound.id(&format!("{prefix}.g")),
        bound.id(&format!("{prefix}.b")),
        eps,
    )
}

// ── Feed-forward ────────────────────────────────────────────────────────

/// Register the two-layer position-wise feed-forward at `{prefix}.w1/b1/w2/b2`.
pub fn register_ffn(
    store: &mut ParameterStore,
    prefix: &str,
    d_model: usize,
    d_ff: usize,
    spec_norm: bool,
    rng: &mut Rng,
) -> Result<()> {
    let w1 = xavier_uniform(d_model, d_ff, rng);
    let w2 = xavier_uniform(d_ff, d_model, rng);
    if spec_norm {
        store.insert_spec_norm(&format!("{prefix}.w1"), w1, &[d_model, d_ff], rng)?;
    } else {
        store.insert(&format!("{prefix}.w1"), w1, &[d_model, d_ff])?;
    }
    store.insert(&format!("{prefix}.b1"), vec![0.0; d_ff], &[d_ff])?;
    if spec_norm {
        store.insert_spec_norm(&format!("{prefix}.w2"), w2, &[d_ff, d_model], rng)?;
    } else {
        store.insert(&format!("{prefix}.w2"), w2, &[d_ff, d_model])?;
    }
    store.insert(&format!("{prefix}.b2"), vec![0.0; d_model], &[d_model])
}

/// `relu(x @ w1 + b1) @ w2 + b2`.
pub fn ffn(
    g: &mut Graph,
    bound: &crate::params::BoundParams,
    prefix: &str,
    x: TensorId,
) -> Result<TensorId> {
    let h = g.matmul(x, bound.id(&format!("{prefix}.w1")))?;
    let h = g.add_bias(h, bound.id(&format!("{prefix}.b1")))?;
    let h = g.relu(h);
    let h = g.matmul(h, bound.id(&format!("{prefix}.w2")))?;
    g.add_bias(h, bound.id(&format!("{prefix}.b2")))
}
