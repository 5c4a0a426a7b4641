//! Transformer blocks assembled from attention + feed-forward sublayers.

use super::attention::{multi_head_attention, register_attention, AttnMask};
use super::{ffn, layer_norm, register_ffn, register_layer_norm, ArchitectureConfig, Mode, NormMode};
use crate::error::Result;
use crate::params::{BoundParams, ParameterStore};
use crate::rng::Rng;
use crate::tensor::{Graph, TensorId};

/// Parameters of one encoder-style block (self-attention + feed-forward).
/// Layer-norm gain/bias exist only in [`NormMode::LayerNorm`]; in
/// [`NormMode::SpectralOnly`] every rank-2 weight gets spectral state and
/// no norm parameters are created at all.
pub fn register_encoder_block(
    store: &mut ParameterStore,
    prefix: &str,
    cfg: &ArchitectureConfig,
    norm: NormMode,
    rng: &mut Rng,
) -> Result<()> {
    let sn = norm == NormMode::SpectralOnly;
    register_attention(store, &format!("{prefix}.attn"), cfg.d_model, sn, rng)?;
    if !sn {
        register_layer_norm(store, &format!("{prefix}.ln1"), cfg.d_model)?;
    }
    register_ffn(store, &format!("{prefix}.ffn"), cfg.d_model, cfg.d_ff, sn, rng)?;
    if !sn {
        register_layer_norm(store, &format!("{prefix}.ln2"), cfg.d_model)?;
    }
    Ok(())
}

/// One encoder-style block over `[n*t, d]`:
/// post-norm `x = LN(x + attn(x)); x = LN(x + ffn(x))`, or the bare
/// residual form when the stack is spectral-only.
#[allow(clippy::too_many_arguments)]
pub fn encoder_block(
    g: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    cfg: &ArchitectureConfig,
    norm: NormMode,
    x: TensorId,
    n: usize,
    t: usize,
    mask: &AttnMask,
    mode: Mode,
    rng: &mut Rng,
) -> Result<TensorId> {
    let a = multi_head_attention(
        g,
        bound,
        &format!("{prefix}.attn"),
        x,
        x,
        n,
        t,
        t,
        cfg.n_heads,
        mask,
        cfg.dropout_p,
        mode,
        rng,
    )?;
    let mut h = g.add(x, a)?;
    if norm == NormMode::LayerNorm {
        h = layer_norm(g, bound, &format!("{prefix}.ln1"), h, cfg.ln_eps)?;
    }
    let f = ffn(g, bound, &format!("{prefix}.ffn"), h)?;
    let mut out = g.add(h, f)?;
    if norm == NormMode::LayerNorm {
        out = layer_norm(g, bound, &format!("{prefix}.ln2"), out, cfg.ln_eps)?;
    }
    Ok(out)
}

/// Parameters of one decoder block: masked self-attention, cross-attention
/// over the memory, feed-forward, three layer norms.
pub fn register_decoder_block(
    store: &mut ParameterStore,
    prefix: &str,
    cfg: &ArchitectureConfig,
    rng: &mut Rng,
) -> Result<()> {
    register_attention(store, &format!("{prefix}.self"), cfg.d_model, false, rng)?;
    register_layer_norm(store, &format!("{prefix}.ln1"), cfg.d_model)?;
    register_attention(store, &format!("{prefix}.cross"), cfg.d_model, false, rng)?;
    register_layer_norm(store, &format!("{prefix}.ln2"), cfg.d_model)?;
    register_ffn(store, &format!("{prefix}.ffn"), cfg.d_model, cfg.d_ff, false, rng)?;
    register_layer_norm(store, &format!("{prefix}.ln3"), cfg.d_model)
}

/// One decoder block over `[n*t, d]` with a `[n*t_mem, d]` memory:
/// causal self-attention, then cross-attention, then feed-forward, each
/// wrapped post-norm.
#[allow(clippy::too_many_arguments)]
pub fn decoder_block(
    g: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    cfg: &ArchitectureConfig,
    x: TensorId,
    memory: TensorId,
    n: usize,
    t: usize,
    t_mem: usize,
    mode: Mode,
    rng: &mut Rng,
) -> Result<TensorId> {
    let a = multi_head_attention(
        g,
        bound,
        &format!("{prefix}.self"),
        x,
        x,
        n,
        t,
        t,
        cfg.n_heads,
        &AttnMask::Causal,
        cfg.dropout_p,
        mode,
        rng,
    )?;
    let h = g.add(x, a)?;
    let h = layer_norm(g, bound, &format!("{prefix}.ln1"), h, cfg.ln_eps)?;

    let c = multi_head_attention(
        g,
        bound,
        &format!("{prefix}.cross"),
        h,
        memory,
        n,
        t,
        t_mem,
        cfg.n_heads,
        &AttnMask::Full,
        cfg.dropout_p,
        mode,
        rng,
    )?;
    let h2 = g.add(h, c)?;
    let h2 = layer_norm(g, bound, &format!("{prefix}.ln2"), h2, cfg.ln_eps)?;

    let f = ffn(g, bound, &format!("{prefix}.ffn"), h2)?;
    let out = g.add(h2, f)?;
    layer_norm(g, bound, &format!("{prefix}.ln3"), out, cfg.ln_eps)
}
