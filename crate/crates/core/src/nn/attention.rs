//! Multi-head scaled dot-product attention.

use super::Mode;
use crate::error::{Error, Result};
use crate::params::{BoundParams, ParameterStore};
use crate::rng::Rng;
use crate::tensor::{Graph, TensorId};

/// What each query position may attend to.
#[derive(Clone, Copy, Debug)]
pub enum AttnMask<'a> {
    /// Everything (cross-attention over a dense memory).
    Full,
    /// Strictly left-to-right: query `i` sees keys `j <= i`.
    Causal,
    /// Per-sentence key mask, true at attendable (non-pad) positions.
    KeyPadding(&'a [Vec<bool>]),
}

/// Register the four projections of an attention layer at
/// `{prefix}.wq/wk/wv/wo` (+ biases `bq/bk/bv/bo`).
pub fn register_attention(
    store: &mut ParameterStore,
    prefix: &str,
    d_model: usize,
    spec_norm: bool,
    rng: &mut Rng,
) -> Result<()> {
    for name in ["wq", "wk", "wv", "wo"] {
        let w = super::xavier_uniform(d_model, d_model, rng);
        let full = format!("{prefix}.{name}");
        if spec_norm {
            store.insert_spec_norm(&full, w, &[d_model, d_model], rng)?;
        } else {
            store.insert(&full, w, &[d_model, d_model])?;
        }
    }
    for name in ["bq", "bk", "bv", "bo"] {
        store.insert(&format!("{prefix}.{name}"), vec![0.0; d_model], &[d_model])?;
    }
    Ok(())
}

/// Multi-head attention over a flattened batch.
///
/// `x_q` is `[n*tq, d]`, `x_kv` is `[n*tk, d]`; sentence `b` occupies rows
/// `b*t .. (b+1)*t` of each. Heads split the model width evenly; each
/// head's scores are scaled by `1/sqrt(d_head)`, masked additively with
/// `-inf` (masked keys get exactly zero weight), and softmaxed per query
/// row. In train mode whole heads are dropped per sentence with
/// probability `dropout_p` (inverted scaling on the survivors).
#[allow(clippy::too_many_arguments)]
pub fn multi_head_attention(
    g: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    x_q: TensorId,
    x_kv: TensorId,
    n: usize,
    tq: usize,
    tk: usize,
    n_heads: usize,
    mask: &AttnMask,
    dropout_p: f64,
    mode: Mode,
    rng: &mut Rng,
) -> Result<TensorId> {
    let d = *g.shape(x_q).last().unwrap();
    if d % n_heads != 0 {
        return Err(Error::Config(format!(
            "attention width {d} not divisible by {n_heads} heads"
        )));
    }
    if g.shape(x_q)[0] != n * tq || g.shape(x_kv)[0] != n * tk {
        return Err(Error::Shape {
            op: "multi_head_attention",
            lhs: g.shape(x_q).to_vec(),
            rhs: vec![n, tq, tk],
        });
    }
    let dk = d / n_heads;
    let scale = 1.0 / (dk as f64).sqrt();

    let q = super::linear_with(g, bound, prefix, "wq", "bq", x_q)?;
    let k = super::linear_with(g, bound, prefix, "wk", "bk", x_kv)?;
    let v = super::linear_with(g, bound, prefix, "wv", "bv", x_kv)?;

    let mut per_sentence = Vec::with_capacity(n);
    for b in 0..n {
        let qb = g.slice_rows(q, b * tq, tq)?;
        let kb = g.slice_rows(k, b * tk, tk)?;
        let vb = g.slice_rows(v, b * tk, tk)?;
        let keep = build_keep(mask, b, tq, tk)?;

        let mut heads = Vec::with_capacity(n_heads);
        for h in 0..n_heads {
            let qh = g.slice_cols(qb, h * dk, dk)?;
            let kh = g.slice_cols(kb, h * dk, dk)?;
            let vh = g.slice_cols(vb, h * dk, dk)?;
            let kt = g.transpose(kh)?;
            let scores = g.matmul(qh, kt)?;
            let scores = g.scale(scores, scale);
            let scores = match &keep {
                Some(keep) => g.mask_fill(scores, keep)?,
                None => scores,
            };
            let probs = g.softmax(scores, 1)?;
            let mut out = g.matmul(probs, vh)?;
            if mode == Mode::Train && dropout_p > 0.0 {
                // Head dropout: the whole head vanishes with prob p.
                let factor = if rng.bernoulli(dropout_p) {
                    0.0
                } else {
                    1.0 / (1.0 - dropout_p)
                };
                out = g.scale(out, factor);
            }
            heads.push(out);
        }
        per_sentence.push(g.concat_cols(&heads)?);
    }
    let merged = g.concat_rows(&per_sentence)?;
    super::linear_with(g, bound, prefix, "wo", "bo", merged)
}

/// Flat `[tq*tk]` keep mask for sentence `b`, or `None` when nothing is
/// masked.
fn build_keep(mask: &AttnMask, b: usize, tq: usize, tk: usize) -> Result<Option<Vec<bool>>> {
    match mask {
        AttnMask::Full => Ok(None),
        AttnMask::Causal => {
            if tq != tk {
                return Err(Error::Shape {
                    op: "causal_mask",
                    lhs: vec![tq],
                    rhs: vec![tk],
                });
            }
            let mut keep = vec![false; tq * tk];
            for i in 0..tq {
                for j in 0..=i {
                    keep[i * tk + j] = true;
                }
            }
            Ok(Some(keep))
        }
        AttnMask::KeyPadding(keys) => {
            let key = &keys[b];
            if key.len() != tk {
                return Err(Error::Shape {
                    op: "key_padding_mask",
                    lhs: vec![key.len()],
                    rhs: vec![tk],
                });
            }
            if !key.iter().any(|&k| k) {
                return Err(Error::contract(format!(
                    "attention: sentence {b} has every key masked"
                )));
            }
            let mut keep = vec![false; tq * tk];
            for i in 0..tq {
                for j in 0..tk {
                    keep[i * tk + j] = key[j];
                }
            }
            Ok(Some(keep))
        }
    }
}
