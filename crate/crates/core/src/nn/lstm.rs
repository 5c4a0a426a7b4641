//! A single LSTM cell (used by the evaluation language model).

use crate::error::Result;
use crate::params::{BoundParams, ParameterStore};
use crate::rng::Rng;
use crate::tensor::{Graph, TensorId};

/// Register an LSTM cell: `{prefix}.wx [d_in, 4h]`, `{prefix}.wh [h, 4h]`,
/// `{prefix}.b [4h]`. Gates are stacked along the columns in the order
/// input, forget, cell, output.
pub fn register_lstm_cell(
    store: &mut ParameterStore,
    prefix: &str,
    d_in: usize,
    d_hidden: usize,
    rng: &mut Rng,
) -> Result<()> {
    store.insert(
        &format!("{prefix}.wx"),
        super::xavier_uniform(d_in, 4 * d_hidden, rng),
        &[d_in, 4 * d_hidden],
    )?;
    store.insert(
        &format!("{prefix}.wh"),
        super::xavier_uniform(d_hidden, 4 * d_hidden, rng),
        &[d_hidden, 4 * d_hidden],
    )?;
    store.insert(&format!("{prefix}.b"), vec![0.0; 4 * d_hidden], &[4 * d_hidden])
}

/// One step of the cell on a batch: `x [b, d_in]`, `h`/`c` `[b, d_hidden]`
/// → `(h', c')` with
///
/// ```text
/// i,f,g,o = split(x Wx + h Wh + b)
/// c' = sigmoid(f) ∘ c + sigmoid(i) ∘ tanh(g)
/// h' = sigmoid(o) ∘ tanh(c')
/// ```
///
/// All-zero parameters and state give `h' = 0` (the gates sit at ½, the
/// candidate at 0), and the forget path keeps `|c'| ≤ max(|c|, 1)` bounded.
pub fn lstm_cell(
    g: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    x: TensorId,
    h: TensorId,
    c: TensorId,
) -> Result<(TensorId, TensorId)> {
    let d_hidden = g.shape(h)[1];
    let zx = g.matmul(x, bound.id(&format!("{prefix}.wx")))?;
    let zh = g.matmul(h, bound.id(&format!("{prefix}.wh")))?;
    let z = g.add(zx, zh)?;
    let z = g.add_bias(z, bound.id(&format!("{prefix}.b")))?;

    let zi = g.slice_cols(z, 0, d_hidden)?;
    let zf = g.slice_cols(z, d_hidden, d_hidden)?;
    let zg = g.slice_cols(z, 2 * d_hidden, d_hidden)?;
    let zo = g.slice_cols(z, 3 * d_hidden, d_hidden)?;

    let i = g.sigmoid(zi);
    let f = g.sigmoid(zf);
    let cand = g.tanh(zg);
    let o = g.sigmoid(zo);

    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c_next = g.add(keep, write)?;
    let ct = g.tanh(c_next);
    let h_next = g.mul(o, ct)?;
    Ok((h_next, c_next))
}
