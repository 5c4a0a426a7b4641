//! Sinusoidal position table.

use crate::error::{Error, Result};
use crate::tensor::{Graph, TensorId};

/// The fixed sinusoidal position table as a flat `[t, d]` row-major buffer:
///
/// ```text
/// PE[pos, 2i]   = sin(pos / 10000^(2i/d))
/// PE[pos, 2i+1] = cos(pos / 10000^(2i/d))
/// ```
///
/// `d` must be even (columns pair up).
pub fn positional_encoding(t: usize, d: usize) -> Result<Vec<f64>> {
    if d == 0 || d % 2 != 0 {
        return Err(Error::Config(format!(
            "positional encoding needs an even width, got {d}"
        )));
    }
    let mut table = vec![0.0; t * d];
    for pos in 0..t {
        for i in 0..d / 2 {
            let rate = (10000f64).powf(-((2 * i) as f64) / d as f64);
            let angle = pos as f64 * rate;
            table[pos * d + 2 * i] = angle.sin();
            table[pos * d + 2 * i + 1] = angle.cos();
        }
    }
    Ok(table)
}

/// The position table tiled for `n` sentences, as a `[n*t, d]` constant on
/// the graph (each sentence gets the same `[t, d]` block).
pub fn positional_constant(g: &mut Graph, n: usize, t: usize, d: usize) -> Result<TensorId> {
    let table = positional_encoding(t, d)?;
    let mut tiled = Vec::with_capacity(n * t * d);
    for _ in 0..n {
        tiled.extend_from_slice(&table);
    }
    g.constant(tiled, &[n * t, d])
}
