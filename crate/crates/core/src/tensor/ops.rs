//! Forward operations. Each op validates shapes/domains, computes its
//! result eagerly, and appends a tape node carrying what backward needs.

use super::{lanes, matmul_rm, Graph, Op, TensorId};
use crate::error::{Error, Result};
use crate::rng::Rng;

impl Graph {
    // ── Linear algebra ─────────────────────────────────────────────────

    /// `[m,k] @ [k,n] -> [m,n]`. Both operands must be rank-2.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Shape {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        matmul_rm(m, k, n, 1.0, self.data(a), false, self.data(b), false, 0.0, &mut out);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, vec![m, n], rg, Op::Matmul(a, b)))
    }

    /// Rank-2 transpose.
    pub fn transpose(&mut self, x: TensorId) -> Result<TensorId> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 {
            return Err(Error::Shape {
                op: "transpose",
                lhs: s,
                rhs: vec![],
            });
        }
        let (r, c) = (s[0], s[1]);
        let xd = self.data(x);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = xd[i * c + j];
            }
        }
        let rg = self.rg(x);
        Ok(self.push(out, vec![c, r], rg, Op::Transpose(x)))
    }

    // ── Elementwise on equal shapes ────────────────────────────────────

    fn zip_op(
        &mut self,
        name: &'static str,
        a: TensorId,
        b: TensorId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<TensorId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape {
                op: name,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let out: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, shape, rg, op))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.zip_op("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.zip_op("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.zip_op("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise division; any zero divisor is a domain error.
    pub fn div(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        if self.data(b).iter().any(|&v| v == 0.0) {
            return Err(Error::Domain {
                op: "div",
                detail: "division by zero".into(),
            });
        }
        self.zip_op("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// `x + b` with `b` of shape `[d]` broadcast over the leading axes of
    /// `x` (whose trailing axis must be `d`). The only tensor-tensor
    /// broadcast the engine supports.
    pub fn add_bias(&mut self, x: TensorId, b: TensorId) -> Result<TensorId> {
        let sx = self.shape(x).to_vec();
        let sb = self.shape(b).to_vec();
        if sb.len() != 1 || *sx.last().unwrap() != sb[0] {
            return Err(Error::Shape {
                op: "add_bias",
                lhs: sx,
                rhs: sb,
            });
        }
        let d = sb[0];
        let mut out = self.data(x).to_vec();
        let bd = self.data(b);
        for chunk in out.chunks_mut(d) {
            for (o, &bv) in chunk.iter_mut().zip(bd) {
                *o += bv;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(out, sx, rg, Op::AddBias(x, b)))
    }

    // ── Elementwise with a host scalar ─────────────────────────────────

    pub fn scale(&mut self, x: TensorId, c: f64) -> TensorId {
        let out: Vec<f64> = self.data(x).iter().map(|&v| v * c).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x);
        self.push(out, shape, rg, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: TensorId, c: f64) -> TensorId {
        let out: Vec<f64> = self.data(x).iter().map(|&v| v + c).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x);
        self.push(out, shape, rg, Op::AddScalar(x))
    }

    // ── Unary elementwise ──────────────────────────────────────────────

    fn map_op(&mut self, x: TensorId, f: impl Fn(f64) -> f64, op: Op) -> TensorId {
        let out: Vec<f64> = self.data(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x);
        self.push(out, shape, rg, op)
    }

    pub fn neg(&mut self, x: TensorId) -> TensorId {
        self.map_op(x, |v| -v, Op::Neg(x))
    }

    pub fn exp(&mut self, x: TensorId) -> TensorId {
        self.map_op(x, f64::exp, Op::Exp(x))
    }

    /// Natural log; requires every entry strictly positive.
    pub fn log(&mut self, x: TensorId) -> Result<TensorId> {
        if self.data(x).iter().any(|&v| v <= 0.0) {
            return Err(Error::Domain {
                op: "log",
                detail: "log of a non-positive value".into(),
            });
        }
        Ok(self.map_op(x, f64::ln, Op::Log(x)))
    }

    pub fn tanh(&mut self, x: TensorId) -> TensorId {
        self.map_op(x, f64::tanh, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: TensorId) -> TensorId {
        self.map_op(x, |v| 1.0 / (1.0 + (-v).exp()), Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: TensorId) -> TensorId {
        self.map_op(x, |v| v.max(0.0), Op::Relu(x))
    }

    /// Square root; requires every entry non-negative.
    pub fn sqrt(&mut self, x: TensorId) -> Result<TensorId> {
        if self.data(x).iter().any(|&v| v < 0.0) {
            return Err(Error::Domain {
                op: "sqrt",
                detail: "sqrt of a negative value".into(),
            });
        }
        Ok(self.map_op(x, f64::sqrt, Op::Sqrt(x)))
    }

    /// `ln(1 + e^x)`, computed in its overflow-free form. The stable route
    /// to `-log sigmoid(x) = softplus(-x)` in the adversarial losses.
    pub fn softplus(&mut self, x: TensorId) -> TensorId {
        self.map_op(
            x,
            |v| v.max(0.0) + (-v.abs()).exp().ln_1p(),
            Op::Softplus(x),
        )
    }

    // ── Softmax family ─────────────────────────────────────────────────

    /// Softmax along `axis`. `-inf` entries (from [`Graph::mask_fill`])
    /// get exactly zero weight; a lane with no finite entry is an error.
    pub fn softmax(&mut self, x: TensorId, axis: usize) -> Result<TensorId> {
        let out = self.softmax_values(x, axis, "softmax")?;
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x);
        Ok(self.push(out, shape, rg, Op::Softmax { x, axis }))
    }

    /// `log softmax` along `axis`, max-shifted for stability.
    pub fn log_softmax(&mut self, x: TensorId, axis: usize) -> Result<TensorId> {
        let shape = self.shape(x).to_vec();
        self.check_axis("log_softmax", &shape, axis)?;
        let (outer, len, inner) = lanes(&shape, axis);
        let xd = self.data(x);
        let mut out = vec![0.0; xd.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut mx = f64::NEG_INFINITY;
                for l in 0..len {
                    mx = mx.max(xd[base + l * inner]);
                }
                if !mx.is_finite() {
                    return Err(Error::contract(
                        "log_softmax: lane has no finite entry",
                    ));
                }
                let mut z = 0.0;
                for l in 0..len {
                    z += (xd[base + l * inner] - mx).exp();
                }
                let log_z = z.ln();
                for l in 0..len {
                    out[base + l * inner] = xd[base + l * inner] - mx - log_z;
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(out, shape, rg, Op::LogSoftmax { x, axis }))
    }

    fn softmax_values(&self, x: TensorId, axis: usize, op: &'static str) -> Result<Vec<f64>> {
        let shape = self.shape(x);
        self.check_axis(op, shape, axis)?;
        let (outer, len, inner) = lanes(shape, axis);
        let xd = self.data(x);
        let mut out = vec![0.0; xd.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut mx = f64::NEG_INFINITY;
                for l in 0..len {
                    mx = mx.max(xd[base + l * inner]);
                }
                if !mx.is_finite() {
                    return Err(Error::contract(format!(
                        "{op}: lane has no finite entry"
                    )));
                }
                let mut z = 0.0;
                for l in 0..len {
                    let e = (xd[base + l * inner] - mx).exp();
                    out[base + l * inner] = e;
                    z += e;
                }
                for l in 0..len {
                    out[base + l * inner] /= z;
                }
            }
        }
        Ok(out)
    }

    fn check_axis(&self, op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
        if axis >= shape.len() {
            return Err(Error::Index {
                op,
                index: axis,
                size: shape.len(),
            });
        }
        Ok(())
    }

    // ── Reductions ─────────────────────────────────────────────────────

    pub fn sum_all(&mut self, x: TensorId) -> TensorId {
        let s: f64 = self.data(x).iter().sum();
        let rg = self.rg(x);
        self.push(vec![s], vec![1], rg, Op::SumAll(x))
    }

    pub fn mean_all(&mut self, x: TensorId) -> TensorId {
        let n = self.numel(x) as f64;
        let s: f64 = self.data(x).iter().sum();
        let rg = self.rg(x);
        self.push(vec![s / n], vec![1], rg, Op::MeanAll(x))
    }

    pub fn sum_axis(&mut self, x: TensorId, axis: usize) -> Result<TensorId> {
        self.reduce_axis(x, axis, "sum_axis", false)
    }

    pub fn mean_axis(&mut self, x: TensorId, axis: usize) -> Result<TensorId> {
        self.reduce_axis(x, axis, "mean_axis", true)
    }

    fn reduce_axis(
        &mut self,
        x: TensorId,
        axis: usize,
        name: &'static str,
        mean: bool,
    ) -> Result<TensorId> {
        let shape = self.shape(x).to_vec();
        self.check_axis(name, &shape, axis)?;
        let (outer, len, inner) = lanes(&shape, axis);
        let xd = self.data(x);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                for i in 0..inner {
                    out[o * inner + i] += xd[(o * len + l) * inner + i];
                }
            }
        }
        if mean {
            for v in &mut out {
                *v /= len as f64;
            }
        }
        let mut out_shape: Vec<usize> = shape
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != axis)
            .map(|(_, &d)| d)
            .collect();
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let rg = self.rg(x);
        let op = if mean {
            Op::MeanAxis { x, axis }
        } else {
            Op::SumAxis { x, axis }
        };
        Ok(self.push(out, out_shape, rg, op))
    }

    /// Max along `axis`; gradient flows to the first (lowest-index) maximum
    /// in each lane.
    pub fn max_axis(&mut self, x: TensorId, axis: usize) -> Result<TensorId> {
        let shape = self.shape(x).to_vec();
        self.check_axis("max_axis", &shape, axis)?;
        let (outer, len, inner) = lanes(&shape, axis);
        let xd = self.data(x);
        let mut out = vec![0.0; outer * inner];
        let mut argmax = vec![0usize; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut best = xd[base];
                let mut best_l = 0;
                for l in 1..len {
                    let v = xd[base + l * inner];
                    if v > best {
                        best = v;
                        best_l = l;
                    }
                }
                out[o * inner + i] = best;
                argmax[o * inner + i] = best_l;
            }
        }
        let mut out_shape: Vec<usize> = shape
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != axis)
            .map(|(_, &d)| d)
            .collect();
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let rg = self.rg(x);
        Ok(self.push(out, out_shape, rg, Op::MaxAxis { x, axis, argmax }))
    }

    // ── Indexing ───────────────────────────────────────────────────────

    /// Row lookup into a `[v, d]` table (embedding): `ids -> [len(ids), d]`.
    pub fn gather_rows(&mut self, table: TensorId, ids: &[usize]) -> Result<TensorId> {
        let s = self.shape(table).to_vec();
        if s.len() != 2 {
            return Err(Error::Shape {
                op: "gather_rows",
                lhs: s,
                rhs: vec![],
            });
        }
        let (v, d) = (s[0], s[1]);
        let td = self.data(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(Error::Index {
                    op: "gather_rows",
                    index: id,
                    size: v,
                });
            }
            out.extend_from_slice(&td[id * d..(id + 1) * d]);
        }
        let rg = self.rg(table);
        Ok(self.push(
            out,
            vec![ids.len(), d],
            rg,
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Per-row column selection on `[r, c]`: `out[i] = x[i, ids[i]]`.
    pub fn pick(&mut self, x: TensorId, ids: &[usize]) -> Result<TensorId> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 || s[0] != ids.len() {
            return Err(Error::Shape {
                op: "pick",
                lhs: s,
                rhs: vec![ids.len()],
            });
        }
        let (r, c) = (s[0], s[1]);
        let xd = self.data(x);
        let mut out = Vec::with_capacity(r);
        for (i, &j) in ids.iter().enumerate() {
            if j >= c {
                return Err(Error::Index {
                    op: "pick",
                    index: j,
                    size: c,
                });
            }
            out.push(xd[i * c + j]);
        }
        let rg = self.rg(x);
        Ok(self.push(
            out,
            vec![r],
            rg,
            Op::Pick {
                x,
                ids: ids.to_vec(),
            },
        ))
    }

    // ── Slicing / stacking (rank-2) ────────────────────────────────────

    pub fn slice_cols(&mut self, x: TensorId, start: usize, len: usize) -> Result<TensorId> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 || start + len > s[1] || len == 0 {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: s,
                rhs: vec![start, len],
            });
        }
        let (r, c) = (s[0], s[1]);
        let xd = self.data(x);
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&xd[i * c + start..i * c + start + len]);
        }
        let rg = self.rg(x);
        Ok(self.push(out, vec![r, len], rg, Op::SliceCols { x, start }))
    }

    pub fn slice_rows(&mut self, x: TensorId, start: usize, len: usize) -> Result<TensorId> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 || start + len > s[0] || len == 0 {
            return Err(Error::Shape {
                op: "slice_rows",
                lhs: s,
                rhs: vec![start, len],
            });
        }
        let c = s[1];
        let out = self.data(x)[start * c..(start + len) * c].to_vec();
        let rg = self.rg(x);
        Ok(self.push(out, vec![len, c], rg, Op::SliceRows { x, start }))
    }

    /// Concatenate rank-2 tensors with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(Error::contract("concat_cols of zero tensors"));
        }
        let r = self.shape(parts[0])[0];
        let mut total_c = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[0] != r {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: self.shape(parts[0]).to_vec(),
                    rhs: s.to_vec(),
                });
            }
            total_c += s[1];
        }
        let mut out = Vec::with_capacity(r * total_c);
        for i in 0..r {
            for &p in parts {
                let c = self.shape(p)[1];
                let pd = self.data(p);
                out.extend_from_slice(&pd[i * c..(i + 1) * c]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            out,
            vec![r, total_c],
            rg,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Concatenate rank-2 tensors with equal column counts along rows.
    pub fn concat_rows(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(Error::contract("concat_rows of zero tensors"));
        }
        let c = self.shape(parts[0])[1];
        let mut total_r = 0;
        let mut out = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[1] != c {
                return Err(Error::Shape {
                    op: "concat_rows",
                    lhs: self.shape(parts[0]).to_vec(),
                    rhs: s.to_vec(),
                });
            }
            total_r += s[0];
            out.extend_from_slice(self.data(p));
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            out,
            vec![total_r, c],
            rg,
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Tile a `[1, d]` row `n` times into `[n, d]`.
    pub fn repeat_rows(&mut self, x: TensorId, n: usize) -> Result<TensorId> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 || s[0] != 1 || n == 0 {
            return Err(Error::Shape {
                op: "repeat_rows",
                lhs: s,
                rhs: vec![n],
            });
        }
        let d = s[1];
        let xd = self.data(x);
        let mut out = Vec::with_capacity(n * d);
        for _ in 0..n {
            out.extend_from_slice(xd);
        }
        let rg = self.rg(x);
        Ok(self.push(out, vec![n, d], rg, Op::RepeatRows(x)))
    }

    /// Same elements, new shape (sizes must agree).
    pub fn reshape(&mut self, x: TensorId, shape: &[usize]) -> Result<TensorId> {
        let n: usize = shape.iter().product();
        if n != self.numel(x) || shape.is_empty() {
            return Err(Error::Shape {
                op: "reshape",
                lhs: self.shape(x).to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let out = self.data(x).to_vec();
        let rg = self.rg(x);
        Ok(self.push(out, shape.to_vec(), rg, Op::Reshape(x)))
    }

    // ── Masking and dropout ────────────────────────────────────────────

    /// Replace entries where `keep` is false with `-inf` (for additive
    /// attention masking ahead of softmax). Gradient is zero there.
    pub fn mask_fill(&mut self, x: TensorId, keep: &[bool]) -> Result<TensorId> {
        if keep.len() != self.numel(x) {
            return Err(Error::Shape {
                op: "mask_fill",
                lhs: self.shape(x).to_vec(),
                rhs: vec![keep.len()],
            });
        }
        let out: Vec<f64> = self
            .data(x)
            .iter()
            .zip(keep)
            .map(|(&v, &k)| if k { v } else { f64::NEG_INFINITY })
            .collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x);
        Ok(self.push(
            out,
            shape,
            rg,
            Op::MaskFill {
                x,
                keep: keep.to_vec(),
            },
        ))
    }

    /// Inverted-scaling row dropout on `[r, c]`: each row is zeroed with
    /// probability `p`, survivors are scaled by `1/(1-p)` so the expected
    /// value is unchanged. `p = 0` is the identity and draws nothing.
    pub fn dropout_rows(&mut self, x: TensorId, p: f64, rng: &mut Rng) -> Result<TensorId> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 {
            return Err(Error::Shape {
                op: "dropout_rows",
                lhs: s,
                rhs: vec![],
            });
        }
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain {
                op: "dropout_rows",
                detail: format!("rate {p} outside [0, 1)"),
            });
        }
        if p == 0.0 {
            let out = self.data(x).to_vec();
            let rg = self.rg(x);
            return Ok(self.push(out, s, rg, Op::Reshape(x)));
        }
        let (r, c) = (s[0], s[1]);
        let keep_scale = 1.0 / (1.0 - p);
        let factors: Vec<f64> = (0..r)
            .map(|_| if rng.bernoulli(p) { 0.0 } else { keep_scale })
            .collect();
        let xd = self.data(x);
        let mut out = Vec::with_capacity(r * c);
        for (i, &f) in factors.iter().enumerate() {
            out.extend(xd[i * c..(i + 1) * c].iter().map(|&v| v * f));
        }
        let rg = self.rg(x);
        Ok(self.push(out, s, rg, Op::DropoutRows { x, factors }))
    }

    /// Scale each row of `[r, c]` by the matching entry of `s: [r]` (the
    /// row-broadcast multiply used for per-row normalization).
    pub fn mul_rows(&mut self, x: TensorId, s: TensorId) -> Result<TensorId> {
        let sx = self.shape(x).to_vec();
        let ss = self.shape(s).to_vec();
        if sx.len() != 2 || ss.len() != 1 || ss[0] != sx[0] {
            return Err(Error::Shape {
                op: "mul_rows",
                lhs: sx,
                rhs: ss,
            });
        }
        let (r, c) = (sx[0], sx[1]);
        let xd = self.data(x);
        let sd = self.data(s);
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            out.extend(xd[i * c..(i + 1) * c].iter().map(|&v| v * sd[i]));
        }
        let rg = self.rg(x) || self.rg(s);
        Ok(self.push(out, sx, rg, Op::MulRows { x, s }))
    }

    // ── Layer normalization ────────────────────────────────────────────

    /// Per-row layer norm over the trailing axis of `[r, d]`:
    /// `y = (x - mean) / sqrt(var + eps) * gain + bias` with biased
    /// (population) variance. A constant row normalizes to zero.
    pub fn layer_norm(
        &mut self,
        x: TensorId,
        gain: TensorId,
        bias: TensorId,
        eps: f64,
    ) -> Result<TensorId> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 {
            return Err(Error::Shape {
                op: "layer_norm",
                lhs: s,
                rhs: vec![],
            });
        }
        let d = s[1];
        if self.shape(gain) != [d] || self.shape(bias) != [d] {
            return Err(Error::Shape {
                op: "layer_norm",
                lhs: self.shape(gain).to_vec(),
                rhs: self.shape(bias).to_vec(),
            });
        }
        if eps <= 0.0 {
            return Err(Error::Domain {
                op: "layer_norm",
                detail: format!("eps {eps} must be positive"),
            });
        }
        let r = s[0];
        let xd = self.data(x);
        let gd = self.data(gain);
        let bd = self.data(bias);
        let mut out = vec![0.0; r * d];
        let mut xhat = vec![0.0; r * d];
        let mut inv_std = vec![0.0; r];
        for i in 0..r {
            let row = &xd[i * d..(i + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let istd = 1.0 / (var + eps).sqrt();
            inv_std[i] = istd;
            for j in 0..d {
                let h = (row[j] - mean) * istd;
                xhat[i * d + j] = h;
                out[i * d + j] = h * gd[j] + bd[j];
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            out,
            s,
            rg,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        ))
    }
}
