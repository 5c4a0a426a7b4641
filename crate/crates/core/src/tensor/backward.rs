//! Backward rules: one arm per op, scattering a node's adjoint into its
//! operands' adjoint buffers. Operands sit strictly earlier on the tape, so
//! the buffers touched here never alias the adjoint being read.

use super::{lanes, matmul_rm, Graph, Op, TensorId};

/// Fetch (allocating on first touch) the adjoint buffer for `id`.
fn buf<'a>(
    adjoints: &'a mut [Option<Vec<f64>>],
    id: TensorId,
    numel: usize,
) -> &'a mut [f64] {
    adjoints[id.0].get_or_insert_with(|| vec![0.0; numel])
}

impl Graph {
    pub(crate) fn propagate(
        &self,
        i: usize,
        adj: &[f64],
        adjoints: &mut [Option<Vec<f64>>],
    ) {
        let node = self.node(TensorId(i));
        match &node.op {
            Op::Leaf => {}

            Op::Matmul(a, b) => {
                let (m, n) = (node.shape[0], node.shape[1]);
                let k = self.shape(*a)[1];
                if self.rg(*a) {
                    // dA[m,k] += adj[m,n] @ B^T
                    let bd = self.data(*b);
                    let da = buf(adjoints, *a, m * k);
                    matmul_rm(m, n, k, 1.0, adj, false, bd, true, 1.0, da);
                }
                if self.rg(*b) {
                    // dB[k,n] += A^T @ adj[m,n]
                    let ad = self.data(*a);
                    let db = buf(adjoints, *b, k * n);
                    matmul_rm(k, m, n, 1.0, ad, true, adj, false, 1.0, db);
                }
            }

            Op::Transpose(x) => {
                if self.rg(*x) {
                    let (r, c) = (node.shape[0], node.shape[1]); // output is [r=c_x, c=r_x]
                    let dx = buf(adjoints, *x, r * c);
                    for i in 0..r {
                        for j in 0..c {
                            dx[j * r + i] += adj[i * c + j];
                        }
                    }
                }
            }

            Op::Add(a, b) => {
                for &p in [a, b] {
                    if self.rg(p) {
                        axpy(buf(adjoints, p, adj.len()), adj, 1.0);
                    }
                }
            }

            Op::Sub(a, b) => {
                if self.rg(*a) {
                    axpy(buf(adjoints, *a, adj.len()), adj, 1.0);
                }
                if self.rg(*b) {
                    axpy(buf(adjoints, *b, adj.len()), adj, -1.0);
                }
            }

            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let bd = self.data(*b);
                    let da = adjoints[a.0].get_or_insert_with(|| vec![0.0; adj.len()]);
                    for ((d, &g), &v) in da.iter_mut().zip(adj).zip(bd) {
                        *d += g * v;
                    }
                }
                if self.rg(*b) {
                    let ad = self.data(*a);
                    let db = adjoints[b.0].get_or_insert_with(|| vec![0.0; adj.len()]);
                    for ((d, &g), &v) in db.iter_mut().zip(adj).zip(ad) {
                        *d += g * v;
                    }
                }
            }

            Op::Div(a, b) => {
                // y = a / b: da = adj / b, db = -adj * y / b
                let bd = self.data(*b);
                if self.rg(*a) {
                    let da = adjoints[a.0].get_or_insert_with(|| vec![0.0; adj.len()]);
                    for ((d, &g), &v) in da.iter_mut().zip(adj).zip(bd) {
                        *d += g / v;
                    }
                }
                if self.rg(*b) {
                    let y = &node.data;
                    let db = adjoints[b.0].get_or_insert_with(|| vec![0.0; adj.len()]);
                    for i in 0..adj.len() {
                        db[i] -= adj[i] * y[i] / bd[i];
                    }
                }
            }

            Op::AddBias(x, b) => {
                if self.rg(*x) {
                    axpy(buf(adjoints, *x, adj.len()), adj, 1.0);
                }
                if self.rg(*b) {
                    let d = self.numel(*b);
                    let db = buf(adjoints, *b, d);
                    for chunk in adj.chunks(d) {
                        for (dv, &g) in db.iter_mut().zip(chunk) {
                            *dv += g;
                        }
                    }
                }
            }

            Op::Scale(x, c) => {
                if self.rg(*x) {
                    axpy(buf(adjoints, *x, adj.len()), adj, *c);
                }
            }

            Op::AddScalar(x) | Op::Reshape(x) => {
                if self.rg(*x) {
                    axpy(buf(adjoints, *x, adj.len()), adj, 1.0);
                }
            }

            Op::Neg(x) => {
                if self.rg(*x) {
                    axpy(buf(adjoints, *x, adj.len()), adj, -1.0);
                }
            }

            Op::Exp(x) => {
                if self.rg(*x) {
                    let y = &node.data;
                    let dx = buf(adjoints, *x, adj.len());
                    for i in 0..adj.len() {
                        dx[i] += adj[i] * y[i];
                    }
                }
            }

            Op::Log(x) => {
                if self.rg(*x) {
                    let xd = self.data(*x);
                    let dx = adjoints[x.0].get_or_insert_with(|| vec![0.0; adj.len()]);
                    for i in 0..adj.len() {
                        dx[i] += adj[i] / xd[i];
                    }
                }
            }

            Op::Tanh(x) => {
                if self.rg(*x) {
                    let y = &node.data;
                    let dx = buf(adjoints, *x, adj.len());
                    for i in 0..adj.len() {
                        dx[i] += adj[i] * (1.0 - y[i] * y[i]);
                    }
                }
            }

            Op::Sigmoid(x) => {
                if self.rg(*x) {
                    let y = &node.data;
                    let dx = buf(adjoints, *x, adj.len());
                    for i in 0..adj.len() {
                        dx[i] += adj[i] * y[i] * (1.0 - y[i]);
                    }
                }
            }

            Op::Relu(x) => {
                if self.rg(*x) {
                    // Subgradient 0 at the kink (x == 0).
                    let xd = self.data(*x);
                    let dx = adjoints[x.0].get_or_insert_with(|| vec![0.0; adj.len()]);
                    for i in 0..adj.len() {
                        if xd[i] > 0.0 {
                            dx[i] += adj[i];
                        }
                    }
                }
            }

            Op::Sqrt(x) => {
                if self.rg(*x) {
                    let y = &node.data;
                    let dx = buf(adjoints, *x, adj.len());
                    for i in 0..adj.len() {
                        dx[i] += adj[i] / (2.0 * y[i]);
                    }
                }
            }

            Op::Softplus(x) => {
                if self.rg(*x) {
                    let xd = self.data(*x);
                    let dx = adjoints[x.0].get_or_insert_with(|| vec![0.0; adj.len()]);
                    for i in 0..adj.len() {
                        dx[i] += adj[i] / (1.0 + (-xd[i]).exp());
                    }
                }
            }

            Op::Softmax { x, axis } => {
                if self.rg(*x) {
                    let y = &node.data;
                    let (outer, len, inner) = lanes(&node.shape, *axis);
                    let dx = buf(adjoints, *x, adj.len());
                    for o in 0..outer {
                        for i in 0..inner {
                            let base = o * len * inner + i;
                            let mut dot = 0.0;
                            for l in 0..len {
                                let idx = base + l * inner;
                                dot += adj[idx] * y[idx];
                            }
                            for l in 0..len {
                                let idx = base + l * inner;
                                dx[idx] += y[idx] * (adj[idx] - dot);
                            }
                        }
                    }
                }
            }

            Op::LogSoftmax { x, axis } => {
                if self.rg(*x) {
                    let y = &node.data;
                    let (outer, len, inner) = lanes(&node.shape, *axis);
                    let dx = buf(adjoints, *x, adj.len());
                    for o in 0..outer {
                        for i in 0..inner {
                            let base = o * len * inner + i;
                            let mut sum = 0.0;
                            for l in 0..len {
                                sum += adj[base + l * inner];
                            }
                            for l in 0..len {
                                let idx = base + l * inner;
                                dx[idx] += adj[idx] - y[idx].exp() * sum;
                            }
                        }
                    }
                }
            }

            Op::SumAll(x) => {
                if self.rg(*x) {
                    let n = self.numel(*x);
                    axpy_scalar(buf(adjoints, *x, n), adj[0]);
                }
            }

            Op::MeanAll(x) => {
                if self.rg(*x) {
                    let n = self.numel(*x);
                    axpy_scalar(buf(adjoints, *x, n), adj[0] / n as f64);
                }
            }

            Op::SumAxis { x, axis } | Op::MeanAxis { x, axis } => {
                if self.rg(*x) {
                    let xs = self.shape(*x);
                    let (outer, len, inner) = lanes(xs, *axis);
                    let scale = if matches!(node.op, Op::MeanAxis { .. }) {
                        1.0 / len as f64
                    } else {
                        1.0
                    };
                    let dx = buf(adjoints, *x, outer * len * inner);
                    for o in 0..outer {
                        for l in 0..len {
                            for i in 0..inner {
                                dx[(o * len + l) * inner + i] += adj[o * inner + i] * scale;
                            }
                        }
                    }
                }
            }

            Op::MaxAxis { x, axis, argmax } => {
                if self.rg(*x) {
                    let xs = self.shape(*x);
                    let (outer, len, inner) = lanes(xs, *axis);
                    let dx = buf(adjoints, *x, outer * len * inner);
                    for o in 0..outer {
                        for i in 0..inner {
                            let l = argmax[o * inner + i];
                            dx[(o * len + l) * inner + i] += adj[o * inner + i];
                        }
                    }
                }
            }

            Op::GatherRows { table, ids } => {
                if self.rg(*table) {
                    let d = self.shape(*table)[1];
                    let n = self.numel(*table);
                    let dt = buf(adjoints, *table, n);
                    for (pos, &id) in ids.iter().enumerate() {
                        for j in 0..d {
                            dt[id * d + j] += adj[pos * d + j];
                        }
                    }
                }
            }

            Op::Pick { x, ids } => {
                if self.rg(*x) {
                    let c = self.shape(*x)[1];
                    let n = self.numel(*x);
                    let dx = buf(adjoints, *x, n);
                    for (i, &j) in ids.iter().enumerate() {
                        dx[i * c + j] += adj[i];
                    }
                }
            }

            Op::SliceCols { x, start } => {
                if self.rg(*x) {
                    let (r, c) = (self.shape(*x)[0], self.shape(*x)[1]);
                    let len = node.shape[1];
                    let dx = buf(adjoints, *x, r * c);
                    for i in 0..r {
                        for j in 0..len {
                            dx[i * c + start + j] += adj[i * len + j];
                        }
                    }
                }
            }

            Op::SliceRows { x, start } => {
                if self.rg(*x) {
                    let c = self.shape(*x)[1];
                    let n = self.numel(*x);
                    let dx = buf(adjoints, *x, n);
                    for (d, &g) in dx[start * c..].iter_mut().zip(adj) {
                        *d += g;
                    }
                }
            }

            Op::ConcatCols { parts } => {
                let r = node.shape[0];
                let total_c = node.shape[1];
                let mut offset = 0;
                for &p in parts {
                    let c = self.shape(p)[1];
                    if self.rg(p) {
                        let dp = buf(adjoints, p, r * c);
                        for i in 0..r {
                            for j in 0..c {
                                dp[i * c + j] += adj[i * total_c + offset + j];
                            }
                        }
                    }
                    offset += c;
                }
            }

            Op::ConcatRows { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.numel(p);
                    if self.rg(p) {
                        let dp = buf(adjoints, p, n);
                        for (d, &g) in dp.iter_mut().zip(&adj[offset..offset + n]) {
                            *d += g;
                        }
                    }
                    offset += n;
                }
            }

            Op::RepeatRows(x) => {
                if self.rg(*x) {
                    let d = self.shape(*x)[1];
                    let dx = buf(adjoints, *x, d);
                    for chunk in adj.chunks(d) {
                        for (dv, &g) in dx.iter_mut().zip(chunk) {
                            *dv += g;
                        }
                    }
                }
            }

            Op::MaskFill { x, keep } => {
                if self.rg(*x) {
                    let dx = buf(adjoints, *x, adj.len());
                    for i in 0..adj.len() {
                        if keep[i] {
                            dx[i] += adj[i];
                        }
                    }
                }
            }

            Op::MulRows { x, s } => {
                let c = node.shape[1];
                if self.rg(*x) {
                    let sd = self.data(*s);
                    let dx = buf(adjoints, *x, adj.len());
                    for (i, &sv) in sd.iter().enumerate() {
                        for j in 0..c {
                            dx[i * c + j] += adj[i * c + j] * sv;
                        }
                    }
                }
                if self.rg(*s) {
                    let xd = self.data(*x);
                    let r = node.shape[0];
                    let ds = buf(adjoints, *s, r);
                    for i in 0..r {
                        let mut dot = 0.0;
                        for j in 0..c {
                            dot += adj[i * c + j] * xd[i * c + j];
                        }
                        ds[i] += dot;
                    }
                }
            }

            Op::DropoutRows { x, factors } => {
                if self.rg(*x) {
                    let c = node.shape[1];
                    let dx = buf(adjoints, *x, adj.len());
                    for (i, &f) in factors.iter().enumerate() {
                        if f != 0.0 {
                            for j in 0..c {
                                dx[i * c + j] += adj[i * c + j] * f;
                            }
                        }
                    }
                }
            }

            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let (r, d) = (node.shape[0], node.shape[1]);
                let gd = self.data(*gain);
                if self.rg(*gain) {
                    let dg = buf(adjoints, *gain, d);
                    for i in 0..r {
                        for j in 0..d {
                            dg[j] += adj[i * d + j] * xhat[i * d + j];
                        }
                    }
                }
                if self.rg(*bias) {
                    let db = buf(adjoints, *bias, d);
                    for i in 0..r {
                        for j in 0..d {
                            db[j] += adj[i * d + j];
                        }
                    }
                }
                if self.rg(*x) {
                    let dx = buf(adjoints, *x, r * d);
                    let dn = d as f64;
                    for i in 0..r {
                        // dxhat = adj ∘ gain; then the standard whitening rule
                        let mut mean_dxhat = 0.0;
                        let mut mean_dxhat_xhat = 0.0;
                        for j in 0..d {
                            let dh = adj[i * d + j] * gd[j];
                            mean_dxhat += dh;
                            mean_dxhat_xhat += dh * xhat[i * d + j];
                        }
                        mean_dxhat /= dn;
                        mean_dxhat_xhat /= dn;
                        for j in 0..d {
                            let dh = adj[i * d + j] * gd[j];
                            dx[i * d + j] += inv_std[i]
                                * (dh - mean_dxhat - xhat[i * d + j] * mean_dxhat_xhat);
                        }
                    }
                }
            }
        }
    }
}

fn axpy(dst: &mut [f64], src: &[f64], alpha: f64) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

fn axpy_scalar(dst: &mut [f64], v: f64) {
    for d in dst.iter_mut() {
        *d += v;
    }
}
