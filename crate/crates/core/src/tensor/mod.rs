//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] is a Wengert tape: every operation appends a node holding its
//! result, its operand ids, and whatever forward by-products the backward
//! rule needs. Node ids ([`TensorId`]) index straight into the tape, and
//! since operands always precede their consumers, a single reverse scan of
//! the tape is a valid reverse-topological traversal.
//!
//! Design notes:
//! - Everything is `f64`. The engine exists to be verifiable against central
//!   finite differences at tight tolerances, not to be fast on GPUs.
//! - Broadcasting is limited to the two cases the networks need — bias add
//!   over leading axes and scaling by a host scalar. Anything else is a
//!   shape error.
//! - `backward` computes fresh adjoints and *adds* them into the persistent
//!   `grad` buffers, so calling it twice without zeroing doubles every
//!   gradient exactly.
//! - A graph lives on one thread for one forward/backward pass and is then
//!   dropped; parallelism happens across graphs, never inside one.

mod backward;
mod gemm;
pub mod gradcheck;
mod ops;

pub(crate) use gemm::matmul_rm;

use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`]'s tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

/// How a node was produced; operands are ids of earlier nodes. Variants
/// carry the forward by-products their backward rule needs (masks, argmax
/// positions, normalization statistics).
#[derive(Clone, Debug)]
pub(crate) enum Op {
    Leaf,
    Matmul(TensorId, TensorId),
    Transpose(TensorId),
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    Div(TensorId, TensorId),
    AddBias(TensorId, TensorId),
    Scale(TensorId, f64),
    AddScalar(TensorId),
    Neg(TensorId),
    Exp(TensorId),
    Log(TensorId),
    Tanh(TensorId),
    Sigmoid(TensorId),
    Relu(TensorId),
    Sqrt(TensorId),
    Softplus(TensorId),
    Softmax { x: TensorId, axis: usize },
    LogSoftmax { x: TensorId, axis: usize },
    SumAll(TensorId),
    MeanAll(TensorId),
    SumAxis { x: TensorId, axis: usize },
    MeanAxis { x: TensorId, axis: usize },
    MaxAxis { x: TensorId, axis: usize, argmax: Vec<usize> },
    GatherRows { table: TensorId, ids: Vec<usize> },
    Pick { x: TensorId, ids: Vec<usize> },
    SliceCols { x: TensorId, start: usize },
    SliceRows { x: TensorId, start: usize },
    ConcatCols { parts: Vec<TensorId> },
    ConcatRows { parts: Vec<TensorId> },
    RepeatRows(TensorId),
    Reshape(TensorId),
    MaskFill { x: TensorId, keep: Vec<bool> },
    DropoutRows { x: TensorId, factors: Vec<f64> },
    MulRows { x: TensorId, s: TensorId },
    LayerNorm {
        x: TensorId,
        gain: TensorId,
        bias: TensorId,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub data: Vec<f64>,
    pub shape: Vec<usize>,
    /// True when a gradient should reach this node (a trainable leaf, or an
    /// op with at least one such ancestor).
    pub requires_grad: bool,
    /// Accumulated gradients; allocated lazily by `backward`.
    pub grad: Option<Vec<f64>>,
    pub op: Op,
}

/// Differentiation tape. Build one per forward/backward pass and drop it.
pub struct Graph {
    nodes: Vec<Node>,
    /// When false the tape records no operands: forwards compute values
    /// only and `backward` is refused. Used for sampling and evaluation.
    recording: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    /// Recording graph: supports `backward`.
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            recording: true,
        }
    }

    /// Forward-only graph: same ops, no tape bookkeeping, no gradients.
    pub fn inference() -> Self {
        Graph {
            nodes: Vec::new(),
            recording: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    // ── Leaves ──────────────────────────────────────────────────────────

    /// Non-trainable leaf (input data, masks, positional tables).
    pub fn constant(&mut self, data: Vec<f64>, shape: &[usize]) -> Result<TensorId> {
        check_numel("constant", &data, shape)?;
        Ok(self.push(data, shape.to_vec(), false, Op::Leaf))
    }

    /// Trainable leaf: participates in `backward`.
    pub fn param(&mut self, data: Vec<f64>, shape: &[usize]) -> Result<TensorId> {
        check_numel("param", &data, shape)?;
        let rg = self.recording;
        Ok(self.push(data, shape.to_vec(), rg, Op::Leaf))
    }

    /// Single-element constant, shape `[1]`.
    pub fn scalar(&mut self, v: f64) -> TensorId {
        self.push(vec![v], vec![1], false, Op::Leaf)
    }

    // ── Accessors ───────────────────────────────────────────────────────

    pub fn data(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn numel(&self, id: TensorId) -> usize {
        self.nodes[id.0].data.len()
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Accumulated gradient, if `backward` has reached this node.
    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    /// Value of a single-element tensor.
    pub fn value(&self, id: TensorId) -> f64 {
        debug_assert_eq!(self.numel(id), 1);
        self.nodes[id.0].data[0]
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Reverse pass from a scalar loss. Adjoints are computed in scratch
    /// buffers and then added into each requires-grad node's `grad`, so
    /// repeated calls accumulate (two calls double the gradients exactly).
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if !self.recording {
            return Err(Error::contract("backward on an inference graph"));
        }
        if self.numel(loss) != 1 {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        if !self.nodes[loss.0].requires_grad {
            return Err(Error::contract(
                "backward target does not depend on any trainable leaf",
            ));
        }

        let mut adjoints: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adjoints[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if adjoints[i].is_none() || !self.nodes[i].requires_grad {
                continue;
            }
            // Operands always sit strictly earlier on the tape, so their
            // adjoint slots are disjoint from node i's.
            let adj = adjoints[i].take().expect("adjoint present");
            self.propagate(i, &adj, &mut adjoints);
            if let Some(g) = &mut self.nodes[i].grad {
                for (gi, ai) in g.iter_mut().zip(&adj) {
                    *gi += ai;
                }
            } else {
                self.nodes[i].grad = Some(adj);
            }
        }
        Ok(())
    }

    // ── Internals ───────────────────────────────────────────────────────

    pub(crate) fn push(
        &mut self,
        data: Vec<f64>,
        shape: Vec<usize>,
        requires_grad: bool,
        op: Op,
    ) -> TensorId {
        let op = if self.recording && requires_grad {
            op
        } else {
            // Value-only node: the tape never walks into it.
            Op::Leaf
        };
        self.nodes.push(Node {
            data,
            shape,
            requires_grad: requires_grad && self.recording,
            grad: None,
            op,
        });
        TensorId(self.nodes.len() - 1)
    }

    pub(crate) fn node(&self, id: TensorId) -> &Node {
        &self.nodes[id.0]
    }

    /// Split access: node `i` immutably, earlier nodes mutably.
    pub(crate) fn rg(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }
}

pub(crate) fn check_numel(op: &'static str, data: &[f64], shape: &[usize]) -> Result<()> {
    let n: usize = shape.iter().product();
    if n != data.len() || shape.is_empty() {
        return Err(Error::Shape {
            op,
            lhs: vec![data.len()],
            rhs: shape.to_vec(),
        });
    }
    Ok(())
}

/// `outer * inner` lane decomposition around `axis`.
pub(crate) fn lanes(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, len, inner)
}
