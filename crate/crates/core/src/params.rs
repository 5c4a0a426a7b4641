//! Named parameter storage.
//!
//! A [`ParameterStore`] owns every trainable tensor of a model as a named,
//! shaped `f64` buffer, in a stable insertion order (the order fixes
//! checkpoint layout and update iteration). Weights that live under
//! spectral normalization carry their power-iteration state alongside the
//! data. For a forward pass the store is *bound* onto a fresh graph — each
//! parameter becomes a trainable leaf, spectrally normalized weights enter
//! the graph pre-divided by their current σ estimate — and after backward
//! the per-name gradients are collected back out.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::specnorm::SpecNormState;
use crate::tensor::{Graph, TensorId};

/// One trainable tensor plus optional spectral-norm state.
#[derive(Clone, Debug)]
pub struct Param {
    pub data: Vec<f64>,
    pub shape: Vec<usize>,
    pub spec_norm: Option<SpecNormState>,
}

impl Param {
    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Ordered name → parameter map.
#[derive(Clone, Debug, Default)]
pub struct ParameterStore {
    entries: IndexMap<String, Param>,
}

/// Per-name gradients collected after a backward pass. Entries follow the
/// store's order restricted to the collected subset.
#[derive(Clone, Debug, Default)]
pub struct Grads {
    entries: IndexMap<String, Vec<f64>>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a plain parameter. Names must be unique.
    pub fn insert(&mut self, name: &str, data: Vec<f64>, shape: &[usize]) -> Result<()> {
        self.insert_param(
            name,
            Param {
                data,
                shape: shape.to_vec(),
                spec_norm: None,
            },
        )
    }

    /// Register a rank-2 weight under spectral normalization. The power
    /// iteration vector is initialized from `rng` and σ is estimated once
    /// so the state is usable before the first training step.
    pub fn insert_spec_norm(
        &mut self,
        name: &str,
        data: Vec<f64>,
        shape: &[usize],
        rng: &mut Rng,
    ) -> Result<()> {
        if shape.len() != 2 {
            return Err(Error::Shape {
                op: "insert_spec_norm",
                lhs: shape.to_vec(),
                rhs: vec![],
            });
        }
        let mut state = SpecNormState::new(shape[0], rng);
        state.update(&data, shape, 1)?;
        self.insert_param(
            name,
            Param {
                data,
                shape: shape.to_vec(),
                spec_norm: Some(state),
            },
        )
    }

    fn insert_param(&mut self, name: &str, param: Param) -> Result<()> {
        let n: usize = param.shape.iter().product();
        if n != param.data.len() || param.shape.is_empty() {
            return Err(Error::Shape {
                op: "parameter_store",
                lhs: vec![param.data.len()],
                rhs: param.shape.clone(),
            });
        }
        if self
            .entries
            .insert(name.to_string(), param)
            .is_some()
        {
            return Err(Error::contract(format!("duplicate parameter name {name}")));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.entries.get_mut(name)
    }

    /// Parameters in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count across all parameters.
    pub fn total_scalars(&self) -> usize {
        self.entries.values().map(Param::numel).sum()
    }

    /// Bind every parameter onto `g` as a trainable leaf. Spectrally
    /// normalized weights are bound as `W / σ`: with `update_sigma` the
    /// power iteration advances first (training); without it the stored σ
    /// is reused (evaluation, and any context that must be a pure function
    /// of the data).
    pub fn bind(&mut self, g: &mut Graph, update_sigma: bool) -> Result<BoundParams> {
        let mut ids = IndexMap::with_capacity(self.entries.len());
        for (name, param) in self.entries.iter_mut() {
            let raw = g.param(param.data.clone(), &param.shape)?;
            let id = match &mut param.spec_norm {
                Some(state) => {
                    if update_sigma {
                        state.update(&param.data, &param.shape, state.n_power_iters)?;
                    }
                    g.scale(raw, 1.0 / state.sigma)
                }
                None => raw,
            };
            ids.insert(name.clone(), Bound { raw, id });
        }
        Ok(BoundParams { ids })
    }

    /// Collect gradients for every bound parameter whose name passes the
    /// filter; parameters the loss never touched get zeros.
    pub fn collect_grads(
        &self,
        g: &Graph,
        bound: &BoundParams,
        mut filter: impl FnMut(&str) -> bool,
    ) -> Grads {
        let mut entries = IndexMap::new();
        for (name, param) in &self.entries {
            if !filter(name) {
                continue;
            }
            let b = &bound.ids[name];
            let grad = match g.grad(b.raw) {
                Some(gr) => gr.to_vec(),
                None => vec![0.0; param.numel()],
            };
            entries.insert(name.clone(), grad);
        }
        Grads { entries }
    }
}

#[derive(Clone, Copy, Debug)]
struct Bound {
    /// The raw leaf (gradients accumulate here).
    raw: TensorId,
    /// What forwards should use: the raw leaf, or its normalized image.
    id: TensorId,
}

/// Name → tape-id map for one graph.
pub struct BoundParams {
    ids: IndexMap<String, Bound>,
}

impl BoundParams {
    /// Tape id for a parameter (normalized form where applicable).
    /// Panics on an unknown name: parameter names are static strings fixed
    /// at registration, so a miss is a programming error, not input error.
    pub fn id(&self, name: &str) -> TensorId {
        self.ids
            .get(name)
            .unwrap_or_else(|| panic!("unbound parameter {name}"))
            .id
    }

    /// Tape id of the raw (un-normalized) leaf.
    pub fn raw(&self, name: &str) -> TensorId {
        self.ids
            .get(name)
            .unwrap_or_else(|| panic!("unbound parameter {name}"))
            .raw
    }

    pub fn contains(&self, name: &str) -> bool {
        self.ids.contains_key(name)
    }
}

impl Grads {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.entries.get(name).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, name: &str, grad: Vec<f64>) {
        self.entries.insert(name.to_string(), grad);
    }

    /// ℓ2 norm over every entry of every gradient in the set.
    pub fn global_norm(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|v| v.iter())
            .map(|&g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Scale all gradients by `max_norm / global_norm` when the global norm
    /// exceeds `max_norm`; otherwise leave them untouched.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for v in self.entries.values_mut() {
                for g in v.iter_mut() {
                    *g *= s;
                }
            }
        }
    }

    /// First non-finite entry, as `(name, index)`.
    pub fn first_non_finite(&self) -> Option<(&str, usize)> {
        for (name, v) in &self.entries {
            if let Some(i) = v.iter().position(|g| !g.is_finite()) {
                return Some((name.as_str(), i));
            }
        }
        None
    }
}
