use std::collections::HashMap;

use super::Tensor2;
use crate::error::{Error, Result};

/// Handle to a parameter block inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named parameter blocks with matching gradient and Adam moment blocks.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    index: HashMap<String, usize>,
    params: Vec<Tensor2>,
    grads: Vec<Tensor2>,
    pub(crate) first_moment: Vec<Tensor2>,
    pub(crate) second_moment: Vec<Tensor2>,
    pub(crate) step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor2) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::config(format!("duplicate parameter block `{name}`")));
        }
        let (r, c) = value.shape();
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.params.push(value);
        self.grads.push(Tensor2::zeros(r, c));
        self.first_moment.push(Tensor2::zeros(r, c));
        self.second_moment.push(Tensor2::zeros(r, c));
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn require(&self, name: &str) -> Result<ParamId> {
        self.id(name)
            .ok_or_else(|| Error::config(format!("unknown parameter block `{name}`")))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn param(&self, id: ParamId) -> &Tensor2 {
        &self.params[id.0]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Tensor2 {
        &mut self.params[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor2 {
        &self.grads[id.0]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor2 {
        &mut self.grads[id.0]
    }

    pub fn param_and_grad_mut(&mut self, id: ParamId) -> (&Tensor2, &mut Tensor2) {
        (&self.params[id.0], &mut self.grads[id.0])
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    pub fn scale_grads(&mut self, s: f64) {
        for g in &mut self.grads {
            g.scale(s);
        }
    }

    pub fn grad_sq_norm(&self) -> f64 {
        self.grads.iter().map(Tensor2::sq_norm).sum()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.data().len()).sum()
    }

    /// Flattened copy of all gradients in block order.
    pub fn flat_grads(&self) -> Vec<f64> {
        self.grads.iter().flat_map(|g| g.data().iter().copied()).collect()
    }

    /// Bitwise equality of parameter values (ignores gradients and moments).
    pub fn same_params(&self, other: &ParamStore) -> bool {
        self.names == other.names
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}
