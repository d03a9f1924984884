use std::collections::BTreeMap;

use crate::autograd::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Named learnable arrays, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    tensors: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t.with_requires_grad(true));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter '{name}'")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter '{name}'")))
    }

    /// Replaces the values of an existing parameter, keeping its shape.
    pub fn set(&mut self, name: &str, t: Tensor) -> Result<()> {
        let slot = self.get_mut(name)?;
        if slot.shape() != t.shape() {
            return Err(Error::dim("ParamStore::set", slot.shape(), t.shape()));
        }
        *slot = t.with_requires_grad(true);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }

    /// Records every parameter on `tape` as a differentiable leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundParams<'t> {
        BoundParams {
            vars: self
                .tensors
                .iter()
                .map(|(k, t)| (k.clone(), tape.param(t.clone())))
                .collect(),
        }
    }

    /// Records every parameter as a constant (inference only).
    pub fn bind_frozen<'t>(&self, tape: &'t Tape) -> BoundParams<'t> {
        BoundParams {
            vars: self
                .tensors
                .iter()
                .map(|(k, t)| (k.clone(), tape.constant(t.clone())))
                .collect(),
        }
    }

    /// Adds the gradients from one backward pass into each parameter's slot.
    pub fn accumulate_grads(&mut self, bound: &BoundParams<'_>, grads: &Gradients) -> Result<()> {
        for (name, t) in self.tensors.iter_mut() {
            if let Some(v) = bound.vars.get(name) {
                if let Some(g) = grads.get(*v) {
                    t.accumulate_grad(g.data())?;
                }
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.tensors.values_mut().for_each(Tensor::zero_grad);
    }
}

/// Parameters recorded on one tape, looked up by name.
pub struct BoundParams<'t> {
    vars: BTreeMap<String, Var<'t>>,
}

impl<'t> BoundParams<'t> {
    pub fn get(&self, name: &str) -> Result<Var<'t>> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter '{name}'")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var<'t>)> {
        self.vars.iter()
    }
}
