use std::cell::RefCell;

use rand::Rng;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::NumericsError;

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A named trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Owns every trainable tensor of a model. Names are dotted paths such as
/// `enc_s.feat0.weight`; the first segment identifies the sub-module.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(self.find(&name).is_none(), "duplicate parameter {name}");
        let grad = Tensor::zeros(value.rows(), value.cols());
        self.params.push(Parameter { name, value, grad });
        ParamId(self.params.len() - 1)
    }

    /// Glorot-uniform `fan_in x fan_out` weight.
    pub fn add_glorot(&mut self, name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> ParamId {
        self.add(name, super::init::glorot_uniform(fan_in, fan_out, rng))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Ids of parameters whose name starts with `prefix` followed by a dot.
    pub fn ids_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = ParamId> + 'a {
        self.iter().filter(move |(_, p)| has_prefix(&p.name, prefix)).map(|(id, _)| id)
    }

    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
    }

    #[cfg(test)]
    pub(crate) fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].grad
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, g: &Tensor) -> Result<(), NumericsError> {
        let p = &mut self.params[id.0];
        if p.grad.shape() != g.shape() {
            return Err(NumericsError::Shape { op: "accumulate_grad", left: p.grad.shape(), right: g.shape() });
        }
        p.grad.add_assign(g);
        Ok(())
    }
}

pub(crate) fn has_prefix(name: &str, prefix: &str) -> bool {
    name.len() > prefix.len() && name.starts_with(prefix) && name.as_bytes()[prefix.len()] == b'.'
}

/// Places parameters on a tape, at most once each.
///
/// Parameters rejected by the `trainable` predicate are recorded as constants,
/// so no gradient is computed for them: this is how training phases freeze
/// parts of the model.
pub struct ParamBinder<'t, 's> {
    tape: &'t Tape,
    store: &'s ParamStore,
    trainable: Box<dyn Fn(&str) -> bool + 's>,
    bound: RefCell<Vec<Option<Var<'t>>>>,
}

impl<'t, 's> ParamBinder<'t, 's> {
    /// Every parameter is trainable.
    pub fn new(tape: &'t Tape, store: &'s ParamStore) -> Self {
        Self::with_filter(tape, store, |_| true)
    }

    /// Every parameter is bound as a constant.
    pub fn frozen(tape: &'t Tape, store: &'s ParamStore) -> Self {
        Self::with_filter(tape, store, |_| false)
    }

    pub fn with_filter(tape: &'t Tape, store: &'s ParamStore, trainable: impl Fn(&str) -> bool + 's) -> Self {
        ParamBinder { tape, store, trainable: Box::new(trainable), bound: RefCell::new(vec![None; store.len()]) }
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn var(&self, id: ParamId) -> Var<'t> {
        if let Some(v) = self.bound.borrow()[id.0] {
            return v;
        }
        let p = self.store.get(id);
        let v = if (self.trainable)(&p.name) {
            self.tape.param(id, p.value.clone())
        } else {
            self.tape.constant(p.value.clone())
        };
        self.bound.borrow_mut()[id.0] = Some(v);
        v
    }
}
