use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamStore};
use super::{NumericsError, Tensor};

/// Moment estimates for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamSlot {
    pub param: ParamId,
    pub m: Tensor,
    pub v: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam over a fixed subset of a [`ParamStore`].
///
/// The step counter is shared by every parameter in the subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub hyper: AdamHyper,
    t: u64,
    slots: Vec<AdamSlot>,
}

impl Adam {
    pub fn new(store: &ParamStore, params: impl IntoIterator<Item = ParamId>) -> Self {
        Self::with_hyper(store, params, AdamHyper::default())
    }

    pub fn with_hyper(store: &ParamStore, params: impl IntoIterator<Item = ParamId>, hyper: AdamHyper) -> Self {
        let slots = params
            .into_iter()
            .map(|id| {
                let [r, c] = store.value(id).shape();
                AdamSlot { param: id, m: Tensor::zeros(r, c), v: Tensor::zeros(r, c) }
            })
            .collect();
        Adam { hyper, t: 0, slots }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn slots(&self) -> &[AdamSlot] {
        &self.slots
    }

    pub(crate) fn restore(&mut self, t: u64, moments: impl Fn(ParamId) -> Option<(Tensor, Tensor)>) -> Result<(), NumericsError> {
        self.t = t;
        for slot in &mut self.slots {
            let (m, v) = moments(slot.param).ok_or(NumericsError::MissingState { param: slot.param.index() })?;
            if m.shape() != slot.m.shape() || v.shape() != slot.v.shape() {
                return Err(NumericsError::Shape { op: "adam_restore", left: slot.m.shape(), right: m.shape() });
            }
            slot.m = m;
            slot.v = v;
        }
        Ok(())
    }

    /// One update from the gradients currently held in `store`. Gradients are
    /// left in place; the caller zeroes them.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) -> Result<(), NumericsError> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(NumericsError::LearningRate(lr));
        }
        for slot in &self.slots {
            if store.grad(slot.param).has_non_finite() {
                return Err(NumericsError::NonFiniteGradient { param: store.get(slot.param).name.clone() });
            }
        }
        self.t += 1;
        let AdamHyper { beta1, beta2, eps } = self.hyper;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for slot in &mut self.slots {
            let grad = store.grad(slot.param).clone();
            let value = store.value_mut(slot.param);
            for (((p, g), m), v) in value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(slot.m.data_mut().iter_mut())
                .zip(slot.v.data_mut().iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ParamBinder, Tape};

    fn scalar_store(x: f64) -> (ParamStore, ParamId) {
        let mut store = ParamStore::new();
        let id = store.add("x.value", Tensor::scalar(x));
        (store, id)
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let (mut store, id) = scalar_store(0.7);
        let mut adam = Adam::new(&store, [id]);
        for _ in 0..5 {
            adam.step(&mut store, 0.01).unwrap();
        }
        assert_eq!(store.value(id).item(), 0.7);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = v_hat = 1 after bias correction
        let (mut store, id) = scalar_store(1.0);
        store.grad_mut(id).data_mut()[0] = 1.0;
        let mut adam = Adam::new(&store, [id]);
        adam.step(&mut store, 0.001).unwrap();
        let expected = 1.0 - 0.001 / (1.0 + 1e-8);
        assert!((store.value(id).item() - expected).abs() < 1e-15);
        assert_eq!(store.grad(id).item(), 1.0, "grads untouched");
    }

    #[test]
    fn converges_on_quadratic() {
        let (mut store, id) = scalar_store(1.0);
        let mut adam = Adam::new(&store, [id]);
        for _ in 0..100 {
            store.zero_grad();
            let tape = Tape::new();
            let x = ParamBinder::new(&tape, &store).var(id);
            let loss = x.mul(x).unwrap();
            tape.backward(loss, &mut store).unwrap();
            adam.step(&mut store, 0.05).unwrap();
        }
        assert!(store.value(id).item().abs() < 0.05, "{}", store.value(id).item());
    }

    #[test]
    fn rejects_bad_learning_rate_and_nan() {
        let (mut store, id) = scalar_store(1.0);
        let mut adam = Adam::new(&store, [id]);
        assert!(matches!(adam.step(&mut store, 0.0), Err(NumericsError::LearningRate(_))));
        store.grad_mut(id).data_mut()[0] = f64::NAN;
        match adam.step(&mut store, 0.1) {
            Err(NumericsError::NonFiniteGradient { param }) => assert_eq!(param, "x.value"),
            other => panic!("{other:?}"),
        }
        assert_eq!(adam.steps(), 0);
    }
}
