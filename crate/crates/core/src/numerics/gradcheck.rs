use super::params::{ParamBinder, ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::NumericsError;

/// Outcome of [`check_gradients`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂)` over every
    /// checked entry; 0 when both gradients vanish.
    pub rel_error: f64,
    pub analytic_norm: f64,
    pub entries: usize,
}

/// Compares tape gradients of `loss` with respect to `ids` against central
/// differences with step `eps`. The store is restored before returning.
pub fn check_gradients<E, F>(store: &mut ParamStore, ids: &[ParamId], eps: f64, loss: F) -> Result<GradCheck, E>
where
    E: From<NumericsError>,
    F: for<'t, 's> Fn(&ParamBinder<'t, 's>) -> Result<Var<'t>, E>,
{
    let analytic: Vec<f64> = {
        let tape = Tape::new();
        let binder = ParamBinder::new(&tape, store);
        let vars: Vec<Var<'_>> = ids.iter().map(|&id| binder.var(id)).collect();
        let l = loss(&binder)?;
        let grads = tape.gradients(l)?;
        vars.iter().flat_map(|&v| grads.wrt_or_zeros(v).into_data()).collect()
    };
    let eval = |store: &ParamStore| -> Result<f64, E> {
        let tape = Tape::new();
        let binder = ParamBinder::frozen(&tape, store);
        Ok(loss(&binder)?.item())
    };
    let mut numeric = Vec::with_capacity(analytic.len());
    for &id in ids {
        for k in 0..store.value(id).len() {
            let original = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = original + eps;
            let up = eval(store);
            store.value_mut(id).data_mut()[k] = original - eps;
            let down = eval(store);
            store.value_mut(id).data_mut()[k] = original;
            numeric.push((up? - down?) / (2.0 * eps));
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
    let scale = norm(&analytic).max(norm(&numeric));
    Ok(GradCheck {
        rel_error: if scale == 0.0 { 0.0 } else { norm(&diff) / scale },
        analytic_norm: norm(&analytic),
        entries: analytic.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn polynomial_matches() {
        let mut store = ParamStore::new();
        let x = store.add("x", Tensor::from_rows(&[[0.3, -1.2], [2.0, 0.7]]));
        let check = check_gradients::<NumericsError, _>(&mut store, &[x], 1e-6, |b| {
            let v = b.var(x);
            Ok(v.mul(v)?.mul(v)?.sum())
        })
        .unwrap();
        assert!(check.rel_error < 1e-8, "{check:?}");
        assert_eq!(check.entries, 4);
        assert_eq!(store.value(x).data(), &[0.3, -1.2, 2.0, 0.7]);
    }

    #[test]
    fn detects_wrong_gradient() {
        // relu at exactly 0 has a one-sided derivative, which the central
        // difference averages to 0.5.
        let mut store = ParamStore::new();
        let x = store.add("x", Tensor::scalar(0.0));
        let check = check_gradients::<NumericsError, _>(&mut store, &[x], 1e-6, |b| Ok(b.var(x).relu())).unwrap();
        assert!(check.rel_error > 0.1);
    }
}
