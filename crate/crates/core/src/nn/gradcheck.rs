use super::{ParamStore, Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;

/// Largest relative disagreement between tape gradients and central finite
/// differences over every parameter entry. Magnitudes below 1e-3 are
/// compared absolutely.
pub fn grad_check<S: Scalar>(
    store: &ParamStore<S>,
    eps: S,
    f: impl Fn(&mut Tape<S>, &ParamStore<S>) -> Result<Var>,
) -> Result<S> {
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    let analytic = tape.backward(out)?.for_params(store);
    let eval = |s: &ParamStore<S>| -> Result<S> {
        let mut t = Tape::new();
        let o = f(&mut t, s)?;
        Ok(t.value(o).item())
    };
    let floor = S::of(1e-3);
    let two = S::of(2.0);
    let mut worst = S::zero();
    let mut probe = store.clone();
    for id in store.ids() {
        for e in 0..store.get(id).len() {
            let orig = store.get(id).data()[e];
            probe.get_mut(id).data_mut()[e] = orig + eps;
            let up = eval(&probe)?;
            probe.get_mut(id).data_mut()[e] = orig - eps;
            let down = eval(&probe)?;
            probe.get_mut(id).data_mut()[e] = orig;
            let numeric = (up - down) / (two * eps);
            let a = analytic[id.0].data()[e];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
