use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{xavier_uniform, ParamId, ParamStore, Tape, Tensor, Var};
use crate::scalar::Scalar;

/// Gate weights act on `[h, x]`; biases are single rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub b_r: ParamId,
    pub w: ParamId,
    pub b: ParamId,
    pub hidden: usize,
    pub input: usize,
}

impl GruParams {
    pub fn new<S: Scalar>(store: &mut ParamStore<S>, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut gate = |name: &str, store: &mut ParamStore<S>| {
            (
                store.add(format!("gru.w_{name}"), xavier_uniform(hidden + input, hidden, rng)),
                store.add(format!("gru.b_{name}"), Tensor::zeros(1, hidden)),
            )
        };
        let (w_z, b_z) = gate("z", store);
        let (w_r, b_r) = gate("r", store);
        let (w, b) = gate("h", store);
        GruParams {
            w_z,
            b_z,
            w_r,
            b_r,
            w,
            b,
            hidden,
            input,
        }
    }

    /// Runs the sequence `xs` (each B x input) from a zero state and returns
    /// the final B x hidden state.
    pub fn forward<S: Scalar>(&self, tape: &mut Tape<S>, store: &ParamStore<S>, xs: &[Var]) -> Result<Var> {
        let batch = tape.shape(xs[0]).0;
        let mut h = tape.leaf(Tensor::zeros(batch, self.hidden));
        let (w_z, b_z) = (tape.param(store, self.w_z), tape.param(store, self.b_z));
        let (w_r, b_r) = (tape.param(store, self.w_r), tape.param(store, self.b_r));
        let (w, b) = (tape.param(store, self.w), tape.param(store, self.b));
        for &x in xs {
            let hx = tape.concat_cols(&[h, x])?;
            let z = tape.matmul(hx, w_z)?;
            let z = tape.add(z, b_z)?;
            let z = tape.sigmoid(z);
            let r = tape.matmul(hx, w_r)?;
            let r = tape.add(r, b_r)?;
            let r = tape.sigmoid(r);
            let rh = tape.mul(r, h)?;
            let rhx = tape.concat_cols(&[rh, x])?;
            let cand = tape.matmul(rhx, w)?;
            let cand = tape.add(cand, b)?;
            let cand = tape.tanh(cand);
            let keep = tape.affine(z, -S::one(), S::one());
            let old = tape.mul(keep, h)?;
            let new = tape.mul(z, cand)?;
            h = tape.add(old, new)?;
        }
        Ok(h)
    }
}

/// Final hidden state for one scalar sequence.
pub fn gru_encode<S: Scalar>(params: &GruParams, store: &ParamStore<S>, history: &[S], expected_len: usize) -> Result<Tensor<S>> {
    if history.len() != expected_len {
        return Err(Error::Argument(format!(
            "history must have {expected_len} steps, got {}",
            history.len()
        )));
    }
    let mut tape = Tape::new();
    let xs: Vec<Var> = history.iter().map(|&v| tape.leaf(Tensor::scalar(v))).collect();
    let h = params.forward(&mut tape, store, &xs)?;
    Ok(tape.value(h).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_dim(wz: [f64; 2], bz: f64, wr: [f64; 2], br: f64, w: [f64; 2], b: f64) -> (ParamStore<f64>, GruParams) {
        let mut s = ParamStore::new();
        let col = |v: [f64; 2]| Tensor::column(v.to_vec());
        let p = GruParams {
            w_z: s.add("wz", col(wz)),
            b_z: s.add("bz", Tensor::scalar(bz)),
            w_r: s.add("wr", col(wr)),
            b_r: s.add("br", Tensor::scalar(br)),
            w: s.add("w", col(w)),
            b: s.add("b", Tensor::scalar(b)),
            hidden: 1,
            input: 1,
        };
        (s, p)
    }

    #[test]
    fn zero_weights_stay_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let p = GruParams::new(&mut store, 1, 8, &mut rng);
        for t in store.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let h = gru_encode(&p, &store, &[0.3, -1.0, 0.9, 0.2, 0.5], 5).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_update_gate_takes_candidate() {
        let (store, p) = one_dim([0.0, 0.0], 50.0, [0.3, 0.2], 0.1, [0.7, -0.4], 0.05);
        let xs = [0.1, 0.2, 0.3, 0.4, 0.5];
        let h = gru_encode(&p, &store, &xs, 5).unwrap().item();
        // with z = 1 every step, h_t is the last candidate
        let h3 = gru_encode(&p, &store, &xs[..4], 4).unwrap().item();
        let r = 1.0 / (1.0 + (-(0.3 * h3 + 0.2 * 0.5 + 0.1f64)).exp());
        let cand = (0.7 * r * h3 - 0.4 * 0.5 + 0.05f64).tanh();
        assert_eq!(h, cand);
    }

    #[test]
    fn hand_recurrence() {
        let (wz, bz, wr, br, w, b) = ([0.5, -0.3], 0.1, [0.2, 0.4], -0.1, [0.6, 0.9], 0.05);
        let (store, p) = one_dim(wz, bz, wr, br, w, b);
        let xs = [0.1, 0.2, 0.3, 0.4, 0.5];
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = 0.0f64;
        for &x in &xs {
            let z = sig(wz[0] * h + wz[1] * x + bz);
            let r = sig(wr[0] * h + wr[1] * x + br);
            let cand = (w[0] * r * h + w[1] * x + b).tanh();
            h = (1.0 - z) * h + z * cand;
        }
        let got = gru_encode(&p, &store, &xs, 5).unwrap().item();
        assert!((got - h).abs() < 1e-15, "{got} vs {h}");
    }

    #[test]
    fn wrong_length_rejected() {
        let (store, p) = one_dim([0.0; 2], 0.0, [0.0; 2], 0.0, [0.0; 2], 0.0);
        assert!(gru_encode(&p, &store, &[0.1, 0.2], 5).is_err());
    }
}
