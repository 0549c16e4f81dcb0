use super::{ParamStore, Tensor};
use crate::scalar::Scalar;

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    pub weight_decay: S,
    pub step: u64,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
}

impl<S: Scalar> AdamW<S> {
    pub fn new(store: &ParamStore<S>, lr: S) -> Self {
        let zeros = || {
            store
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.rows(), t.cols()))
                .collect()
        };
        AdamW {
            lr,
            beta1: S::of(0.9),
            beta2: S::of(0.999),
            eps: S::of(1e-8),
            weight_decay: S::of(0.01),
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update of every parameter from `grads` (aligned with the store).
    pub fn step(&mut self, store: &mut ParamStore<S>, grads: &[Tensor<S>]) {
        assert_eq!(grads.len(), store.len(), "one gradient per parameter");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = S::one() - self.beta1.powi(t);
        let bc2 = S::one() - self.beta2.powi(t);
        let decay = S::one() - self.lr * self.weight_decay;
        for (k, w) in store.tensors_mut().iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..w.len() {
                let gi = g.data()[i];
                let mi = self.beta1 * m.data()[i] + (S::one() - self.beta1) * gi;
                let vi = self.beta2 * v.data()[i] + (S::one() - self.beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let wi = w.data()[i] * decay;
                w.data_mut()[i] = wi - self.lr * (mi / bc1) / ((vi / bc2).sqrt() + self.eps);
            }
        }
    }
}

/// `lr0 * gamma^floor(epoch / step_size)`.
pub fn steplr(lr0: f64, step_size: usize, gamma: f64, epoch: usize) -> f64 {
    lr0 * gamma.powi((epoch / step_size.max(1)) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::scalar(1.0f64));
        let mut opt = AdamW::new(&store, 0.002);
        opt.step(&mut store, &[Tensor::scalar(0.5)]);
        let expect = 1.0 - 0.002 * (0.5 / (0.5 + 1e-8)) - 0.002 * 0.01 * 1.0;
        assert!((store.tensors()[0].item() - expect).abs() < 1e-12);
        assert!((store.tensors()[0].item() - 0.99798).abs() < 1e-8);
    }

    #[test]
    fn zero_gradient_without_decay_is_fixed_point() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::row(vec![0.3f64, -4.0]));
        let before = store.clone();
        let mut opt = AdamW::new(&store, 0.002);
        opt.weight_decay = 0.0;
        for _ in 0..5 {
            opt.step(&mut store, &[Tensor::zeros(1, 2)]);
        }
        assert_eq!(store, before);
    }

    #[test]
    fn identical_histories_update_identically() {
        let mut store = ParamStore::new();
        store.add("a", Tensor::scalar(0.7f64));
        store.add("b", Tensor::scalar(0.7f64));
        let mut opt = AdamW::new(&store, 0.01);
        for k in 0..10 {
            let g = Tensor::scalar((k as f64).sin());
            opt.step(&mut store, &[g.clone(), g]);
        }
        assert_eq!(store.tensors()[0], store.tensors()[1]);
    }

    #[test]
    fn step_schedule() {
        assert_eq!(steplr(0.002, 80, 0.85, 0), 0.002);
        assert!((steplr(0.002, 80, 0.85, 80) - 0.0017).abs() < 1e-15);
        assert_eq!(steplr(0.002, 80, 0.85, 159), steplr(0.002, 80, 0.85, 80));
        assert!(steplr(0.002, 80, 0.85, 160) < steplr(0.002, 80, 0.85, 159));
    }
}
