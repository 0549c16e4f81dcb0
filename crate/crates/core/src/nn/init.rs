use rand::Rng;

use super::Tensor;
use crate::scalar::Scalar;

/// Uniform in ±sqrt(6 / (rows + cols)).
pub fn xavier_uniform<S: Scalar>(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor<S> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| S::of(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::from_vec(rows, cols, data).expect("sized above")
}
