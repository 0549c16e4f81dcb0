//! Link-level speed estimation for urban networks: a store-and-forward traffic
//! simulator, scenario generation, k-means partitioning, a small autodiff
//! library and graph-attention/GRU speed models with their baselines.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod lcf;
pub mod network;
pub mod nn;
pub mod partition;
pub mod pipeline;
pub mod scalar;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default floating-point type.
pub type Real = f64;

pub type Tensor = nn::Tensor<Real>;
pub type Tensor32 = nn::Tensor<f32>;
pub type LcfModel = lcf::LcfModel<Real>;
pub type LcfModel32 = lcf::LcfModel<f32>;
