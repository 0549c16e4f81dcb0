//! Small reverse-mode autodiff over row-major matrices, plus AdamW, StepLR and
//! finite-difference gradient checking.

mod gradcheck;
mod init;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::grad_check;
pub use init::xavier_uniform;
pub use optim::{steplr, AdamW};
pub use tape::{Gradients, ParamId, ParamStore, Tape, Var};
pub use tensor::Tensor;
