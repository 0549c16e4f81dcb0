use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{xavier_uniform, ParamId, ParamStore, Tape, Tensor, Var};
use crate::scalar::Scalar;

/// Affine layer `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new<S: Scalar>(store: &mut ParamStore<S>, name: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Dense {
            w: store.add(format!("{name}.w"), xavier_uniform(inputs, outputs, rng)),
            b: store.add(format!("{name}.b"), Tensor::zeros(1, outputs)),
            inputs,
            outputs,
        }
    }

    pub fn forward<S: Scalar>(&self, tape: &mut Tape<S>, store: &ParamStore<S>, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let y = tape.matmul(x, w)?;
        tape.add(y, b)
    }
}

/// Fully connected stack with ReLU between layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct FcHead {
    pub layers: Vec<Dense>,
}

impl FcHead {
    pub fn new<S: Scalar>(store: &mut ParamStore<S>, widths: &[usize], rng: &mut impl Rng) -> Self {
        FcHead {
            layers: widths
                .windows(2)
                .enumerate()
                .map(|(i, w)| Dense::new(store, &format!("fc.{i}"), w[0], w[1], rng))
                .collect(),
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.layers.iter().map(|l| l.inputs).collect();
        w.extend(self.layers.last().map(|l| l.outputs));
        w
    }

    pub fn forward<S: Scalar>(&self, tape: &mut Tape<S>, store: &ParamStore<S>, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h)?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}

/// Joins per-link spatial rows (N x a) with one temporal row (1 x b) and
/// runs the head, giving one raw output per link.
pub fn fuse_and_estimate<S: Scalar>(
    head: &FcHead,
    store: &ParamStore<S>,
    spatial: &Tensor<S>,
    temporal: &Tensor<S>,
) -> Result<Vec<S>> {
    let width = spatial.cols() + temporal.cols();
    if temporal.rows() != 1 || head.layers.first().map(|l| l.inputs) != Some(width) {
        return Err(Error::Shape {
            op: "fuse_and_estimate",
            left: (spatial.rows(), width),
            right: (head.layers.first().map_or(0, |l| l.inputs), 1),
        });
    }
    let mut tape = Tape::new();
    let s = tape.leaf(spatial.clone());
    let t = tape.leaf(temporal.clone());
    let t = tape.repeat_rows(t, spatial.rows())?;
    let x = tape.concat_cols(&[s, t])?;
    let out = head.forward(&mut tape, store, x)?;
    Ok(tape.value(out).data().to_vec())
}
