use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::network::LinkGraph;
use crate::nn::{xavier_uniform, ParamId, ParamStore, Tape, Tensor, Var};
use crate::scalar::Scalar;

/// One attention head: projection `w` (F x F') and the two halves of the
/// attention vector, applied to the receiving and the neighboring node.
#[derive(Debug, Clone, PartialEq)]
pub struct GatHead {
    pub w: ParamId,
    pub a_self: ParamId,
    pub a_neighbor: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayerParams {
    pub heads: Vec<GatHead>,
    pub slope: f64,
}

/// Row-major N x N mask: entry (i, j) is set when j attends into i.
pub fn attention_mask(graph: &LinkGraph) -> Arc<Vec<bool>> {
    Arc::new(graph.dense_mask())
}

impl GatLayerParams {
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        f_in: usize,
        f_out: usize,
        heads: usize,
        slope: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let heads = (0..heads)
            .map(|k| GatHead {
                w: store.add(format!("gat.{k}.w"), xavier_uniform(f_in, f_out, rng)),
                a_self: store.add(format!("gat.{k}.a_self"), xavier_uniform(f_out, 1, rng)),
                a_neighbor: store.add(format!("gat.{k}.a_neighbor"), xavier_uniform(f_out, 1, rng)),
            })
            .collect();
        GatLayerParams { heads, slope }
    }

    fn head_attention<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        store: &ParamStore<S>,
        head: &GatHead,
        h: Var,
        mask: &Arc<Vec<bool>>,
    ) -> Result<(Var, Var)> {
        let w = tape.param(store, head.w);
        let wh = tape.matmul(h, w)?;
        let a1 = tape.param(store, head.a_self);
        let a2 = tape.param(store, head.a_neighbor);
        let s_self = tape.matmul(wh, a1)?;
        let s_neighbor = tape.matmul(wh, a2)?;
        let e = tape.outer_sum(s_self, s_neighbor)?;
        let e = tape.leaky_relu(e, S::of(self.slope));
        let alpha = tape.softmax_rows(e, Some(mask.clone()))?;
        Ok((alpha, wh))
    }

    /// Per head `ReLU(alpha * H W)`, averaged over heads.
    pub fn forward<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        store: &ParamStore<S>,
        h: Var,
        mask: &Arc<Vec<bool>>,
    ) -> Result<Var> {
        let mut sum: Option<Var> = None;
        for head in &self.heads {
            let (alpha, wh) = self.head_attention(tape, store, head, h, mask)?;
            let agg = tape.matmul(alpha, wh)?;
            let out = tape.relu(agg);
            sum = Some(match sum {
                None => out,
                Some(s) => tape.add(s, out)?,
            });
        }
        let sum = sum.expect("at least one head");
        Ok(tape.scale(sum, S::one() / S::of(self.heads.len() as f64)))
    }

    /// Attention coefficients of every head for node features `h`.
    pub fn attention<S: Scalar>(
        &self,
        store: &ParamStore<S>,
        h: &Tensor<S>,
        graph: &LinkGraph,
    ) -> Result<Vec<Tensor<S>>> {
        let mask = attention_mask(graph);
        let mut tape = Tape::new();
        let hv = tape.leaf(h.clone());
        self.heads
            .iter()
            .map(|head| {
                let (alpha, _) = self.head_attention(&mut tape, store, head, hv, &mask)?;
                Ok(tape.value(alpha).clone())
            })
            .collect()
    }
}

/// Embeddings of node features `h` (N x F) over `graph`.
pub fn gat_layer<S: Scalar>(
    params: &GatLayerParams,
    store: &ParamStore<S>,
    h: &Tensor<S>,
    graph: &LinkGraph,
) -> Result<Tensor<S>> {
    let mask = attention_mask(graph);
    let mut tape = Tape::new();
    let hv = tape.leaf(h.clone());
    let out = params.forward(&mut tape, store, hv, &mask)?;
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store_with(w: Tensor<f64>, a1: Tensor<f64>, a2: Tensor<f64>) -> (ParamStore<f64>, GatLayerParams) {
        let mut store = ParamStore::new();
        let head = GatHead {
            w: store.add("w", w),
            a_self: store.add("a1", a1),
            a_neighbor: store.add("a2", a2),
        };
        (store, GatLayerParams { heads: vec![head], slope: 0.2 })
    }

    #[test]
    fn single_node_self_loop() {
        let graph = LinkGraph::from_adjacency(vec![7], vec![vec![0]]).unwrap();
        // 3 features into 4 outputs, identity on the first three
        let mut w = Tensor::zeros(3, 4);
        for i in 0..3 {
            w.set(i, i, 1.0);
        }
        let (store, p) = store_with(w, Tensor::zeros(4, 1), Tensor::zeros(4, 1));
        let h = Tensor::row(vec![0.5, -2.0, 3.0]);
        let out = gat_layer(&p, &store, &h, &graph).unwrap();
        assert_eq!(out.data(), &[0.5, 0.0, 3.0, 0.0]);
        assert_eq!(p.attention(&store, &h, &graph).unwrap()[0].data(), &[1.0]);
    }

    #[test]
    fn two_node_hand_evaluation() {
        let graph = LinkGraph::from_adjacency(vec![0, 1], vec![vec![0, 1], vec![0, 1]]).unwrap();
        let w = Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.5, 1.0]).unwrap();
        let (store, p) = store_with(
            w,
            Tensor::column(vec![1.0, 0.0]),
            Tensor::column(vec![0.0, 1.0]),
        );
        let h = Tensor::from_vec(2, 2, vec![1.0, 2.0, -1.0, 0.5]).unwrap();
        // Wh rows: [2, 2] and [-0.75, 0.5]
        // e_00 = lrelu(2 + 2) = 4, e_01 = lrelu(2 + 0.5) = 2.5
        // e_10 = lrelu(-0.75 + 2) = 1.25, e_11 = lrelu(-0.75 + 0.5) = -0.05
        let softmax2 = |a: f64, b: f64| {
            let (ea, eb) = (a.exp(), b.exp());
            (ea / (ea + eb), eb / (ea + eb))
        };
        let (a00, a01) = softmax2(4.0, 2.5);
        let (a10, a11) = softmax2(1.25, -0.05);
        let expect = [
            (a00 * 2.0 + a01 * -0.75).max(0.0),
            (a00 * 2.0 + a01 * 0.5).max(0.0),
            (a10 * 2.0 + a11 * -0.75).max(0.0),
            (a10 * 2.0 + a11 * 0.5).max(0.0),
        ];
        let out = gat_layer(&p, &store, &h, &graph).unwrap();
        for (o, e) in out.data().iter().zip(expect) {
            assert!((o - e).abs() < 1e-14, "{o} vs {e}");
        }
    }

    #[test]
    fn heads_are_averaged() {
        let graph = LinkGraph::from_adjacency(vec![0, 1], vec![vec![0, 1], vec![1]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let two = GatLayerParams::new(&mut store, 3, 4, 2, 0.2, &mut rng);
        let h: Tensor<f64> = xavier_uniform(2, 3, &mut rng);
        let both = gat_layer(&two, &store, &h, &graph).unwrap();
        let single = |k: usize| {
            let p = GatLayerParams {
                heads: vec![two.heads[k].clone()],
                slope: 0.2,
            };
            gat_layer(&p, &store, &h, &graph).unwrap()
        };
        let (h0, h1) = (single(0), single(1));
        for i in 0..both.len() {
            assert!((both.data()[i] - 0.5 * (h0.data()[i] + h1.data()[i])).abs() < 1e-15);
        }
    }
}
