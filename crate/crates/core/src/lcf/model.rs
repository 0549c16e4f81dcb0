use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::{decode_output, ArchConfig};
use super::gat::{attention_mask, GatLayerParams};
use super::gru::GruParams;
use super::head::{Dense, FcHead};
use crate::error::{Error, Result};
use crate::network::{extract_features, LinkGraph, MinMax, RoadNetwork};
use crate::nn::{ParamStore, Tape, Tensor, Var};
use crate::partition::PartitionAssignment;
use crate::scalar::Scalar;
use crate::sim::SimRecord;

/// Training-split statistics used to scale inputs and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub features: MinMax,
    /// (min, max) of the network mean speed.
    pub v_mean: (f64, f64),
    /// (min, max) of the encoded targets.
    pub target: (f64, f64),
}

fn scale(range: (f64, f64), v: f64) -> f64 {
    let span = range.1 - range.0;
    if span > 0.0 {
        (v - range.0) / span
    } else {
        0.0
    }
}

fn unscale(range: (f64, f64), v: f64) -> f64 {
    let span = range.1 - range.0;
    if span > 0.0 {
        v * span + range.0
    } else {
        range.0
    }
}

impl Normalization {
    pub fn scale_v_mean(&self, v: f64) -> f64 {
        scale(self.v_mean, v)
    }

    pub fn scale_target(&self, v: f64) -> f64 {
        scale(self.target, v)
    }

    pub fn unscale_target(&self, v: f64) -> f64 {
        unscale(self.target, v)
    }

    /// Identity-like statistics for an untrained model.
    pub fn unit(features: usize) -> Self {
        Normalization {
            features: MinMax {
                min: vec![0.0; features],
                max: vec![1.0; features],
            },
            v_mean: (0.0, 1.0),
            target: (0.0, 1.0),
        }
    }
}

/// Normalized history of `len` mean speeds ending at window `t`; windows
/// before the first are filled with `padding`.
pub fn history_window(v_mean: &[f64], t: usize, len: usize, norm: &Normalization, padding: f64) -> Result<Vec<f64>> {
    if t >= v_mean.len() {
        return Err(Error::Argument(format!(
            "window {t} is beyond the {} recorded windows",
            v_mean.len()
        )));
    }
    Ok((0..len)
        .map(|k| match (t + k + 1).checked_sub(len) {
            Some(w) => norm.scale_v_mean(v_mean[w]),
            None => padding,
        })
        .collect())
}

/// Per-network model input: normalized features and the attention mask.
#[derive(Debug, Clone)]
pub struct NetworkInput<S> {
    pub features: Tensor<S>,
    pub mask: Arc<Vec<bool>>,
    pub free_flow: Vec<f64>,
}

impl<S> NetworkInput<S> {
    pub fn num_links(&self) -> usize {
        self.free_flow.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Spatial {
    Gat(GatLayerParams),
    Dense(Dense),
}

/// One batch entry: a network input index and its normalized history.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem<S> {
    pub network: usize,
    pub history: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct LcfModel<S: Scalar> {
    pub arch: ArchConfig,
    pub seed: u64,
    pub store: ParamStore<S>,
    pub norm: Normalization,
    spatial: Spatial,
    gru: Option<GruParams>,
    head: FcHead,
}

impl<S: Scalar> LcfModel<S> {
    /// Fresh parameters drawn from `seed`, with unit normalization.
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let spatial = if arch.variant.gat {
            Spatial::Gat(GatLayerParams::new(
                &mut store,
                arch.features,
                arch.hidden,
                arch.heads,
                arch.attention_slope,
                &mut rng,
            ))
        } else {
            Spatial::Dense(Dense::new(&mut store, "spatial", arch.features, arch.hidden, &mut rng))
        };
        let gru = arch
            .variant
            .gru
            .then(|| GruParams::new(&mut store, 1, arch.hidden, &mut rng));
        let head = FcHead::new(&mut store, &arch.head_widths(), &mut rng);
        let norm = Normalization::unit(arch.features);
        Ok(LcfModel {
            arch,
            seed,
            store,
            norm,
            spatial,
            gru,
            head,
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_values()
    }

    pub fn spatial(&self) -> &Spatial {
        &self.spatial
    }

    pub fn gru(&self) -> Option<&GruParams> {
        self.gru.as_ref()
    }

    pub fn head(&self) -> &FcHead {
        &self.head
    }

    /// Features of `net` under this model's variant, normalized.
    pub fn network_input(&self, net: &RoadNetwork, partition: &PartitionAssignment) -> Result<NetworkInput<S>> {
        let single;
        let partition = if self.arch.variant.partition {
            partition
        } else {
            single = PartitionAssignment::single_region(net);
            &single
        };
        let raw = extract_features(net, partition)?;
        let scaled = self.norm.features.transform_features(&raw);
        let features = Tensor::from_vec(
            raw.rows(),
            self.arch.features,
            scaled.as_slice().iter().map(|&v| S::of(v)).collect(),
        )?;
        Ok(NetworkInput {
            features,
            mask: attention_mask(&LinkGraph::from_network(net)),
            free_flow: net.links().iter().map(|l| l.free_flow_speed).collect(),
        })
    }

    fn spatial_forward(&self, store: &ParamStore<S>, tape: &mut Tape<S>, input: &NetworkInput<S>) -> Result<Var> {
        let h = tape.leaf(input.features.clone());
        match &self.spatial {
            Spatial::Gat(p) => p.forward(tape, store, h, &input.mask),
            Spatial::Dense(d) => {
                let y = d.forward(tape, store, h)?;
                Ok(tape.relu(y))
            }
        }
    }

    /// Raw normalized outputs for a batch, as a `(B * N) x 1` column with
    /// the links of each item contiguous.
    pub fn forward(&self, tape: &mut Tape<S>, inputs: &[NetworkInput<S>], batch: &[BatchItem<S>]) -> Result<Var> {
        self.forward_with(&self.store, tape, inputs, batch)
    }

    /// [`forward`](Self::forward) with parameters taken from `store`, which
    /// must share this model's layout.
    pub fn forward_with(
        &self,
        store: &ParamStore<S>,
        tape: &mut Tape<S>,
        inputs: &[NetworkInput<S>],
        batch: &[BatchItem<S>],
    ) -> Result<Var> {
        let first = batch
            .first()
            .ok_or_else(|| Error::Argument("empty batch".into()))?;
        let n = inputs
            .get(first.network)
            .ok_or_else(|| Error::Argument(format!("no network input {}", first.network)))?
            .num_links();
        let mut embedded: BTreeMap<usize, Var> = BTreeMap::new();
        let mut rows = Vec::with_capacity(batch.len());
        for item in batch {
            let input = inputs
                .get(item.network)
                .ok_or_else(|| Error::Argument(format!("no network input {}", item.network)))?;
            if input.num_links() != n {
                return Err(Error::Argument("batch mixes networks of different size".into()));
            }
            if item.history.len() != self.arch.history {
                return Err(Error::Argument(format!(
                    "history must have {} steps, got {}",
                    self.arch.history,
                    item.history.len()
                )));
            }
            let v = match embedded.get(&item.network) {
                Some(&v) => v,
                None => {
                    let v = self.spatial_forward(store, tape, input)?;
                    embedded.insert(item.network, v);
                    v
                }
            };
            rows.push(v);
        }
        let spatial = tape.concat_rows(&rows)?;
        let x = match &self.gru {
            Some(gru) => {
                let xs: Vec<Var> = (0..self.arch.history)
                    .map(|k| {
                        let col = batch.iter().map(|b| b.history[k]).collect();
                        tape.leaf(Tensor::column(col))
                    })
                    .collect();
                let h = gru.forward(tape, store, &xs)?;
                let t = tape.repeat_rows(h, n)?;
                tape.concat_cols(&[spatial, t])?
            }
            None => spatial,
        };
        self.head.forward(tape, store, x)
    }

    /// Speeds for every link at window `t` given the recorded mean speeds.
    pub fn predict(&self, input: &NetworkInput<S>, v_mean: &[f64], t: usize) -> Result<Vec<f64>> {
        Ok(self.predict_windows(input, v_mean, &[t])?.remove(0))
    }

    /// Speeds for each requested window, evaluated in batches.
    pub fn predict_windows(&self, input: &NetworkInput<S>, v_mean: &[f64], windows: &[usize]) -> Result<Vec<Vec<f64>>> {
        const CHUNK: usize = 32;
        let inputs = std::slice::from_ref(input);
        let n = input.num_links();
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(CHUNK) {
            let batch = chunk
                .iter()
                .map(|&t| {
                    let h = history_window(v_mean, t, self.arch.history, &self.norm, self.arch.padding)?;
                    Ok(BatchItem {
                        network: 0,
                        history: h.into_iter().map(S::of).collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut tape = Tape::new();
            let y = self.forward(&mut tape, inputs, &batch)?;
            let raw = tape.value(y).data();
            for (b, &t) in chunk.iter().enumerate() {
                let vals: Vec<f64> = raw[b * n..(b + 1) * n]
                    .iter()
                    .map(|&r| self.norm.unscale_target(r.as_f64()))
                    .collect();
                out.push(decode_output(&vals, v_mean[t], self.arch.output, &input.free_flow));
            }
        }
        Ok(out)
    }

    /// Window-major speed estimates over a whole record.
    pub fn predict_record(&self, net: &RoadNetwork, partition: &PartitionAssignment, record: &SimRecord) -> Result<Vec<Vec<f64>>> {
        let input = self.network_input(net, partition)?;
        let windows: Vec<usize> = (0..record.num_windows()).collect();
        self.predict_windows(&input, &record.mean_speed, &windows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcf::arch::Variant;
    use crate::network::generate_grid_network;

    #[test]
    fn history_padding() {
        let norm = Normalization {
            v_mean: (0.0, 20.0),
            ..Normalization::unit(10)
        };
        let v = [10.0, 20.0, 5.0];
        assert_eq!(history_window(&v, 0, 5, &norm, -1.0).unwrap(), vec![-1.0, -1.0, -1.0, -1.0, 0.5]);
        assert_eq!(history_window(&v, 2, 3, &norm, -1.0).unwrap(), vec![0.5, 1.0, 0.25]);
        assert!(history_window(&v, 3, 3, &norm, -1.0).is_err());
    }

    fn small(variant: Variant) -> ArchConfig {
        ArchConfig {
            hidden: 8,
            fc: vec![6, 4],
            ..ArchConfig::new(variant)
        }
    }

    #[test]
    fn parameter_counts() {
        let count = |v| LcfModel::<f64>::new(ArchConfig::new(v), 0).unwrap().num_parameters();
        let (h, f) = (128, 10);
        let head = |input: usize| {
            let w = [input, 384, 256, 128, 64, 32, 1];
            w.windows(2).map(|p| p[0] * p[1] + p[1]).sum::<usize>()
        };
        let gru = 3 * ((h + 1) * h + h);
        assert_eq!(count(Variant::DNN), f * h + h + head(h));
        assert_eq!(count(Variant::DNN_GRU), f * h + h + gru + head(2 * h));
        assert_eq!(count(Variant::GAT_GRU), 2 * (f * h + 2 * h) + gru + head(2 * h));
        assert!(count(Variant::DNN_GRU) < count(Variant::GAT_GRU));
    }

    #[test]
    fn outputs_clamped_and_batched_consistently() {
        let net = generate_grid_network(3, 3, 200.0, 2).unwrap();
        let part = PartitionAssignment::single_region(&net);
        let model = LcfModel::<f64>::new(small(Variant::GAT_GRU), 3).unwrap();
        let input = model.network_input(&net, &part).unwrap();
        let v = [12.0, 14.0, 9.0, 20.0];
        let all = model.predict_windows(&input, &v, &[0, 1, 2, 3]).unwrap();
        for t in 0..4 {
            let one = model.predict(&input, &v, t).unwrap();
            for (a, b) in one.iter().zip(&all[t]) {
                assert!((a - b).abs() < 1e-12);
            }
            for (s, l) in one.iter().zip(net.links()) {
                assert!(*s >= 0.0 && *s <= l.free_flow_speed);
            }
        }
    }

    #[test]
    fn partition_changes_only_sub_region() {
        let net = generate_grid_network(3, 3, 200.0, 2).unwrap();
        let labels = net.links().iter().enumerate().map(|(i, l)| (l.id, i % 3)).collect();
        let part = PartitionAssignment::from_labels(labels);
        let with = LcfModel::<f64>::new(small(Variant::GAT_GRU_P), 0).unwrap();
        let without = LcfModel::<f64>::new(small(Variant::GAT_GRU), 0).unwrap();
        let a = with.network_input(&net, &part).unwrap().features;
        let b = without.network_input(&net, &part).unwrap().features;
        for r in 0..a.rows() {
            for c in 0..a.cols() {
                if c != 9 {
                    assert_eq!(a.get(r, c), b.get(r, c));
                } else {
                    assert_eq!(b.get(r, c), 0.0);
                    assert_eq!(a.get(r, c), (r % 3) as f64);
                }
            }
        }
    }

    fn toy_input(graph: &LinkGraph, features: Tensor<f64>) -> NetworkInput<f64> {
        NetworkInput {
            features,
            mask: attention_mask(graph),
            free_flow: vec![f64::INFINITY; graph.num_nodes()],
        }
    }

    #[test]
    fn end_to_end_gradient_check() {
        use crate::nn::{grad_check, xavier_uniform};
        let graph = LinkGraph::from_adjacency(
            vec![1, 2, 3, 4],
            vec![vec![0, 1], vec![1, 2], vec![2, 3, 0], vec![3, 1]],
        )
        .unwrap();
        let arch = ArchConfig {
            features: 3,
            hidden: 4,
            history: 2,
            fc: vec![5, 3],
            ..ArchConfig::new(Variant::GAT_GRU)
        };
        let model = LcfModel::<f64>::new(arch, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = model.store.clone();
        for t in store.tensors_mut() {
            let r: Tensor<f64> = xavier_uniform(t.rows(), t.cols(), &mut rng);
            t.data_mut().iter_mut().zip(r.data()).for_each(|(a, b)| *a += 0.3 * b);
        }
        let inputs = vec![toy_input(&graph, xavier_uniform(4, 3, &mut rng))];
        let batch = vec![
            BatchItem { network: 0, history: vec![0.2, 0.7] },
            BatchItem { network: 0, history: vec![-1.0, 0.4] },
        ];
        let target: Tensor<f64> = xavier_uniform(8, 1, &mut rng);
        let err = grad_check(&store, 1e-6, |tape, s| {
            let y = model.forward_with(s, tape, &inputs, &batch)?;
            tape.mse(y, target.clone())
        })
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn permutation_equivariant() {
        use crate::nn::xavier_uniform;
        let graph = LinkGraph::from_adjacency(
            vec![10, 11, 12, 13, 14],
            vec![vec![0, 1], vec![1, 2, 4], vec![2, 3], vec![3, 0], vec![4, 0, 2]],
        )
        .unwrap();
        let model = LcfModel::<f64>::new(small(Variant::GAT_GRU), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let features: Tensor<f64> = xavier_uniform(5, 10, &mut rng);
        let perm = [3, 0, 4, 1, 2];
        let mut permuted = Tensor::zeros(5, 10);
        for i in 0..5 {
            for c in 0..10 {
                permuted.set(perm[i], c, features.get(i, c));
            }
        }
        let run = |g: &LinkGraph, f: Tensor<f64>| {
            let batch = vec![BatchItem { network: 0, history: vec![0.1, 0.3, 0.2, 0.6, 0.5] }];
            let mut tape = Tape::new();
            let y = model.forward(&mut tape, &[toy_input(g, f)], &batch).unwrap();
            tape.value(y).data().to_vec()
        };
        let a = run(&graph, features);
        let b = run(&graph.permuted(&perm), permuted);
        for i in 0..5 {
            assert!((a[i] - b[perm[i]]).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_sizes_rejected() {
        let a = generate_grid_network(2, 2, 200.0, 2).unwrap();
        let b = generate_grid_network(3, 3, 200.0, 2).unwrap();
        let model = LcfModel::<f64>::new(small(Variant::GAT), 0).unwrap();
        let inputs = vec![
            model.network_input(&a, &PartitionAssignment::single_region(&a)).unwrap(),
            model.network_input(&b, &PartitionAssignment::single_region(&b)).unwrap(),
        ];
        let batch = vec![
            BatchItem { network: 0, history: vec![0.0; 5] },
            BatchItem { network: 1, history: vec![0.0; 5] },
        ];
        assert!(model.forward(&mut Tape::new(), &inputs, &batch).is_err());
    }
}
