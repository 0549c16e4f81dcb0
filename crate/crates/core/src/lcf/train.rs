use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::ArchConfig;
use super::model::{history_window, BatchItem, LcfModel, NetworkInput, Normalization};
use crate::error::{Error, Result};
use crate::network::{extract_features, MinMax, RoadNetwork};
use crate::nn::{steplr, AdamW, Tape, Tensor};
use crate::partition::PartitionAssignment;
use crate::scalar::Scalar;
use crate::scenario::Dataset;
use crate::sim::SimRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// StepLR period in epochs.
    pub step_size: usize,
    pub gamma: f64,
    pub weight_decay: f64,
    pub batches_per_epoch: usize,
    /// Samples per batch; by default the training set spread over
    /// `batches_per_epoch`.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 400,
            lr: 0.002,
            step_size: 80,
            gamma: 0.85,
            weight_decay: 0.01,
            batches_per_epoch: 128,
            batch_size: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batches_per_epoch == 0 || self.batch_size == Some(0) {
            return Err(Error::Validation("epochs and batch sizes must be positive".into()));
        }
        if !(self.lr > 0.0) || !(self.gamma > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::Validation("lr and gamma must be positive".into()));
        }
        Ok(())
    }

    pub fn batch_size_for(&self, samples: usize) -> usize {
        self.batch_size
            .unwrap_or_else(|| samples.div_ceil(self.batches_per_epoch))
            .max(1)
    }
}

/// Scenario networks with their records.
#[derive(Debug, Clone)]
pub struct Corpus<'a> {
    pub networks: Vec<RoadNetwork>,
    pub records: Vec<&'a SimRecord>,
}

impl<'a> Corpus<'a> {
    /// The scenarios at `positions` of `dataset`.
    pub fn from_dataset(base: &RoadNetwork, dataset: &'a Dataset, positions: &[usize]) -> Result<Self> {
        let mut networks = Vec::with_capacity(positions.len());
        let mut records = Vec::with_capacity(positions.len());
        for &p in positions {
            networks.push(dataset.scenarios[p].network(base)?);
            records.push(&dataset.records[p]);
        }
        Ok(Corpus { networks, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Fits feature, mean-speed and target statistics on `corpus`.
pub fn fit_normalization(arch: &ArchConfig, corpus: &Corpus, partition: &PartitionAssignment) -> Result<Normalization> {
    if corpus.is_empty() {
        return Err(Error::Argument("cannot fit normalization on an empty corpus".into()));
    }
    let mut feats = Vec::new();
    for net in &corpus.networks {
        let p = if arch.variant.partition {
            partition.clone()
        } else {
            PartitionAssignment::single_region(net)
        };
        feats.push(extract_features(net, &p)?);
    }
    let features = MinMax::fit_features(&feats);
    let mut v_mean = (f64::INFINITY, f64::NEG_INFINITY);
    let mut target = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &corpus.records {
        for t in 0..r.num_windows() {
            let m = r.mean_speed[t];
            v_mean = (v_mean.0.min(m), v_mean.1.max(m));
            for &v in r.speeds_at(t) {
                let e = arch.output.encode(v, m);
                target = (target.0.min(e), target.1.max(e));
            }
        }
    }
    Ok(Normalization {
        features,
        v_mean,
        target,
    })
}

/// Inputs and normalized targets for every (scenario, window) sample.
#[derive(Debug, Clone)]
pub struct TrainingData<S> {
    pub inputs: Vec<NetworkInput<S>>,
    histories: Vec<Vec<Vec<S>>>,
    targets: Vec<Vec<S>>,
    pub samples: Vec<(usize, usize)>,
}

impl<S: Scalar> TrainingData<S> {
    pub fn new(model: &LcfModel<S>, corpus: &Corpus, partition: &PartitionAssignment) -> Result<Self> {
        let mut inputs = Vec::new();
        let mut histories = Vec::new();
        let mut targets = Vec::new();
        let mut samples = Vec::new();
        for (i, (net, r)) in corpus.networks.iter().zip(&corpus.records).enumerate() {
            if r.num_links() != net.num_links() {
                return Err(Error::Validation("record and network link counts differ".into()));
            }
            inputs.push(model.network_input(net, partition)?);
            let mut hist = Vec::with_capacity(r.num_windows());
            let mut tgt = Vec::with_capacity(r.num_windows() * r.num_links());
            for t in 0..r.num_windows() {
                let h = history_window(&r.mean_speed, t, model.arch.history, &model.norm, model.arch.padding)?;
                hist.push(h.into_iter().map(S::of).collect());
                let m = r.mean_speed[t];
                tgt.extend(
                    r.speeds_at(t)
                        .iter()
                        .map(|&v| S::of(model.norm.scale_target(model.arch.output.encode(v, m)))),
                );
                samples.push((i, t));
            }
            histories.push(hist);
            targets.push(tgt);
        }
        Ok(TrainingData {
            inputs,
            histories,
            targets,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Batch items and the matching target column for sample positions `idx`.
    pub fn batch(&self, idx: &[usize]) -> Result<(Vec<BatchItem<S>>, Tensor<S>)> {
        let mut items = Vec::with_capacity(idx.len());
        let mut target = Vec::new();
        for &k in idx {
            let (i, t) = self.samples[k];
            let n = self.inputs[i].num_links();
            items.push(BatchItem {
                network: i,
                history: self.histories[i][t].clone(),
            });
            target.extend_from_slice(&self.targets[i][t * n..(t + 1) * n]);
        }
        let rows = target.len();
        Ok((items, Tensor::from_vec(rows, 1, target)?))
    }
}

/// Mean squared error in normalized target units over every sample.
pub fn evaluate_loss<S: Scalar>(model: &LcfModel<S>, data: &TrainingData<S>) -> Result<f64> {
    const CHUNK: usize = 32;
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for chunk in idx.chunks(CHUNK) {
        let (items, target) = data.batch(chunk)?;
        let mut tape = Tape::new();
        let y = model.forward(&mut tape, &data.inputs, &items)?;
        let loss = tape.mse(y, target.clone())?;
        sum += tape.value(loss).item().as_f64() * target.len() as f64;
        count += target.len();
    }
    if count == 0 {
        return Err(Error::Argument("no samples to evaluate".into()));
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss per epoch.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub batch_size: usize,
}

/// Trains a model of shape `arch` and returns the parameters of the epoch
/// with the lowest validation loss.
pub fn train<S: Scalar>(
    arch: &ArchConfig,
    train_set: &Corpus,
    val_set: &Corpus,
    partition: &PartitionAssignment,
    cfg: &TrainConfig,
) -> Result<(LcfModel<S>, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Argument("training and validation splits must be non-empty".into()));
    }
    let mut model = LcfModel::<S>::new(arch.clone(), cfg.seed)?;
    model.norm = fit_normalization(arch, train_set, partition)?;
    let train_data = TrainingData::new(&model, train_set, partition)?;
    let val_data = TrainingData::new(&model, val_set, partition)?;
    let batch_size = cfg.batch_size_for(train_data.len());

    let mut opt = AdamW::new(&model.store, S::of(cfg.lr));
    opt.weight_decay = S::of(cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut cursor = order.len();

    let mut report = TrainReport {
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        batch_size,
    };
    let mut best = (f64::INFINITY, model.store.clone());
    for epoch in 0..cfg.epochs {
        opt.lr = S::of(steplr(cfg.lr, cfg.step_size, cfg.gamma, epoch));
        let mut sum = 0.0;
        for _ in 0..cfg.batches_per_epoch {
            let mut idx = Vec::with_capacity(batch_size);
            while idx.len() < batch_size {
                if cursor == order.len() {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                let take = (batch_size - idx.len()).min(order.len() - cursor);
                idx.extend_from_slice(&order[cursor..cursor + take]);
                cursor += take;
            }
            let (items, target) = train_data.batch(&idx)?;
            let mut tape = Tape::new();
            let y = model.forward(&mut tape, &train_data.inputs, &items)?;
            let loss = tape.mse(y, target)?;
            let value = tape.value(loss).item().as_f64();
            if !value.is_finite() {
                return Err(Error::Divergence(format!("loss {value} at epoch {epoch}")));
            }
            let grads = tape.backward(loss)?.for_params(&model.store);
            opt.step(&mut model.store, &grads);
            sum += value;
        }
        let train_loss = sum / cfg.batches_per_epoch as f64;
        let val_loss = evaluate_loss(&model, &val_data)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence(format!("validation loss {val_loss} at epoch {epoch}")));
        }
        log::debug!("epoch={epoch} train_loss={train_loss:.6e} val_loss={val_loss:.6e}");
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, model.store.clone());
            report.best_epoch = epoch;
        }
    }
    model.store = best.1;
    Ok((model, report))
}
