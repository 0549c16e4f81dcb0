//! End-to-end run: grid, dataset, partition, baselines, model training,
//! speed and travel-time evaluation, and the files they produce.

use std::path::Path;

use crate::baselines::{LcfEstimator, LrBaseline, MfdBaseline, MfdPBaseline, SpeedEstimator, Truth};
use crate::error::{Error, Result};
use crate::eval::{evaluate_estimator, export_report, generate_trips, travel_time_experiment, ReportRow, Trip};
use crate::lcf::{save_checkpoint, train, ArchConfig, Corpus, LcfModel, TrainConfig, TrainReport, Variant};
use crate::network::{save_network, GridSpec, RoadNetwork};
use crate::partition::{partition_network, PartitionAssignment, PartitionParams};
use crate::scalar::Scalar;
use crate::scenario::{build_dataset, generate_base_od, Dataset, DatasetConfig, ODMatrix};
use crate::sim::SimConfig;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub grid: GridSpec,
    pub od_pairs: usize,
    pub od_mean_vph: f64,
    pub od_seed: u64,
    pub dataset: DatasetConfig,
    pub sim: SimConfig,
    pub partition: PartitionParams,
    pub train: TrainConfig,
    /// Shared model dimensions; the variant is set per trained model.
    pub arch: ArchConfig,
    pub models: Vec<Variant>,
    pub trips: usize,
    pub trip_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            grid: GridSpec::new(5, 5, 200.0, 2),
            od_pairs: 10,
            od_mean_vph: 600.0,
            od_seed: 1,
            dataset: DatasetConfig::new(20, 42),
            sim: SimConfig::default(),
            partition: PartitionParams::default(),
            train: TrainConfig::default(),
            arch: ArchConfig::new(Variant::GAT_GRU_P),
            models: Variant::all().into_iter().filter(|v| !v.partition || *v == Variant::GAT_GRU_P).collect(),
            trips: 1000,
            trip_seed: 7,
        }
    }
}

/// Partition from the peak of the first training scenario.
pub fn reference_partition(base: &RoadNetwork, dataset: &Dataset, params: &PartitionParams) -> Result<PartitionAssignment> {
    let &pos = dataset
        .train
        .first()
        .ok_or_else(|| Error::Argument("dataset has no training scenarios".into()))?;
    let record = &dataset.records[pos];
    let params = PartitionParams {
        t_max: record.peak_window(),
        ..params.clone()
    };
    partition_network(&dataset.scenarios[pos].network(base)?, record, &params)
}

/// Trip `k` is run on test scenario `k mod n_test`.
pub fn travel_time_rows(
    estimators: &[&dyn SpeedEstimator],
    test: &Corpus,
    trips: &[Trip],
    sim: &SimConfig,
    class: &str,
) -> Result<Vec<ReportRow>> {
    if test.is_empty() {
        return Err(Error::Argument("no test scenarios for the travel-time experiment".into()));
    }
    let mut rows = Vec::with_capacity(estimators.len());
    for est in estimators {
        let mut errors = Vec::new();
        for (i, (net, record)) in test.networks.iter().zip(&test.records).enumerate() {
            let mine: Vec<Trip> = trips.iter().skip(i).step_by(test.len()).copied().collect();
            let estimate = est.estimate(net, record)?;
            let truth = Truth.estimate(net, record)?;
            let r = travel_time_experiment(net, &estimate, &truth, record.window_s, sim.v_min, &mine)?;
            if r.no_path > 0 {
                log::warn!("model={} no_path={}", est.name(), r.no_path);
            }
            errors.extend(r.errors);
        }
        rows.push(ReportRow::new(est.name(), class, errors)?);
    }
    Ok(rows)
}

pub struct PipelineOutput<S: Scalar> {
    pub network: RoadNetwork,
    pub base_od: ODMatrix,
    pub dataset: Dataset,
    pub partition: PartitionAssignment,
    pub models: Vec<(LcfModel<S>, TrainReport)>,
    pub speed_rows: Vec<ReportRow>,
    pub travel_rows: Vec<ReportRow>,
}

impl<S: Scalar> PipelineOutput<S> {
    pub fn speed_row(&self, model: &str) -> Option<&ReportRow> {
        self.speed_rows.iter().find(|r| r.model == model)
    }

    pub fn travel_row(&self, model: &str) -> Option<&ReportRow> {
        self.travel_rows.iter().find(|r| r.model == model)
    }
}

/// Runs every stage; with `out_dir` set, writes the network, OD matrix,
/// dataset, partition, checkpoints and both reports under it.
pub fn run_pipeline<S: Scalar>(cfg: &PipelineConfig, out_dir: Option<&Path>) -> Result<PipelineOutput<S>> {
    cfg.sim.validate()?;
    cfg.train.validate()?;
    let network = cfg.grid.build()?;
    let base_od = generate_base_od(&network, cfg.od_pairs, cfg.od_mean_vph, cfg.od_seed)?;
    log::info!("stage=dataset scenarios={}", cfg.dataset.scenarios);
    let dataset = build_dataset(&network, &base_od, &cfg.dataset, &cfg.sim)?;
    let partition = reference_partition(&network, &dataset, &cfg.partition)?;
    let train_set = Corpus::from_dataset(&network, &dataset, &dataset.train)?;
    let val_set = Corpus::from_dataset(&network, &dataset, &dataset.val)?;
    let test_set = Corpus::from_dataset(&network, &dataset, &dataset.test)?;

    let mut models = Vec::with_capacity(cfg.models.len());
    for &variant in &cfg.models {
        log::info!("stage=train model={variant}");
        let arch = ArchConfig {
            variant,
            ..cfg.arch.clone()
        };
        models.push(train::<S>(&arch, &train_set, &val_set, &partition, &cfg.train)?);
    }

    let lr = LrBaseline::fit(&train_set.networks, &train_set.records, &partition, cfg.arch.history)?;
    let mfd_p = MfdPBaseline {
        partition: partition.clone(),
    };
    let learned: Vec<LcfEstimator<S>> = models
        .iter()
        .map(|(m, _)| LcfEstimator {
            model: m.clone(),
            partition: partition.clone(),
        })
        .collect();
    let mut estimators: Vec<&dyn SpeedEstimator> = vec![&MfdBaseline, &mfd_p, &lr];
    estimators.extend(learned.iter().map(|e| e as &dyn SpeedEstimator));

    log::info!("stage=evaluate models={}", estimators.len());
    let class = cfg.dataset.level.to_string();
    let speed_rows = estimators
        .iter()
        .map(|e| evaluate_estimator(*e, &test_set.networks, &test_set.records, &class))
        .collect::<Result<Vec<_>>>()?;
    let windows = cfg.sim.num_windows();
    let trips = generate_trips(&network, cfg.trips, cfg.trip_seed, cfg.sim.warmup_windows(), windows)?;
    let travel_rows = travel_time_rows(&estimators, &test_set, &trips, &cfg.sim, &class)?;

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_network(&network, dir.join("network.txt"))?;
        base_od.save(dir.join("od.txt"))?;
        dataset.save(dir.join("dataset"))?;
        partition.save(dir.join("partition.txt"))?;
        let model_dir = dir.join("models");
        std::fs::create_dir_all(&model_dir).map_err(|e| Error::io(&model_dir, e))?;
        for (m, _) in &models {
            save_checkpoint(m, model_dir.join(format!("{}.ckpt", m.arch.variant)))?;
        }
        export_report(&speed_rows, dir.join("speed"))?;
        export_report(&travel_rows, dir.join("travel_time"))?;
    }
    Ok(PipelineOutput {
        network,
        base_od,
        dataset,
        partition,
        models,
        speed_rows,
        travel_rows,
    })
}
