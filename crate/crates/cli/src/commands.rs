use std::path::Path;

use lcf_core::baselines::{LcfEstimator, LrBaseline, MfdBaseline, MfdPBaseline, SpeedEstimator};
use lcf_core::eval::{evaluate_estimator, export_report, generate_trips, ReportRow};
use lcf_core::lcf::{load_checkpoint, save_checkpoint, train, Corpus, LcfModel, Variant};
use lcf_core::network::{load_network, save_network, RoadNetwork};
use lcf_core::partition::{partition_network, PartitionAssignment, PartitionParams};
use lcf_core::pipeline::{reference_partition, run_pipeline, travel_time_rows, PipelineConfig};
use lcf_core::scenario::{build_dataset, generate_base_od, Dataset, ODMatrix};
use lcf_core::sim::{simulate, Demand, SimRecord};
use lcf_core::{Error, Result, Scalar};

use crate::config::RunConfig;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn network(cfg: &RunConfig) -> Result<RoadNetwork> {
    load_network(cfg.network_path())
}

pub fn gen_network(cfg: &RunConfig) -> Result<()> {
    let net = cfg.grid_spec()?.build()?;
    let od = generate_base_od(&net, cfg.od_pairs, cfg.od_mean_vph, cfg.od_seed)?;
    create_dir(&cfg.out)?;
    save_network(&net, cfg.out.join("network.txt"))?;
    od.save(cfg.out.join("od.txt"))?;
    log::info!("wrote=network links={} od_pairs={}", net.num_links(), od.len());
    Ok(())
}

pub fn gen_dataset(cfg: &RunConfig) -> Result<()> {
    let net = network(cfg)?;
    let od = ODMatrix::load(cfg.od.clone().unwrap_or_else(|| cfg.out.join("od.txt")))?;
    let dataset = build_dataset(&net, &od, &cfg.dataset_config(), &cfg.sim())?;
    create_dir(&cfg.out)?;
    dataset.save(cfg.out.join("dataset"))?;
    log::info!(
        "wrote=dataset scenarios={} failed={}",
        dataset.records.len(),
        dataset.failed.len()
    );
    Ok(())
}

/// Without an OD file the network runs empty.
pub fn simulate_once(cfg: &RunConfig) -> Result<()> {
    let net = network(cfg)?;
    let demand = match &cfg.od {
        Some(path) => ODMatrix::load(path)?.to_demand(&net)?,
        None => Demand::new(&net, &[])?,
    };
    let record = simulate(&net, &demand, &cfg.sim())?;
    create_dir(&cfg.out)?;
    record.save_csv(cfg.out.join("record"))?;
    log::info!("wrote=record windows={}", record.num_windows());
    Ok(())
}

pub fn partition(cfg: &RunConfig) -> Result<()> {
    let net = network(cfg)?;
    let params = cfg.partition_params();
    let assignment = match &cfg.record {
        Some(dir) => {
            let record = SimRecord::load_csv(&net, dir, cfg.window_s)?;
            let params = PartitionParams {
                t_max: record.peak_window(),
                ..params
            };
            partition_network(&net, &record, &params)?
        }
        None => reference_partition(&net, &Dataset::load(&net, cfg.dataset_path())?, &params)?,
    };
    create_dir(&cfg.out)?;
    assignment.save(cfg.out.join("partition.txt"))?;
    log::info!("wrote=partition regions={:?}", assignment.region_sizes());
    Ok(())
}

struct Inputs {
    net: RoadNetwork,
    dataset: Dataset,
    partition: PartitionAssignment,
}

impl Inputs {
    fn load(cfg: &RunConfig) -> Result<Self> {
        let net = network(cfg)?;
        let dataset = Dataset::load(&net, cfg.dataset_path())?;
        let partition = PartitionAssignment::load(cfg.partition_path())?;
        Ok(Inputs { net, dataset, partition })
    }

    fn corpus(&self, positions: &[usize]) -> Result<Corpus<'_>> {
        Corpus::from_dataset(&self.net, &self.dataset, positions)
    }
}

fn train_variant<S: Scalar>(cfg: &RunConfig, inputs: &Inputs, variant: Variant) -> Result<LcfModel<S>> {
    let train_set = inputs.corpus(&inputs.dataset.train)?;
    let val_set = inputs.corpus(&inputs.dataset.val)?;
    log::info!("stage=train model={variant} scenarios={}", train_set.len());
    let (model, report) = train::<S>(&cfg.arch(variant), &train_set, &val_set, &inputs.partition, &cfg.train())?;
    log::info!(
        "trained={variant} best_epoch={} val_loss={}",
        report.best_epoch,
        report.val_loss[report.best_epoch]
    );
    let dir = cfg.models_path();
    create_dir(&dir)?;
    save_checkpoint(&model, dir.join(format!("{variant}.ckpt")))?;
    Ok(model)
}

pub fn train_model<S: Scalar>(cfg: &RunConfig) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    train_variant::<S>(cfg, &inputs, cfg.model).map(|_| ())
}

/// Every report model, training those without a checkpoint.
fn learned_models<S: Scalar>(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<LcfEstimator<S>>> {
    let dir = cfg.models_path();
    PipelineConfig::default()
        .models
        .into_iter()
        .map(|variant| {
            let path = dir.join(format!("{variant}.ckpt"));
            let model = if path.exists() {
                load_checkpoint::<S>(&path)?
            } else {
                train_variant::<S>(cfg, inputs, variant)?
            };
            Ok(LcfEstimator {
                model,
                partition: inputs.partition.clone(),
            })
        })
        .collect()
}

fn report_rows<S: Scalar>(cfg: &RunConfig, travel: bool) -> Result<Vec<ReportRow>> {
    let inputs = Inputs::load(cfg)?;
    let train_set = inputs.corpus(&inputs.dataset.train)?;
    let test_set = inputs.corpus(&inputs.dataset.test)?;
    let lr = LrBaseline::fit(&train_set.networks, &train_set.records, &inputs.partition, cfg.history)?;
    let mfd_p = MfdPBaseline {
        partition: inputs.partition.clone(),
    };
    let learned = learned_models::<S>(cfg, &inputs)?;
    let mut estimators: Vec<&dyn SpeedEstimator> = vec![&MfdBaseline, &mfd_p, &lr];
    estimators.extend(learned.iter().map(|e| e as &dyn SpeedEstimator));
    let class = inputs.dataset.level.to_string();
    if travel {
        let sim = cfg.sim();
        let trips = generate_trips(&inputs.net, cfg.trips, cfg.trip_seed, sim.warmup_windows(), sim.num_windows())?;
        travel_time_rows(&estimators, &test_set, &trips, &sim, &class)
    } else {
        estimators
            .iter()
            .map(|e| evaluate_estimator(*e, &test_set.networks, &test_set.records, &class))
            .collect()
    }
}

fn print_rows(rows: &[ReportRow], unit: &str) {
    println!("{:<10} {:>10} {:>10} {:>10} {:>8}", "model", "mae", "rmse", "err_mean", "count");
    for r in rows {
        let m = &r.metrics;
        println!(
            "{:<10} {:>10.4} {:>10.4} {:>10.4} {:>8}",
            r.model, m.mae, m.rmse, m.mean, m.count
        );
    }
    println!("errors in {unit}");
}

pub fn evaluate<S: Scalar>(cfg: &RunConfig) -> Result<()> {
    let rows = report_rows::<S>(cfg, false)?;
    export_report(&rows, cfg.out.join("speed"))?;
    print_rows(&rows, "km/h");
    Ok(())
}

pub fn travel_time<S: Scalar>(cfg: &RunConfig) -> Result<()> {
    let rows = report_rows::<S>(cfg, true)?;
    export_report(&rows, cfg.out.join("travel_time"))?;
    print_rows(&rows, "seconds");
    Ok(())
}

pub fn report<S: Scalar>(cfg: &RunConfig) -> Result<()> {
    let out = run_pipeline::<S>(&cfg.pipeline()?, Some(&cfg.out))?;
    print_rows(&out.speed_rows, "km/h");
    print_rows(&out.travel_rows, "seconds");
    Ok(())
}
