//! Flat `key = value` configuration, overridable key by key from flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use lcf_core::lcf::{ArchConfig, OutputType, TrainConfig, Variant};
use lcf_core::network::GridSpec;
use lcf_core::partition::PartitionParams;
use lcf_core::pipeline::PipelineConfig;
use lcf_core::scenario::{DatasetConfig, DemandLevel};
use lcf_core::sim::SimConfig;
use lcf_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(Error::Argument(format!("unknown precision '{s}' (f32, f64)"))),
        }
    }
}

macro_rules! config_keys {
    ($( $field:ident : $ty:ty = $default:expr, $shown:literal, $help:literal; )*) => {
        /// Every setting; each is also a `--flag` of the same name with
        /// dashes for underscores.
        #[derive(Debug, Clone, Args, Default)]
        pub struct ConfigArgs {
            $(
                #[arg(long, global = true, allow_hyphen_values = true, help = concat!($help, " [default: ", $shown, "]"))]
                pub $field: Option<String>,
            )*
        }

        #[derive(Debug, Clone)]
        pub struct RunConfig {
            $( pub $field: $ty, )*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $( $field: $default.into(), )* }
            }
        }

        impl RunConfig {
            fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(
                        stringify!($field) => {
                            self.$field = parse_value(key, value)?;
                        }
                    )*
                    _ => return Err(Error::Validation(format!("unknown configuration key '{key}'"))),
                }
                Ok(())
            }

            fn apply_flags(&mut self, flags: &ConfigArgs) -> Result<()> {
                $(
                    if let Some(v) = &flags.$field {
                        self.set(stringify!($field), v)?;
                    }
                )*
                Ok(())
            }
        }
    };
}

trait ParseValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
}

macro_rules! via_from_str {
    ($($t:ty),*) => {$(
        impl ParseValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|e| format!("{e}"))
            }
        }
    )*};
}

via_from_str!(f64, u64, usize, u32, String, PathBuf, DemandLevel, Variant, OutputType, Precision);

impl<T: ParseValue> ParseValue for Option<T> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" || s.is_empty() {
            Ok(None)
        } else {
            T::parse_value(s).map(Some)
        }
    }
}

fn parse_value<T: ParseValue>(key: &str, value: &str) -> Result<T> {
    T::parse_value(value).map_err(|e| Error::Validation(format!("bad value '{value}' for '{key}': {e}")))
}

config_keys! {
    out: PathBuf = "out", "out", "output directory; inputs default to files under it";
    network: Option<PathBuf> = None::<PathBuf>, "<out>/network.txt", "network file";
    od: Option<PathBuf> = None::<PathBuf>, "none", "OD matrix file; `simulate` runs empty without one";
    dataset: Option<PathBuf> = None::<PathBuf>, "<out>/dataset", "dataset directory";
    record: Option<PathBuf> = None::<PathBuf>, "none", "record directory used by `partition`";
    partition: Option<PathBuf> = None::<PathBuf>, "<out>/partition.txt", "partition file";
    models: Option<PathBuf> = None::<PathBuf>, "<out>/models", "checkpoint directory";
    grid: String = "5x5", "5x5", "grid size, rows x columns of junctions";
    link_length: f64 = 200.0, "200.0", "grid link length, meters";
    lanes: u32 = 2u32, "2", "lanes per grid link";
    signal_cycle: f64 = 90.0, "90.0", "signal cycle, seconds";
    od_pairs: usize = 10usize, "10", "OD pairs in the base matrix";
    od_mean_vph: f64 = 600.0, "600.0", "mean OD rate, veh/h";
    od_seed: u64 = 1u64, "1", "OD generation seed";
    scenarios: usize = 20usize, "20", "scenarios in the dataset";
    master_seed: u64 = 42u64, "42", "dataset master seed";
    level: DemandLevel = DemandLevel::Medium, "medium", "demand level: low, medium or high";
    max_bus_lanes: Option<usize> = None::<usize>, "auto, a quarter of the candidates", "bus lanes per scenario at most";
    step_s: f64 = 5.0, "5.0", "simulation step, seconds";
    window_s: f64 = 180.0, "180.0", "aggregation window, seconds";
    warmup_s: f64 = 900.0, "900.0", "warm-up, seconds";
    peak_s: f64 = 6300.0, "6300.0", "demand peak time, seconds";
    total_s: f64 = 21600.0, "21600.0", "simulated horizon, seconds";
    saturation_flow: f64 = 0.5, "0.5", "saturation flow, veh/s per lane";
    vehicle_length: f64 = 7.0, "7.0", "storage spacing, meters per vehicle";
    congestion_threshold: f64 = 0.95, "0.95", "occupancy at which a link stops receiving";
    v_min: f64 = 1.0, "1.0", "minimum speed, km/h";
    turn_update_s: f64 = 180.0, "180.0", "turn ratio refresh period, seconds";
    turn_smoothing: f64 = 0.5, "0.5", "weight of the new turn split";
    k: usize = 4usize, "4", "sub-regions";
    alpha: f64 = 1.0, "1", "weight of link location in clustering";
    beta: f64 = 1.5, "1.5", "weight of peak speed in clustering";
    t_w: usize = 2usize, "2", "half-width of the peak period, windows";
    partition_seed: u64 = 0u64, "0", "clustering seed";
    model: Variant = Variant::GAT_GRU_P, "gat-gru-p", "model to train: dnn, dnn-gru, gat, gat-gru, gat-gru-p";
    output: OutputType = OutputType::Ratio, "ratio", "model output: ratio, diff or speed";
    epochs: usize = 400usize, "400", "training epochs";
    lr: f64 = 0.002, "0.002", "AdamW learning rate";
    step_size: usize = 80usize, "80", "StepLR period, epochs";
    gamma: f64 = 0.85, "0.85", "StepLR factor";
    weight_decay: f64 = 0.01, "0.01", "AdamW weight decay";
    batches_per_epoch: usize = 128usize, "128", "batches per epoch";
    batch_size: Option<usize> = None::<usize>, "auto, training samples / batches_per_epoch", "samples per batch";
    train_seed: u64 = 0u64, "0", "initialization and shuffling seed";
    heads: usize = 2usize, "2", "attention heads";
    hidden: usize = 128usize, "128", "embedding width of both branches";
    history: usize = 5usize, "5", "mean-speed history length, windows";
    padding: f64 = -1.0, "-1", "history value before the first window";
    precision: Precision = Precision::F32, "f32", "model float type: f32 or f64";
    trips: usize = 1000usize, "1000", "random trips in the travel-time experiment";
    trip_seed: u64 = 7u64, "7", "trip generation seed";
}

impl RunConfig {
    /// Defaults, then the file at `path` if any, then flags.
    pub fn resolve(path: Option<&Path>, flags: &ConfigArgs) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Validation(format!("{}: {e}", p.display())))?;
            cfg.merge_text(&text, &p.display().to_string())?;
        }
        cfg.apply_flags(flags)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str, src: &str) -> Result<()> {
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("{src}:{}: expected 'key = value'", n + 1)))?;
            let key = key.trim().replace('-', "_");
            if let Some(prev) = seen.insert(key.clone(), n + 1) {
                return Err(Error::Validation(format!(
                    "{src}:{}: '{key}' already set on line {prev}",
                    n + 1
                )));
            }
            self.set(&key, value.trim())
                .map_err(|e| Error::Validation(format!("{src}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn grid_dims(&self) -> Result<(usize, usize)> {
        let bad = || Error::Validation(format!("grid must look like 5x5, got '{}'", self.grid));
        let (r, c) = self.grid.split_once(['x', 'X']).ok_or_else(bad)?;
        Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_dims()?;
        self.sim().validate()?;
        self.train().validate()?;
        self.arch(self.model).validate()?;
        if self.k == 0 {
            return Err(Error::Validation("k must be positive".into()));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let (rows, cols) = self.grid_dims()?;
        Ok(GridSpec {
            signal_cycle_s: Some(self.signal_cycle),
            ..GridSpec::new(rows, cols, self.link_length, self.lanes)
        })
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            step_s: self.step_s,
            window_s: self.window_s,
            warmup_s: self.warmup_s,
            peak_s: self.peak_s,
            total_s: self.total_s,
            saturation_flow: self.saturation_flow,
            vehicle_length: self.vehicle_length,
            congestion_threshold: self.congestion_threshold,
            v_min: self.v_min,
            turn_update_s: self.turn_update_s,
            turn_smoothing: self.turn_smoothing,
        }
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            level: self.level,
            max_bus_lanes: self.max_bus_lanes,
            ..DatasetConfig::new(self.scenarios, self.master_seed)
        }
    }

    /// `t_max` is filled in from the record being clustered.
    pub fn partition_params(&self) -> PartitionParams {
        PartitionParams {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            t_w: self.t_w,
            seed: self.partition_seed,
            ..PartitionParams::default()
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            step_size: self.step_size,
            gamma: self.gamma,
            weight_decay: self.weight_decay,
            batches_per_epoch: self.batches_per_epoch,
            batch_size: self.batch_size,
            seed: self.train_seed,
        }
    }

    pub fn arch(&self, variant: Variant) -> ArchConfig {
        ArchConfig {
            output: self.output,
            hidden: self.hidden,
            heads: self.heads,
            history: self.history,
            padding: self.padding,
            ..ArchConfig::new(variant)
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            grid: self.grid_spec()?,
            od_pairs: self.od_pairs,
            od_mean_vph: self.od_mean_vph,
            od_seed: self.od_seed,
            dataset: self.dataset_config(),
            sim: self.sim(),
            partition: self.partition_params(),
            train: self.train(),
            arch: self.arch(self.model),
            trips: self.trips,
            trip_seed: self.trip_seed,
            ..PipelineConfig::default()
        })
    }

    pub fn network_path(&self) -> PathBuf {
        self.network.clone().unwrap_or_else(|| self.out.join("network.txt"))
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out.join("dataset"))
    }

    pub fn partition_path(&self) -> PathBuf {
        self.partition.clone().unwrap_or_else(|| self.out.join("partition.txt"))
    }

    pub fn models_path(&self) -> PathBuf {
        self.models.clone().unwrap_or_else(|| self.out.join("models"))
    }
}
