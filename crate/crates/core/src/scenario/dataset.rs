use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bus_lane_candidates, perturb_od, sample_bus_lane_config, scale_demand, BusLaneConfig, ODMatrix};
use crate::error::{Error, Result};
use crate::network::{LinkId, RoadNetwork};
use crate::sim::{simulate, SimConfig, SimRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandLevel {
    Low,
    Medium,
    High,
}

impl DemandLevel {
    pub fn factor(self) -> f64 {
        match self {
            DemandLevel::Low => 0.7,
            DemandLevel::Medium => 1.0,
            DemandLevel::High => 1.3,
        }
    }
}

impl fmt::Display for DemandLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DemandLevel::Low => "low",
            DemandLevel::Medium => "medium",
            DemandLevel::High => "high",
        })
    }
}

impl FromStr for DemandLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(DemandLevel::Low),
            "medium" => Ok(DemandLevel::Medium),
            "high" => Ok(DemandLevel::High),
            _ => Err(Error::Argument(format!("unknown demand level '{s}' (low, medium, high)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub scenarios: usize,
    pub master_seed: u64,
    pub level: DemandLevel,
    /// Upper bound on bus-lane links per scenario; a quarter of the
    /// candidates when unset.
    pub max_bus_lanes: Option<usize>,
}

impl DatasetConfig {
    pub fn new(scenarios: usize, master_seed: u64) -> Self {
        DatasetConfig {
            scenarios,
            master_seed,
            level: DemandLevel::Medium,
            max_bus_lanes: None,
        }
    }
}

/// One simulated demand and road-configuration variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub seed: u64,
    pub demand_factor: f64,
    pub od_factors: Vec<f64>,
    pub bus_lanes: Vec<LinkId>,
}

impl Scenario {
    pub fn bus_lane_config(&self) -> BusLaneConfig {
        self.bus_lanes.iter().map(|&id| (id, 1)).collect()
    }

    /// The base network with this scenario's bus lanes.
    pub fn network(&self, base: &RoadNetwork) -> Result<RoadNetwork> {
        base.with_bus_lanes(&self.bus_lane_config())
    }

    pub fn od(&self, base_od: &ODMatrix) -> Result<ODMatrix> {
        scale_demand(&perturb_od(base_od, &self.od_factors)?, self.demand_factor)
    }

    pub fn simulate(&self, base: &RoadNetwork, base_od: &ODMatrix, cfg: &SimConfig) -> Result<SimRecord> {
        let net = self.network(base)?;
        simulate(&net, &self.od(base_od)?.to_demand(&net)?, cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub master_seed: u64,
    pub level: DemandLevel,
    pub scenarios: Vec<Scenario>,
    /// Aligned with `scenarios`.
    pub records: Vec<SimRecord>,
    /// Positions into `scenarios`.
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Ids of scenarios whose simulation failed; they are in no split.
    pub failed: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    scenario: Scenario,
    split: String,
    records: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    master_seed: u64,
    level: DemandLevel,
    window_s: f64,
    failed: Vec<usize>,
    scenarios: Vec<ManifestEntry>,
}

/// (train, val, test) sizes for a corpus of `n`: 70 % and 10 % rounded
/// down, the rest to test.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 7 / 10;
    let val = n / 10;
    (train, val, n - train - val)
}

pub fn build_dataset(
    net: &RoadNetwork,
    base_od: &ODMatrix,
    config: &DatasetConfig,
    sim: &SimConfig,
) -> Result<Dataset> {
    if config.scenarios < 10 {
        return Err(Error::Argument(format!(
            "a dataset needs at least 10 scenarios, got {}",
            config.scenarios
        )));
    }
    sim.validate()?;
    let candidates = bus_lane_candidates(net);
    let max_bus = config
        .max_bus_lanes
        .unwrap_or(candidates.len() / 4)
        .min(candidates.len());
    let mut master = ChaCha8Rng::seed_from_u64(config.master_seed);
    let mut scenarios = Vec::with_capacity(config.scenarios);
    for id in 0..config.scenarios {
        let seed: u64 = master.gen();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let od_factors = (0..base_od.len()).map(|_| rng.gen_range(0.8..=1.2)).collect();
        let count = rng.gen_range(0..=max_bus);
        let bus_lanes = sample_bus_lane_config(net, &candidates, count, rng.gen())?
            .into_keys()
            .collect();
        scenarios.push(Scenario {
            id,
            seed,
            demand_factor: config.level.factor(),
            od_factors,
            bus_lanes,
        });
    }

    let mut kept = Vec::new();
    let mut records = Vec::new();
    let mut failed = Vec::new();
    for s in scenarios {
        match s.simulate(net, base_od, sim) {
            Ok(r) => {
                records.push(r);
                kept.push(s);
            }
            Err(e) => {
                log::warn!("scenario {} failed and is excluded: {e}", s.id);
                failed.push(s.id);
            }
        }
    }
    let (n_train, n_val, _) = split_sizes(kept.len());
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.shuffle(&mut master);
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Dataset {
        master_seed: config.master_seed,
        level: config.level,
        scenarios: kept,
        records,
        train,
        val,
        test,
        failed,
    })
}

fn records_dir(s: &Scenario) -> String {
    format!("scenario_{:03}", s.id)
}

impl Dataset {
    fn split_of(&self, pos: usize) -> &'static str {
        if self.train.contains(&pos) {
            "train"
        } else if self.val.contains(&pos) {
            "val"
        } else {
            "test"
        }
    }

    pub fn manifest_json(&self) -> String {
        let manifest = Manifest {
            master_seed: self.master_seed,
            level: self.level,
            window_s: self.records.first().map_or(0.0, |r| r.window_s),
            failed: self.failed.clone(),
            scenarios: self
                .scenarios
                .iter()
                .enumerate()
                .map(|(pos, s)| ManifestEntry {
                    scenario: s.clone(),
                    split: self.split_of(pos).to_string(),
                    records: records_dir(s),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"
    }

    /// Writes `manifest.json` and one CSV directory per scenario.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (s, r) in self.scenarios.iter().zip(&self.records) {
            r.save_csv(dir.join(records_dir(s)))?;
        }
        let path = dir.join("manifest.json");
        std::fs::write(&path, self.manifest_json()).map_err(|e| Error::io(&path, e))
    }

    pub fn load(base: &RoadNetwork, dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::parse(&path.display().to_string(), e.line(), e.to_string()))?;
        let mut out = Dataset {
            master_seed: manifest.master_seed,
            level: manifest.level,
            scenarios: Vec::new(),
            records: Vec::new(),
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
            failed: manifest.failed,
        };
        for (pos, entry) in manifest.scenarios.into_iter().enumerate() {
            let net = entry.scenario.network(base)?;
            out.records
                .push(SimRecord::load_csv(&net, dir.join(&entry.records), manifest.window_s)?);
            match entry.split.as_str() {
                "train" => out.train.push(pos),
                "val" => out.val.push(pos),
                "test" => out.test.push(pos),
                other => {
                    return Err(Error::Validation(format!("unknown split '{other}' in manifest")))
                }
            }
            out.scenarios.push(entry.scenario);
        }
        Ok(out)
    }
}
