//! Scenario corpus: OD perturbation, demand scaling, bus-lane layouts and
//! train/validation/test datasets.

mod bus;
mod dataset;
mod od;

pub use bus::{bus_lane_candidates, sample_bus_lane_config, BusLaneConfig};
pub use dataset::{build_dataset, split_sizes, Dataset, DatasetConfig, DemandLevel, Scenario};
pub use od::{generate_base_od, perturb_od, scale_demand, ODMatrix};
