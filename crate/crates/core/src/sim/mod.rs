//! Store-and-forward simulation with moving/waiting queues per destination.

mod config;
mod engine;
mod flow;
mod record;
mod routing;

pub use config::SimConfig;
pub use engine::{simulate, step, Demand, OdFlow, SimState, StepFlows};
pub use flow::{link_speed, link_speed_from_sums, moving_delay_steps, storage_capacity, transfer_flow};
pub use record::{network_mfd, MfdPoint, SimRecord};
pub use routing::{update_turn_ratios, TurnRatios};
