//! Error statistics, the random-trip travel-time experiment and report files.

mod metrics;
mod report;
mod routing;
mod travel;

pub use metrics::{evaluate_estimator, metrics, Metrics, ReportRow};
pub use report::{export_report, histogram, Histogram};
pub use routing::{dijkstra, shortest_path, Route};
pub use travel::{generate_trips, path_travel_time, travel_time_experiment, TravelTime, TravelTimeResult, Trip};
