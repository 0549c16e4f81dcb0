//! Reference estimators: network and per-region mean speed, linear
//! regression, and the shared estimator interface used by evaluation.

mod linear;

pub use linear::{fit_lr, predict_lr, LinearModel, LrBaseline};

use crate::error::Result;
use crate::lcf::{ArchConfig, LcfModel, Variant};
use crate::network::RoadNetwork;
use crate::partition::PartitionAssignment;
use crate::scalar::Scalar;
use crate::sim::SimRecord;

/// Anything that turns a record's mean-speed series into per-link speeds.
pub trait SpeedEstimator {
    fn name(&self) -> String;

    /// Window-major speeds for every link of `net` over `record`.
    fn estimate(&self, net: &RoadNetwork, record: &SimRecord) -> Result<Vec<Vec<f64>>>;
}

/// Every link gets the network mean speed.
pub fn mfd_baseline(v_mean: f64, links: usize) -> Vec<f64> {
    vec![v_mean; links]
}

fn region_means(record: &SimRecord, t: usize, labels: &[usize], regions: usize, weighted: bool) -> Vec<f64> {
    let mut acc = vec![0.0; regions];
    let mut prod = vec![0.0; regions];
    let mut free = vec![0.0; regions];
    let mut count = vec![0usize; regions];
    for (z, &r) in labels.iter().enumerate() {
        let x = if weighted { record.accumulation(t, z) } else { 1.0 };
        acc[r] += x;
        prod[r] += record.speed(t, z) * x;
        free[r] += record.free_flow_speed(z);
        count[r] += 1;
    }
    (0..regions)
        .map(|r| {
            if acc[r] > 1e-12 {
                prod[r] / acc[r]
            } else if count[r] > 0 {
                free[r] / count[r] as f64
            } else {
                0.0
            }
        })
        .collect()
}

fn mfd_p(record: &SimRecord, partition: &PartitionAssignment, net: &RoadNetwork, weighted: bool) -> Result<Vec<Vec<f64>>> {
    let labels = partition.labels_for(net)?;
    let regions = partition.num_regions();
    Ok((0..record.num_windows())
        .map(|t| {
            let means = region_means(record, t, &labels, regions, weighted);
            labels.iter().map(|&r| means[r]).collect()
        })
        .collect())
}

/// Every link gets its region's accumulation-weighted mean speed. An empty
/// region falls back to its mean free-flow speed.
pub fn mfd_p_baseline(record: &SimRecord, partition: &PartitionAssignment, net: &RoadNetwork) -> Result<Vec<Vec<f64>>> {
    mfd_p(record, partition, net, true)
}

/// As [`mfd_p_baseline`] with unweighted region means.
pub fn mfd_p_arithmetic(record: &SimRecord, partition: &PartitionAssignment, net: &RoadNetwork) -> Result<Vec<Vec<f64>>> {
    mfd_p(record, partition, net, false)
}

/// Architecture of the dense ablations: no attention, with or without the GRU.
pub fn dnn_variant(gru: bool) -> ArchConfig {
    ArchConfig::new(Variant::new(false, gru, false))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MfdBaseline;

impl SpeedEstimator for MfdBaseline {
    fn name(&self) -> String {
        "MFD".into()
    }

    fn estimate(&self, net: &RoadNetwork, record: &SimRecord) -> Result<Vec<Vec<f64>>> {
        Ok(record
            .mean_speed
            .iter()
            .map(|&v| mfd_baseline(v, net.num_links()))
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct MfdPBaseline {
    pub partition: PartitionAssignment,
}

impl SpeedEstimator for MfdPBaseline {
    fn name(&self) -> String {
        "MFD-P".into()
    }

    fn estimate(&self, net: &RoadNetwork, record: &SimRecord) -> Result<Vec<Vec<f64>>> {
        mfd_p_baseline(record, &self.partition, net)
    }
}

/// A trained model with the partition it reads sub-region labels from.
#[derive(Debug, Clone)]
pub struct LcfEstimator<S: Scalar> {
    pub model: LcfModel<S>,
    pub partition: PartitionAssignment,
}

impl<S: Scalar> SpeedEstimator for LcfEstimator<S> {
    fn name(&self) -> String {
        self.model.arch.variant.to_string()
    }

    fn estimate(&self, net: &RoadNetwork, record: &SimRecord) -> Result<Vec<Vec<f64>>> {
        self.model.predict_record(net, &self.partition, record)
    }
}

/// The recorded speeds themselves.
#[derive(Debug, Clone, Copy, Default)]
pub struct Truth;

impl SpeedEstimator for Truth {
    fn name(&self) -> String {
        "truth".into()
    }

    fn estimate(&self, _net: &RoadNetwork, record: &SimRecord) -> Result<Vec<Vec<f64>>> {
        Ok((0..record.num_windows()).map(|t| record.speeds_at(t).to_vec()).collect())
    }
}
