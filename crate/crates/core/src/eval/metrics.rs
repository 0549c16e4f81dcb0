use crate::baselines::SpeedEstimator;
use crate::error::{Error, Result};
use crate::network::RoadNetwork;
use crate::sim::SimRecord;

/// Error statistics of `pred - truth`. The standard deviation is the
/// population one, so `rmse^2 = mean^2 + std^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Metrics {
    /// Statistics of raw errors; sums run over the sorted errors so the
    /// result does not depend on sample order.
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::Argument("no samples for metrics".into()));
        }
        let mut e = errors.to_vec();
        e.sort_by(f64::total_cmp);
        let n = e.len() as f64;
        let mean = e.iter().sum::<f64>() / n;
        let mut abs: Vec<f64> = e.iter().map(|v| v.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let mae = abs.iter().sum::<f64>() / n;
        let mse = abs.iter().map(|v| v * v).sum::<f64>() / n;
        let mut dev: Vec<f64> = e.iter().map(|v| (v - mean) * (v - mean)).collect();
        dev.sort_by(f64::total_cmp);
        let std = (dev.iter().sum::<f64>() / n).sqrt();
        Ok(Metrics {
            mae,
            mse,
            rmse: mse.sqrt(),
            mean,
            std,
            count: e.len(),
        })
    }

    /// `(name, value)` pairs in report order.
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("mae", self.mae),
            ("mse", self.mse),
            ("rmse", self.rmse),
            ("err_mean", self.mean),
            ("err_std", self.std),
            ("count", self.count as f64),
        ]
    }
}

pub fn metrics(pred: &[f64], truth: &[f64]) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} observations",
            pred.len(),
            truth.len()
        )));
    }
    let e: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| p - t).collect();
    Metrics::from_errors(&e)
}

/// One table row with the errors behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub scenario_class: String,
    pub metrics: Metrics,
    pub errors: Vec<f64>,
}

impl ReportRow {
    pub fn new(model: impl Into<String>, scenario_class: impl Into<String>, errors: Vec<f64>) -> Result<Self> {
        Ok(ReportRow {
            model: model.into(),
            scenario_class: scenario_class.into(),
            metrics: Metrics::from_errors(&errors)?,
            errors,
        })
    }
}

/// Per-link speed errors of `estimator` over every window of every record.
pub fn evaluate_estimator(
    estimator: &dyn SpeedEstimator,
    networks: &[RoadNetwork],
    records: &[&SimRecord],
    scenario_class: &str,
) -> Result<ReportRow> {
    let mut errors = Vec::new();
    for (net, r) in networks.iter().zip(records) {
        let est = estimator.estimate(net, r)?;
        for (t, row) in est.iter().enumerate() {
            errors.extend(row.iter().zip(r.speeds_at(t)).map(|(p, v)| p - v));
        }
    }
    ReportRow::new(estimator.name(), scenario_class, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let m = metrics(&[1.0, 2.0], &[1.0, 4.0]).unwrap();
        assert_eq!((m.mae, m.mse, m.mean, m.std), (1.0, 2.0, -1.0, 1.0));
        assert_eq!(m.rmse, 2f64.sqrt());
    }

    #[test]
    fn perfect_prediction() {
        let m = metrics(&[3.0, 4.5], &[3.0, 4.5]).unwrap();
        assert_eq!(m.named().map(|p| p.1)[..5], [0.0; 5]);
    }

    #[test]
    fn bad_input() {
        assert!(metrics(&[], &[]).is_err());
        assert!(metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn rmse_identity(e in proptest::collection::vec(-50.0f64..50.0, 1..200)) {
            let m = Metrics::from_errors(&e).unwrap();
            prop_assert!((m.rmse * m.rmse - (m.mean * m.mean + m.std * m.std)).abs() < 1e-9 * m.mse.max(1.0));
            prop_assert!(m.rmse >= m.mean.abs() - 1e-12);
        }

        #[test]
        fn order_invariant(mut e in proptest::collection::vec(-50.0f64..50.0, 1..100), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let a = Metrics::from_errors(&e).unwrap();
            e.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(a, Metrics::from_errors(&e).unwrap());
        }
    }
}
