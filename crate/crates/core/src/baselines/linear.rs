use super::SpeedEstimator;
use crate::error::{Error, Result};
use crate::lcf::{history_window, Normalization};
use crate::network::{extract_features, MinMax, RoadNetwork, FEATURE_COUNT};
use crate::partition::PartitionAssignment;
use crate::sim::SimRecord;

const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Least squares on row-major `x` (`cols` columns) through the normal
/// equations with a small ridge term, bias included.
pub fn fit_lr(x: &[f64], cols: usize, y: &[f64]) -> Result<LinearModel> {
    if cols == 0 || x.len() != y.len() * cols {
        return Err(Error::Argument("feature rows and targets do not line up".into()));
    }
    if y.len() < cols {
        return Err(Error::Argument(format!(
            "{} samples cannot determine {cols} weights",
            y.len()
        )));
    }
    let d = cols + 1;
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut row = vec![1.0; d];
    for (xi, &yi) in x.chunks(cols).zip(y) {
        row[..cols].copy_from_slice(xi);
        for i in 0..d {
            b[i] += row[i] * yi;
            for j in 0..=i {
                a[i * d + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        a[i * d + i] += RIDGE;
    }
    let w = cholesky_solve(&mut a, &mut b, d)?;
    Ok(LinearModel {
        weights: w[..cols].to_vec(),
        bias: w[cols],
    })
}

// Lower-triangle Cholesky in place, then forward and back substitution.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], d: usize) -> Result<Vec<f64>> {
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if !(diag > 0.0) {
            return Err(Error::Validation("normal equations are singular".into()));
        }
        let diag = diag.sqrt();
        a[j * d + j] = diag;
        for i in j + 1..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = v / diag;
        }
    }
    for i in 0..d {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i * d + k] * b[k];
        }
        b[i] = v / a[i * d + i];
    }
    for i in (0..d).rev() {
        let mut v = b[i];
        for k in i + 1..d {
            v -= a[k * d + i] * b[k];
        }
        b[i] = v / a[i * d + i];
    }
    Ok(b.to_vec())
}

pub fn predict_lr(model: &LinearModel, x: &[f64]) -> Vec<f64> {
    x.chunks(model.weights.len())
        .map(|r| r.iter().zip(&model.weights).map(|(a, w)| a * w).sum::<f64>() + model.bias)
        .collect()
}

/// Linear regression on the link attributes and the mean-speed history,
/// with inputs min-max scaled on the training data.
#[derive(Debug, Clone)]
pub struct LrBaseline {
    pub model: LinearModel,
    pub scaling: MinMax,
    pub history: usize,
    pub partition: PartitionAssignment,
}

fn rows(
    net: &RoadNetwork,
    record: &SimRecord,
    history: usize,
    t: usize,
    feats: &[f64],
) -> Result<Vec<f64>> {
    let norm = Normalization::unit(FEATURE_COUNT);
    let h = history_window(&record.mean_speed, t, history, &norm, -1.0)?;
    let mut out = Vec::with_capacity(net.num_links() * (FEATURE_COUNT + history));
    for f in feats.chunks(FEATURE_COUNT) {
        out.extend_from_slice(f);
        out.extend_from_slice(&h);
    }
    Ok(out)
}

impl LrBaseline {
    pub fn fit(
        networks: &[RoadNetwork],
        records: &[&SimRecord],
        partition: &PartitionAssignment,
        history: usize,
    ) -> Result<Self> {
        let cols = FEATURE_COUNT + history;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (net, r) in networks.iter().zip(records) {
            let feats = extract_features(net, partition)?;
            for t in 0..r.num_windows() {
                x.extend(rows(net, r, history, t, feats.as_slice())?);
                y.extend_from_slice(r.speeds_at(t));
            }
        }
        let scaling = MinMax::fit(&x, cols);
        let model = fit_lr(&scaling.transform(&x), cols, &y)?;
        Ok(LrBaseline {
            model,
            scaling,
            history,
            partition: partition.clone(),
        })
    }
}

impl SpeedEstimator for LrBaseline {
    fn name(&self) -> String {
        "LR".into()
    }

    fn estimate(&self, net: &RoadNetwork, record: &SimRecord) -> Result<Vec<Vec<f64>>> {
        let feats = extract_features(net, &self.partition)?;
        (0..record.num_windows())
            .map(|t| {
                let x = rows(net, record, self.history, t, feats.as_slice())?;
                let raw = predict_lr(&self.model, &self.scaling.transform(&x));
                Ok(raw
                    .iter()
                    .zip(net.links())
                    .map(|(v, l)| v.clamp(0.0, l.free_flow_speed))
                    .collect())
            })
            .collect()
    }
}
