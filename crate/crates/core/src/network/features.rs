use super::RoadNetwork;
use crate::error::{Error, Result};
use crate::partition::PartitionAssignment;

pub const FEATURE_COUNT: usize = 10;

/// Column order of [`FeatureMatrix`].
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "length",
    "lanes_total",
    "lanes_dbl",
    "n_up",
    "n_down",
    "n_up_boundary",
    "n_down_boundary",
    "n_up_dbl",
    "n_down_dbl",
    "sub_region",
];

/// Per-link attributes, one row per link in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<[f64; FEATURE_COUNT]>) -> Self {
        let n = rows.len();
        FeatureMatrix {
            rows: n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * FEATURE_COUNT..(i + 1) * FEATURE_COUNT]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.data[r * FEATURE_COUNT + c]).collect()
    }

    /// Row-major values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy with column `c` set to `value`.
    pub fn with_column(&self, c: usize, value: f64) -> Self {
        let mut out = self.clone();
        for r in 0..self.rows {
            out.data[r * FEATURE_COUNT + c] = value;
        }
        out
    }

    /// Reorders rows: row `i` moves to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            let p = perm[i];
            data[p * FEATURE_COUNT..(p + 1) * FEATURE_COUNT].copy_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: self.rows,
            data,
        }
    }
}

/// Builds the 10-attribute rows. Neighbor counts use network connectivity,
/// boundary counts the neighbors' boundary flags, `sub_region` the partition label.
pub fn extract_features(net: &RoadNetwork, partition: &PartitionAssignment) -> Result<FeatureMatrix> {
    let links = net.links();
    let mut rows = Vec::with_capacity(links.len());
    for (i, l) in links.iter().enumerate() {
        let label = partition.label_of(l.id).ok_or_else(|| {
            Error::Validation(format!("partition has no label for link {}", l.id))
        })?;
        let up = net.upstream(i);
        let down = net.downstream(i);
        let count = |set: &[usize], pred: &dyn Fn(usize) -> bool| {
            set.iter().filter(|&&j| pred(j)).count() as f64
        };
        rows.push([
            l.length,
            l.lanes_total as f64,
            l.lanes_dbl as f64,
            up.len() as f64,
            down.len() as f64,
            count(up, &|j| links[j].is_boundary_in),
            count(down, &|j| links[j].is_boundary_out),
            count(up, &|j| links[j].lanes_dbl > 0),
            count(down, &|j| links[j].lanes_dbl > 0),
            label as f64,
        ]);
    }
    Ok(FeatureMatrix::from_rows(rows))
}

/// Column-wise min-max scaling, fitted once and reused.
///
/// A constant column maps to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMax {
    /// Fits on row-major data with `cols` columns.
    pub fn fit(data: &[f64], cols: usize) -> Self {
        assert!(cols > 0 && data.len() % cols == 0);
        let mut min = vec![f64::INFINITY; cols];
        let mut max = vec![f64::NEG_INFINITY; cols];
        for row in data.chunks(cols) {
            for (c, &v) in row.iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        MinMax { min, max }
    }

    /// Fits on several matrices at once (the training split).
    pub fn fit_features<'a>(mats: impl IntoIterator<Item = &'a FeatureMatrix>) -> Self {
        let data: Vec<f64> = mats.into_iter().flat_map(|m| m.data.iter().copied()).collect();
        Self::fit(&data, FEATURE_COUNT)
    }

    pub fn cols(&self) -> usize {
        self.min.len()
    }

    pub fn scale(&self, c: usize, v: f64) -> f64 {
        let span = self.max[c] - self.min[c];
        if span > 0.0 {
            (v - self.min[c]) / span
        } else {
            0.0
        }
    }

    pub fn unscale(&self, c: usize, v: f64) -> f64 {
        let span = self.max[c] - self.min[c];
        if span > 0.0 {
            v * span + self.min[c]
        } else {
            self.min[c]
        }
    }

    pub fn transform(&self, data: &[f64]) -> Vec<f64> {
        let cols = self.cols();
        data.iter()
            .enumerate()
            .map(|(i, &v)| self.scale(i % cols, v))
            .collect()
    }

    pub fn inverse(&self, data: &[f64]) -> Vec<f64> {
        let cols = self.cols();
        data.iter()
            .enumerate()
            .map(|(i, &v)| self.unscale(i % cols, v))
            .collect()
    }

    pub fn transform_features(&self, m: &FeatureMatrix) -> FeatureMatrix {
        FeatureMatrix {
            rows: m.rows,
            data: self.transform(&m.data),
        }
    }
}

/// Fits on `matrix` and returns it normalized together with the statistics.
pub fn minmax_normalize(matrix: &FeatureMatrix) -> (FeatureMatrix, MinMax) {
    let stats = MinMax::fit_features([matrix]);
    (stats.transform_features(matrix), stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_grid_network, Junction, Link};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn hand_built_row() {
        // Link 0 (j1 -> j2) with two approaches in, two exits out.
        let junctions = vec![
            Junction { id: 0, x: 0.0, y: 0.0 },
            Junction { id: 1, x: 100.0, y: 100.0 },
            Junction { id: 2, x: 200.0, y: 100.0 },
            Junction { id: 3, x: 300.0, y: 0.0 },
            Junction { id: 4, x: 100.0, y: 300.0 },
            Junction { id: 5, x: 200.0, y: 300.0 },
            Junction { id: 6, x: 300.0, y: 300.0 },
        ];
        let links = vec![
            Link::new(0, 1, 2, 100.0, 3, 1, 25.0),
            Link::new(1, 0, 1, 100.0, 2, 1, 25.0),
            Link::new(2, 4, 1, 100.0, 2, 0, 25.0),
            Link::new(3, 2, 3, 100.0, 2, 0, 25.0),
            Link::new(4, 2, 5, 100.0, 2, 0, 25.0),
            // feed links so the neighbors are not boundary-in / out
            Link::new(5, 5, 4, 100.0, 1, 0, 25.0),
            Link::new(6, 6, 0, 100.0, 1, 0, 25.0),
            Link::new(7, 3, 6, 100.0, 1, 0, 25.0),
            Link::new(8, 5, 6, 100.0, 1, 0, 25.0),
        ];
        let net = RoadNetwork::new(junctions, links, vec![]).unwrap();
        let mut labels = BTreeMap::new();
        for l in net.links() {
            labels.insert(l.id, 2);
        }
        let part = PartitionAssignment::from_labels(labels);
        let f = extract_features(&net, &part).unwrap();
        let row = f.row(0);
        assert_eq!(&row[..5], &[100.0, 3.0, 1.0, 2.0, 2.0]);
        assert_eq!(row[7], 1.0);
        assert_eq!(row[8], 0.0);
        assert_eq!(row[9], 2.0);
    }

    #[test]
    fn isolated_link_row() {
        let net = RoadNetwork::new(
            vec![
                Junction { id: 0, x: 0.0, y: 0.0 },
                Junction { id: 1, x: 1.0, y: 0.0 },
            ],
            vec![Link::new(3, 0, 1, 80.0, 2, 1, 25.0)],
            vec![],
        )
        .unwrap();
        let f = extract_features(&net, &PartitionAssignment::single_region(&net)).unwrap();
        assert_eq!(f.row(0), &[80.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_label_names_link() {
        let net = crate::network::tests::chain();
        let mut labels = BTreeMap::new();
        labels.insert(0, 0);
        labels.insert(2, 0);
        let err = extract_features(&net, &PartitionAssignment::from_labels(labels)).unwrap_err();
        assert!(err.to_string().contains("link 1"));
    }

    #[test]
    fn grid_features_match_recount() {
        let net = generate_grid_network(5, 5, 100.0, 2).unwrap();
        let part = PartitionAssignment::single_region(&net);
        let f = extract_features(&net, &part).unwrap();
        let links = net.links();
        let pairs = net.connectivity();
        for (i, l) in links.iter().enumerate() {
            // recount straight from the connectivity pairs
            let ups: Vec<usize> = pairs.iter().filter(|p| p.1 == i).map(|p| p.0).collect();
            let downs: Vec<usize> = pairs.iter().filter(|p| p.0 == i).map(|p| p.1).collect();
            let row = f.row(i);
            assert_eq!(row[0], l.length);
            assert_eq!(row[3], ups.len() as f64);
            assert_eq!(row[4], downs.len() as f64);
            assert_eq!(
                row[5],
                ups.iter().filter(|&&j| links[j].is_boundary_in).count() as f64
            );
            assert_eq!(
                row[6],
                downs.iter().filter(|&&j| links[j].is_boundary_out).count() as f64
            );
        }
        // extraction is stable
        assert_eq!(extract_features(&net, &part).unwrap(), f);
    }

    #[test]
    fn minmax_endpoints() {
        let s = MinMax::fit(&[2.0, 4.0, 6.0], 1);
        assert_eq!(s.transform(&[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
        let s = MinMax::fit(&[5.0, 5.0], 1);
        assert_eq!(s.transform(&[5.0, 5.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn normalized_grid_spans_unit_interval() {
        let mut net = generate_grid_network(4, 4, 100.0, 2).unwrap();
        let mut dbl = BTreeMap::new();
        dbl.insert(3, 1);
        net = net.with_bus_lanes(&dbl).unwrap();
        let f = extract_features(&net, &PartitionAssignment::single_region(&net)).unwrap();
        let (norm, stats) = minmax_normalize(&f);
        for c in 0..FEATURE_COUNT {
            let col = norm.column(c);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if stats.max[c] > stats.min[c] {
                assert_eq!((lo, hi), (0.0, 1.0), "column {c}");
            } else {
                assert_eq!((lo, hi), (0.0, 0.0));
            }
        }
    }

    proptest! {
        #[test]
        fn minmax_inverts(data in proptest::collection::vec(-1e3f64..1e3, 200)) {
            let s = MinMax::fit(&data, 10);
            let back = s.inverse(&s.transform(&data));
            for (a, b) in data.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
