//! Network partitioning: k-means over weighted link location and peak-period speed.

mod kmeans;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub use kmeans::{kmeans, within_cluster_ss, KMeans, KMeansParams};

use crate::error::{Error, Result};
use crate::network::{LinkId, MinMax, RoadNetwork};
use crate::sim::SimRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionParams {
    pub k: usize,
    /// Weight on the normalized midpoint coordinates.
    pub alpha: f64,
    /// Weight on the normalized peak-period speed.
    pub beta: f64,
    /// Half-width of the peak window, in aggregation windows.
    pub t_w: usize,
    /// Window index of maximum production.
    pub t_max: usize,
    pub seed: u64,
}

impl Default for PartitionParams {
    fn default() -> Self {
        PartitionParams {
            k: 4,
            alpha: 1.0,
            beta: 1.5,
            t_w: 2,
            t_max: 40,
            seed: 0,
        }
    }
}

/// Link id to sub-region label.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionAssignment {
    link_ids: Vec<LinkId>,
    labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub params: Option<PartitionParams>,
}

impl PartitionAssignment {
    pub fn from_labels(labels: BTreeMap<LinkId, usize>) -> Self {
        let (link_ids, labels) = labels.into_iter().unzip();
        PartitionAssignment {
            link_ids,
            labels,
            centroids: Vec::new(),
            params: None,
        }
    }

    /// Every link in region 0.
    pub fn single_region(net: &RoadNetwork) -> Self {
        Self::from_labels(net.links().iter().map(|l| (l.id, 0)).collect())
    }

    pub fn label_of(&self, id: LinkId) -> Option<usize> {
        self.link_ids
            .binary_search(&id)
            .ok()
            .map(|i| self.labels[i])
    }

    pub fn num_regions(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Labels in network link order.
    pub fn labels_for(&self, net: &RoadNetwork) -> Result<Vec<usize>> {
        net.links()
            .iter()
            .map(|l| {
                self.label_of(l.id).ok_or_else(|| {
                    Error::Validation(format!("partition has no label for link {}", l.id))
                })
            })
            .collect()
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_regions()];
        self.labels.iter().for_each(|&l| sizes[l] += 1);
        sizes
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.params {
            let _ = writeln!(
                out,
                "PARAMS {} {} {} {} {} {}",
                p.k, p.alpha, p.beta, p.t_w, p.t_max, p.seed
            );
        }
        for (i, c) in self.centroids.iter().enumerate() {
            let coords: Vec<String> = c.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "CENTROID {} {}", i, coords.join(" "));
        }
        for (id, label) in self.link_ids.iter().zip(&self.labels) {
            let _ = writeln!(out, "REGION {id} {label}");
        }
        out
    }

    pub fn parse(text: &str, src: &str) -> Result<Self> {
        let mut labels = BTreeMap::new();
        let mut centroids = Vec::new();
        let mut params = None;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let toks: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
            let num = |i: usize| -> Result<f64> {
                toks.get(i)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::parse(src, line, format!("bad field {i}")))
            };
            let int = |i: usize| -> Result<u64> {
                toks.get(i)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::parse(src, line, format!("bad field {i}")))
            };
            match toks.first() {
                None => {}
                Some(&"PARAMS") => {
                    params = Some(PartitionParams {
                        k: int(1)? as usize,
                        alpha: num(2)?,
                        beta: num(3)?,
                        t_w: int(4)? as usize,
                        t_max: int(5)? as usize,
                        seed: int(6)?,
                    })
                }
                Some(&"CENTROID") => {
                    centroids.push((2..toks.len()).map(num).collect::<Result<Vec<_>>>()?);
                }
                Some(&"REGION") => {
                    if labels.insert(int(1)? as LinkId, int(2)? as usize).is_some() {
                        return Err(Error::parse(src, line, "duplicate link"));
                    }
                }
                Some(other) => {
                    return Err(Error::parse(src, line, format!("unknown record {other:?}")))
                }
            }
        }
        let mut out = Self::from_labels(labels);
        out.centroids = centroids;
        out.params = params;
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Mean speed of link `link` (index) over windows `[t_max - t_w, t_max + t_w]`,
/// clipped to the record.
pub fn peak_window_speed(record: &SimRecord, link: usize, t_max: usize, t_w: usize) -> Result<f64> {
    let n = record.num_windows();
    let lo = t_max.saturating_sub(t_w);
    let hi = (t_max + t_w).min(n.saturating_sub(1));
    if n == 0 || lo > hi {
        return Err(Error::Argument(format!(
            "peak window [{lo}, {}] lies outside the {n} recorded windows",
            t_max + t_w
        )));
    }
    let sum: f64 = (lo..=hi).map(|t| record.speed(t, link)).sum();
    Ok(sum / (hi - lo + 1) as f64)
}

/// One 3-d point per link: normalized midpoint scaled by `alpha` followed by
/// the normalized peak speed scaled by `beta`.
pub fn build_cluster_points(
    net: &RoadNetwork,
    record: &SimRecord,
    alpha: f64,
    beta: f64,
    t_w: usize,
    t_max: usize,
) -> Result<Vec<Vec<f64>>> {
    if record.num_links() != net.num_links() {
        return Err(Error::Argument(format!(
            "record has {} links, network {}",
            record.num_links(),
            net.num_links()
        )));
    }
    let mut raw = Vec::with_capacity(net.num_links() * 3);
    for (i, l) in net.links().iter().enumerate() {
        raw.extend([l.midpoint.0, l.midpoint.1, peak_window_speed(record, i, t_max, t_w)?]);
    }
    Ok(weighted_points(&raw, alpha, beta))
}

fn weighted_points(raw: &[f64], alpha: f64, beta: f64) -> Vec<Vec<f64>> {
    let scaler = MinMax::fit(raw, 3);
    raw.chunks(3)
        .map(|r| {
            vec![
                alpha * scaler.scale(0, r[0]),
                alpha * scaler.scale(1, r[1]),
                beta * scaler.scale(2, r[2]),
            ]
        })
        .collect()
}

pub fn partition_network(
    net: &RoadNetwork,
    record: &SimRecord,
    params: &PartitionParams,
) -> Result<PartitionAssignment> {
    let points = build_cluster_points(
        net,
        record,
        params.alpha,
        params.beta,
        params.t_w,
        params.t_max,
    )?;
    let result = kmeans(&points, &KMeansParams::new(params.k, params.seed))?;
    let labels = net
        .links()
        .iter()
        .zip(&result.labels)
        .map(|(l, &c)| (l.id, c))
        .collect();
    let mut out = PartitionAssignment::from_labels(labels);
    out.centroids = result.centroids;
    out.params = Some(params.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generate_grid_network;
    use crate::sim::SimRecord;

    fn record_with(net: &RoadNetwork, windows: usize, f: impl Fn(usize, usize) -> f64) -> SimRecord {
        let n = net.num_links();
        let mut speed = Vec::new();
        for t in 0..windows {
            for z in 0..n {
                speed.push(f(t, z));
            }
        }
        SimRecord::from_speeds(net, 180.0, speed).unwrap()
    }

    #[test]
    fn peak_window_means() {
        let net = generate_grid_network(2, 2, 100.0, 2).unwrap();
        let rec = record_with(&net, 5, |t, _| 10.0 * (t as f64 + 1.0));
        assert_eq!(peak_window_speed(&rec, 0, 2, 0).unwrap(), 30.0);
        assert_eq!(peak_window_speed(&rec, 0, 1, 1).unwrap(), 20.0);
        // clipped at the end of the record
        assert_eq!(peak_window_speed(&rec, 0, 4, 2).unwrap(), 40.0);
        assert!(peak_window_speed(&rec, 0, 9, 2).is_err());
    }

    #[test]
    fn paper_window_covers_38_to_42() {
        let net = generate_grid_network(2, 2, 100.0, 2).unwrap();
        let rec = record_with(&net, 120, |t, _| t as f64);
        assert_eq!(peak_window_speed(&rec, 3, 40, 2).unwrap(), 40.0);
        let rec = record_with(&net, 120, |t, _| if (38..=42).contains(&t) { 7.0 } else { 1e6 });
        assert_eq!(peak_window_speed(&rec, 3, 40, 2).unwrap(), 7.0);
    }

    #[test]
    fn weighted_concatenation() {
        // rows normalize to loc (0.2, 0.4), speed 0.6
        let raw = [0.0, 0.0, 0.0, 0.2, 0.4, 0.6, 1.0, 1.0, 1.0];
        let pts = weighted_points(&raw, 1.0, 1.5);
        assert_eq!(pts[1][0], 0.2);
        assert_eq!(pts[1][1], 0.4);
        assert!((pts[1][2] - 0.9).abs() < 1e-15);
        let geo = weighted_points(&raw, 1.0, 0.0);
        assert!(geo.iter().all(|p| p[2] == 0.0));
        let spd = weighted_points(&raw, 0.0, 1.0);
        assert!(spd.iter().all(|p| p[0] == 0.0 && p[1] == 0.0));
    }

    #[test]
    fn defaults_recorded() {
        let net = generate_grid_network(5, 5, 100.0, 2).unwrap();
        let rec = record_with(&net, 120, |t, z| 10.0 + ((t + z) % 7) as f64);
        let part = partition_network(&net, &rec, &PartitionParams::default()).unwrap();
        let p = part.params.clone().unwrap();
        assert_eq!((p.k, p.alpha, p.beta, p.t_w, p.t_max), (4, 1.0, 1.5, 2, 40));
        assert_eq!(part.num_regions(), 4);
        assert!(part.region_sizes().iter().all(|&s| s > 0));
        let back = PartitionAssignment::parse(&part.to_text(), "mem").unwrap();
        assert_eq!(back, part);
    }

    #[test]
    fn symmetric_halves_split_on_axis() {
        use crate::network::{Junction, Link};
        // two identical 2x3 grids mirrored across x = 350
        let half = generate_grid_network(2, 3, 100.0, 2).unwrap();
        let mut junctions = Vec::new();
        let mut links = Vec::new();
        for (side, dx) in [(0u32, 0.0), (1, 500.0)] {
            for j in half.junctions() {
                junctions.push(Junction {
                    id: j.id + side * 100,
                    x: j.x + dx,
                    y: j.y,
                });
            }
            for l in half.links() {
                links.push(Link::new(
                    l.id + side * 100,
                    l.from + side * 100,
                    l.to + side * 100,
                    l.length,
                    l.lanes_total,
                    0,
                    25.0,
                ));
            }
        }
        let net = RoadNetwork::new(junctions, links, vec![]).unwrap();
        let rec = record_with(&net, 50, |_, _| 20.0);
        let params = PartitionParams {
            k: 2,
            ..PartitionParams::default()
        };
        let part = partition_network(&net, &rec, &params).unwrap();
        assert_eq!(part.region_sizes(), vec![half.num_links(); 2]);
        for l in net.links() {
            let left = part.label_of(0).unwrap();
            assert_eq!(part.label_of(l.id) == Some(left), l.id < 100);
        }
    }

    #[test]
    fn one_region_per_link() {
        let net = generate_grid_network(2, 3, 100.0, 2).unwrap();
        let rec = record_with(&net, 50, |_, z| z as f64);
        let params = PartitionParams {
            k: net.num_links(),
            ..PartitionParams::default()
        };
        let part = partition_network(&net, &rec, &params).unwrap();
        assert!(part.region_sizes().iter().all(|&s| s == 1));
    }
}
