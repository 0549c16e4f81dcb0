use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{LinkId, RoadNetwork};

/// Per-window aggregates of one simulation run.
///
/// Per-link series are stored window-major: entry `t * num_links + z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    link_ids: Vec<LinkId>,
    lengths_km: Vec<f64>,
    free_flow: Vec<f64>,
    pub window_s: f64,
    speed: Vec<f64>,
    accumulation: Vec<f64>,
    outflow: Vec<f64>,
    /// Accumulation-weighted mean link speed per window, km/h.
    pub mean_speed: Vec<f64>,
    /// veh·km/h per window.
    pub production: Vec<f64>,
    /// Mean vehicles in the network per window.
    pub total_accumulation: Vec<f64>,
    pub trips_completed: Vec<f64>,
    /// Largest absolute vehicle-balance residual seen during the run.
    pub balance_error: f64,
    pub generated: f64,
}

/// One point of the network macroscopic fundamental diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfdPoint {
    pub accumulation: f64,
    pub production: f64,
    pub mean_speed: f64,
}

impl SimRecord {
    /// Builds a record from window-major per-link speed (km/h), mean
    /// accumulation (veh) and outflow (veh per window).
    pub fn from_parts(
        net: &RoadNetwork,
        window_s: f64,
        speed: Vec<f64>,
        accumulation: Vec<f64>,
        outflow: Vec<f64>,
    ) -> Result<Self> {
        let n = net.num_links();
        if speed.len() % n != 0 || accumulation.len() != speed.len() || outflow.len() != speed.len() {
            return Err(Error::Validation(format!(
                "record series lengths {}, {}, {} do not fit {n} links",
                speed.len(),
                accumulation.len(),
                outflow.len()
            )));
        }
        let windows = speed.len() / n;
        let mut rec = SimRecord {
            link_ids: net.links().iter().map(|l| l.id).collect(),
            lengths_km: net.links().iter().map(|l| l.length_km()).collect(),
            free_flow: net.links().iter().map(|l| l.free_flow_speed).collect(),
            window_s,
            speed,
            accumulation,
            outflow,
            mean_speed: Vec::new(),
            production: Vec::new(),
            total_accumulation: Vec::new(),
            trips_completed: vec![0.0; windows],
            balance_error: 0.0,
            generated: 0.0,
        };
        for p in network_mfd(&rec) {
            rec.mean_speed.push(p.mean_speed);
            rec.production.push(p.production);
            rec.total_accumulation.push(p.accumulation);
        }
        Ok(rec)
    }

    /// A record carrying only speeds; every link holds one vehicle so the
    /// network mean is the plain average.
    pub fn from_speeds(net: &RoadNetwork, window_s: f64, speed: Vec<f64>) -> Result<Self> {
        let ones = vec![1.0; speed.len()];
        let zeros = vec![0.0; speed.len()];
        Self::from_parts(net, window_s, speed, ones, zeros)
    }

    pub fn num_links(&self) -> usize {
        self.link_ids.len()
    }

    pub fn num_windows(&self) -> usize {
        self.speed.len() / self.link_ids.len()
    }

    pub fn link_ids(&self) -> &[LinkId] {
        &self.link_ids
    }

    pub fn free_flow_speed(&self, z: usize) -> f64 {
        self.free_flow[z]
    }

    pub fn speed(&self, t: usize, z: usize) -> f64 {
        self.speed[t * self.num_links() + z]
    }

    pub fn speeds_at(&self, t: usize) -> &[f64] {
        let n = self.num_links();
        &self.speed[t * n..(t + 1) * n]
    }

    pub fn accumulation(&self, t: usize, z: usize) -> f64 {
        self.accumulation[t * self.num_links() + z]
    }

    pub fn outflow(&self, t: usize, z: usize) -> f64 {
        self.outflow[t * self.num_links() + z]
    }

    /// Window index with the largest production.
    pub fn peak_window(&self) -> usize {
        self.production
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (t, &p)| if p > best.1 { (t, p) } else { best })
            .0
    }

    /// Writes `links.csv` and `network.csv` into `dir`.
    pub fn save_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut links = String::from("window,link_id,speed_kmh,accumulation,outflow\n");
        for t in 0..self.num_windows() {
            for (z, id) in self.link_ids.iter().enumerate() {
                let _ = writeln!(
                    links,
                    "{t},{id},{},{},{}",
                    self.speed(t, z),
                    self.accumulation(t, z),
                    self.outflow(t, z)
                );
            }
        }
        let mut network = String::from("window,mean_speed_kmh,production,accumulation\n");
        for t in 0..self.num_windows() {
            let _ = writeln!(
                network,
                "{t},{},{},{}",
                self.mean_speed[t], self.production[t], self.total_accumulation[t]
            );
        }
        let lp = dir.join("links.csv");
        std::fs::write(&lp, links).map_err(|e| Error::io(&lp, e))?;
        let np = dir.join("network.csv");
        std::fs::write(&np, network).map_err(|e| Error::io(&np, e))
    }

    /// Reads `links.csv` from `dir`; network series are recomputed.
    pub fn load_csv(net: &RoadNetwork, dir: impl AsRef<Path>, window_s: f64) -> Result<Self> {
        let path = dir.as_ref().join("links.csv");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let src = path.display().to_string();
        let n = net.num_links();
        let (mut speed, mut acc, mut out) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(Error::parse(&src, i + 1, "expected 5 columns"));
            }
            let num = |k: usize| -> Result<f64> {
                f[k].trim()
                    .parse()
                    .map_err(|_| Error::parse(&src, i + 1, format!("bad number '{}'", f[k])))
            };
            let row = speed.len();
            let (t, z) = (row / n, row % n);
            let window: usize = f[0].trim().parse().map_err(|_| Error::parse(&src, i + 1, "bad window"))?;
            let id: LinkId = f[1].trim().parse().map_err(|_| Error::parse(&src, i + 1, "bad link id"))?;
            if window != t || id != net.link(z).id {
                return Err(Error::parse(&src, i + 1, "rows must be window-major in network link order"));
            }
            speed.push(num(2)?);
            acc.push(num(3)?);
            out.push(num(4)?);
        }
        Self::from_parts(net, window_s, speed, acc, out)
    }
}

/// Network-level series: total accumulation, production as the sum of link
/// speed times link accumulation, and their ratio as the mean speed. Empty
/// windows report the average free-flow speed.
pub fn network_mfd(record: &SimRecord) -> Vec<MfdPoint> {
    let n = record.num_links();
    let free_mean = record.free_flow.iter().sum::<f64>() / n as f64;
    (0..record.num_windows())
        .map(|t| {
            let mut acc = 0.0;
            let mut prod = 0.0;
            for z in 0..n {
                let x = record.accumulation(t, z);
                acc += x;
                prod += record.speed(t, z) * x;
            }
            MfdPoint {
                accumulation: acc,
                production: prod,
                mean_speed: if acc > 1e-12 { prod / acc } else { free_mean },
            }
        })
        .collect()
}
