//! Road network, the links-as-nodes graph and per-link attributes.

mod features;
mod graph;
mod grid;
mod io;

use std::collections::{BTreeMap, BTreeSet};

pub use features::{extract_features, minmax_normalize, FeatureMatrix, MinMax, FEATURE_COUNT, FEATURE_NAMES};
pub use graph::LinkGraph;
pub use grid::{generate_grid_network, GridSpec};
pub use io::{load_network, parse_network, save_network, write_network};

use crate::error::{Error, Result};

pub type LinkId = u32;
pub type JunctionId = u32;

/// Free-flow speed used by generated networks, km/h.
pub const DEFAULT_FREE_FLOW_KMH: f64 = 25.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub id: JunctionId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub from: JunctionId,
    pub to: JunctionId,
    /// Meters.
    pub length: f64,
    pub lanes_total: u32,
    pub lanes_dbl: u32,
    /// km/h.
    pub free_flow_speed: f64,
    pub midpoint: (f64, f64),
    pub is_boundary_in: bool,
    pub is_boundary_out: bool,
}

impl Link {
    pub fn new(
        id: LinkId,
        from: JunctionId,
        to: JunctionId,
        length: f64,
        lanes_total: u32,
        lanes_dbl: u32,
        free_flow_speed: f64,
    ) -> Self {
        Link {
            id,
            from,
            to,
            length,
            lanes_total,
            lanes_dbl,
            free_flow_speed,
            midpoint: (0.0, 0.0),
            is_boundary_in: false,
            is_boundary_out: false,
        }
    }

    /// Lanes open to general traffic.
    pub fn car_lanes(&self) -> u32 {
        self.lanes_total - self.lanes_dbl
    }

    pub fn length_km(&self) -> f64 {
        self.length / 1000.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::Validation(format!(
                "link {}: length must be positive, got {}",
                self.id, self.length
            )));
        }
        if !(1..=5).contains(&self.lanes_total) {
            return Err(Error::Validation(format!(
                "link {}: lanes_total must be in 1..=5, got {}",
                self.id, self.lanes_total
            )));
        }
        if self.lanes_dbl >= self.lanes_total {
            return Err(Error::Validation(format!(
                "link {}: lanes_dbl ({}) must be below lanes_total ({})",
                self.id, self.lanes_dbl, self.lanes_total
            )));
        }
        if !(self.free_flow_speed > 0.0 && self.free_flow_speed.is_finite()) {
            return Err(Error::Validation(format!(
                "link {}: free-flow speed must be positive",
                self.id
            )));
        }
        Ok(())
    }
}

/// Fixed-time two-phase plan. Approaches arriving mostly along the y axis
/// form the first group and get `split * cycle` seconds of green, the rest
/// get the remainder of the cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub junction: JunctionId,
    pub cycle_s: f64,
    pub offset_s: f64,
    pub split: f64,
}

impl Signal {
    /// Whether the first (y-axis) approach group has green at time `t`.
    pub fn first_group_green(&self, t: f64) -> bool {
        let phase = (t + self.offset_s).rem_euclid(self.cycle_s);
        phase < self.split * self.cycle_s
    }

    fn validate(&self) -> Result<()> {
        if !(self.cycle_s > 0.0) {
            return Err(Error::Validation(format!(
                "signal at junction {}: cycle must be positive",
                self.junction
            )));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Validation(format!(
                "signal at junction {}: split must be in (0, 1), got {}",
                self.junction, self.split
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    junctions: Vec<Junction>,
    links: Vec<Link>,
    signals: Vec<Signal>,
    junction_index: BTreeMap<JunctionId, usize>,
    link_index: BTreeMap<LinkId, usize>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
    upstream: Vec<Vec<usize>>,
    downstream: Vec<Vec<usize>>,
    /// Per link: whether it belongs to the first approach group of its
    /// downstream junction's signal.
    first_group: Vec<bool>,
    /// Per link: index into `signals` of the plan gating its stop line.
    signal_of: Vec<Option<usize>>,
}

impl RoadNetwork {
    /// Builds and validates a network. Links and junctions are reordered by id;
    /// connectivity, midpoints and boundary flags are derived.
    pub fn new(
        mut junctions: Vec<Junction>,
        mut links: Vec<Link>,
        mut signals: Vec<Signal>,
    ) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::Validation("network has no links".into()));
        }
        junctions.sort_by_key(|j| j.id);
        links.sort_by_key(|l| l.id);
        signals.sort_by_key(|s| s.junction);

        let mut junction_index = BTreeMap::new();
        for (i, j) in junctions.iter().enumerate() {
            if junction_index.insert(j.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate junction id {}", j.id)));
            }
        }
        let mut link_index = BTreeMap::new();
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate link id {}", l.id)));
            }
            l.validate()?;
            for end in [l.from, l.to] {
                if !junction_index.contains_key(&end) {
                    return Err(Error::Validation(format!(
                        "link {} references unknown junction {}",
                        l.id, end
                    )));
                }
            }
            if l.from == l.to {
                return Err(Error::Validation(format!("link {} is a loop", l.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for s in &signals {
            if !junction_index.contains_key(&s.junction) {
                return Err(Error::Validation(format!(
                    "signal references unknown junction {}",
                    s.junction
                )));
            }
            if !seen.insert(s.junction) {
                return Err(Error::Validation(format!(
                    "junction {} has more than one signal",
                    s.junction
                )));
            }
            s.validate()?;
        }

        let nj = junctions.len();
        let mut incoming = vec![Vec::new(); nj];
        let mut outgoing = vec![Vec::new(); nj];
        for (i, l) in links.iter().enumerate() {
            outgoing[junction_index[&l.from]].push(i);
            incoming[junction_index[&l.to]].push(i);
        }

        // Downstream links share the end junction; the reverse link of a
        // bidirectional pair would share both junctions and is not a movement.
        let n = links.len();
        let mut downstream = vec![Vec::new(); n];
        let mut upstream = vec![Vec::new(); n];
        for (i, l) in links.iter().enumerate() {
            for &j in &outgoing[junction_index[&l.to]] {
                if links[j].to != l.from {
                    downstream[i].push(j);
                    upstream[j].push(i);
                }
            }
        }
        for list in upstream.iter_mut() {
            list.sort_unstable();
        }

        let (min_x, max_x, min_y, max_y) = junctions.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), j| (a.min(j.x), b.max(j.x), c.min(j.y), d.max(j.y)),
        );
        let on_perimeter =
            |j: &Junction| j.x == min_x || j.x == max_x || j.y == min_y || j.y == max_y;

        let signal_at: BTreeMap<JunctionId, usize> = signals
            .iter()
            .enumerate()
            .map(|(i, s)| (s.junction, i))
            .collect();
        let mut first_group = vec![false; n];
        let mut signal_of = vec![None; n];
        for i in 0..n {
            let (a, b) = {
                let l = &links[i];
                (
                    &junctions[junction_index[&l.from]],
                    &junctions[junction_index[&l.to]],
                )
            };
            let l = &mut links[i];
            l.midpoint = ((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
            l.is_boundary_in = upstream[i].is_empty() || on_perimeter(a);
            l.is_boundary_out = downstream[i].is_empty() || on_perimeter(b);
            first_group[i] = (b.y - a.y).abs() >= (b.x - a.x).abs();
            signal_of[i] = signal_at.get(&l.to).copied();
        }

        Ok(RoadNetwork {
            junctions,
            links,
            signals,
            junction_index,
            link_index,
            incoming,
            outgoing,
            upstream,
            downstream,
            first_group,
            signal_of,
        })
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, index: usize) -> &Link {
        &self.links[index]
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn index_of(&self, id: LinkId) -> Option<usize> {
        self.link_index.get(&id).copied()
    }

    pub fn junction_index_of(&self, id: JunctionId) -> Option<usize> {
        self.junction_index.get(&id).copied()
    }

    /// Link indices downstream of link `i`, ascending by link id.
    pub fn downstream(&self, i: usize) -> &[usize] {
        &self.downstream[i]
    }

    pub fn upstream(&self, i: usize) -> &[usize] {
        &self.upstream[i]
    }

    pub fn incoming(&self, junction: usize) -> &[usize] {
        &self.incoming[junction]
    }

    pub fn outgoing(&self, junction: usize) -> &[usize] {
        &self.outgoing[junction]
    }

    /// Ordered (upstream, downstream) link index pairs.
    pub fn connectivity(&self) -> Vec<(usize, usize)> {
        self.downstream
            .iter()
            .enumerate()
            .flat_map(|(i, d)| d.iter().map(move |&j| (i, j)))
            .collect()
    }

    /// Whether the stop line of link `i` is green at time `t` seconds.
    pub fn is_green(&self, i: usize, t: f64) -> bool {
        match self.signal_of[i] {
            None => true,
            Some(s) => self.signals[s].first_group_green(t) == self.first_group[i],
        }
    }

    /// Returns a copy with the given links' dedicated bus lane counts replaced.
    pub fn with_bus_lanes(&self, dbl: &BTreeMap<LinkId, u32>) -> Result<Self> {
        let mut links = self.links.clone();
        for (id, &count) in dbl {
            let i = self
                .index_of(*id)
                .ok_or_else(|| Error::Validation(format!("unknown link {id}")))?;
            links[i].lanes_dbl = count;
            links[i].validate()?;
        }
        let mut out = self.clone();
        out.links = links;
        Ok(out)
    }

    pub fn without_signals(&self) -> Self {
        RoadNetwork::new(self.junctions.clone(), self.links.clone(), Vec::new())
            .expect("a valid network stays valid without signals")
    }
}
