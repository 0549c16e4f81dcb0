use super::flow::{link_speed_from_sums, moving_delay_steps, storage_capacity, transfer_flow};
use super::{update_turn_ratios, SimConfig, SimRecord, TurnRatios};
use crate::error::{Error, Result};
use crate::network::RoadNetwork;

/// Peak-period rate from an origin link to a destination slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdFlow {
    pub origin: usize,
    pub dest_slot: usize,
    /// veh/h at full demand.
    pub rate_vph: f64,
}

/// Demand in link-index space: the distinct destination links and the flows
/// feeding them.
#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub destinations: Vec<usize>,
    pub flows: Vec<OdFlow>,
}

impl Demand {
    /// `pairs` are (origin index, destination index, veh/h).
    pub fn new(net: &RoadNetwork, pairs: &[(usize, usize, f64)]) -> Result<Self> {
        let n = net.num_links();
        let mut destinations: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        destinations.sort_unstable();
        destinations.dedup();
        let mut flows = Vec::with_capacity(pairs.len());
        for &(o, d, rate) in pairs {
            if o >= n || d >= n {
                return Err(Error::Validation(format!("OD pair ({o}, {d}) outside network")));
            }
            if o == d {
                return Err(Error::Validation(format!(
                    "OD pair on link {} has origin equal to destination",
                    net.link(o).id
                )));
            }
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::Validation(format!("negative or non-finite demand {rate}")));
            }
            let dest_slot = destinations.binary_search(&d).expect("collected above");
            flows.push(OdFlow {
                origin: o,
                dest_slot,
                rate_vph: rate,
            });
        }
        Ok(Demand {
            destinations,
            flows,
        })
    }

    /// Vehicles generated per pair during step starting at `t`.
    pub fn slice(&self, t: f64, cfg: &SimConfig) -> Vec<(usize, usize, f64)> {
        let level = cfg.demand_profile(t + 0.5 * cfg.step_s);
        self.flows
            .iter()
            .map(|f| (f.origin, f.dest_slot, f.rate_vph * level * cfg.step_s / 3600.0))
            .collect()
    }
}

#[derive(Debug, Clone)]
struct LinkQueues {
    /// Moving part as a ring of future arrivals, `[slot * n_dest + d]`.
    ring: Vec<f64>,
    ring_len: usize,
    waiting: Vec<f64>,
    capacity: f64,
}

/// Queues of every link plus the origin backlog outside the network.
#[derive(Debug, Clone)]
pub struct SimState {
    destinations: Vec<usize>,
    links: Vec<LinkQueues>,
    backlog: Vec<f64>,
    step_index: usize,
    pub generated: f64,
    pub completed: f64,
    pub exited: f64,
}

/// Per-step totals.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFlows {
    /// Vehicles leaving each link, including completions and boundary exits.
    pub outflow: Vec<f64>,
    pub generated: f64,
    pub completed: f64,
    pub exited: f64,
}

impl SimState {
    pub fn new(net: &RoadNetwork, destinations: &[usize], cfg: &SimConfig) -> Self {
        let nd = destinations.len();
        let links = net
            .links()
            .iter()
            .map(|l| {
                let capacity = storage_capacity(l, cfg);
                let ring_len = moving_delay_steps(l, 0.0, capacity, cfg) + 1;
                LinkQueues {
                    ring: vec![0.0; ring_len * nd],
                    ring_len,
                    waiting: vec![0.0; nd],
                    capacity,
                }
            })
            .collect();
        SimState {
            destinations: destinations.to_vec(),
            links,
            backlog: vec![0.0; net.num_links() * nd],
            step_index: 0,
            generated: 0.0,
            completed: 0.0,
            exited: 0.0,
        }
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn capacity(&self, z: usize) -> f64 {
        self.links[z].capacity
    }

    pub fn moving(&self, z: usize) -> f64 {
        self.links[z].ring.iter().sum()
    }

    pub fn waiting(&self, z: usize) -> f64 {
        self.links[z].waiting.iter().sum()
    }

    pub fn occupancy(&self, z: usize) -> f64 {
        self.moving(z) + self.waiting(z)
    }

    pub fn in_network(&self) -> f64 {
        (0..self.links.len()).map(|z| self.occupancy(z)).sum()
    }

    /// Vehicles generated but still queued outside their origin link.
    pub fn backlog(&self) -> f64 {
        self.backlog.iter().sum()
    }

    /// Generated minus everything accounted for; zero up to rounding.
    pub fn balance_error(&self) -> f64 {
        self.generated - (self.backlog() + self.in_network() + self.completed + self.exited)
    }

    fn insert(&mut self, z: usize, d: usize, amount: f64, delay: usize) {
        let nd = self.destinations.len();
        let q = &mut self.links[z];
        let slot = (self.step_index + delay) % q.ring_len;
        q.ring[slot * nd + d] += amount;
    }

    /// Places `amount` vehicles bound for destination slot `d` directly in the
    /// moving part of link `z`, as if they had just entered it.
    pub fn inject(&mut self, net: &RoadNetwork, z: usize, d: usize, amount: f64, cfg: &SimConfig) {
        let delay = moving_delay_steps(net.link(z), self.occupancy(z), self.capacity(z), cfg);
        self.insert(z, d, amount, delay);
        self.generated += amount;
    }
}

/// Advances the state by one step.
///
/// Order: moving-part arrivals (completing trips at their destination), stop
/// line transfers, demand entering origins, capacity check.
pub fn step(
    net: &RoadNetwork,
    state: &mut SimState,
    demand: &[(usize, usize, f64)],
    green: &[bool],
    ratios: &TurnRatios,
    cfg: &SimConfig,
) -> Result<StepFlows> {
    let n = net.num_links();
    let nd = state.destinations.len();
    if green.len() != n || ratios.destinations() != state.destinations.as_slice() {
        return Err(Error::Simulation("step inputs do not match the state".into()));
    }
    let k = state.step_index;
    let mut out = StepFlows {
        outflow: vec![0.0; n],
        generated: 0.0,
        completed: 0.0,
        exited: 0.0,
    };

    for z in 0..n {
        let q = &mut state.links[z];
        let slot = k % q.ring_len;
        for d in 0..nd {
            let a = std::mem::take(&mut q.ring[slot * nd + d]);
            if a > 0.0 {
                if state.destinations[d] == z {
                    out.completed += a;
                    out.outflow[z] += a;
                } else {
                    q.waiting[d] += a;
                }
            }
        }
    }

    let occ: Vec<f64> = (0..n).map(|z| state.occupancy(z)).collect();
    let cap: Vec<f64> = state.links.iter().map(|q| q.capacity).collect();
    let space: Vec<f64> = (0..n).map(|j| (cap[j] - occ[j]).max(0.0)).collect();

    // (upstream, position in downstream list, desired, requested)
    let mut requests: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut requested_into = vec![0.0; n];
    for z in 0..n {
        let total: f64 = state.links[z].waiting.iter().sum();
        if !green[z] || total <= 0.0 {
            continue;
        }
        let lanes = net.link(z).car_lanes() as f64;
        let down = net.downstream(z);
        if down.is_empty() {
            let e = transfer_flow(total, 1.0, lanes, 0.0, f64::INFINITY, true, cfg);
            let keep = 1.0 - e / total;
            for w in state.links[z].waiting.iter_mut() {
                *w = if e >= total { 0.0 } else { *w * keep };
            }
            out.exited += e;
            out.outflow[z] += e;
            continue;
        }
        let mut desired = vec![0.0; down.len()];
        for d in 0..nd {
            let w = state.links[z].waiting[d];
            if w > 0.0 {
                for (q, r) in ratios.ratios(z, d).iter().enumerate() {
                    desired[q] += r * w;
                }
            }
        }
        let desired_total: f64 = desired.iter().sum();
        for (q, &j) in down.iter().enumerate() {
            if desired[q] <= 0.0 {
                continue;
            }
            let req = transfer_flow(
                total,
                desired[q] / total,
                lanes * desired[q] / desired_total,
                occ[j],
                cap[j],
                true,
                cfg,
            );
            if req > 0.0 {
                requests.push((z, q, desired[q], req));
                requested_into[j] += req;
            }
        }
    }

    let grant: Vec<f64> = (0..n)
        .map(|j| {
            if requested_into[j] > space[j] {
                space[j] / requested_into[j]
            } else {
                1.0
            }
        })
        .collect();
    let delay: Vec<usize> = (0..n)
        .map(|j| moving_delay_steps(net.link(j), occ[j], cap[j], cfg))
        .collect();

    let mut i = 0;
    while i < requests.len() {
        let z = requests[i].0;
        let start = state.links[z].waiting.clone();
        let mut moved = vec![0.0; nd];
        while i < requests.len() && requests[i].0 == z {
            let (_, q, desired, req) = requests[i];
            let j = net.downstream(z)[q];
            let flow = req * grant[j];
            let frac = flow / desired;
            for d in 0..nd {
                let m = ratios.ratios(z, d)[q] * start[d] * frac;
                if m > 0.0 {
                    moved[d] += m;
                    state.insert(j, d, m, delay[j]);
                }
            }
            out.outflow[z] += flow;
            i += 1;
        }
        for d in 0..nd {
            state.links[z].waiting[d] = (start[d] - moved[d]).max(0.0);
        }
    }

    for &(o, d, veh) in demand {
        if o >= n || d >= nd || !(veh >= 0.0) {
            return Err(Error::Simulation(format!("invalid demand entry ({o}, {d}, {veh})")));
        }
        state.backlog[o * nd + d] += veh;
        out.generated += veh;
    }
    for o in 0..n {
        let pending: f64 = state.backlog[o * nd..(o + 1) * nd].iter().sum();
        if pending <= 0.0 {
            continue;
        }
        let now = state.occupancy(o);
        if now >= cfg.congestion_threshold * cap[o] {
            continue;
        }
        let enter = pending.min(cap[o] - now);
        let dl = moving_delay_steps(net.link(o), now, cap[o], cfg);
        for d in 0..nd {
            let b = state.backlog[o * nd + d];
            if b <= 0.0 {
                continue;
            }
            let e = if enter >= pending { b } else { b * enter / pending };
            state.backlog[o * nd + d] = if enter >= pending { 0.0 } else { (b - e).max(0.0) };
            state.insert(o, d, e, dl);
        }
    }

    for z in 0..n {
        let x = state.occupancy(z);
        if x > cap[z] * (1.0 + 1e-9) + 1e-9 {
            return Err(Error::Simulation(format!(
                "link {} holds {x} vehicles, above its storage {}",
                net.link(z).id,
                cap[z]
            )));
        }
    }

    state.generated += out.generated;
    state.completed += out.completed;
    state.exited += out.exited;
    state.step_index += 1;
    Ok(out)
}

/// Runs the full schedule and aggregates per window.
pub fn simulate(net: &RoadNetwork, demand: &Demand, cfg: &SimConfig) -> Result<SimRecord> {
    cfg.validate()?;
    let n = net.num_links();
    let free: Vec<f64> = net.links().iter().map(|l| l.free_flow_speed).collect();
    let mut ratios = TurnRatios::shortest(net, &free, &demand.destinations);
    let mut state = SimState::new(net, &demand.destinations, cfg);
    let per_window = cfg.steps_per_window();
    let per_update = cfg.steps_per_turn_update();
    let windows = cfg.num_windows();

    let mut speed = Vec::with_capacity(windows * n);
    let mut accumulation = Vec::with_capacity(windows * n);
    let mut outflow = Vec::with_capacity(windows * n);
    let mut trips = Vec::with_capacity(windows);
    let (mut win_u, mut win_x) = (vec![0.0; n], vec![0.0; n]);
    let (mut upd_u, mut upd_x) = (vec![0.0; n], vec![0.0; n]);
    let mut win_trips = 0.0;
    let mut balance: f64 = 0.0;
    let mut green = vec![true; n];

    for k in 0..cfg.num_steps() {
        let t = k as f64 * cfg.step_s;
        for (z, g) in green.iter_mut().enumerate() {
            *g = net.is_green(z, t);
        }
        let flows = step(net, &mut state, &demand.slice(t, cfg), &green, &ratios, cfg)?;
        for z in 0..n {
            let x = state.occupancy(z);
            win_u[z] += flows.outflow[z];
            win_x[z] += x;
            upd_u[z] += flows.outflow[z];
            upd_x[z] += x;
        }
        win_trips += flows.completed;
        balance = balance.max(state.balance_error().abs());

        if (k + 1) % per_window == 0 {
            for z in 0..n {
                speed.push(link_speed_from_sums(win_u[z], win_x[z], net.link(z), cfg));
                accumulation.push(win_x[z] / per_window as f64);
                outflow.push(win_u[z]);
            }
            trips.push(win_trips);
            win_u.iter_mut().for_each(|v| *v = 0.0);
            win_x.iter_mut().for_each(|v| *v = 0.0);
            win_trips = 0.0;
        }
        if (k + 1) % per_update == 0 {
            let current: Vec<f64> = (0..n)
                .map(|z| link_speed_from_sums(upd_u[z], upd_x[z], net.link(z), cfg))
                .collect();
            ratios = update_turn_ratios(net, &current, &ratios, cfg.turn_smoothing);
            upd_u.iter_mut().for_each(|v| *v = 0.0);
            upd_x.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    log::debug!(
        "simulated {} steps: generated {:.1}, completed {:.1}, exited {:.1}, left {:.3}",
        cfg.num_steps(),
        state.generated,
        state.completed,
        state.exited,
        state.in_network() + state.backlog()
    );

    let mut record = SimRecord::from_parts(net, cfg.window_s, speed, accumulation, outflow)?;
    record.trips_completed = trips;
    record.balance_error = balance;
    record.generated = state.generated;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{tests::chain, GridSpec, Junction, Link, RoadNetwork, Signal};

    fn short_cfg() -> SimConfig {
        SimConfig {
            warmup_s: 180.0,
            peak_s: 900.0,
            total_s: 1800.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn single_vehicle_traverses_chain() {
        let net = chain();
        let cfg = SimConfig::default();
        let ratios = TurnRatios::shortest(&net, &[25.0; 3], &[2]);
        let mut state = SimState::new(&net, &[2], &cfg);
        state.inject(&net, 0, 0, 1.0, &cfg);
        let green = vec![true; 3];
        let mut done_at = None;
        for k in 0..20 {
            let f = step(&net, &mut state, &[], &green, &ratios, &cfg).unwrap();
            assert!(state.balance_error().abs() < 1e-12);
            if f.completed > 0.0 {
                done_at = Some(k);
                break;
            }
        }
        // 100 m at 25 km/h is 14.4 s, two steps per link
        assert_eq!(done_at, Some(6));
        assert_eq!(state.completed, 1.0);
        assert_eq!(state.in_network(), 0.0);
    }

    #[test]
    fn red_light_holds_queue() {
        let junctions = (0..3)
            .map(|i| Junction {
                id: i,
                x: i as f64 * 100.0,
                y: 0.0,
            })
            .collect();
        let links = vec![
            Link::new(0, 0, 1, 100.0, 1, 0, 25.0),
            Link::new(1, 1, 2, 100.0, 1, 0, 25.0),
        ];
        let net = RoadNetwork::new(junctions, links, vec![]).unwrap();
        let cfg = SimConfig::default();
        let ratios = TurnRatios::shortest(&net, &[25.0; 2], &[1]);
        let mut state = SimState::new(&net, &[1], &cfg);
        state.inject(&net, 0, 0, 2.0, &cfg);
        for _ in 0..10 {
            step(&net, &mut state, &[], &[false, true], &ratios, &cfg).unwrap();
        }
        assert_eq!(state.waiting(0), 2.0);
        assert_eq!(state.moving(0), 0.0);
        assert_eq!(state.completed, 0.0);
    }

    #[test]
    fn saturation_limits_discharge() {
        let net = chain();
        let cfg = SimConfig::default();
        let ratios = TurnRatios::shortest(&net, &[25.0; 3], &[2]);
        let mut state = SimState::new(&net, &[2], &cfg);
        state.inject(&net, 0, 0, 20.0, &cfg);
        let green = vec![true; 3];
        step(&net, &mut state, &[], &green, &ratios, &cfg).unwrap();
        step(&net, &mut state, &[], &green, &ratios, &cfg).unwrap();
        let f = step(&net, &mut state, &[], &green, &ratios, &cfg).unwrap();
        // two lanes * 0.5 veh/s * 5 s
        assert_eq!(f.outflow[0], 5.0);
        assert_eq!(state.waiting(0), 15.0);
    }

    #[test]
    fn spillback_respects_storage() {
        let net = chain();
        let cfg = SimConfig::default();
        let ratios = TurnRatios::shortest(&net, &[25.0; 3], &[2]);
        let mut state = SimState::new(&net, &[2], &cfg);
        let cap = state.capacity(1);
        state.inject(&net, 0, 0, state.capacity(0), &cfg);
        state.inject(&net, 1, 0, cap, &cfg);
        let green = [true, false, true];
        for _ in 0..30 {
            step(&net, &mut state, &[], &green, &ratios, &cfg).unwrap();
            assert!(state.occupancy(1) <= cap + 1e-9);
        }
        assert_eq!(state.occupancy(1), cap);
        assert!(state.waiting(0) > 0.0);
    }

    #[test]
    fn conservation_on_signalized_grid() {
        let net = GridSpec::new(4, 4, 120.0, 2).build().unwrap();
        let n = net.num_links();
        let pairs: Vec<(usize, usize, f64)> = (0..8)
            .map(|i| (i * 5 % n, (i * 11 + 7) % n, 400.0))
            .filter(|p| p.0 != p.1)
            .collect();
        let demand = Demand::new(&net, &pairs).unwrap();
        let rec = simulate(&net, &demand, &short_cfg()).unwrap();
        assert!(rec.balance_error < 1e-6, "{}", rec.balance_error);
        assert!(rec.generated > 0.0);
        for t in 0..rec.num_windows() {
            for z in 0..n {
                let v = rec.speed(t, z);
                assert!(v >= 1.0 && v <= 25.0);
            }
        }
    }

    #[test]
    fn deterministic() {
        let net = GridSpec::new(3, 3, 100.0, 1).build().unwrap();
        let demand = Demand::new(&net, &[(0, 5, 600.0), (3, 10, 300.0)]).unwrap();
        let a = simulate(&net, &demand, &short_cfg()).unwrap();
        let b = simulate(&net, &demand, &short_cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_self_pair() {
        let net = chain();
        assert!(Demand::new(&net, &[(1, 1, 10.0)]).is_err());
        assert!(Demand::new(&net, &[(0, 7, 10.0)]).is_err());
    }

    #[test]
    fn signal_plan_alternates() {
        let net = GridSpec::new(3, 3, 100.0, 1).build().unwrap();
        let s: &Signal = &net.signals()[0];
        assert!(s.first_group_green(0.0));
        assert!(!s.first_group_green(s.split * s.cycle_s));
    }
}
