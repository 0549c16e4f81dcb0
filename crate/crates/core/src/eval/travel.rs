use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::Metrics;
use super::routing::shortest_path;
use crate::error::{Error, Result};
use crate::network::{LinkId, RoadNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trip {
    pub origin: LinkId,
    pub destination: LinkId,
    /// The trip leaves at the start of this window.
    pub departure_window: usize,
}

/// `n` trips between distinct interior links, departing uniformly over
/// windows `first_window..num_windows`.
pub fn generate_trips(net: &RoadNetwork, n: usize, seed: u64, first_window: usize, num_windows: usize) -> Result<Vec<Trip>> {
    let interior: Vec<LinkId> = net
        .links()
        .iter()
        .filter(|l| !l.is_boundary_in && !l.is_boundary_out)
        .map(|l| l.id)
        .collect();
    if interior.len() < 2 {
        return Err(Error::Argument("trips need at least two interior links".into()));
    }
    if first_window >= num_windows {
        return Err(Error::Argument(format!(
            "no departure windows in {first_window}..{num_windows}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let o = rng.gen_range(0..interior.len());
            let mut d = rng.gen_range(0..interior.len() - 1);
            if d >= o {
                d += 1;
            }
            Trip {
                origin: interior[o],
                destination: interior[d],
                departure_window: rng.gen_range(first_window..num_windows),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelTime {
    pub seconds: f64,
    /// The clock passed the last window and its speeds were reused.
    pub extrapolated: bool,
}

/// Time to traverse `path` (link indices) leaving at `depart_s`. Links are
/// crossed at the speed of the window holding the clock; when the clock
/// reaches a window boundary mid-link the rest of the link uses the next
/// window's speed.
pub fn path_travel_time(
    net: &RoadNetwork,
    path: &[usize],
    speeds: &[Vec<f64>],
    window_s: f64,
    depart_s: f64,
) -> Result<TravelTime> {
    if path.is_empty() || speeds.is_empty() {
        return Err(Error::Argument("empty path or speed series".into()));
    }
    let last = speeds.len() - 1;
    let horizon = speeds.len() as f64 * window_s;
    let mut clock = depart_s;
    let mut w = ((clock / window_s).floor() as usize).min(last);
    for &z in path {
        let mut km = net.link(z).length_km();
        loop {
            let v = speeds[w][z];
            let reach = clock + 3600.0 * km / v;
            if w == last {
                clock = reach;
                break;
            }
            let end = (w + 1) as f64 * window_s;
            if reach <= end {
                clock = reach;
                break;
            }
            // an unchanged speed needs no split
            if speeds[w + 1][z] != v {
                km -= v * (end - clock) / 3600.0;
                clock = end;
            }
            w += 1;
        }
    }
    Ok(TravelTime {
        seconds: clock - depart_s,
        extrapolated: clock > horizon,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimeResult {
    /// Estimated minus true seconds per routed trip, in trip order.
    pub errors: Vec<f64>,
    pub metrics: Option<Metrics>,
    pub no_path: usize,
    pub extrapolated: usize,
}

/// Routes every trip on the estimated speeds of its departure window, then
/// times that route on the estimated and on the recorded speeds. Speeds
/// below `v_min` are raised to it.
pub fn travel_time_experiment(
    net: &RoadNetwork,
    estimate: &[Vec<f64>],
    truth: &[Vec<f64>],
    window_s: f64,
    v_min: f64,
    trips: &[Trip],
) -> Result<TravelTimeResult> {
    if estimate.len() != truth.len() {
        return Err(Error::Argument("estimate and truth cover different windows".into()));
    }
    let floor = |s: &[Vec<f64>]| -> Vec<Vec<f64>> {
        s.iter().map(|r| r.iter().map(|v| v.max(v_min)).collect()).collect()
    };
    let (est, tru) = (floor(estimate), floor(truth));
    let mut errors = Vec::with_capacity(trips.len());
    let mut no_path = 0;
    let mut extrapolated = 0;
    for trip in trips {
        let (o, d) = match (net.index_of(trip.origin), net.index_of(trip.destination)) {
            (Some(o), Some(d)) => (o, d),
            _ => return Err(Error::Argument(format!("trip {trip:?} uses unknown links"))),
        };
        let w = trip.departure_window;
        if w >= est.len() {
            return Err(Error::Argument(format!("trip departs in window {w} beyond the record")));
        }
        let Some(route) = shortest_path(net, &est[w], o, d) else {
            no_path += 1;
            continue;
        };
        let depart = w as f64 * window_s;
        let a = path_travel_time(net, &route.path, &est, window_s, depart)?;
        let b = path_travel_time(net, &route.path, &tru, window_s, depart)?;
        if a.extrapolated || b.extrapolated {
            extrapolated += 1;
        }
        errors.push(a.seconds - b.seconds);
    }
    let metrics = if errors.is_empty() {
        None
    } else {
        Some(Metrics::from_errors(&errors)?)
    };
    Ok(TravelTimeResult {
        errors,
        metrics,
        no_path,
        extrapolated,
    })
}
