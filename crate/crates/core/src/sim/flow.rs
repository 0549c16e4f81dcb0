use super::SimConfig;
use crate::network::Link;

/// Vehicles the link can store: general-traffic lanes times length over
/// spacing, at least one.
pub fn storage_capacity(link: &Link, cfg: &SimConfig) -> f64 {
    (link.length * link.car_lanes() as f64 / cfg.vehicle_length)
        .floor()
        .max(1.0)
}

/// Flow moved from an upstream waiting queue into one downstream link in one
/// step.
///
/// Zero on red or when the receiver already holds `congestion_threshold` of its
/// storage; otherwise the smallest of the routed share of the queue, the
/// stop-line discharge over `lanes`, and the free space downstream.
pub fn transfer_flow(
    waiting: f64,
    ratio: f64,
    lanes: f64,
    down_occupancy: f64,
    down_capacity: f64,
    green: bool,
    cfg: &SimConfig,
) -> f64 {
    if !green || down_occupancy >= cfg.congestion_threshold * down_capacity {
        return 0.0;
    }
    let routed = ratio * waiting;
    let discharge = cfg.saturation_flow * lanes * cfg.step_s;
    let space = down_capacity - down_occupancy;
    routed.min(discharge).min(space).max(0.0)
}

/// Steps a vehicle entering now spends in the moving part. The run starts at
/// the current queue end, so it shrinks with occupancy. Rounded down so that
/// the free-flow traversal is never slower than `free_flow_speed`.
pub fn moving_delay_steps(link: &Link, occupancy: f64, capacity: f64, cfg: &SimConfig) -> usize {
    let fill = (occupancy / capacity).clamp(0.0, 1.0);
    let free_flow_s = link.length / (link.free_flow_speed / 3.6);
    (((1.0 - fill) * free_flow_s / cfg.step_s).floor() as usize).max(1)
}

/// Window speed from summed outflow (veh) and summed per-step accumulation
/// (veh). Falls back to free flow for an empty link.
pub fn link_speed_from_sums(sum_u: f64, sum_x: f64, link: &Link, cfg: &SimConfig) -> f64 {
    if sum_x <= 1e-12 {
        return link.free_flow_speed;
    }
    let hours_per_step = cfg.step_s / 3600.0;
    let raw = sum_u * link.length_km() / (sum_x * hours_per_step);
    raw.min(link.free_flow_speed).max(cfg.v_min)
}

/// Window speed of `link` from its per-step outflows and accumulations, km/h.
pub fn link_speed(outflows: &[f64], accumulations: &[f64], link: &Link, cfg: &SimConfig) -> f64 {
    link_speed_from_sums(outflows.iter().sum(), accumulations.iter().sum(), link, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn link(length: f64, lanes: u32) -> Link {
        Link::new(0, 0, 1, length, lanes, 0, 25.0)
    }

    #[test]
    fn capacity_examples() {
        let cfg = SimConfig::default();
        assert_eq!(storage_capacity(&link(140.0, 2), &cfg), 40.0);
        assert_eq!(storage_capacity(&link(7.0, 1), &cfg), 1.0);
        assert_eq!(storage_capacity(&link(3.0, 1), &cfg), 1.0);
        assert_eq!(
            storage_capacity(&link(140.0, 3), &cfg),
            1.5 * storage_capacity(&link(140.0, 2), &cfg)
        );
    }

    #[test]
    fn transfer_examples() {
        let cfg = SimConfig {
            saturation_flow: 0.4,
            ..SimConfig::default()
        };
        // red
        assert_eq!(transfer_flow(10.0, 1.0, 1.0, 0.0, 20.0, false, &cfg), 0.0);
        // discharge term 0.4 * 1 * 5 = 2, space 5
        assert_eq!(transfer_flow(10.0, 1.0, 1.0, 15.0, 20.0, true, &cfg), 2.0);
        // receiver at 96 % with threshold 0.95
        assert_eq!(transfer_flow(10.0, 1.0, 1.0, 96.0, 100.0, true, &cfg), 0.0);
        // space-limited
        assert_eq!(transfer_flow(10.0, 1.0, 4.0, 17.0, 20.0, true, &cfg), 3.0);
    }

    #[test]
    fn speed_examples() {
        let cfg = SimConfig::default();
        let l = link(500.0, 2);
        // 36 steps: sum u = 36, sum x = 360 -> raw 36 km/h, clamped to 25
        let u = vec![1.0; 36];
        let x = vec![10.0; 36];
        assert_eq!(link_speed(&u, &x, &l, &cfg), 25.0);
        let raw = 36.0 * 0.5 / (360.0 * 5.0 / 3600.0);
        assert!((raw - 36.0f64).abs() < 1e-12);
        assert_eq!(link_speed(&[0.0; 36], &[0.0; 36], &l, &cfg), 25.0);
        assert_eq!(link_speed(&[0.0; 36], &x, &l, &cfg), cfg.v_min);
        // unclamped case: sum u = 18 -> 18 km/h
        assert!((link_speed(&[0.5; 36], &x, &l, &cfg) - 18.0).abs() < 1e-12);
    }

    #[test]
    fn delay_shrinks_with_queue() {
        let cfg = SimConfig::default();
        let l = link(100.0, 2); // 14.4 s free flow
        assert_eq!(moving_delay_steps(&l, 0.0, 28.0, &cfg), 2);
        assert_eq!(moving_delay_steps(&l, 14.0, 28.0, &cfg), 1);
        assert_eq!(moving_delay_steps(&l, 28.0, 28.0, &cfg), 1);
        let long = link(500.0, 2); // 72 s
        assert_eq!(moving_delay_steps(&long, 0.0, 100.0, &cfg), 14);
    }

    proptest! {
        #[test]
        fn transfer_monotone(
            waiting in 0.0f64..50.0,
            extra in 0.0f64..10.0,
            ratio in 0.0f64..=1.0,
            lanes in 1.0f64..4.0,
            occ in 0.0f64..40.0,
            free in 0.0f64..10.0,
        ) {
            let cfg = SimConfig::default();
            let cap = 40.0;
            let base = transfer_flow(waiting, ratio, lanes, occ, cap, true, &cfg);
            prop_assert!(base >= 0.0 && base <= waiting * ratio + 1e-12);
            prop_assert!(transfer_flow(waiting + extra, ratio, lanes, occ, cap, true, &cfg) >= base);
            let less_occ = (occ - free).max(0.0);
            prop_assert!(transfer_flow(waiting, ratio, lanes, less_occ, cap, true, &cfg) >= base);
        }
    }
}
