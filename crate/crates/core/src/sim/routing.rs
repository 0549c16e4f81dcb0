use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::network::RoadNetwork;

/// Per-link, per-destination split over the link's downstream links.
///
/// Destinations are identified by slot, an index into the destination list
/// the ratios were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnRatios {
    destinations: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    cost: f64,
    link: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.link.cmp(&self.link))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cost-to-go from the start of every link to the end of `dest`, where a
/// link costs its traversal time at `speeds` (km/h).
fn cost_to_go(net: &RoadNetwork, speeds: &[f64], dest: usize) -> Vec<f64> {
    let n = net.num_links();
    let time = |i: usize| net.link(i).length / (speeds[i] / 3.6);
    let mut h = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    h[dest] = time(dest);
    heap.push(Entry { cost: h[dest], link: dest });
    while let Some(Entry { cost, link }) = heap.pop() {
        if cost > h[link] {
            continue;
        }
        for &up in net.upstream(link) {
            let c = cost + time(up);
            if c < h[up] {
                h[up] = c;
                heap.push(Entry { cost: c, link: up });
            }
        }
    }
    h
}

impl TurnRatios {
    fn empty(net: &RoadNetwork, destinations: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(net.num_links() * destinations.len() + 1);
        let mut total = 0;
        for z in 0..net.num_links() {
            for _ in destinations {
                offsets.push(total);
                total += net.downstream(z).len();
            }
        }
        offsets.push(total);
        TurnRatios {
            destinations: destinations.to_vec(),
            offsets,
            values: vec![0.0; total],
        }
    }

    /// All-or-nothing splits toward the fastest route at `speeds`.
    pub fn shortest(net: &RoadNetwork, speeds: &[f64], destinations: &[usize]) -> Self {
        let mut out = Self::empty(net, destinations);
        let mut unreachable = 0usize;
        for (slot, &dest) in destinations.iter().enumerate() {
            let h = cost_to_go(net, speeds, dest);
            for z in 0..net.num_links() {
                let down = net.downstream(z);
                if down.is_empty() {
                    continue;
                }
                let range = out.range(z, slot);
                let best = down
                    .iter()
                    .enumerate()
                    .filter(|(_, &j)| h[j].is_finite())
                    .min_by(|(_, &a), (_, &b)| {
                        h[a].total_cmp(&h[b])
                            .then(net.link(a).id.cmp(&net.link(b).id))
                    })
                    .map(|(q, _)| q);
                match best {
                    Some(q) => out.values[range.start + q] = 1.0,
                    None => {
                        unreachable += 1;
                        let share = 1.0 / down.len() as f64;
                        out.values[range].iter_mut().for_each(|v| *v = share);
                    }
                }
            }
        }
        if unreachable > 0 {
            log::debug!("{unreachable} link/destination pairs without a route; using uniform splits");
        }
        out
    }

    fn range(&self, link: usize, slot: usize) -> std::ops::Range<usize> {
        let k = link * self.destinations.len() + slot;
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Split of traffic on `link` bound for destination `slot`, aligned with
    /// `net.downstream(link)`.
    pub fn ratios(&self, link: usize, slot: usize) -> &[f64] {
        &self.values[self.range(link, slot)]
    }

    pub fn destinations(&self) -> &[usize] {
        &self.destinations
    }
}

/// Blend the previous splits toward the all-or-nothing splits at current
/// speeds: `smoothing * target + (1 - smoothing) * previous`.
pub fn update_turn_ratios(
    net: &RoadNetwork,
    speeds: &[f64],
    previous: &TurnRatios,
    smoothing: f64,
) -> TurnRatios {
    let mut target = TurnRatios::shortest(net, speeds, &previous.destinations);
    for (t, &p) in target.values.iter_mut().zip(&previous.values) {
        *t = smoothing * *t + (1.0 - smoothing) * p;
    }
    for k in 0..target.offsets.len() - 1 {
        let r = target.offsets[k]..target.offsets[k + 1];
        let s: f64 = target.values[r.clone()].iter().sum();
        if s > 0.0 {
            target.values[r].iter_mut().for_each(|v| *v /= s);
        }
    }
    target
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::GridSpec;
    use proptest::prelude::*;

    #[test]
    fn chain_routes_forward() {
        let net = crate::network::tests::chain();
        let speeds = vec![25.0; 3];
        let tr = TurnRatios::shortest(&net, &speeds, &[2]);
        assert_eq!(tr.ratios(0, 0), &[1.0]);
        assert_eq!(tr.ratios(1, 0), &[1.0]);
        assert!(tr.ratios(2, 0).is_empty());
    }

    #[test]
    fn slower_branch_is_avoided() {
        let net = GridSpec::new(3, 3, 100.0, 2).build().unwrap();
        let dest = net.index_of(net.links().last().unwrap().id).unwrap();
        let mut speeds = vec![25.0; net.num_links()];
        let base = TurnRatios::shortest(&net, &speeds, &[dest]);
        // pick a link with two downstream choices and slow its preferred one
        let (z, q) = (0..net.num_links())
            .filter(|&z| z != dest && net.downstream(z).len() >= 2)
            .find_map(|z| {
                let r = base.ratios(z, 0);
                r.iter().position(|&v| v == 1.0).map(|q| (z, q))
            })
            .unwrap();
        let preferred = net.downstream(z)[q];
        if preferred != dest {
            speeds[preferred] = 1.0;
            let slowed = TurnRatios::shortest(&net, &speeds, &[dest]);
            assert_eq!(slowed.ratios(z, 0)[q], 0.0);
        }
    }

    #[test]
    fn smoothing_halves_toward_target() {
        let net = GridSpec::new(3, 3, 100.0, 2).build().unwrap();
        let dests = vec![0, 5];
        let free = vec![25.0; net.num_links()];
        let prev = TurnRatios::shortest(&net, &free, &dests);
        let mut slow = free.clone();
        for s in slow.iter_mut().step_by(3) {
            *s = 2.0;
        }
        let target = TurnRatios::shortest(&net, &slow, &dests);
        let next = update_turn_ratios(&net, &slow, &prev, 0.5);
        for (k, ((&n, &t), &p)) in next.values.iter().zip(&target.values).zip(&prev.values).enumerate() {
            assert!((n - (0.5 * t + 0.5 * p)).abs() < 1e-12, "entry {k}");
        }
    }

    proptest! {
        #[test]
        fn ratios_sum_to_one(seed in 0u64..500, smoothing in 0.0f64..=1.0) {
            use rand::{Rng, SeedableRng};
            let net = GridSpec::new(3, 4, 120.0, 2).build().unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dests: Vec<usize> = (0..3).map(|_| rng.gen_range(0..net.num_links())).collect();
            let s1: Vec<f64> = (0..net.num_links()).map(|_| rng.gen_range(1.0..25.0)).collect();
            let s2: Vec<f64> = (0..net.num_links()).map(|_| rng.gen_range(1.0..25.0)).collect();
            let tr = update_turn_ratios(&net, &s2, &TurnRatios::shortest(&net, &s1, &dests), smoothing);
            for z in 0..net.num_links() {
                for slot in 0..dests.len() {
                    let r = tr.ratios(z, slot);
                    if !r.is_empty() {
                        let s: f64 = r.iter().sum();
                        prop_assert!((s - 1.0).abs() < 1e-9);
                        prop_assert!(r.iter().all(|&v| v >= 0.0));
                    }
                }
            }
        }
    }
}
