use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::network::RoadNetwork;

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    /// Node (link) indices from origin to destination.
    pub path: Vec<usize>,
    pub cost: f64,
}

struct Entry {
    cost: f64,
    node: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Least-cost path over positive edge weights, `adj[u] = [(v, w)]`, starting
/// with cost `start_cost` at `src`. Equal costs resolve to the path whose
/// key sequence is lexicographically smallest.
pub fn dijkstra(adj: &[Vec<(usize, f64)>], keys: &[u64], src: usize, dst: usize, start_cost: f64) -> Option<Route> {
    let n = adj.len();
    let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[src] = Some((start_cost, vec![src]));
    heap.push(Entry {
        cost: start_cost,
        node: src,
    });
    let key_less = |a: &[usize], b: &[usize]| a.iter().map(|&i| keys[i]).lt(b.iter().map(|&i| keys[i]));
    while let Some(Entry { cost, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        let (c, path) = best[node].clone().expect("queued nodes have labels");
        if c != cost {
            continue;
        }
        done[node] = true;
        if node == dst {
            return Some(Route { path, cost });
        }
        for &(v, w) in &adj[node] {
            if done[v] {
                continue;
            }
            let nc = cost + w;
            let better = match &best[v] {
                None => true,
                Some((oc, op)) => {
                    nc < *oc || (nc == *oc && {
                        let mut cand = path.clone();
                        cand.push(v);
                        key_less(&cand, op)
                    })
                }
            };
            if better {
                let mut p = path.clone();
                p.push(v);
                best[v] = Some((nc, p));
                heap.push(Entry { cost: nc, node: v });
            }
        }
    }
    None
}

/// Fastest link sequence from `origin` to `dest` (link indices), both
/// links included, at the given per-link speeds (km/h). Cost is seconds.
pub fn shortest_path(net: &RoadNetwork, speeds: &[f64], origin: usize, dest: usize) -> Option<Route> {
    let time: Vec<f64> = net
        .links()
        .iter()
        .zip(speeds)
        .map(|(l, &v)| 3600.0 * l.length_km() / v)
        .collect();
    let adj: Vec<Vec<(usize, f64)>> = (0..net.num_links())
        .map(|i| net.downstream(i).iter().map(|&j| (j, time[j])).collect())
        .collect();
    let keys: Vec<u64> = net.links().iter().map(|l| l.id as u64).collect();
    dijkstra(&adj, &keys, origin, dest, time[origin])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triangle() {
        // A=0, B=1, C=2
        let adj = vec![vec![(1, 1.0), (2, 3.0)], vec![(2, 1.0)], vec![]];
        let r = dijkstra(&adj, &[0, 1, 2], 0, 2, 0.0).unwrap();
        assert_eq!(r.path, vec![0, 1, 2]);
        assert_eq!(r.cost, 2.0);
    }

    #[test]
    fn unreachable() {
        let adj = vec![vec![(1, 1.0)], vec![], vec![(0, 1.0)]];
        assert!(dijkstra(&adj, &[0, 1, 2], 0, 2, 0.0).is_none());
    }

    #[test]
    fn ties_take_smallest_key_sequence() {
        // 0 -> 1 -> 3 and 0 -> 2 -> 3 cost the same
        let adj = vec![vec![(2, 1.0), (1, 1.0)], vec![(3, 1.0)], vec![(3, 1.0)], vec![]];
        assert_eq!(dijkstra(&adj, &[0, 1, 2, 3], 0, 3, 0.0).unwrap().path, vec![0, 1, 3]);
        assert_eq!(dijkstra(&adj, &[0, 9, 2, 3], 0, 3, 0.0).unwrap().path, vec![0, 2, 3]);
    }

    fn brute(adj: &[Vec<(usize, f64)>], keys: &[u64], src: usize, dst: usize) -> Option<(f64, Vec<usize>)> {
        fn go(
            adj: &[Vec<(usize, f64)>],
            keys: &[u64],
            path: &mut Vec<usize>,
            cost: f64,
            dst: usize,
            best: &mut Option<(f64, Vec<usize>)>,
        ) {
            let u = *path.last().unwrap();
            if u == dst {
                let key = |p: &[usize]| p.iter().map(|&i| keys[i]).collect::<Vec<_>>();
                let better = match best {
                    None => true,
                    Some((c, p)) => cost < *c || (cost == *c && key(path) < key(p)),
                };
                if better {
                    *best = Some((cost, path.clone()));
                }
                return;
            }
            for &(v, w) in &adj[u] {
                if !path.contains(&v) {
                    path.push(v);
                    go(adj, keys, path, cost + w, dst, best);
                    path.pop();
                }
            }
        }
        let mut best = None;
        go(adj, keys, &mut vec![src], 0.0, dst, &mut best);
        best
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=8);
            let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
            for (u, out) in adj.iter_mut().enumerate() {
                for v in 0..n {
                    if v != u && rng.gen_bool(0.35) {
                        out.push((v, rng.gen_range(1..5) as f64 * 0.5));
                    }
                }
            }
            let mut keys: Vec<u64> = (0..n as u64).collect();
            keys.reverse();
            for src in 0..n {
                for dst in 0..n {
                    let d = dijkstra(&adj, &keys, src, dst, 0.0);
                    let b = brute(&adj, &keys, src, dst);
                    match (d, b) {
                        (None, None) => {}
                        (Some(r), Some((c, p))) => {
                            assert_eq!(r.cost, c, "seed {seed} {src}->{dst}");
                            assert_eq!(r.path, p, "seed {seed} {src}->{dst}");
                        }
                        (d, b) => panic!("seed {seed} {src}->{dst}: {d:?} vs {b:?}"),
                    }
                }
            }
        }
    }
}
