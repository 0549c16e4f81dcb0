//! Lloyd's k-means with k-means++ seeding and restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest objective wins.
    pub n_init: usize,
    pub seed: u64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            max_iter: 300,
            n_init: 10,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans<S> {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<S>>,
    /// Within-cluster sum of squares of the returned solution.
    pub objective: S,
    /// Objective after every Lloyd iteration of the winning restart.
    pub history: Vec<S>,
}

fn dist2<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Sum of squared distances of every point to its cluster mean.
pub fn within_cluster_ss<S: Scalar>(points: &[Vec<S>], labels: &[usize], k: usize) -> S {
    let centroids = cluster_means(points, labels, k);
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| dist2(p, &centroids[l]))
        .sum()
}

fn cluster_means<S: Scalar>(points: &[Vec<S>], labels: &[usize], k: usize) -> Vec<Vec<S>> {
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![S::zero(); dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, &v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            let n = S::of(c as f64);
            s.iter_mut().for_each(|v| *v /= n);
        }
    }
    sums
}

fn nearest<S: Scalar>(p: &[S], centroids: &[Vec<S>]) -> (usize, S) {
    let mut best = (0, S::infinity());
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(p, centroid);
        // strict: ties go to the lowest centroid index
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus<S: Scalar>(points: &[Vec<S>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<S>> {
    let n = points.len();
    let mut centroids = vec![points[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| dist2(p, &centroids[0]).as_f64())
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &centroids[centroids.len() - 1]).as_f64());
        }
    }
    centroids
}

fn lloyd<S: Scalar>(
    points: &[Vec<S>],
    mut centroids: Vec<Vec<S>>,
    max_iter: usize,
) -> KMeans<S> {
    let k = centroids.len();
    let mut labels = vec![usize::MAX; points.len()];
    let mut history = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (p, label) in points.iter().zip(labels.iter_mut()) {
            let (c, _) = nearest(p, &centroids);
            if c != *label {
                *label = c;
                changed = true;
            }
        }
        repair_empty(points, &mut labels, &centroids, k);
        centroids = cluster_means(points, &labels, k);
        let objective = points
            .iter()
            .zip(&labels)
            .map(|(p, &l)| dist2(p, &centroids[l]))
            .sum();
        history.push(objective);
        if !changed {
            break;
        }
    }
    KMeans {
        objective: *history.last().expect("at least one iteration"),
        labels,
        centroids,
        history,
    }
}

// Single-point transfers that lower the objective, applied after Lloyd has
// settled; every fixed point here is also a Lloyd fixed point.
fn transfer_refine<S: Scalar>(points: &[Vec<S>], run: &mut KMeans<S>, max_iter: usize) {
    let k = run.centroids.len();
    let mut counts = vec![0usize; k];
    run.labels.iter().for_each(|&l| counts[l] += 1);
    for _ in 0..max_iter {
        let mut moved = false;
        for i in 0..points.len() {
            let from = run.labels[i];
            if counts[from] < 2 {
                continue;
            }
            let nf = S::of(counts[from] as f64);
            let leave = nf / (nf - S::one()) * dist2(&points[i], &run.centroids[from]);
            let mut best: Option<(usize, S)> = None;
            for c in (0..k).filter(|&c| c != from) {
                let nc = S::of(counts[c] as f64);
                let join = nc / (nc + S::one()) * dist2(&points[i], &run.centroids[c]);
                if join < leave && best.map_or(true, |(_, b)| join < b) {
                    best = Some((c, join));
                }
            }
            if let Some((to, join)) = best {
                // guard against moves that only win by rounding
                if leave - join <= S::of(1e-12) * leave {
                    continue;
                }
                run.labels[i] = to;
                counts[from] -= 1;
                counts[to] += 1;
                run.centroids = cluster_means(points, &run.labels, k);
                moved = true;
            }
        }
        if !moved {
            break;
        }
        let objective = within_cluster_ss(points, &run.labels, k);
        run.history.push(objective);
        run.objective = objective;
    }
}

// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty<S: Scalar>(points: &[Vec<S>], labels: &mut [usize], centroids: &[Vec<S>], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut best: Option<(usize, S)> = None;
        for (i, p) in points.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = dist2(p, &centroids[labels[i]]);
            if best.map_or(true, |(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, _)) => labels[i] = empty,
            None => return,
        }
    }
}

/// Inputs with at most this many `k`-point subsets also start Lloyd from
/// every subset.
const EXHAUSTIVE_SEEDS: usize = 256;

/// Every `k`-subset of `0..n` in lexicographic order, or `None` when there
/// are more than `limit`.
fn small_subsets(n: usize, k: usize, limit: usize) -> Option<Vec<Vec<usize>>> {
    let mut count = 1usize;
    // C(n, i) only grows up to i = min(k, n - k)
    for i in 0..k.min(n - k) {
        count = count.checked_mul(n - i)? / (i + 1);
        if count > limit {
            return None;
        }
    }
    let mut out = Vec::with_capacity(count);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return Some(out);
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn kmeans<S: Scalar>(points: &[Vec<S>], params: &KMeansParams) -> Result<KMeans<S>> {
    let k = params.k;
    if k == 0 || points.len() < k {
        return Err(Error::Argument(format!(
            "k-means needs 1 <= k <= points, got k = {k} for {} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Argument("points differ in dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut inits: Vec<Vec<Vec<S>>> = (0..params.n_init.max(1)).map(|_| plus_plus(points, k, &mut rng)).collect();
    if let Some(subsets) = small_subsets(points.len(), k, EXHAUSTIVE_SEEDS) {
        inits.extend(subsets.into_iter().map(|s| s.iter().map(|&i| points[i].clone()).collect()));
    }
    let mut best: Option<KMeans<S>> = None;
    for init in inits {
        let mut run = lloyd(points, init, params.max_iter);
        transfer_refine(points, &mut run, params.max_iter);
        if best.as_ref().map_or(true, |b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
