use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HsiError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansResult {
    /// Cluster index per column, `0..K`.
    pub assignments: Vec<usize>,
    /// `f x K`.
    pub centroids: DMatrix<f64>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(x: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, j: usize) -> f64 {
    x.column(i)
        .iter()
        .zip(c.column(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn plus_plus_init(x: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = x.ncols();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x, i, x, chosen[0])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if t < d {
                        break;
                    }
                    t -= d;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            // all remaining points coincide with a centroid
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x, i, x, next));
        }
    }
    DMatrix::from_fn(x.nrows(), k, |r, j| x[(r, chosen[j])])
}

fn assign(x: &DMatrix<f64>, centroids: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>) {
    (0..x.ncols())
        .into_par_iter()
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for j in 0..centroids.ncols() {
                let d = sq_dist(x, i, centroids, j);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .unzip()
}

/// Lloyd's algorithm from a seeded k-means++ start. Columns are samples.
///
/// Stops when assignments stop changing or after `max_iters` rounds. A
/// cluster that empties is moved onto the point farthest from its centroid.
pub fn kmeans(x: &DMatrix<f64>, k: usize, max_iters: usize, seed: u64) -> Result<KMeansResult> {
    let n = x.ncols();
    if k == 0 {
        return Err(HsiError::InvalidConfig(
            "k-means needs at least one cluster".into(),
        ));
    }
    if k > n {
        return Err(HsiError::KTooLarge { k, available: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(x, k, &mut rng);
    let (mut assignments, mut dist) = assign(x, &centroids);
    let mut trace = vec![dist.iter().sum::<f64>()];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let mut sums = DMatrix::zeros(x.nrows(), k);
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            let mut s = sums.column_mut(a);
            s += x.column(i);
        }
        for (j, &count) in counts.iter().enumerate() {
            if count > 0 {
                centroids.set_column(j, &(sums.column(j) / count as f64));
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .expect("n >= k >= 1");
                centroids.set_column(j, &x.column(far));
                dist[far] = 0.0;
            }
        }
        let (next, next_dist) = assign(x, &centroids);
        trace.push(next_dist.iter().sum());
        let unchanged = next == assignments;
        assignments = next;
        dist = next_dist;
        if unchanged {
            converged = true;
            break;
        }
    }
    Ok(KMeansResult {
        assignments,
        centroids,
        inertia: *trace.last().expect("trace starts non-empty"),
        inertia_trace: trace,
        iterations,
        converged,
    })
}
