use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HsiError, Result};

/// Histogram bins used for band entropy.
pub const ENTROPY_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandCriterion {
    /// Greedy sum of per-band entropies, each penalized by its mean absolute
    /// correlation with bands already chosen.
    MaxEntropy,
    /// Smallest maximum pairwise absolute correlation.
    MinCorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSubset {
    /// Sorted, unique band indices.
    pub indices: Vec<usize>,
    pub criterion: BandCriterion,
    /// Achieved objective (higher is better). For `MinCorrelation` this is
    /// minus the largest pairwise absolute correlation.
    pub score: f64,
}

/// Absolute Pearson correlation between bands (rows of `x`). Zero-variance
/// bands count as fully correlated with everything.
fn abs_correlation(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (l, n) = x.shape();
    let mut centered = x.clone();
    let mut norms = vec![0.0; l];
    for (b, mut row) in centered.row_iter_mut().enumerate() {
        let m = row.sum() / n as f64;
        row.add_scalar_mut(-m);
        norms[b] = row.norm();
    }
    let gram = &centered * centered.transpose();
    DMatrix::from_fn(l, l, |i, j| {
        if norms[i] == 0.0 || norms[j] == 0.0 {
            1.0
        } else {
            (gram[(i, j)] / (norms[i] * norms[j])).abs().min(1.0)
        }
    })
}

/// Shannon entropy (bits) of a band over `ENTROPY_BINS` uniform bins
/// spanning its own min..max.
fn band_entropy(row: impl Iterator<Item = f64> + Clone) -> f64 {
    let (lo, hi) = row
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    let span = hi - lo;
    if !(span > 0.0) {
        return 0.0;
    }
    let mut counts = [0usize; ENTROPY_BINS];
    let mut total = 0usize;
    for v in row {
        let bin = (((v - lo) / span) * ENTROPY_BINS as f64) as usize;
        counts[bin.min(ENTROPY_BINS - 1)] += 1;
        total += 1;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

fn max_pairwise(corr: &DMatrix<f64>, set: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for (i, &a) in set.iter().enumerate() {
        for &b in &set[i + 1..] {
            worst = worst.max(corr[(a, b)]);
        }
    }
    worst
}

/// Greedy minimax-correlation search started from every band pair.
///
/// Each seed pair is extended one band at a time with the band whose largest
/// correlation to the current set is smallest. Since every pair is tried, the
/// result is the exhaustive optimum for `k <= 3`.
fn min_correlation(corr: &DMatrix<f64>, k: usize) -> (Vec<usize>, f64) {
    let l = corr.nrows();
    if k == 1 {
        return (vec![0], 0.0);
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut running = vec![0.0f64; l];
    let mut chosen = vec![false; l];
    for a in 0..l {
        for b in a + 1..l {
            let mut set = vec![a, b];
            chosen.iter_mut().for_each(|c| *c = false);
            chosen[a] = true;
            chosen[b] = true;
            for (c, r) in running.iter_mut().enumerate() {
                *r = corr[(a, c)].max(corr[(b, c)]);
            }
            while set.len() < k {
                let next = (0..l)
                    .filter(|&c| !chosen[c])
                    .min_by(|&p, &q| running[p].total_cmp(&running[q]).then(p.cmp(&q)))
                    .expect("k <= l leaves a candidate");
                chosen[next] = true;
                set.push(next);
                for (c, r) in running.iter_mut().enumerate() {
                    *r = r.max(corr[(next, c)]);
                }
            }
            set.sort_unstable();
            let value = max_pairwise(corr, &set);
            let better = match &best {
                None => true,
                Some((bv, bs)) => value < *bv || (value == *bv && set < *bs),
            };
            if better {
                best = Some((value, set));
            }
        }
    }
    let (v, s) = best.expect("l >= 2 when k >= 2");
    (s, -v)
}

fn max_entropy(x: &DMatrix<f64>, corr: &DMatrix<f64>, k: usize) -> (Vec<usize>, f64) {
    let l = x.nrows();
    let entropy: Vec<f64> = (0..l)
        .map(|b| band_entropy(x.row(b).iter().copied()))
        .collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut score = 0.0;
    while chosen.len() < k {
        let gain = |c: usize| {
            let penalty = if chosen.is_empty() {
                0.0
            } else {
                chosen.iter().map(|&s| corr[(c, s)]).sum::<f64>() / chosen.len() as f64
            };
            entropy[c] - penalty
        };
        let (best, g) = (0..l)
            .filter(|c| !chosen.contains(c))
            .map(|c| (c, gain(c)))
            .fold(None, |acc: Option<(usize, f64)>, (c, g)| match acc {
                Some((_, bg)) if bg >= g => acc,
                _ => Some((c, g)),
            })
            .expect("k <= l leaves a candidate");
        chosen.push(best);
        score += g;
    }
    chosen.sort_unstable();
    (chosen, score)
}

/// Picks `k` of the `l` bands (rows of `x`). Ties go to the lowest index.
pub fn select_bands(x: &DMatrix<f64>, k: usize, criterion: BandCriterion) -> Result<BandSubset> {
    let l = x.nrows();
    if k > l {
        return Err(HsiError::KTooLarge { k, available: l });
    }
    if k == 0 {
        return Ok(BandSubset {
            indices: Vec::new(),
            criterion,
            score: 0.0,
        });
    }
    let corr = abs_correlation(x);
    let (indices, score) = match criterion {
        BandCriterion::MinCorrelation => min_correlation(&corr, k),
        BandCriterion::MaxEntropy => max_entropy(x, &corr, k),
    };
    Ok(BandSubset {
        indices,
        criterion,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(l: usize, n: usize, seed: usize) -> DMatrix<f64> {
        DMatrix::from_fn(l, n, |r, c| {
            (((r + 1) * 7919 + c * 104_729 + seed * 31) % 1009) as f64 / 1009.0
                + 0.01 * (r * c) as f64
        })
    }

    #[test]
    fn all_bands() {
        let x = data(5, 40, 1);
        for crit in [BandCriterion::MaxEntropy, BandCriterion::MinCorrelation] {
            assert_eq!(
                select_bands(&x, 5, crit).unwrap().indices,
                vec![0, 1, 2, 3, 4]
            );
        }
    }

    #[test]
    fn duplicate_band_never_paired() {
        let mut x = data(3, 50, 2);
        let b0 = x.row(0).into_owned();
        x.set_row(2, &b0);
        let s = select_bands(&x, 2, BandCriterion::MinCorrelation).unwrap();
        assert_eq!(s.indices, vec![0, 1]);
    }

    #[test]
    fn too_many() {
        assert!(matches!(
            select_bands(&data(3, 10, 0), 4, BandCriterion::MaxEntropy),
            Err(HsiError::KTooLarge { k: 4, available: 3 })
        ));
    }

    #[test]
    fn entropy_bounds() {
        assert_eq!(band_entropy([1.0, 1.0, 1.0].into_iter()), 0.0);
        let uniform: Vec<f64> = (0..ENTROPY_BINS).map(|i| i as f64).collect();
        assert!((band_entropy(uniform.into_iter()) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn max_entropy_is_valid_and_deterministic() {
        let x = data(9, 60, 3);
        let a = select_bands(&x, 4, BandCriterion::MaxEntropy).unwrap();
        let b = select_bands(&x, 4, BandCriterion::MaxEntropy).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.indices.len(), 4);
        assert!(a.indices.windows(2).all(|w| w[0] < w[1]));
        assert!(a.indices.iter().all(|&i| i < 9));
    }
}
