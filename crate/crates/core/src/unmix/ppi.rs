use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HsiError, Result};

/// Smallest accepted number of skewers.
pub const MIN_SKEWERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpiResult {
    /// Pixels with at least `threshold` hits, most hits first, ties by index.
    pub candidates: Vec<usize>,
    /// Extremity hits per pixel.
    pub counts: Vec<u32>,
}

/// Pixel purity index: counts how often each column of `x` is the minimum
/// or maximum projection onto a random unit direction. Ties go to the
/// lowest pixel index.
pub fn ppi(x: &DMatrix<f64>, n_skewers: usize, seed: u64, threshold: u32) -> Result<PpiResult> {
    if n_skewers < MIN_SKEWERS {
        return Err(HsiError::InvalidConfig(format!(
            "PPI needs at least {MIN_SKEWERS} skewers, got {n_skewers}"
        )));
    }
    let (l, n) = x.shape();
    if n == 0 {
        return Err(HsiError::DegenerateInput("no pixels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut skewers = Vec::with_capacity(n_skewers);
    while skewers.len() < n_skewers {
        let v = DVector::<f64>::from_iterator(l, (0..l).map(|_| StandardNormal.sample(&mut rng)));
        let norm = v.norm();
        if norm > 0.0 {
            skewers.push(v / norm);
        }
    }
    let hits: Vec<(usize, usize)> = skewers
        .par_iter()
        .map(|s| {
            let proj = x.tr_mul(s);
            let (mut lo, mut hi) = (0, 0);
            for i in 1..n {
                if proj[i] < proj[lo] {
                    lo = i;
                }
                if proj[i] > proj[hi] {
                    hi = i;
                }
            }
            (lo, hi)
        })
        .collect();
    let mut counts = vec![0u32; n];
    for (lo, hi) in hits {
        counts[lo] += 1;
        if hi != lo {
            counts[hi] += 1;
        }
    }
    let mut candidates: Vec<usize> = (0..n).filter(|&i| counts[i] >= threshold.max(1)).collect();
    candidates.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    Ok(PpiResult { candidates, counts })
}
