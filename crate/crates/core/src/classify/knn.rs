use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HsiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceMetric {
    Euclidean,
    /// Angle between spectra, in radians.
    SpectralAngle,
}

fn column_norms(x: &DMatrix<f64>) -> Vec<f64> {
    x.column_iter().map(|c| c.norm()).collect()
}

/// Brute-force k-nearest-neighbour vote. Columns are samples.
///
/// The winner is the class with the most votes; ties go to the smaller
/// summed distance, then to the lower class id.
pub fn knn_classify(
    train_x: &DMatrix<f64>,
    train_y: &[u32],
    test_x: &DMatrix<f64>,
    k: usize,
    metric: DistanceMetric,
) -> Result<Vec<u32>> {
    let m = train_x.ncols();
    if m == 0 {
        return Err(HsiError::EmptyTrainSet);
    }
    if train_y.len() != m {
        return Err(HsiError::LengthMismatch {
            left: m,
            right: train_y.len(),
        });
    }
    if test_x.nrows() != train_x.nrows() && test_x.ncols() > 0 {
        return Err(HsiError::DimMismatch(format!(
            "train has {} features, test has {}",
            train_x.nrows(),
            test_x.nrows()
        )));
    }
    if k == 0 || k > m {
        return Err(HsiError::KTooLarge { k, available: m });
    }
    let train_norms = column_norms(train_x);
    let test_norms = column_norms(test_x);
    if metric == DistanceMetric::SpectralAngle
        && train_norms.iter().chain(&test_norms).any(|&n| n == 0.0)
    {
        return Err(HsiError::ZeroVector);
    }
    let classes = train_y.iter().copied().max().unwrap_or(0) as usize;
    let predicted = (0..test_x.ncols())
        .into_par_iter()
        .map(|t| {
            let q = test_x.column(t);
            let mut dist: Vec<(f64, usize)> = train_x
                .column_iter()
                .enumerate()
                .map(|(i, c)| {
                    let d = match metric {
                        DistanceMetric::Euclidean => (c - q).norm(),
                        DistanceMetric::SpectralAngle => (c.dot(&q)
                            / (train_norms[i] * test_norms[t]))
                            .clamp(-1.0, 1.0)
                            .acos(),
                    };
                    (d, i)
                })
                .collect();
            if k < m {
                dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            }
            let mut votes = vec![0usize; classes + 1];
            let mut summed = vec![0.0f64; classes + 1];
            for &(d, i) in &dist[..k] {
                votes[train_y[i] as usize] += 1;
                summed[train_y[i] as usize] += d;
            }
            let mut best = 0usize;
            for c in 1..=classes {
                let better = votes[c] > votes[best]
                    || (votes[c] == votes[best]
                        && votes[c] > 0
                        && (best == 0 || summed[c] < summed[best]));
                if better {
                    best = c;
                }
            }
            best as u32
        })
        .collect();
    Ok(predicted)
}
