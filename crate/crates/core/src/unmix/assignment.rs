use nalgebra::DMatrix;
use serde::Serialize;

use super::sad;
use crate::error::{HsiError, Result};

/// Minimum-cost assignment of rows to distinct columns (`rows <= cols`).
/// Returns the column chosen for each row.
pub fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let (n, m) = cost.shape();
    assert!(n <= m, "hungarian needs rows <= cols");
    // potentials and matching use 1-based indices with 0 as a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut owner = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assigned = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assigned[owner[j] - 1] = j - 1;
        }
    }
    assigned
}

/// Optimal pairing of estimated endmembers to reference endmembers by
/// spectral angle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndmemberMatch {
    /// Estimated column paired with each reference column.
    pub permutation: Vec<usize>,
    /// Spectral angle of each pair, in reference order.
    pub sad: Vec<f64>,
}

impl EndmemberMatch {
    pub fn max_sad(&self) -> f64 {
        self.sad.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_sad(&self) -> f64 {
        self.sad.iter().sum::<f64>() / self.sad.len().max(1) as f64
    }
}

pub fn match_endmembers(
    reference: &DMatrix<f64>,
    estimate: &DMatrix<f64>,
) -> Result<EndmemberMatch> {
    if reference.nrows() != estimate.nrows() {
        return Err(HsiError::DimMismatch(format!(
            "reference has {} bands, estimate has {}",
            reference.nrows(),
            estimate.nrows()
        )));
    }
    if reference.ncols() > estimate.ncols() {
        return Err(HsiError::DimMismatch(format!(
            "{} reference endmembers but only {} estimated",
            reference.ncols(),
            estimate.ncols()
        )));
    }
    let mut cost = DMatrix::zeros(reference.ncols(), estimate.ncols());
    for (i, r) in reference.column_iter().enumerate() {
        for (j, e) in estimate.column_iter().enumerate() {
            cost[(i, j)] = sad(r.as_slice(), e.as_slice())?;
        }
    }
    let permutation = hungarian(&cost);
    let sad = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[(i, j)])
        .collect();
    Ok(EndmemberMatch { permutation, sad })
}
