use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::Serialize;

use super::{AbundanceMaps, ConstraintMode};
use crate::error::{HsiError, Result};
use crate::linalg::spd_condition;

/// Largest accepted condition number of `E^T E`.
pub const MAX_CONDITION: f64 = 1e12;

fn gram(e: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if e.nrows() != x.nrows() {
        return Err(HsiError::DimMismatch(format!(
            "endmembers have {} bands, data has {}",
            e.nrows(),
            x.nrows()
        )));
    }
    if e.ncols() == 0 {
        return Err(HsiError::DegenerateInput("no endmembers".into()));
    }
    let g = e.transpose() * e;
    let cond = spd_condition(&g);
    if !(cond < MAX_CONDITION) {
        return Err(HsiError::IllConditioned(cond));
    }
    Ok(g)
}

fn factor(g: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    g.clone()
        .cholesky()
        .ok_or(HsiError::IllConditioned(f64::INFINITY))
}

/// Unconstrained least squares `(E^T E)^-1 E^T x` for every column of `x`.
pub fn ucls(e: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<AbundanceMaps> {
    let g = gram(e, x)?;
    let coefficients = factor(&g)?.solve(&(e.transpose() * x));
    Ok(AbundanceMaps {
        coefficients,
        mode: ConstraintMode::Unconstrained,
    })
}

/// Sum-to-one least squares restricted to `support`; other entries are zero.
fn sum_to_one_on(g: &DMatrix<f64>, b: &DVector<f64>, support: &[usize]) -> Result<DVector<f64>> {
    let gs = g.select_rows(support).select_columns(support);
    let bs = DVector::from_iterator(support.len(), support.iter().map(|&i| b[i]));
    let chol = factor(&gs)?;
    let z = chol.solve(&bs);
    let w = chol.solve(&DVector::from_element(support.len(), 1.0));
    let shift = (z.sum() - 1.0) / w.sum();
    let mut a = DVector::zeros(g.nrows());
    for (k, &i) in support.iter().enumerate() {
        a[i] = z[k] - shift * w[k];
    }
    Ok(a)
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Per-pixel outcome of the active-set solve.
struct PixelSolve {
    a: DVector<f64>,
    iterations: usize,
    stalled: bool,
}

fn fcls_pixel(g: &DMatrix<f64>, b: &DVector<f64>) -> Result<PixelSolve> {
    let p = g.nrows();
    let cap = (p * p).max(1);
    let kkt_tol = 1e-10 * g.diagonal().max().max(f64::MIN_POSITIVE);
    let mut in_support = vec![true; p];
    let mut a = DVector::zeros(p);
    for iteration in 1..=cap {
        let support: Vec<usize> = (0..p).filter(|&i| in_support[i]).collect();
        a = sum_to_one_on(g, b, &support)?;
        let most_negative = support
            .iter()
            .copied()
            .filter(|&i| a[i] < 0.0)
            .min_by(|&i, &j| a[i].total_cmp(&a[j]));
        if let Some(i) = most_negative {
            in_support[i] = false;
            continue;
        }
        // multipliers of the clamped coordinates must be nonnegative
        let grad = g * &a - b;
        let mu = -support.iter().map(|&i| grad[i]).sum::<f64>() / support.len() as f64;
        let violated = (0..p)
            .filter(|&j| !in_support[j] && grad[j] + mu < -kkt_tol)
            .min_by(|&i, &j| (grad[i]).total_cmp(&grad[j]));
        match violated {
            Some(j) => in_support[j] = true,
            None => {
                return Ok(PixelSolve {
                    a,
                    iterations: iteration,
                    stalled: false,
                })
            }
        }
    }
    let projected = project_to_simplex(a.as_slice());
    Ok(PixelSolve {
        a: DVector::from_vec(projected),
        iterations: cap,
        stalled: true,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FclsReport {
    /// Pixels whose active-set loop hit the `p^2` cap; their abundances are
    /// the simplex projection of the last iterate.
    pub stalled: Vec<usize>,
    pub max_iterations: usize,
}

/// Constrained least squares abundances for every column of `x`.
pub fn fcls(e: &DMatrix<f64>, x: &DMatrix<f64>, mode: ConstraintMode) -> Result<AbundanceMaps> {
    fcls_with_report(e, x, mode).map(|(a, _)| a)
}

pub fn fcls_with_report(
    e: &DMatrix<f64>,
    x: &DMatrix<f64>,
    mode: ConstraintMode,
) -> Result<(AbundanceMaps, FclsReport)> {
    if mode == ConstraintMode::Unconstrained {
        return Ok((ucls(e, x)?, FclsReport::default()));
    }
    let g = gram(e, x)?;
    let bt = e.transpose() * x;
    let p = e.ncols();
    let all: Vec<usize> = (0..p).collect();
    let solves: Vec<PixelSolve> = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let b = bt.column(j).into_owned();
            match mode {
                ConstraintMode::SumToOne => sum_to_one_on(&g, &b, &all).map(|a| PixelSolve {
                    a,
                    iterations: 1,
                    stalled: false,
                }),
                _ => fcls_pixel(&g, &b),
            }
        })
        .collect::<Result<_>>()?;
    let mut report = FclsReport::default();
    let mut coefficients = DMatrix::zeros(p, x.ncols());
    for (j, s) in solves.into_iter().enumerate() {
        report.max_iterations = report.max_iterations.max(s.iterations);
        if s.stalled {
            report.stalled.push(j);
        }
        coefficients.set_column(j, &s.a);
    }
    if !report.stalled.is_empty() {
        log::warn!(
            "active set stalled on {} pixels; used simplex projection",
            report.stalled.len()
        );
    }
    Ok((AbundanceMaps { coefficients, mode }, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn endmembers() -> DMatrix<f64> {
        DMatrix::from_column_slice(
            4,
            3,
            &[0.9, 0.7, 0.2, 0.1, 0.1, 0.3, 0.8, 0.6, 0.4, 0.4, 0.5, 0.9],
        )
    }

    #[test]
    fn endmember_pixels_are_one_hot() {
        let e = endmembers();
        let a = fcls(&e, &e, ConstraintMode::Full).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((a.coefficients[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn half_half_mixture() {
        let e = endmembers();
        let x = (e.column(0) + e.column(1)) * 0.5;
        let a = fcls(&e, &DMatrix::from_columns(&[x]), ConstraintMode::Full).unwrap();
        assert!((a.coefficients[(0, 0)] - 0.5).abs() < 1e-6);
        assert!((a.coefficients[(1, 0)] - 0.5).abs() < 1e-6);
        assert!(a.coefficients[(2, 0)].abs() < 1e-6);
    }

    #[test]
    fn ucls_exact_recovery() {
        let e = endmembers();
        let truth = DMatrix::from_column_slice(3, 2, &[0.2, -0.3, 1.4, 2.0, 0.0, 0.5]);
        let a = ucls(&e, &(&e * &truth)).unwrap();
        assert!((a.coefficients - truth).abs().max() < 1e-8);
    }

    #[test]
    fn outside_pixels_satisfy_constraints() {
        let e = endmembers();
        let x = DMatrix::from_fn(4, 50, |r, c| (((r * 13 + c * 7) % 17) as f64 / 8.0) - 0.5);
        let (a, report) = fcls_with_report(&e, &x, ConstraintMode::Full).unwrap();
        assert!(a.satisfies_full());
        assert!(report.stalled.is_empty());
        let s = fcls(&e, &x, ConstraintMode::SumToOne).unwrap();
        assert!(s
            .coefficients
            .column_iter()
            .all(|c| (c.sum() - 1.0).abs() < 1e-9));
    }

    #[test]
    fn collinear_endmembers_rejected() {
        let e = DMatrix::from_column_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(ucls(&e, &e), Err(HsiError::IllConditioned(_))));
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(project_to_simplex(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }
}
