//! Dense linear-algebra helpers shared by the fitting routines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{HsiError, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Flips each column so that its largest-magnitude entry is positive.
pub fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0.0f64;
        for &x in col.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// `U f(D) U^T` for a symmetric matrix with eigenvalues mapped through `f`.
pub fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen_desc(m);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(vals.len(), vals.into_iter().map(f)));
    &vecs * d * vecs.transpose()
}

/// Row means of a `features x samples` matrix.
pub fn row_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.ncols().max(1) as f64;
    DVector::from_iterator(x.nrows(), x.row_iter().map(|r| r.sum() / n))
}

/// Subtracts `mean` from every column.
pub fn center(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        col -= mean;
    }
    c
}

/// `(1/n) C C^T` for centred data `C`, symmetrized.
pub fn covariance_of_centered(c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.ncols().max(1) as f64;
    let cov = c * c.transpose() / n;
    (&cov + cov.transpose()) * 0.5
}

/// Orthonormal basis of the column space of `a`.
pub fn orthonormal_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone()
        .qr()
        .q()
        .columns(0, a.ncols().min(a.nrows()))
        .into_owned()
}

/// Principal angles between the column spaces of `a` and `b`, ascending.
///
/// Computed from sines (singular values of the part of `b` orthogonal to
/// `a`), which keeps resolution for tiny angles.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let mut s: Vec<f64> = resid
        .svd(false, false)
        .singular_values
        .iter()
        .map(|v| v.clamp(0.0, 1.0).asin())
        .collect();
    s.sort_by(f64::total_cmp);
    s
}

pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    principal_angles(a, b).into_iter().fold(0.0, f64::max)
}

/// Ratio of extreme eigenvalues of a symmetric positive semidefinite matrix.
pub fn spd_condition(m: &DMatrix<f64>) -> f64 {
    let (vals, _) = sym_eigen_desc(m);
    let hi = vals.first().copied().unwrap_or(0.0);
    let lo = vals.last().copied().unwrap_or(0.0);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Solves `m x = rhs` for symmetric positive definite `m`.
pub fn spd_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or(HsiError::IllConditioned(f64::INFINITY))?;
    Ok(chol.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        let (vals, mut vecs) = sym_eigen_desc(&m);
        assert_eq!(vals, vec![5.0, 2.0, 1.0]);
        fix_signs(&mut vecs);
        assert_eq!(vecs[(1, 0)], 1.0);
    }

    #[test]
    fn tiny_angle_resolution() {
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 1, &[1.0, 1e-10, 0.0]);
        let ang = max_principal_angle(&a, &b);
        assert!((ang - 1e-10).abs() < 1e-15, "{ang}");
        let c = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        assert!((max_principal_angle(&a, &c) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn inverse_square_root() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = sym_apply(&m, |v| v.powf(-0.5));
        let id = &s * &m * &s;
        assert!((id - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
