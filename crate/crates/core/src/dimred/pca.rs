use nalgebra::DMatrix;

use super::{LinearProjection, ProjectionKind};
use crate::error::{HsiError, Result};
use crate::linalg::{center, covariance_of_centered, fix_signs, row_means, sym_eigen_desc};

/// Principal components of the columns of `x` (`bands x pixels`).
///
/// The covariance uses the `1/n` normalization. Each eigenvector is signed so
/// that its largest-magnitude entry is positive. Zero eigenvalues are fine.
pub fn pca_fit(x: &DMatrix<f64>, k: usize) -> Result<LinearProjection> {
    let (l, n) = x.shape();
    if n < 2 {
        return Err(HsiError::DegenerateInput(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if k > l {
        return Err(HsiError::KTooLarge { k, available: l });
    }
    let mean = row_means(x);
    let cov = covariance_of_centered(&center(x, &mean));
    let (values, vectors) = sym_eigen_desc(&cov);
    let mut basis = vectors.columns(0, k).into_owned();
    fix_signs(&mut basis);
    Ok(LinearProjection {
        mean,
        basis,
        scores: values.into_iter().take(k).collect(),
        kind: ProjectionKind::Pca,
        inverse: None,
    })
}
