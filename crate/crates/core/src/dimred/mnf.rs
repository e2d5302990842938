use nalgebra::DMatrix;

use super::{LinearProjection, ProjectionKind};
use crate::cube::HyperCube;
use crate::error::{HsiError, Result};
use crate::linalg::{
    center, covariance_of_centered, fix_signs, row_means, sym_apply, sym_eigen_desc,
};

/// Shift-difference noise covariance: half the covariance of
/// `x(r, c) - x(r, c + 1)` over all horizontally adjacent pixel pairs.
pub fn estimate_noise_covariance(cube: &HyperCube) -> Result<DMatrix<f64>> {
    let (h, w, l) = (cube.height(), cube.width(), cube.bands());
    if w < 2 {
        return Err(HsiError::TooNarrow(w));
    }
    let mut diffs = DMatrix::zeros(l, h * (w - 1));
    let mut j = 0;
    for r in 0..h {
        for c in 0..w - 1 {
            let a = cube.spectrum(r, c)?;
            let b = cube.spectrum(r, c + 1)?;
            for (k, (p, q)) in a.iter().zip(b).enumerate() {
                diffs[(k, j)] = p - q;
            }
            j += 1;
        }
    }
    let mean = row_means(&diffs);
    Ok(covariance_of_centered(&center(&diffs, &mean)) * 0.5)
}

/// Minimum noise fraction transform of the columns of `x`.
///
/// The data are whitened by `(Sigma_n + eps I)^(-1/2)` with
/// `eps = 1e-10 * trace / l`, then decomposed by PCA. Whitened-covariance
/// eigenvalues are `1 + SNR`; `scores` holds the SNRs, clipped at zero.
pub fn mnf_fit(x: &DMatrix<f64>, noise_cov: &DMatrix<f64>, k: usize) -> Result<LinearProjection> {
    let (l, n) = x.shape();
    if noise_cov.shape() != (l, l) {
        return Err(HsiError::DimMismatch(format!(
            "noise covariance is {}x{}, data has {l} bands",
            noise_cov.nrows(),
            noise_cov.ncols()
        )));
    }
    if n < 2 {
        return Err(HsiError::DegenerateInput(format!(
            "MNF needs at least 2 samples, got {n}"
        )));
    }
    if k > l {
        return Err(HsiError::KTooLarge { k, available: l });
    }
    let trace = noise_cov.trace();
    if !(trace > 0.0) {
        return Err(HsiError::SingularNoise);
    }
    let eps = 1e-10 * trace / l as f64;
    let reg = noise_cov + DMatrix::identity(l, l) * eps;
    let whiten = sym_apply(&reg, |v| v.max(eps).powf(-0.5));
    let unwhiten = sym_apply(&reg, |v| v.max(eps).sqrt());

    let mean = row_means(x);
    let cov = covariance_of_centered(&center(x, &mean));
    let white_cov = &whiten * cov * &whiten;
    let (values, vectors) = sym_eigen_desc(&white_cov);
    let mut v = vectors.columns(0, k).into_owned();
    fix_signs(&mut v);

    Ok(LinearProjection {
        mean,
        basis: &whiten * &v,
        scores: values
            .into_iter()
            .take(k)
            .map(|e| (e - 1.0).max(0.0))
            .collect(),
        kind: ProjectionKind::Mnf,
        inverse: Some(unwhiten * v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_cube_has_no_noise() {
        let c = HyperCube::filled(3, 4, 2, 0.3);
        let n = estimate_noise_covariance(&c).unwrap();
        assert_eq!(n.amax(), 0.0);
    }

    #[test]
    fn too_narrow() {
        let c = HyperCube::filled(3, 1, 2, 0.3);
        assert!(matches!(
            estimate_noise_covariance(&c),
            Err(HsiError::TooNarrow(1))
        ));
    }

    #[test]
    fn singular_noise() {
        let x = DMatrix::from_fn(2, 5, |r, c| (r * c) as f64);
        assert!(matches!(
            mnf_fit(&x, &DMatrix::zeros(2, 2), 1),
            Err(HsiError::SingularNoise)
        ));
    }

    #[test]
    fn full_rank_inverse() {
        let x = DMatrix::from_fn(3, 12, |r, c| ((r * 5 + c * 7) % 11) as f64 + 0.3 * r as f64);
        let noise = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2]);
        let p = mnf_fit(&x, &noise, 3).unwrap();
        let back = p.reconstruct(&p.project(&x).unwrap()).unwrap();
        assert!((back - &x).norm() / x.norm() < 1e-9);
        assert!(p.scores.windows(2).all(|w| w[0] >= w[1]));
    }
}
