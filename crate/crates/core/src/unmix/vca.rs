use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::EndmemberSet;
use crate::error::{HsiError, Result};
use crate::linalg::{center, covariance_of_centered, row_means, sym_eigen_desc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VcaMode {
    /// High SNR: data projected onto `p` dims and scaled onto a hyperplane.
    Projective,
    /// Low SNR: `p - 1` principal components plus a constant coordinate.
    Subspace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcaResult {
    pub endmembers: EndmemberSet,
    pub mode: VcaMode,
    /// Internal SNR estimate in dB (infinite for noiseless data).
    pub snr_db: f64,
}

fn leading_vectors(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (_, vecs) = sym_eigen_desc(m);
    vecs.columns(0, k).into_owned()
}

/// Projective scaling `x / (u^T x)`, or `None` if some pixel falls on the
/// wrong side of the hyperplane.
fn projective(r: &DMatrix<f64>, p: usize) -> Option<DMatrix<f64>> {
    let n = r.ncols() as f64;
    let ud = leading_vectors(&(r * r.transpose() / n), p);
    let x = ud.transpose() * r;
    let u = row_means(&x);
    let mut y = x;
    for mut col in y.column_iter_mut() {
        let s = u.dot(&col);
        if !(s > 0.0) {
            return None;
        }
        col /= s;
    }
    Some(y)
}

fn subspace(rc: &DMatrix<f64>, cov: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    let ud = leading_vectors(cov, p - 1);
    let x = ud.transpose() * rc;
    let c = x.column_iter().map(|col| col.norm()).fold(0.0, f64::max);
    let mut y = DMatrix::from_element(p, x.ncols(), c);
    y.rows_mut(0, p - 1).copy_from(&x);
    y
}

/// Orthonormal basis of the column space of `m`.
fn range_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| top > 0.0 && svd.singular_values[i] > 1e-12 * top)
        .collect();
    u.select_columns(&keep)
}

/// Vertex component analysis. Returns `p` columns of `x`.
pub fn vca(x: &DMatrix<f64>, p: usize, seed: u64) -> Result<VcaResult> {
    let (l, n) = x.shape();
    if p == 0 {
        return Err(HsiError::InvalidConfig(
            "need at least one endmember".into(),
        ));
    }
    if p > l || p > n {
        return Err(HsiError::KTooLarge {
            k: p,
            available: l.min(n),
        });
    }
    let mean = row_means(x);
    let rc = center(x, &mean);
    let cov = covariance_of_centered(&rc);
    let ud = leading_vectors(&cov, p);
    let xp = ud.transpose() * &rc;
    let py = x.norm_squared() / n as f64;
    let px = xp.norm_squared() / n as f64 + mean.norm_squared();
    let noise = py - px;
    let snr_db = if noise <= 1e-14 * py {
        f64::INFINITY
    } else {
        10.0 * ((px - p as f64 / l as f64 * py) / noise).log10()
    };
    let threshold = 15.0 + 10.0 * (p as f64).log10();
    let (y, mode) = match (snr_db > threshold || p == 1)
        .then(|| projective(x, p))
        .flatten()
    {
        Some(y) => (y, VcaMode::Projective),
        None => (subspace(&rc, &cov, p), VcaMode::Subspace),
    };
    let scale = y.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = Vec::with_capacity(p);
    for round in 0..p {
        let w = DVector::<f64>::from_iterator(p, (0..p).map(|_| StandardNormal.sample(&mut rng)));
        let spanned = if picked.is_empty() {
            let mut e = DMatrix::zeros(p, 1);
            e[(p - 1, 0)] = 1.0;
            e
        } else {
            y.select_columns(&picked)
        };
        let q = range_basis(&spanned);
        let mut f = &w - &q * (q.transpose() * &w);
        let fnorm = f.norm();
        if fnorm <= 1e-12 * w.norm() {
            return Err(HsiError::RankCollapse(round));
        }
        f /= fnorm;
        let v = y.tr_mul(&f);
        let mut best = 0;
        for i in 1..n {
            if v[i].abs() > v[best].abs() {
                best = i;
            }
        }
        if v[best].abs() <= 1e-12 * scale || picked.contains(&best) {
            return Err(HsiError::RankCollapse(round));
        }
        picked.push(best);
    }
    Ok(VcaResult {
        endmembers: EndmemberSet::from_pixels(x, picked)?,
        mode,
        snr_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_endpoints() {
        let a = [0.2, 0.5, 0.9];
        let b = [0.8, 0.4, 0.1];
        let ts = [0.3, 0.0, 0.7, 0.5, 1.0, 0.1];
        let x = DMatrix::from_fn(3, ts.len(), |r, c| ts[c] * a[r] + (1.0 - ts[c]) * b[r]);
        let res = vca(&x, 2, 4).unwrap();
        let mut px = res.endmembers.pixels.clone().unwrap();
        px.sort_unstable();
        assert_eq!(px, vec![1, 4]);
        assert_eq!(res.mode, VcaMode::Projective);
    }

    #[test]
    fn too_many_endmembers() {
        let x = DMatrix::from_element(3, 2, 1.0);
        assert!(matches!(vca(&x, 3, 0), Err(HsiError::KTooLarge { .. })));
    }
}
