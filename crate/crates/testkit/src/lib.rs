//! Dense reference implementations for the test suites.
//!
//! Nothing here depends on `hsi-core`: every operator is materialized from its
//! definition and every problem is solved by brute force, so agreement with
//! the library is evidence rather than tautology.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows x cols` matrix of uniform draws in `[lo, hi)`.
pub fn uniform_matrix(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(lo..hi))
}

/// `rows x cols` matrix of standard normal draws.
pub fn normal_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
}

/// `len` samples that survive storage as ENVI data type `code` unchanged:
/// in-range integers for the integer types, `f32` values for type 4.
pub fn representable_samples(code: u32, len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len)
        .map(|_| match code {
            1 => r.random_range(0..=255u32) as f64,
            2 => r.random_range(-32768..=32767i32) as f64,
            12 => r.random_range(0..=65535u32) as f64,
            4 => (r.random_range(-1.0e3..1.0e3f64) as f32) as f64,
            5 => r.random_range(-1.0e6..1.0e6f64) * (1.0 + f64::EPSILON),
            other => panic!("unknown data type code {other}"),
        })
        .collect()
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Eigenvalues are sorted
/// descending; eigenvectors are the matching columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square input");
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Sample covariance of the columns of `x` (rows are variables), divisor `n - 1`.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        let m = row.sum() / n as f64;
        row.add_scalar_mut(-m);
    }
    &c * c.transpose() / (n as f64 - 1.0)
}

/// Largest principal angle (radians) between the column spaces of `a` and
/// `b`, from the sine form: the spectral norm of `(I - Qa Qa^T) Qb`.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let s = resid.svd(false, false).singular_values;
    s.iter().copied().fold(0.0, f64::max).min(1.0).asin()
}

/// Half-sample symmetric index reflection into `0..n`.
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Dense `hw x hw` matrix of the 2-D convolution
/// `y[i, j] = sum_{u, v} k[u, v] x[i + ar - u, j + ac - v]` with anchor
/// `(kr / 2, kc / 2)` and reflected borders. Pixels are row-major.
pub fn convolution_matrix(
    h: usize,
    w: usize,
    kernel: &[f64],
    kr: usize,
    kc: usize,
) -> DMatrix<f64> {
    let n = h * w;
    let (ar, ac) = ((kr / 2) as isize, (kc / 2) as isize);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..h {
        for j in 0..w {
            for u in 0..kr {
                for v in 0..kc {
                    let r = reflect_index(i as isize + ar - u as isize, h);
                    let c = reflect_index(j as isize + ac - v as isize, w);
                    m[(i * w + j, r * w + c)] += kernel[u * kc + v];
                }
            }
        }
    }
    m
}

/// Dense 5-point Laplacian; a neighbour outside the plane is replaced by the
/// centre sample.
pub fn laplacian_matrix(h: usize, w: usize) -> DMatrix<f64> {
    let n = h * w;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..h as isize {
        for j in 0..w as isize {
            let p = (i as usize) * w + j as usize;
            for (di, dj) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let (r, c) = (reflect_index(i + di, h), reflect_index(j + dj, w));
                m[(p, r * w + c)] += 1.0;
            }
            m[(p, p)] -= 4.0;
        }
    }
    m
}

/// Diagonal selection matrix of observed pixels.
pub fn mask_matrix(observed: &[bool]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        observed.len(),
        observed.iter().map(|&f| if f { 1.0 } else { 0.0 }),
    ))
}

/// `(h / s)(w / s) x hw` matrix keeping pixel `(i * s, j * s)`.
pub fn decimation_matrix(h: usize, w: usize, s: usize) -> DMatrix<f64> {
    let (hl, wl) = (h / s, w / s);
    let mut m = DMatrix::zeros(hl * wl, h * w);
    for i in 0..hl {
        for j in 0..wl {
            m[(i * wl + j, (i * s) * w + j * s)] = 1.0;
        }
    }
    m
}

/// The same plane operator applied to each of `bands` stacked planes.
pub fn per_band(op: &DMatrix<f64>, bands: usize) -> DMatrix<f64> {
    DMatrix::<f64>::identity(bands, bands).kronecker(op)
}

/// Spectral mixing `R` (`m x l`) applied at every one of `pixels` pixels of a
/// band-sequential vector.
pub fn spectral_matrix(response: &DMatrix<f64>, pixels: usize) -> DMatrix<f64> {
    response.kronecker(&DMatrix::<f64>::identity(pixels, pixels))
}

/// Solves `(sum_i A_i^T A_i + lambda L^T L) x = sum_i A_i^T y_i` densely.
pub fn regularized_least_squares(
    terms: &[(&DMatrix<f64>, &DVector<f64>)],
    reg: &DMatrix<f64>,
    lambda: f64,
) -> DVector<f64> {
    let n = reg.ncols();
    let mut lhs = lambda * reg.transpose() * reg;
    let mut rhs = DVector::zeros(n);
    for (a, y) in terms {
        lhs += a.transpose() * *a;
        rhs += a.transpose() * *y;
    }
    lhs.clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| {
            lhs.clone()
                .svd(true, true)
                .solve(&rhs, 1e-13)
                .expect("svd solve")
        })
}

/// Unconstrained least squares `argmin ||E a - x||`.
pub fn least_squares(e: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let g = e.transpose() * e;
    g.cholesky()
        .expect("full column rank")
        .solve(&(e.transpose() * x))
}

fn residual(e: &DMatrix<f64>, x: &DVector<f64>, a: &[f64; 3]) -> f64 {
    (0..x.len())
        .map(|r| {
            let v = e[(r, 0)] * a[0] + e[(r, 1)] * a[1] + e[(r, 2)] * a[2] - x[r];
            v * v
        })
        .sum()
}

/// Minimizes `||E a - x||` over the 3-simplex by a grid search with step
/// `1e-3`, followed by a shrinking-step local search along the simplex edge
/// directions.
pub fn simplex_grid_search3(e: &DMatrix<f64>, x: &DVector<f64>) -> [f64; 3] {
    assert_eq!(e.ncols(), 3, "three endmembers");
    const STEPS: usize = 1000;
    let mut best = ([1.0, 0.0, 0.0], f64::INFINITY);
    for i in 0..=STEPS {
        for j in 0..=STEPS - i {
            let a0 = i as f64 / STEPS as f64;
            let a1 = j as f64 / STEPS as f64;
            let a = [a0, a1, (1.0 - a0 - a1).max(0.0)];
            let f = residual(e, x, &a);
            if f < best.1 {
                best = (a, f);
            }
        }
    }
    let dirs = [[1.0, -1.0, 0.0], [1.0, 0.0, -1.0], [0.0, 1.0, -1.0]];
    let mut step = 1e-3;
    while step > 1e-12 {
        let mut moved = false;
        for d in &dirs {
            for sign in [1.0, -1.0] {
                let mut a = best.0;
                for k in 0..3 {
                    a[k] += sign * step * d[k];
                }
                if a.iter().any(|&v| v < 0.0) {
                    continue;
                }
                let f = residual(e, x, &a);
                if f < best.1 {
                    best = (a, f);
                    moved = true;
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    best.0
}

/// Spectral angle between two vectors.
pub fn spectral_angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Every `k`-subset of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_reconstructs() {
        let b = normal_matrix(6, 6, 1);
        let a = &b + b.transpose();
        let (vals, vecs) = jacobi_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let rebuilt = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)) * vecs.transpose();
        assert!((rebuilt - a).norm() < 1e-10);
    }

    #[test]
    fn reflection() {
        assert_eq!(reflect_index(-1, 4), 0);
        assert_eq!(reflect_index(-2, 4), 1);
        assert_eq!(reflect_index(4, 4), 3);
        assert_eq!(reflect_index(9, 2), 1);
    }

    #[test]
    fn laplacian_kills_constants() {
        let l = laplacian_matrix(3, 4);
        assert!((l * DVector::from_element(12, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn grid_search_hits_vertex_and_interior() {
        let e = uniform_matrix(5, 3, 0.1, 1.0, 3);
        let truth = DVector::from_vec(vec![0.2, 0.5, 0.3]);
        let a = simplex_grid_search3(&e, &(&e * &truth));
        for k in 0..3 {
            assert!((a[k] - truth[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn angles() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 0.0]);
        assert!((max_principal_angle(&a, &b) - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert_eq!(combinations(4, 2).len(), 6);
    }
}
