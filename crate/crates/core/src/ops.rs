//! Band-wise spatial operators on band-sequential planes: convolution with
//! half-sample symmetric padding and the 5-point Laplacian.

use serde::{Deserialize, Serialize};

use crate::error::{HsiError, Result};

/// Dense 2-D kernel, row-major. The anchor sits at `(rows / 2, cols / 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel2d {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl Kernel2d {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || weights.len() != rows * cols {
            return Err(HsiError::InvalidKernel(format!(
                "{} weights for a {rows}x{cols} kernel",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(HsiError::InvalidKernel("non-finite weight".into()));
        }
        Ok(Self {
            rows,
            cols,
            weights,
        })
    }

    pub fn identity() -> Self {
        Self {
            rows: 1,
            cols: 1,
            weights: vec![1.0],
        }
    }

    /// `size x size` uniform kernel.
    pub fn boxed(size: usize) -> Result<Self> {
        let n = size * size;
        Self::new(size, size, vec![1.0 / n as f64; n])
    }

    /// Normalized isotropic Gaussian on a `size x size` grid.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(HsiError::InvalidKernel(format!("gaussian sigma {sigma}")));
        }
        let c = (size as f64 - 1.0) / 2.0;
        let mut w: Vec<f64> = (0..size * size)
            .map(|i| {
                let (r, q) = ((i / size) as f64 - c, (i % size) as f64 - c);
                (-(r * r + q * q) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        Self::new(size, size, w)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_odd(&self) -> bool {
        self.rows % 2 == 1 && self.cols % 2 == 1
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let s = self.sum();
        if (s - 1.0).abs() > tol {
            return Err(HsiError::InvalidKernel(format!(
                "weights sum to {s}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Half-sample symmetric reflection: `... b a | a b c d | d c ...`.
#[inline]
pub fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// `out[i, j] = sum_{u, v} k[u, v] * x[i + ar - u, j + ac - v]`.
pub fn convolve(x: &[f64], height: usize, width: usize, k: &Kernel2d, out: &mut [f64]) {
    let (ar, ac) = ((k.rows / 2) as isize, (k.cols / 2) as isize);
    for i in 0..height {
        for j in 0..width {
            let mut acc = 0.0;
            for u in 0..k.rows {
                let r = reflect(i as isize + ar - u as isize, height);
                for v in 0..k.cols {
                    let c = reflect(j as isize + ac - v as isize, width);
                    acc += k.weights[u * k.cols + v] * x[r * width + c];
                }
            }
            out[i * width + j] = acc;
        }
    }
}

/// Exact adjoint of [`convolve`], padding included. Accumulates into `out`.
pub fn convolve_adjoint_add(y: &[f64], height: usize, width: usize, k: &Kernel2d, out: &mut [f64]) {
    let (ar, ac) = ((k.rows / 2) as isize, (k.cols / 2) as isize);
    for i in 0..height {
        for j in 0..width {
            let yij = y[i * width + j];
            if yij == 0.0 {
                continue;
            }
            for u in 0..k.rows {
                let r = reflect(i as isize + ar - u as isize, height);
                for v in 0..k.cols {
                    let c = reflect(j as isize + ac - v as isize, width);
                    out[r * width + c] += k.weights[u * k.cols + v] * yij;
                }
            }
        }
    }
}

/// 5-point Laplacian with reflected neighbours. Self-adjoint, and zero on
/// constant planes.
pub fn laplacian(x: &[f64], height: usize, width: usize, out: &mut [f64]) {
    for i in 0..height {
        for j in 0..width {
            let c = x[i * width + j];
            let up = if i > 0 { x[(i - 1) * width + j] } else { c };
            let down = if i + 1 < height {
                x[(i + 1) * width + j]
            } else {
                c
            };
            let left = if j > 0 { x[i * width + j - 1] } else { c };
            let right = if j + 1 < width {
                x[i * width + j + 1]
            } else {
                c
            };
            out[i * width + j] = up + down + left + right - 4.0 * c;
        }
    }
}

/// Band-interleaved-by-pixel samples to band-sequential.
pub fn bip_to_bsq(values: &[f64], pixels: usize, bands: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for p in 0..pixels {
        for b in 0..bands {
            out[b * pixels + p] = values[p * bands + b];
        }
    }
    out
}

pub fn bsq_to_bip(values: &[f64], pixels: usize, bands: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for b in 0..bands {
        for p in 0..pixels {
            out[p * bands + b] = values[b * pixels + p];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
        assert_eq!(reflect(-3, 1), 0);
        assert_eq!(reflect(9, 2), 1);
    }

    #[test]
    fn box_blur_of_one_hot() {
        let (h, w) = (5, 5);
        let mut x = vec![0.0; h * w];
        x[2 * w + 2] = 1.0;
        let mut y = vec![0.0; h * w];
        convolve(&x, h, w, &Kernel2d::boxed(3).unwrap(), &mut y);
        for i in 0..h {
            for j in 0..w {
                let inside = (1..=3).contains(&i) && (1..=3).contains(&j);
                let expect = if inside { 1.0 / 9.0 } else { 0.0 };
                assert!((y[i * w + j] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        // <K x, y> = <x, K^T y> with an asymmetric kernel
        let (h, w) = (4, 5);
        let k = Kernel2d::new(3, 3, vec![0.1, 0.2, 0.0, 0.05, 0.3, 0.1, 0.0, 0.15, 0.1]).unwrap();
        let x: Vec<f64> = (0..h * w).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let y: Vec<f64> = (0..h * w).map(|i| ((i * 53) % 7) as f64 * 0.3).collect();
        let mut kx = vec![0.0; h * w];
        convolve(&x, h, w, &k, &mut kx);
        let mut kty = vec![0.0; h * w];
        convolve_adjoint_add(&y, h, w, &k, &mut kty);
        let lhs: f64 = kx.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&kty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn laplacian_properties() {
        let (h, w) = (3, 4);
        let mut out = vec![1.0; h * w];
        laplacian(&[2.5; 12], h, w, &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
        let x: Vec<f64> = (0..12).map(|i| (i * i) as f64).collect();
        let y: Vec<f64> = (0..12).map(|i| (i % 5) as f64).collect();
        let (mut lx, mut ly) = (vec![0.0; 12], vec![0.0; 12]);
        laplacian(&x, h, w, &mut lx);
        laplacian(&y, h, w, &mut ly);
        let a: f64 = lx.iter().zip(&y).map(|(p, q)| p * q).sum();
        let b: f64 = x.iter().zip(&ly).map(|(p, q)| p * q).sum();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn layout_round_trip() {
        let v: Vec<f64> = (0..24).map(f64::from).collect();
        assert_eq!(bsq_to_bip(&bip_to_bsq(&v, 6, 4), 6, 4), v);
    }

    #[test]
    fn kernel_validation() {
        assert!(Kernel2d::new(2, 2, vec![1.0]).is_err());
        assert!(Kernel2d::boxed(3).unwrap().check_normalized(1e-12).is_ok());
        assert!(Kernel2d::gaussian(5, 1.0)
            .unwrap()
            .check_normalized(1e-12)
            .is_ok());
        assert!(Kernel2d::new(1, 1, vec![0.5])
            .unwrap()
            .check_normalized(1e-12)
            .is_err());
    }
}
