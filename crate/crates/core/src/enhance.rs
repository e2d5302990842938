//! Pansharpening-style fusion of a low-resolution hyperspectral cube with a
//! high-resolution panchromatic or multispectral image.
//!
//! The fused cube minimizes
//!
//! ```text
//! ||D(X) - Y_lr||_F^2 + ||P(X) - Y_pan||_F^2 + lambda * ||L X||_F^2
//! ```
//!
//! where `D` blurs and decimates every band and `P` mixes bands per pixel
//! through a spectral response matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cube::{HyperCube, SpectralAxis};
use crate::error::{HsiError, Result};
use crate::ops::{bip_to_bsq, bsq_to_bip, convolve, convolve_adjoint_add, laplacian, Kernel2d};
use crate::solver::{gradient_descent, Quadratic, RestoreConfig, SolveReport};

pub const DEFAULT_FUSION_LAMBDA: f64 = 1e-3;

/// Acquisition model of the two inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionOperators {
    /// Blur applied before decimation.
    pub kernel: Kernel2d,
    /// Decimation factor; the sample kept for output pixel `(i, j)` is
    /// `(i * scale, j * scale)` of the blurred plane.
    pub scale: usize,
    /// `m x l` band weights; each row sums to one.
    pub spectral_response: DMatrix<f64>,
}

impl FusionOperators {
    /// Block-averaging `scale x scale` kernel and the given response.
    pub fn block_average(scale: usize, spectral_response: DMatrix<f64>) -> Result<Self> {
        let ops = Self {
            kernel: Kernel2d::boxed(scale.max(1))?,
            scale,
            spectral_response,
        };
        ops.validate()?;
        Ok(ops)
    }

    /// Single-band response averaging all `bands` bands.
    pub fn uniform_pan_response(bands: usize) -> DMatrix<f64> {
        DMatrix::from_element(1, bands, 1.0 / bands as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale < 1 {
            return Err(HsiError::InvalidConfig("scale must be at least 1".into()));
        }
        self.kernel.check_normalized(1e-12)?;
        let r = &self.spectral_response;
        if r.iter().any(|v| !(*v >= 0.0)) {
            return Err(HsiError::InvalidConfig(
                "spectral response has negative weights".into(),
            ));
        }
        for (i, row) in r.row_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(HsiError::InvalidConfig(format!(
                    "spectral response row {i} sums to {s}"
                )));
            }
        }
        Ok(())
    }

    fn check_divisible(&self, height: usize, width: usize) -> Result<()> {
        if !height.is_multiple_of(self.scale) || !width.is_multiple_of(self.scale) {
            return Err(HsiError::IndivisibleDims {
                height,
                width,
                scale: self.scale,
            });
        }
        Ok(())
    }
}

/// Blur-then-decimate of one plane.
fn down_plane(
    x: &[f64],
    h: usize,
    w: usize,
    ops: &FusionOperators,
    blurred: &mut [f64],
    out: &mut [f64],
) {
    convolve(x, h, w, &ops.kernel, blurred);
    let s = ops.scale;
    let wl = w / s;
    for i in 0..h / s {
        for j in 0..wl {
            out[i * wl + j] = blurred[(i * s) * w + j * s];
        }
    }
}

/// Adjoint of [`down_plane`], accumulated into `out`.
fn down_plane_adjoint_add(
    y: &[f64],
    h: usize,
    w: usize,
    ops: &FusionOperators,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    let s = ops.scale;
    let wl = w / s;
    scratch.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..h / s {
        for j in 0..wl {
            scratch[(i * s) * w + j * s] = y[i * wl + j];
        }
    }
    convolve_adjoint_add(scratch, h, w, &ops.kernel, out);
}

pub fn spatial_downsample(cube: &HyperCube, ops: &FusionOperators) -> Result<HyperCube> {
    ops.validate()?;
    let (h, w, l) = (cube.height(), cube.width(), cube.bands());
    ops.check_divisible(h, w)?;
    let (hl, wl) = (h / ops.scale, w / ops.scale);
    let x = bip_to_bsq(cube.values(), h * w, l);
    let mut out = vec![0.0; hl * wl * l];
    let mut blurred = vec![0.0; h * w];
    for (xo, oo) in x.chunks_exact(h * w).zip(out.chunks_exact_mut(hl * wl)) {
        down_plane(xo, h, w, ops, &mut blurred, oo);
    }
    HyperCube::new(
        hl,
        wl,
        l,
        bsq_to_bip(&out, hl * wl, l),
        cube.quantity,
        cube.axis().clone(),
        cube.metadata.clone(),
    )
}

/// Weighted band combination per pixel.
pub fn spectral_project(cube: &HyperCube, ops: &FusionOperators) -> Result<HyperCube> {
    ops.validate()?;
    let r = &ops.spectral_response;
    if r.ncols() != cube.bands() {
        return Err(HsiError::ShapeMismatch(format!(
            "spectral response has {} columns for {} bands",
            r.ncols(),
            cube.bands()
        )));
    }
    let projected = r * cube.to_matrix();
    let mut out = HyperCube::from_matrix(&projected, cube.height(), cube.width())?;
    out.quantity = cube.quantity;
    out.metadata = cube.metadata.clone();
    // response-weighted centre wavelength of each output band
    let centres: Vec<f64> = r
        .row_iter()
        .map(|row| {
            row.iter()
                .zip(cube.axis().wavelengths())
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    if let Ok(axis) = SpectralAxis::new(centres) {
        out.set_axis(axis)?;
    }
    Ok(out)
}

/// Repeats every pixel into a `scale x scale` block.
pub fn nearest_upsample(cube: &HyperCube, scale: usize) -> Result<HyperCube> {
    let (h, w, l) = (cube.height(), cube.width(), cube.bands());
    let (hh, ww) = (h * scale, w * scale);
    let mut values = Vec::with_capacity(hh * ww * l);
    for i in 0..hh {
        for j in 0..ww {
            values.extend_from_slice(cube.spectrum(i / scale, j / scale)?);
        }
    }
    HyperCube::new(
        hh,
        ww,
        l,
        values,
        cube.quantity,
        cube.axis().clone(),
        cube.metadata.clone(),
    )
}

pub(crate) struct FusionProblem<'a> {
    pub ops: &'a FusionOperators,
    /// band-sequential, low resolution
    pub lr: Vec<f64>,
    /// band-sequential, high resolution
    pub pan: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub lambda: f64,
}

impl FusionProblem<'_> {
    /// The two fidelity terms at `x`.
    pub fn residuals(&self, x: &[f64]) -> (f64, f64) {
        let (h, w, l) = (self.height, self.width, self.bands);
        let (n, nl) = (h * w, (h / self.ops.scale) * (w / self.ops.scale));
        let mut blurred = vec![0.0; n];
        let mut d = vec![0.0; nl];
        let mut lr_res = 0.0;
        for (b, xo) in x.chunks_exact(n).enumerate() {
            down_plane(xo, h, w, self.ops, &mut blurred, &mut d);
            lr_res += d
                .iter()
                .zip(&self.lr[b * nl..(b + 1) * nl])
                .map(|(a, y)| (a - y) * (a - y))
                .sum::<f64>();
        }
        let r = &self.ops.spectral_response;
        let mut pan_res = 0.0;
        for m in 0..r.nrows() {
            for p in 0..n {
                let v: f64 = (0..l).map(|b| r[(m, b)] * x[b * n + p]).sum();
                let e = v - self.pan[m * n + p];
                pan_res += e * e;
            }
        }
        (lr_res, pan_res)
    }
}

impl Quadratic for FusionProblem<'_> {
    fn dim(&self) -> usize {
        self.height * self.width * self.bands
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (h, w, l) = (self.height, self.width, self.bands);
        let (n, nl) = (h * w, (h / self.ops.scale) * (w / self.ops.scale));
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut f = 0.0;

        let mut scratch = vec![0.0; n];
        let mut d = vec![0.0; nl];
        for (b, (xo, go)) in x.chunks_exact(n).zip(grad.chunks_exact_mut(n)).enumerate() {
            down_plane(xo, h, w, self.ops, &mut scratch, &mut d);
            for (di, yi) in d.iter_mut().zip(&self.lr[b * nl..(b + 1) * nl]) {
                *di -= yi;
                f += *di * *di;
                *di *= 2.0;
            }
            down_plane_adjoint_add(&d, h, w, self.ops, &mut scratch, go);
        }

        let r = &self.ops.spectral_response;
        let mut res = vec![0.0; n];
        for m in 0..r.nrows() {
            res.copy_from_slice(&self.pan[m * n..(m + 1) * n]);
            res.iter_mut().for_each(|v| *v = -*v);
            for b in 0..l {
                let wgt = r[(m, b)];
                if wgt != 0.0 {
                    for (e, xv) in res.iter_mut().zip(&x[b * n..(b + 1) * n]) {
                        *e += wgt * xv;
                    }
                }
            }
            f += res.iter().map(|e| e * e).sum::<f64>();
            for b in 0..l {
                let wgt = 2.0 * r[(m, b)];
                if wgt != 0.0 {
                    for (g, e) in grad[b * n..(b + 1) * n].iter_mut().zip(&res) {
                        *g += wgt * e;
                    }
                }
            }
        }

        if self.lambda > 0.0 {
            let mut lx = vec![0.0; n];
            let mut llx = vec![0.0; n];
            for (xo, go) in x.chunks_exact(n).zip(grad.chunks_exact_mut(n)) {
                laplacian(xo, h, w, &mut lx);
                f += self.lambda * lx.iter().map(|v| v * v).sum::<f64>();
                laplacian(&lx, h, w, &mut llx);
                for (g, v) in go.iter_mut().zip(&llx) {
                    *g += 2.0 * self.lambda * v;
                }
            }
        }
        f
    }
}

/// Result of [`fuse`].
#[derive(Debug, Clone)]
pub struct FusionOutcome {
    pub fused: HyperCube,
    pub report: SolveReport,
    /// `(lr, pan)` fidelity terms at the nearest-neighbour initialization.
    pub initial_residuals: (f64, f64),
    /// `(lr, pan)` fidelity terms at the solution.
    pub final_residuals: (f64, f64),
}

/// Fuses `lr_hs` and `hr_pan`. `lambda` takes precedence over `cfg.lambda`;
/// the remaining solver settings come from `cfg`.
pub fn fuse(
    lr_hs: &HyperCube,
    hr_pan: &HyperCube,
    ops: &FusionOperators,
    lambda: f64,
    cfg: &RestoreConfig,
) -> Result<FusionOutcome> {
    ops.validate()?;
    let cfg = RestoreConfig { lambda, ..*cfg };
    cfg.validate()?;
    let (h, w, l) = (hr_pan.height(), hr_pan.width(), lr_hs.bands());
    ops.check_divisible(h, w)?;
    if lr_hs.height() * ops.scale != h || lr_hs.width() * ops.scale != w {
        return Err(HsiError::ShapeMismatch(format!(
            "low-resolution cube {}x{} times scale {} does not match {}x{}",
            lr_hs.height(),
            lr_hs.width(),
            ops.scale,
            h,
            w
        )));
    }
    if hr_pan.bands() != ops.spectral_response.nrows() || l != ops.spectral_response.ncols() {
        return Err(HsiError::ShapeMismatch(format!(
            "spectral response is {}x{}, inputs have {} and {} bands",
            ops.spectral_response.nrows(),
            ops.spectral_response.ncols(),
            hr_pan.bands(),
            l
        )));
    }
    let problem = FusionProblem {
        ops,
        lr: bip_to_bsq(lr_hs.values(), lr_hs.pixels(), l),
        pan: bip_to_bsq(hr_pan.values(), hr_pan.pixels(), hr_pan.bands()),
        height: h,
        width: w,
        bands: l,
        lambda: cfg.lambda,
    };
    let init = nearest_upsample(lr_hs, ops.scale)?;
    let x0 = bip_to_bsq(init.values(), h * w, l);
    let initial_residuals = problem.residuals(&x0);
    let (x, report) = gradient_descent(&problem, x0, &cfg)?;
    let final_residuals = problem.residuals(&x);
    let fused = init.with_values(bsq_to_bip(&x, h * w, l))?;
    Ok(FusionOutcome {
        fused,
        report,
        initial_residuals,
        final_residuals,
    })
}
