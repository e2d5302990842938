//! Degradation model `Y = H(X) + N` and its Tikhonov-regularized inverse.
//!
//! `H` acts on every band plane independently: identity (denoising), an
//! observation mask (inpainting, destriping) or a normalized blur kernel
//! (deblurring). The inverse solves
//!
//! ```text
//! argmin_X ||H(X) - Y||_F^2 + lambda * ||L X||_F^2
//! ```
//!
//! with `L` the per-band 5-point Laplacian, by gradient descent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cube::{HyperCube, MaskPlane};
use crate::error::{HsiError, Result};
use crate::ops::{bip_to_bsq, bsq_to_bip, convolve, convolve_adjoint_add, laplacian, Kernel2d};
use crate::solver::{gradient_descent, Quadratic};

pub use crate::solver::{RestoreConfig, SolveReport, StepRule};

pub const KERNEL_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DegradationOperator {
    Identity,
    Mask(MaskPlane),
    Blur(Kernel2d),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub operator: DegradationOperator,
    /// Standard deviation of the additive white Gaussian noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn noiseless(operator: DegradationOperator) -> Self {
        Self {
            operator,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(HsiError::InvalidConfig(format!(
                "noise sigma {}",
                self.noise_sigma
            )));
        }
        match &self.operator {
            DegradationOperator::Identity => Ok(()),
            DegradationOperator::Mask(m) => {
                if m.height() != height || m.width() != width {
                    Err(HsiError::DimMismatch(format!(
                        "mask is {}x{}, cube is {height}x{width}",
                        m.height(),
                        m.width()
                    )))
                } else {
                    Ok(())
                }
            }
            DegradationOperator::Blur(k) => {
                if !k.is_odd() {
                    return Err(HsiError::InvalidKernel(format!(
                        "blur kernel must have odd sides, got {}x{}",
                        k.rows(),
                        k.cols()
                    )));
                }
                k.check_normalized(KERNEL_SUM_TOL)
            }
        }
    }
}

/// Applies `H` to every plane of a band-sequential buffer.
fn apply_h(op: &DegradationOperator, x: &[f64], h: usize, w: usize, out: &mut [f64]) {
    let n = h * w;
    match op {
        DegradationOperator::Identity => out.copy_from_slice(x),
        DegradationOperator::Mask(m) => {
            for (xo, oo) in x.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
                for ((o, &v), &f) in oo.iter_mut().zip(xo).zip(m.flags()) {
                    *o = if f { v } else { 0.0 };
                }
            }
        }
        DegradationOperator::Blur(k) => {
            for (xo, oo) in x.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
                convolve(xo, h, w, k, oo);
            }
        }
    }
}

/// Accumulates `H^T y` into `out`.
fn apply_h_adjoint_add(op: &DegradationOperator, y: &[f64], h: usize, w: usize, out: &mut [f64]) {
    let n = h * w;
    match op {
        DegradationOperator::Identity => out.iter_mut().zip(y).for_each(|(o, v)| *o += v),
        DegradationOperator::Mask(m) => {
            for (yo, oo) in y.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
                for ((o, &v), &f) in oo.iter_mut().zip(yo).zip(m.flags()) {
                    if f {
                        *o += v;
                    }
                }
            }
        }
        DegradationOperator::Blur(k) => {
            for (yo, oo) in y.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
                convolve_adjoint_add(yo, h, w, k, oo);
            }
        }
    }
}

/// Simulates an observation of `clean`. Deterministic for a given seed.
pub fn degrade(clean: &HyperCube, spec: &DegradationSpec) -> Result<HyperCube> {
    let (h, w, l) = (clean.height(), clean.width(), clean.bands());
    spec.validate(h, w)?;
    let x = bip_to_bsq(clean.values(), h * w, l);
    let mut y = vec![0.0; x.len()];
    apply_h(&spec.operator, &x, h, w, &mut y);
    let mut values = bsq_to_bip(&y, h * w, l);
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
        for v in values.iter_mut() {
            *v += normal.sample(&mut rng);
        }
        if let DegradationOperator::Mask(m) = &spec.operator {
            // unobserved samples carry no measurement, noisy or otherwise
            for (px, &f) in values.chunks_exact_mut(l).zip(m.flags()) {
                if !f {
                    px.iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
    }
    clean.with_values(values)
}

/// `||H x - y||^2 + lambda ||L x||^2` over band-sequential unknowns.
pub(crate) struct RestoreProblem<'a> {
    pub op: &'a DegradationOperator,
    pub observed: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub lambda: f64,
}

impl Quadratic for RestoreProblem<'_> {
    fn dim(&self) -> usize {
        self.height * self.width * self.bands
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (h, w) = (self.height, self.width);
        let n = h * w;
        let mut r = vec![0.0; x.len()];
        apply_h(self.op, x, h, w, &mut r);
        for (ri, yi) in r.iter_mut().zip(&self.observed) {
            *ri -= yi;
        }
        let mut f: f64 = r.iter().map(|v| v * v).sum();
        grad.iter_mut().for_each(|g| *g = 0.0);
        apply_h_adjoint_add(self.op, &r, h, w, grad);
        grad.iter_mut().for_each(|g| *g *= 2.0);
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

/// Recovers the clean cube from `observed`. The observation itself (with
/// unobserved samples zeroed) is the starting point.
pub fn restore(
    observed: &HyperCube,
    spec: &DegradationSpec,
    cfg: &RestoreConfig,
) -> Result<(HyperCube, SolveReport)> {
    let (h, w, l) = (observed.height(), observed.width(), observed.bands());
    spec.validate(h, w)?;
    cfg.validate()?;
    let mut y = bip_to_bsq(observed.values(), h * w, l);
    if let DegradationOperator::Mask(_) = &spec.operator {
        let raw = y.clone();
        apply_h(&spec.operator, &raw, h, w, &mut y);
    }
    let problem = RestoreProblem {
        op: &spec.operator,
        observed: y.clone(),
        height: h,
        width: w,
        bands: l,
        lambda: cfg.lambda,
    };
    let (x, report) = gradient_descent(&problem, y, cfg)?;
    Ok((observed.with_values(bsq_to_bip(&x, h * w, l))?, report))
}

fn check_same_dims(a: &HyperCube, b: &HyperCube) -> Result<()> {
    if (a.height(), a.width(), a.bands()) != (b.height(), b.width(), b.bands()) {
        return Err(HsiError::DimMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.bands(),
            b.height(),
            b.width(),
            b.bands()
        )));
    }
    Ok(())
}

/// Mean squared difference over all samples.
pub fn mse(reference: &HyperCube, test: &HyperCube) -> Result<f64> {
    check_same_dims(reference, test)?;
    let n = reference.values().len().max(1) as f64;
    Ok(reference
        .values()
        .iter()
        .zip(test.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical cubes.
pub fn psnr(reference: &HyperCube, test: &HyperCube, peak: f64) -> Result<f64> {
    let m = mse(reference, test)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}
