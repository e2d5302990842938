use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fcls, vca, AbundanceMaps, ConstraintMode, EndmemberSet};
use crate::error::{HsiError, Result};

/// Weight of the sum-to-one row appended to data and endmembers.
pub const ASC_DELTA: f64 = 5.0;
/// Floor applied to starting values so multiplicative updates can move them.
const INIT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NmfInit {
    Vca { seed: u64 },
    Random { seed: u64 },
    Given(DMatrix<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub max_iters: usize,
    /// Stop once an iteration lowers the objective by less than
    /// `tol * objective`.
    pub tol: f64,
    pub delta: f64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-9,
            delta: ASC_DELTA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfResult {
    pub endmembers: EndmemberSet,
    pub abundances: AbundanceMaps,
    /// Objective of the augmented system, starting with the initial value.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `||X - E A||^2 + delta^2 ||1^T - 1^T A||^2`.
fn objective(x: &DMatrix<f64>, e: &DMatrix<f64>, a: &DMatrix<f64>, delta: f64) -> f64 {
    let fit = (x - e * a).norm_squared();
    let asc: f64 = a.column_iter().map(|c| (1.0 - c.sum()).powi(2)).sum();
    fit + delta * delta * asc
}

/// Elementwise `m *= num / den`, leaving entries with a zero denominator.
fn multiplicative_step(m: &mut DMatrix<f64>, num: &DMatrix<f64>, den: &DMatrix<f64>) {
    for ((v, &nu), &de) in m.iter_mut().zip(num.iter()).zip(den.iter()) {
        if de > 0.0 {
            *v *= nu / de;
        }
    }
}

fn initial_endmembers(x: &DMatrix<f64>, p: usize, init: &NmfInit) -> Result<DMatrix<f64>> {
    match init {
        NmfInit::Vca { seed } => Ok(vca(x, p, *seed)?.endmembers.spectra),
        NmfInit::Random { seed } => {
            let hi = x.max().max(INIT_FLOOR);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(DMatrix::from_fn(x.nrows(), p, |_, _| {
                rng.random_range(0.0..hi)
            }))
        }
        NmfInit::Given(e) => {
            if e.shape() != (x.nrows(), p) {
                return Err(HsiError::DimMismatch(format!(
                    "initial endmembers are {}x{}, expected {}x{p}",
                    e.nrows(),
                    e.ncols(),
                    x.nrows()
                )));
            }
            Ok(e.clone())
        }
    }
}

/// Joint estimation of nonnegative endmembers and abundances by Lee-Seung
/// multiplicative updates on the sum-to-one augmented system.
///
/// Negative data values are clipped to zero. Abundances start from FCLS
/// against the initial endmembers (uniform if that system is singular) and
/// are renormalized to sum to one on return.
pub fn nmf_unmix(x: &DMatrix<f64>, p: usize, init: &NmfInit, cfg: &NmfConfig) -> Result<NmfResult> {
    let (l, n) = x.shape();
    if p == 0 || n == 0 || l == 0 {
        return Err(HsiError::DegenerateInput("empty factorization".into()));
    }
    if !(cfg.tol >= 0.0 && cfg.delta > 0.0) {
        return Err(HsiError::InvalidConfig(format!(
            "tol {} / delta {}",
            cfg.tol, cfg.delta
        )));
    }
    let mut data = x.clone();
    let negatives = data.iter().filter(|&&v| v < 0.0).count();
    if negatives > 0 {
        log::warn!("clipping {negatives} negative samples to zero before NMF");
        data.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    let mut e = initial_endmembers(&data, p, init)?;
    e.iter_mut().for_each(|v| *v = v.max(INIT_FLOOR));
    let mut a = match fcls(&e, &data, ConstraintMode::Full) {
        Ok(m) => m.coefficients,
        Err(err) => {
            log::debug!("FCLS start failed ({err}); using uniform abundances");
            DMatrix::from_element(p, n, 1.0 / p as f64)
        }
    };
    a.iter_mut().for_each(|v| *v = v.max(INIT_FLOOR));

    let d = cfg.delta;
    let mut trace = vec![objective(&data, &e, &a, d)];
    let mut converged = trace[0] == 0.0;
    let mut iterations = 0;
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        // A step on [X; d 1^T] ~ [E; d 1^T] A
        let col_sums = DMatrix::from_fn(1, n, |_, j| a.column(j).sum());
        let num = e.transpose() * &data + DMatrix::from_element(p, n, d * d);
        let den =
            (e.transpose() * &e) * &a + DMatrix::from_fn(p, n, |_, j| d * d * col_sums[(0, j)]);
        multiplicative_step(&mut a, &num, &den);
        // E step; the appended constant row is not a free parameter
        let aat = &a * a.transpose();
        let num = &data * a.transpose();
        let den = &e * aat;
        multiplicative_step(&mut e, &num, &den);
        let f = objective(&data, &e, &a, d);
        let prev = *trace.last().expect("non-empty");
        trace.push(f);
        if f == 0.0 || prev - f <= cfg.tol * prev {
            converged = true;
        }
    }
    if !converged {
        log::warn!(
            "NMF stopped after {iterations} iterations without meeting tol {}",
            cfg.tol
        );
    }
    for mut col in a.column_iter_mut() {
        col.iter_mut().for_each(|v| *v = v.max(0.0));
        let s = col.sum();
        if s > 0.0 {
            col /= s;
        } else {
            col.fill(1.0 / p as f64);
        }
    }
    Ok(NmfResult {
        endmembers: EndmemberSet::new(e)?,
        abundances: AbundanceMaps {
            coefficients: a,
            mode: ConstraintMode::Full,
        },
        objective_trace: trace,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(8, 30, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn objective_never_increases() {
        for seed in 0..5 {
            let cfg = NmfConfig {
                max_iters: 200,
                tol: 0.0,
                ..Default::default()
            };
            let r = nmf_unmix(&problem(seed), 3, &NmfInit::Random { seed }, &cfg).unwrap();
            assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-10));
            assert!(r.endmembers.spectra.iter().all(|&v| v >= 0.0));
            assert!(r.abundances.satisfies_full());
        }
    }

    #[test]
    fn exact_factorization_is_a_fixed_point() {
        let e = DMatrix::from_column_slice(4, 2, &[0.9, 0.6, 0.3, 0.1, 0.1, 0.4, 0.7, 0.9]);
        let a = DMatrix::from_fn(2, 10, |r, c| {
            let t = c as f64 / 9.0;
            if r == 0 {
                t
            } else {
                1.0 - t
            }
        });
        let x = &e * &a;
        let r = nmf_unmix(&x, 2, &NmfInit::Given(e.clone()), &NmfConfig::default()).unwrap();
        assert!(r.objective_trace[0] < 1e-12);
        assert!((r.endmembers.spectra - e).abs().max() < 1e-6);
    }

    #[test]
    fn wrong_initial_shape() {
        let x = problem(0);
        assert!(matches!(
            nmf_unmix(
                &x,
                3,
                &NmfInit::Given(DMatrix::zeros(8, 2)),
                &NmfConfig::default()
            ),
            Err(HsiError::DimMismatch(_))
        ));
    }
}
