//! Fixed-step gradient descent for smooth convex quadratics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HsiError, Result};

/// A quadratic objective. `eval` returns `f(x)` and writes `grad f(x)`.
pub trait Quadratic {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    /// Inverse of the gradient Lipschitz constant, estimated by power
    /// iteration.
    Auto,
    Fixed(f64),
}

/// Settings shared by the restoration and fusion solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestoreConfig {
    /// Weight of the Laplacian smoothness term.
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once the relative objective decrease of a step falls below this.
    pub tol: f64,
    pub step: StepRule,
}

impl Default for RestoreConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            max_iters: 5000,
            tol: 1e-10,
            step: StepRule::Auto,
        }
    }
}

impl RestoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(HsiError::InvalidConfig(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(HsiError::InvalidConfig("tol must be positive".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(HsiError::InvalidConfig(
                "lambda must be a non-negative number".into(),
            ));
        }
        if let StepRule::Fixed(s) = self.step {
            if !(s > 0.0) || !s.is_finite() {
                return Err(HsiError::InvalidConfig("step must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Gradient steps taken.
    pub iterations: usize,
    pub final_objective: f64,
    /// Objective at the initial point followed by one entry per step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub step: f64,
}

pub const POWER_ROUNDS: usize = 20;

/// Power-iteration estimate of the gradient Lipschitz constant, using
/// `grad f(v) - grad f(0)` as the Hessian product.
pub fn lipschitz_estimate<Q: Quadratic + ?Sized>(q: &Q, rounds: usize) -> f64 {
    let n = q.dim();
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let zero = vec![0.0; n];
    let mut g0 = vec![0.0; n];
    q.eval(&zero, &mut g0);
    let mut g = vec![0.0; n];
    let mut est = 0.0;
    for _ in 0..rounds {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        q.eval(&v, &mut g);
        for (gi, g0i) in g.iter_mut().zip(&g0) {
            *gi -= g0i;
        }
        est = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        std::mem::swap(&mut v, &mut g);
    }
    est
}

/// Minimizes `q` from `x0` by gradient descent.
///
/// A step that would increase the objective is retried with half the step
/// size, so the recorded trace never increases. Failing to meet `tol` within
/// `max_iters` is reported through `converged = false`, not as an error.
pub fn gradient_descent<Q: Quadratic + ?Sized>(
    q: &Q,
    x0: Vec<f64>,
    cfg: &RestoreConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let n = q.dim();
    if x0.len() != n {
        return Err(HsiError::DimMismatch(format!(
            "initial point has {} entries for {n} unknowns",
            x0.len()
        )));
    }
    let mut step = match cfg.step {
        StepRule::Fixed(s) => s,
        StepRule::Auto => {
            let lip = lipschitz_estimate(q, POWER_ROUNDS);
            if lip > 0.0 {
                1.0 / lip
            } else {
                1.0
            }
        }
    };
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut f = q.eval(&x, &mut grad);
    let mut trace = vec![f];
    let mut converged = f == 0.0;
    let mut iterations = 0;
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];

    while !converged && iterations < cfg.max_iters {
        let f_new = loop {
            for ((t, xi), gi) in trial.iter_mut().zip(&x).zip(&grad) {
                *t = xi - step * gi;
            }
            let f_new = q.eval(&trial, &mut trial_grad);
            if f_new <= f || step < 1e-300 {
                break f_new;
            }
            step *= 0.5;
        };
        if f_new > f {
            // step underflowed without finding descent
            converged = true;
            break;
        }
        iterations += 1;
        let decrease = f - f_new;
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        let f_old = f;
        f = f_new;
        trace.push(f);
        if f == 0.0 || decrease <= cfg.tol * f_old {
            converged = true;
        }
    }
    if !converged {
        log::warn!(
            "gradient descent stopped after {iterations} iterations without meeting tol {}",
            cfg.tol
        );
    }
    Ok((
        x,
        SolveReport {
            iterations,
            final_objective: f,
            objective_trace: trace,
            converged,
            step,
        },
    ))
}
