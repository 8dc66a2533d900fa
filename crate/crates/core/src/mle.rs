//! Non-private maximum likelihood baseline.
//!
//! Damped Newton with Armijo backtracking on the exact transformed
//! log-likelihood, started from `p = 0`, `q = 1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::loglik::{evaluate, loglik};
use crate::model::{Diagnostics, FitResult, TransformedParams};
use crate::standardize::StandardizedDataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Convergence threshold on `|grad|_inf`.
    pub gradient_tolerance: f64,
    /// `q` outside `[q_floor, 1/q_floor]` is reported as a degenerate fit. On the
    /// standardized scale `sigma < q_floor` means residuals vanish against the
    /// response range.
    pub q_floor: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { max_iterations: 200, gradient_tolerance: 1e-8, q_floor: 1e-6 }
    }
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

/// Solves `(-H) delta = g`, adding a ridge until `-H` factors.
fn newton_direction(hessian: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let neg = -hessian;
    let scale = neg.diagonal().amax().max(1.0);
    let mut ridge = 0.0;
    for _ in 0..30 {
        let mut m = neg.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += ridge;
        }
        if let Some(chol) = m.cholesky() {
            return Ok(chol.solve(grad));
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 10.0 };
    }
    Err(Error::SingularHessian)
}

pub fn fit_mle(data: &StandardizedDataset, options: &MleOptions) -> Result<FitResult> {
    let n = data.n();
    let d = data.d();
    if n <= d + 2 {
        return Err(Error::TooFewSamples { n, d });
    }
    let family = data.family();
    let mut params = TransformedParams::expansion_point(d);
    let mut grad_norm = f64::INFINITY;

    for iteration in 0..options.max_iterations {
        let (value, grad, hessian) = evaluate(family, &params, data, true)?;
        let hessian = hessian.expect("hessian requested");
        grad_norm = grad.amax();
        if !value.is_finite() || !grad_norm.is_finite() {
            return Err(Error::DegenerateFit { q: params.q });
        }
        if grad_norm <= options.gradient_tolerance {
            let diagnostics = Diagnostics { objective_value: value, iterations: iteration, ..Default::default() };
            return Ok(FitResult::from_transformed(params, diagnostics));
        }

        let direction = newton_direction(&hessian, &grad)?;
        let slope = grad.dot(&direction);
        let current = params.to_vector();

        let resolvable = slope > 1e-12 * value.abs().max(1.0);
        let mut step = 1.0;
        let mut accepted = None;
        while step >= MIN_STEP {
            let trial = &current + &direction * step;
            if trial[d + 1] > 0.0 {
                let candidate = TransformedParams::from_vector(&trial)?;
                if !resolvable {
                    accepted = Some(candidate);
                    break;
                }
                let f = loglik(family, &candidate, data)?;
                if f.is_finite() && f >= value + ARMIJO * step * slope {
                    accepted = Some(candidate);
                    break;
                }
            }
            step *= 0.5;
        }
        params = match accepted {
            Some(p) => p,
            None => {
                return Err(Error::NonConvergence { iterations: iteration + 1, grad_norm, last: params });
            }
        };
        if params.q < options.q_floor || params.q > 1.0 / options.q_floor {
            return Err(Error::DegenerateFit { q: params.q });
        }
    }
    Err(Error::NonConvergence { iterations: options.max_iterations, grad_norm, last: params })
}
