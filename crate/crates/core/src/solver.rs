//! Maximization of the (perturbed) quadratic surrogate and recovery of
//! `(sigma, beta)`.
//!
//! Noise can make the quadratic non-concave. The Hessian's eigenvalues are
//! then clamped to at most `-concavity_floor` before solving. This only
//! touches the released weights, so it is post-processing and leaves the
//! privacy guarantee intact.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{Diagnostics, FitResult, TransformedParams};
use crate::privacy::{perturb_weights, PrivacyBudget};
use crate::standardize::StandardizedDataset;
use crate::taylor::{taylor_weights, TaylorWeights};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Eigenvalues of the Hessian above `-concavity_floor` are clamped to it.
    pub concavity_floor: f64,
    /// Smallest admissible `q`; lower maximizers are re-solved with `q` pinned here.
    pub q_min: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { concavity_floor: 1e-8, q_min: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSolution {
    pub transformed: TransformedParams,
    pub concavity_repaired: bool,
    pub q_clamped: bool,
    /// Value of the unrepaired quadratic at the returned point.
    pub objective_value: f64,
}

pub fn solve_quadratic(w: &TaylorWeights, options: &SolverOptions) -> Result<QuadraticSolution> {
    if w.to_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Taylor weights"));
    }
    let k = w.wpq.len();
    let hessian = w.hessian();
    let linear = w.linear_term();

    let eigen = SymmetricEigen::new(hessian);
    let largest = eigen.eigenvalues.max();
    let concavity_repaired = largest > -options.concavity_floor;
    let clamped = eigen.eigenvalues.map(|l| l.min(-options.concavity_floor));

    // v* = -H^{-1} g  with H = V diag(l) V^T
    let projected = eigen.eigenvectors.tr_mul(&linear);
    let scaled = DVector::from_fn(k + 1, |i, _| projected[i] / clamped[i]);
    let mut v = -(&eigen.eigenvectors * scaled);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularHessian);
    }

    let mut q_clamped = false;
    if v[k] < options.q_min {
        q_clamped = true;
        let repaired = &eigen.eigenvectors * DMatrix::from_diagonal(&clamped) * eigen.eigenvectors.transpose();
        let p = maximize_with_fixed_q(&repaired, options.q_min)?;
        v.rows_mut(0, k).copy_from(&p);
        v[k] = options.q_min;
    }

    let transformed = TransformedParams::from_vector(&v)?;
    let objective_value = w.objective(&transformed.p, transformed.q)?;
    Ok(QuadraticSolution { transformed, concavity_repaired, q_clamped, objective_value })
}

/// Maximizer over `p` of `1/2 v^T H v` with `v = (p, q)` and `q` fixed.
/// The `p` block of a negative definite `H` is negative definite.
fn maximize_with_fixed_q(h: &DMatrix<f64>, q: f64) -> Result<DVector<f64>> {
    let k = h.nrows() - 1;
    let neg_pp = -h.view((0, 0), (k, k)).into_owned();
    let rhs = h.view((0, k), (k, 1)).column(0) * q;
    let chol = neg_pp.cholesky().ok_or(Error::SingularHessian)?;
    Ok(chol.solve(&rhs))
}

/// Perturbed weights together with the fit they produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DpFit {
    pub fit: FitResult,
    pub weights: TaylorWeights,
}

/// The full private estimator: Taylor weights, Laplace perturbation at
/// `Delta / epsilon`, maximization, and `sigma = 1/q`, `beta = p sigma`.
/// Deterministic in `(data, epsilon, seed, options)`.
pub fn fit_dp(data: &StandardizedDataset, budget: PrivacyBudget, seed: u64, options: &SolverOptions) -> Result<FitResult> {
    Ok(fit_dp_detailed(data, budget, seed, options)?.fit)
}

pub fn fit_dp_detailed(data: &StandardizedDataset, budget: PrivacyBudget, seed: u64, options: &SolverOptions) -> Result<DpFit> {
    let clean = taylor_weights(data);
    let weights = perturb_weights(&clean, data.family(), budget, seed)?;
    let solution = solve_quadratic(&weights, options)?;
    let diagnostics = Diagnostics {
        concavity_repaired: solution.concavity_repaired,
        q_clamped: solution.q_clamped,
        objective_value: solution.objective_value,
        noise_seed: Some(seed),
        iterations: 0,
    };
    Ok(DpFit { fit: FitResult::from_transformed(solution.transformed, diagnostics), weights })
}

/// Maximizer of the noiseless truncated objective (the zero-noise limit of
/// [`fit_dp`]).
pub fn fit_truncated(data: &StandardizedDataset, options: &SolverOptions) -> Result<FitResult> {
    let solution = solve_quadratic(&taylor_weights(data), options)?;
    let diagnostics = Diagnostics {
        concavity_repaired: solution.concavity_repaired,
        q_clamped: solution.q_clamped,
        objective_value: solution.objective_value,
        noise_seed: None,
        iterations: 0,
    };
    Ok(FitResult::from_transformed(solution.transformed, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::model::Family;
    use nalgebra::dvector;

    #[test]
    fn hand_solvable_quadratic() {
        // -q^2 + 2q - p0^2 is maximized at q = 1, p0 = 0.
        let mut w = TaylorWeights::zeros(0);
        w.wq = 2.0;
        w.wq2 = -1.0;
        w.wp2 = alloc::vec![-1.0];
        let s = solve_quadratic(&w, &SolverOptions::default()).unwrap();
        assert!((s.transformed.q - 1.0).abs() < 1e-14);
        assert!(s.transformed.p[0].abs() < 1e-14);
        assert!(!s.concavity_repaired);
        assert!(!s.q_clamped);
        assert!((s.objective_value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn positive_curvature_is_repaired() {
        let mut w = TaylorWeights::zeros(1);
        w.wq = 2.0;
        w.wq2 = 3.0;
        w.wp2 = alloc::vec![-1.0, -1.0];
        let s = solve_quadratic(&w, &SolverOptions::default()).unwrap();
        assert!(s.concavity_repaired);
        assert!(s.transformed.q.is_finite() && s.transformed.q > 0.0);
        assert!(s.transformed.p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn negative_q_is_clamped() {
        // Linear term pushes q negative: maximize -q^2 - 2q.
        let mut w = TaylorWeights::zeros(1);
        w.wq = -2.0;
        w.wq2 = -1.0;
        w.wp2 = alloc::vec![-1.0, -2.0];
        w.wpq = alloc::vec![0.5, -0.25];
        let opts = SolverOptions::default();
        let s = solve_quadratic(&w, &opts).unwrap();
        assert!(s.q_clamped);
        assert_eq!(s.transformed.q, opts.q_min);
        // With q pinned, p_j = wpq[j] q / (-2 wp2[j]).
        assert!((s.transformed.p[0] - 0.5 * opts.q_min / 2.0).abs() < 1e-18);
        assert!((s.transformed.p[1] + 0.25 * opts.q_min / 4.0).abs() < 1e-18);
    }

    #[test]
    fn non_finite_weights_are_rejected() {
        let mut w = TaylorWeights::zeros(1);
        w.wq2 = f64::NAN;
        assert!(solve_quadratic(&w, &SolverOptions::default()).is_err());
    }

    #[test]
    fn dp_fit_is_deterministic() {
        let x = nalgebra::DMatrix::from_row_slice(4, 1, &[0.1, 0.5, 0.9, 0.3]);
        let data = StandardizedDataset::from_scaled(x, dvector![-0.5, 0.1, 0.8, -0.2], Family::sev()).unwrap();
        let budget = PrivacyBudget::new(0.5).unwrap();
        let a = fit_dp(&data, budget, 7, &SolverOptions::default()).unwrap();
        let b = fit_dp(&data, budget, 7, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.diagnostics.noise_seed, Some(7));
    }
}
