//! Differentially private log-location-scale regression through the
//! functional mechanism.
//!
//! The log-likelihood of SEV (Weibull) or logistic (log-logistic) regression
//! is rewritten in the concave parameterization `q = 1/sigma`,
//! `p_j = beta_j q`, expanded to second order around `p = 0, q = 1`, and the
//! polynomial's coefficients are perturbed with Laplace noise calibrated to
//! their L1 sensitivity. Maximizing the noisy quadratic gives
//! epsilon-differentially private estimates.
//!
//! The crate is `no_std` and only needs `alloc`.
//!
//! ```
//! use dplls_core::{fit_dp, fit_and_apply, Dataset, Family, PrivacyBudget, SolverOptions};
//! use nalgebra::{DMatrix, DVector};
//!
//! let x = DMatrix::from_row_slice(6, 1, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
//! let y = DVector::from_vec(vec![1.0, 1.8, 3.1, 3.9, 5.2, 6.0]);
//! let data = fit_and_apply(&Dataset::new(x, y, Family::sev()).unwrap()).unwrap();
//! let fit = fit_dp(&data, PrivacyBudget::new(1.0).unwrap(), 7, &SolverOptions::default()).unwrap();
//! assert!(fit.params.sigma > 0.0);
//! ```
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod evaluate;
pub mod loglik;
pub mod mle;
pub mod model;
pub mod privacy;
pub mod solver;
pub mod standardize;
pub mod taylor;

pub use error::{Error, Result};
pub use evaluate::{predict, predict_all, predict_standardized, relative_error, summarize, ErrorSummary, PredictMode, RelativeErrors};
pub use loglik::{loglik, loglik_grad, loglik_hessian, loglik_logistic, loglik_sev};
pub use mle::{fit_mle, MleOptions};
pub use model::{Dataset, Diagnostics, Distribution, Family, FitResult, ModelParams, TransformedParams};
pub use privacy::{
    empirical_sensitivity, laplace_sample, noise_rng, perturb_weights, privacy_ratio_bound, sensitivity, NoiseSpec,
    PrivacyBudget,
};
pub use solver::{fit_dp, fit_dp_detailed, fit_truncated, solve_quadratic, DpFit, QuadraticSolution, SolverOptions};
pub use standardize::{apply_scaling, fit_and_apply, fit_scaling, unscale_response, ScalingSpec, StandardizedDataset};
pub use taylor::{taylor_weights, taylor_weights_logistic, taylor_weights_sev, TaylorWeights};
