//! Point prediction on the original response scale and the absolute
//! relative error summaries used for the experiment reports.

use alloc::vec::Vec;

use libm::log;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Distribution, Family, ModelParams};
use crate::standardize::{unscale_response, ScalingSpec};

/// Below this magnitude the true response is excluded from error summaries.
pub const NEAR_ZERO: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictMode {
    /// Conditional location `mu = beta_0 + sum_j beta_j x_j`.
    #[default]
    Location,
    /// Median of the fitted distribution: `mu + sigma log(log 2)` for SEV,
    /// `mu` for logistic.
    Median,
}

impl PredictMode {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "location" => Some(Self::Location),
            "median" => Some(Self::Median),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Location => "location",
            Self::Median => "median",
        }
    }
}

/// Prediction on the standardized response scale for an already-scaled row.
pub fn predict_standardized(params: &ModelParams, x_scaled: &[f64], family: Family, mode: PredictMode) -> Result<f64> {
    if x_scaled.len() != params.d() {
        return Err(Error::DimensionMismatch { what: "feature count", expected: params.d(), found: x_scaled.len() });
    }
    let mu = params.beta[0] + x_scaled.iter().zip(params.beta.iter().skip(1)).map(|(x, b)| x * b).sum::<f64>();
    Ok(match (mode, family.distribution) {
        (PredictMode::Median, Distribution::Sev) => mu + params.sigma * log(core::f64::consts::LN_2),
        _ => mu,
    })
}

/// Predicts the raw response for a raw (unscaled) predictor row.
pub fn predict(params: &ModelParams, x_row: &[f64], spec: &ScalingSpec, family: Family, mode: PredictMode) -> Result<f64> {
    let scaled = spec.scale_row(x_row)?;
    unscale_response(predict_standardized(params, &scaled, family, mode)?, spec, family)
}

/// [`predict`] for every row of a raw predictor matrix.
pub fn predict_all(params: &ModelParams, x: &DMatrix<f64>, spec: &ScalingSpec, family: Family, mode: PredictMode) -> Result<Vec<f64>> {
    let mut row = alloc::vec![0.0; x.ncols()];
    (0..x.nrows())
        .map(|i| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = x[(i, j)];
            }
            predict(params, &row, spec, family, mode)
        })
        .collect()
}

/// `|y_hat - y_true| / |y_true|`, or `None` when `|y_true| < NEAR_ZERO`.
pub fn relative_error(y_hat: f64, y_true: f64) -> Option<f64> {
    if y_true.abs() < NEAR_ZERO {
        None
    } else {
        Some((y_hat - y_true).abs() / y_true.abs())
    }
}

/// Pooled per-sample errors plus the count of excluded near-zero targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelativeErrors {
    pub values: Vec<f64>,
    pub excluded_near_zero: usize,
}

impl RelativeErrors {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, y_hat: f64, y_true: f64) {
        match relative_error(y_hat, y_true) {
            Some(e) => self.values.push(e),
            None => self.excluded_near_zero += 1,
        }
    }

    pub fn extend(&mut self, other: &RelativeErrors) {
        self.values.extend_from_slice(&other.values);
        self.excluded_near_zero += other.excluded_near_zero;
    }

    pub fn summarize(&self) -> Result<ErrorSummary> {
        let mut s = summarize(&self.values)?;
        s.excluded_near_zero = self.excluded_near_zero;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub count: usize,
    pub excluded_near_zero: usize,
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) prob`).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(errors: &[f64]) -> Result<ErrorSummary> {
    if errors.is_empty() {
        return Err(Error::Empty("error vector"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(ErrorSummary { median, q1, q3, iqr: q3 - q1, count: sorted.len(), excluded_near_zero: 0 })
}
