//! Min-max predictor scaling onto `[0, 1/sqrt(d)]` and affine response
//! scaling onto `[-1, 1]`.
//!
//! After scaling, every training row satisfies `||x_i||_2 <= 1` and
//! `|y_i| <= 1`, which is what the sensitivity bounds rely on. The intercept
//! column is never stored and so is never scaled.

use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Dataset, Family, ModelParams};

/// Per-feature bounds and response range, fitted on training data only and
/// treated as public.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSpec {
    pub alpha: Vec<f64>,
    pub beta_max: Vec<f64>,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl ScalingSpec {
    /// The scaling under which already-scaled data maps to itself.
    pub fn identity(d: usize) -> Self {
        let hi = 1.0 / sqrt(d as f64);
        Self { alpha: alloc::vec![0.0; d], beta_max: alloc::vec![hi; d], y_lo: -1.0, y_hi: 1.0 }
    }

    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    /// Multiplier applied to `x_j - alpha_j`; zero for constant columns.
    fn feature_factor(&self, j: usize) -> f64 {
        let range = self.beta_max[j] - self.alpha[j];
        if range > 0.0 {
            1.0 / (range * sqrt(self.d() as f64))
        } else {
            0.0
        }
    }

    pub fn scale_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.d() {
            return Err(Error::DimensionMismatch { what: "feature count", expected: self.d(), found: row.len() });
        }
        Ok(row.iter().enumerate().map(|(j, v)| (v - self.alpha[j]) * self.feature_factor(j)).collect())
    }

    pub fn scale_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.d() {
            return Err(Error::DimensionMismatch { what: "feature count", expected: self.d(), found: x.ncols() });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.alpha[j]) * self.feature_factor(j)))
    }

    /// Maps a response (already on the log scale for log families) onto the
    /// standardized scale. A degenerate range maps everything to 0.
    pub fn scale_response(&self, y: f64) -> f64 {
        let range = self.y_hi - self.y_lo;
        if range > 0.0 {
            2.0 * (y - self.y_lo) / range - 1.0
        } else {
            0.0
        }
    }

    /// Converts coefficients fitted on the standardized scale back to the
    /// raw predictor / (log-)response scale.
    pub fn to_raw_params(&self, params: &ModelParams) -> Result<ModelParams> {
        let d = self.d();
        if params.d() != d {
            return Err(Error::DimensionMismatch { what: "coefficient count", expected: d + 1, found: params.beta.len() });
        }
        let range = self.y_hi - self.y_lo;
        if !(range > 0.0) {
            return Err(Error::DegenerateResponseRange(self.y_lo));
        }
        // y_s = a*y + b
        let a = 2.0 / range;
        let b = -2.0 * self.y_lo / range - 1.0;
        let mut beta = DVector::zeros(d + 1);
        let mut intercept = params.beta[0] - b;
        for j in 0..d {
            let s = self.feature_factor(j);
            beta[j + 1] = params.beta[j + 1] * s / a;
            intercept -= params.beta[j + 1] * s * self.alpha[j];
        }
        beta[0] = intercept / a;
        ModelParams::new(beta, params.sigma / a)
    }
}

/// Scaled predictors and responses together with the scaling that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    spec: ScalingSpec,
    family: Family,
}

impl StandardizedDataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, spec: ScalingSpec, family: Family) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Empty("dataset"));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { what: "response length", expected: x.nrows(), found: y.len() });
        }
        if spec.d() != x.ncols() {
            return Err(Error::DimensionMismatch { what: "scaling spec width", expected: x.ncols(), found: spec.d() });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("standardized dataset"));
        }
        Ok(Self { x, y, spec, family })
    }

    /// Wraps data that is already on the standardized scale.
    pub fn from_scaled(x: DMatrix<f64>, y: DVector<f64>, family: Family) -> Result<Self> {
        let spec = ScalingSpec::identity(x.ncols());
        Self::new(x, y, spec, family)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn spec(&self) -> &ScalingSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Linear predictor `p_0 + sum_j p_j x_ij` for every row.
    pub fn linear_predictor(&self, p: &DVector<f64>) -> DVector<f64> {
        let mut eta = &self.x * p.rows(1, self.d());
        eta.add_scalar_mut(p[0]);
        eta
    }

    /// Same data in a different row order (or a subset).
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        Self::new(self.x.select_rows(indices), self.y.select_rows(indices), self.spec.clone(), self.family)
    }
}

fn response_on_model_scale(y: f64, family: Family) -> Result<f64> {
    if family.log_response {
        if !(y > 0.0) {
            return Err(Error::NonPositiveResponse(y));
        }
        Ok(log(y))
    } else {
        Ok(y)
    }
}

pub fn fit_scaling(data: &Dataset) -> Result<ScalingSpec> {
    let x = data.x();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("predictor matrix"));
    }
    let d = data.d();
    let mut alpha = alloc::vec![f64::INFINITY; d];
    let mut beta_max = alloc::vec![f64::NEG_INFINITY; d];
    for j in 0..d {
        for v in x.column(j).iter() {
            alpha[j] = alpha[j].min(*v);
            beta_max[j] = beta_max[j].max(*v);
        }
    }
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for y in data.y().iter() {
        let y = response_on_model_scale(*y, data.family())?;
        if !y.is_finite() {
            return Err(Error::NonFinite("response vector"));
        }
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    Ok(ScalingSpec { alpha, beta_max, y_lo, y_hi })
}

/// Applies a previously fitted spec. Rows outside the fitting set may land
/// outside the unit bounds; nothing is clipped.
pub fn apply_scaling(data: &Dataset, spec: &ScalingSpec) -> Result<StandardizedDataset> {
    let x = spec.scale_matrix(data.x())?;
    let family = data.family();
    let mut y = DVector::zeros(data.n());
    for (dst, src) in y.iter_mut().zip(data.y().iter()) {
        *dst = spec.scale_response(response_on_model_scale(*src, family)?);
    }
    StandardizedDataset::new(x, y, spec.clone(), family)
}

pub fn fit_and_apply(data: &Dataset) -> Result<StandardizedDataset> {
    let spec = fit_scaling(data)?;
    apply_scaling(data, &spec)
}

/// Inverse of the response map, exponentiated for log families.
pub fn unscale_response(y_scaled: f64, spec: &ScalingSpec, family: Family) -> Result<f64> {
    let range = spec.y_hi - spec.y_lo;
    if !(range > 0.0) {
        return Err(Error::DegenerateResponseRange(spec.y_lo));
    }
    let y = (y_scaled + 1.0) * 0.5 * range + spec.y_lo;
    Ok(if family.log_response { exp(y) } else { y })
}
