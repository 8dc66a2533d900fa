//! Domain types shared by every estimator: distribution family, raw data,
//! and the two parameterizations of a fitted model.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// The standard location-scale distribution of the (possibly log-) response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distribution {
    /// Smallest extreme value (Gumbel minimum). Its exponential is Weibull.
    Sev,
    /// Standard logistic. Its exponential is log-logistic.
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Family {
    pub distribution: Distribution,
    /// When set, the model is fitted to `log(y)` (Weibull / log-logistic reading).
    pub log_response: bool,
}

impl Family {
    pub const fn sev() -> Self {
        Self { distribution: Distribution::Sev, log_response: false }
    }

    pub const fn logistic() -> Self {
        Self { distribution: Distribution::Logistic, log_response: false }
    }

    pub const fn weibull() -> Self {
        Self { distribution: Distribution::Sev, log_response: true }
    }

    pub const fn log_logistic() -> Self {
        Self { distribution: Distribution::Logistic, log_response: true }
    }

    /// Parses the CLI spelling: `sev`, `logistic`, `weibull`, `loglogistic`.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sev" => Some(Self::sev()),
            "logistic" => Some(Self::logistic()),
            "weibull" => Some(Self::weibull()),
            "loglogistic" | "log-logistic" => Some(Self::log_logistic()),
            _ => None,
        }
    }

    pub const fn name(&self) -> &'static str {
        match (self.distribution, self.log_response) {
            (Distribution::Sev, false) => "sev",
            (Distribution::Logistic, false) => "logistic",
            (Distribution::Sev, true) => "weibull",
            (Distribution::Logistic, true) => "loglogistic",
        }
    }
}

/// Raw predictors and responses, before any scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    family: Family,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, family: Family) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Empty("dataset"));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("predictor matrix"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response vector"));
        }
        Ok(Self { x, y, family })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
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

    /// Rows `indices` (in the given order) as a new dataset.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        Self::new(self.x.select_rows(indices), self.y.select_rows(indices), self.family)
    }
}

/// Regression coefficients `beta` (intercept first) and scale `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub beta: DVector<f64>,
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(beta: DVector<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::NonPositiveScale(sigma));
        }
        if beta.is_empty() {
            return Err(Error::Empty("coefficient vector"));
        }
        Ok(Self { beta, sigma })
    }

    /// Number of non-intercept predictors.
    pub fn d(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn to_transformed(&self) -> TransformedParams {
        let q = 1.0 / self.sigma;
        TransformedParams { p: &self.beta * q, q }
    }
}

/// The concave reparameterization `q = 1/sigma`, `p_j = beta_j * q`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedParams {
    pub p: DVector<f64>,
    pub q: f64,
}

impl TransformedParams {
    pub fn new(p: DVector<f64>, q: f64) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::NonPositiveScale(q));
        }
        if p.is_empty() {
            return Err(Error::Empty("location vector"));
        }
        Ok(Self { p, q })
    }

    /// The point the Taylor expansion is taken around: `p = 0`, `q = 1`.
    pub fn expansion_point(d: usize) -> Self {
        Self { p: DVector::zeros(d + 1), q: 1.0 }
    }

    /// Stacks `(p_0, ..., p_d, q)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let k = self.p.len();
        DVector::from_fn(k + 1, |i, _| if i < k { self.p[i] } else { self.q })
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        let k = v.len();
        if k < 2 {
            return Err(Error::DimensionMismatch { what: "parameter vector", expected: 2, found: k });
        }
        Self::new(v.rows(0, k - 1).into_owned(), v[k - 1])
    }

    pub fn to_model(&self) -> ModelParams {
        let sigma = 1.0 / self.q;
        ModelParams { beta: &self.p * sigma, sigma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    /// Noise made the quadratic non-concave and its spectrum was clamped.
    pub concavity_repaired: bool,
    /// The unconstrained maximizer had `q < q_min`; `q` was pinned.
    pub q_clamped: bool,
    /// Objective at the returned point: perturbed quadratic for DP fits,
    /// exact log-likelihood for maximum likelihood fits.
    pub objective_value: f64,
    /// Seed of the Laplace noise stream, absent for non-private fits.
    pub noise_seed: Option<u64>,
    /// Newton iterations (maximum likelihood only).
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    pub transformed: TransformedParams,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    pub(crate) fn from_transformed(transformed: TransformedParams, diagnostics: Diagnostics) -> Self {
        Self { params: transformed.to_model(), transformed, diagnostics }
    }
}
