//! Synthetic data and the simulation sweeps over dimension, sample size and
//! privacy budget.

use dplls_core::{
    apply_scaling, fit_dp, fit_mle, fit_scaling, predict_all, Dataset, Distribution, Family, MleOptions, ModelParams, PredictMode,
    PrivacyBudget, RelativeErrors, SolverOptions,
};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::record::{ArmOutcome, ExperimentRecord, TrialOutcome};

/// ChaCha stream used for data generation; the mechanism noise uses stream 0.
const DATA_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub family: Family,
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub repetitions: usize,
    pub train_fraction: f64,
    pub seed_base: u64,
    pub predict_mode: PredictMode,
    pub solver: SolverOptions,
    pub mle: MleOptions,
}

impl SimConfig {
    pub fn new(family: Family, n: usize, d: usize, epsilon: f64, repetitions: usize, seed_base: u64) -> Result<Self> {
        let config = Self {
            family,
            n,
            d,
            epsilon,
            repetitions,
            train_fraction: 0.8,
            seed_base,
            predict_mode: PredictMode::Location,
            solver: SolverOptions::default(),
            mle: MleOptions::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn n_train(&self) -> usize {
        (self.n as f64 * self.train_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::Config(format!("dimension must be at least 1, got {}", self.d)));
        }
        if self.n <= self.d + 2 {
            return Err(Error::Config(format!("need n > d + 2 (n = {}, d = {})", self.n, self.d)));
        }
        if self.repetitions < 1 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        PrivacyBudget::new(self.epsilon)?;
        let n_train = self.n_train();
        if n_train <= self.d + 2 || n_train >= self.n {
            return Err(Error::Config(format!(
                "split of n = {} at fraction {} leaves {} training and {} test samples",
                self.n,
                self.train_fraction,
                n_train,
                self.n - n_train.min(self.n)
            )));
        }
        Ok(())
    }
}

/// Quantile function of the standard SEV or logistic distribution.
pub fn standard_quantile(distribution: Distribution, u: f64) -> f64 {
    match distribution {
        Distribution::Sev => (-(1.0 - u).ln()).ln(),
        Distribution::Logistic => (u / (1.0 - u)).ln(),
    }
}

/// One standard error draw by inverse CDF, with `u` strictly inside `(0, 1)`.
pub fn standard_error_sample<R: Rng + ?Sized>(distribution: Distribution, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return standard_quantile(distribution, u);
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal predictors and coefficients, unit-scale errors, and
/// `exp` of the response for log families. Returns the data and the true
/// parameters.
pub fn generate_synthetic(n: usize, d: usize, family: Family, seed: u64) -> Result<(Dataset, ModelParams)> {
    if n < 1 || d < 1 {
        return Err(Error::Config(format!("need n >= 1 and d >= 1 (n = {n}, d = {d})")));
    }
    let mut rng = stream_rng(seed, DATA_STREAM);
    let beta = DVector::from_iterator(d + 1, (0..=d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            x[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let y = DVector::from_fn(n, |i, _| {
        let mu = beta[0] + (0..d).map(|j| beta[j + 1] * x[(i, j)]).sum::<f64>();
        let y = mu + standard_error_sample(family.distribution, &mut rng);
        if family.log_response {
            y.exp()
        } else {
            y
        }
    });
    let truth = ModelParams::new(beta, 1.0)?;
    Ok((Dataset::new(x, y, family)?, truth))
}

/// Seeded shuffle of `0..n` cut into sorted training and test index sets.
pub fn train_test_split(n: usize, n_train: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, SPLIT_STREAM));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Relative errors of `params` (standardized scale) on raw test data.
pub fn evaluate_arm(params: &ModelParams, test: &Dataset, spec: &dplls_core::ScalingSpec, mode: PredictMode) -> ArmOutcome {
    let predictions = predict_all(params, test.x(), spec, test.family(), mode)?;
    if predictions.iter().any(|p| !p.is_finite()) {
        return Err(dplls_core::Error::NonFinite("predictions"));
    }
    let mut errors = RelativeErrors::new();
    for (p, y) in predictions.iter().zip(test.y().iter()) {
        errors.push(*p, *y);
    }
    Ok(errors)
}

/// Fits both arms on `train` and scores them on `test`.
pub fn fit_and_score(train: &Dataset, test: &Dataset, budget: PrivacyBudget, seed: u64, solver: &SolverOptions, mle: &MleOptions, mode: PredictMode) -> (ArmOutcome, ArmOutcome) {
    let prepared = fit_scaling(train).and_then(|spec| apply_scaling(train, &spec).map(|s| (spec, s)));
    let (spec, scaled) = match prepared {
        Ok(v) => v,
        Err(e) => return (Err(e.clone()), Err(e)),
    };
    let dp = fit_dp(&scaled, budget, seed, solver).and_then(|fit| evaluate_arm(&fit.params, test, &spec, mode));
    let nondp = fit_mle(&scaled, mle).and_then(|fit| evaluate_arm(&fit.params, test, &spec, mode));
    (dp, nondp)
}

/// One repetition: generate, split, fit both arms on the training part and
/// score them on the test part. The seed is `seed_base + repetition`.
pub fn run_trial(config: &SimConfig, repetition: u64) -> Result<TrialOutcome> {
    config.validate()?;
    let seed = config.seed_base.wrapping_add(repetition);
    let (data, _) = generate_synthetic(config.n, config.d, config.family, seed)?;
    let (train_idx, test_idx) = train_test_split(config.n, config.n_train(), seed);
    let train = data.select_rows(&train_idx)?;
    let test = data.select_rows(&test_idx)?;
    let budget = PrivacyBudget::new(config.epsilon)?;
    let (dp, nondp) = fit_and_score(&train, &test, budget, seed, &config.solver, &config.mle, config.predict_mode);
    Ok(TrialOutcome { repetition, seed, dp, nondp })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Dimension,
    SampleSize,
    Epsilon,
}

impl Factor {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "dimension" | "d" => Some(Factor::Dimension),
            "sample_size" | "sample-size" | "n" => Some(Factor::SampleSize),
            "epsilon" | "eps" => Some(Factor::Epsilon),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Factor::Dimension => "dimension",
            Factor::SampleSize => "sample_size",
            Factor::Epsilon => "epsilon",
        }
    }

    /// `config` with this factor set to `value`.
    pub fn apply(&self, config: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut c = config.clone();
        let as_count = |v: f64| {
            if v >= 1.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{} must be a positive integer, got {v}", self.name())))
            }
        };
        match self {
            Factor::Dimension => c.d = as_count(value)?,
            Factor::SampleSize => c.n = as_count(value)?,
            Factor::Epsilon => c.epsilon = value,
        }
        c.validate()?;
        Ok(c)
    }
}

/// Runs every repetition of every factor value. Repetitions are numbered
/// from 1 and run on the current rayon pool; results are assembled in
/// (value, repetition) order, so the output does not depend on the number
/// of threads.
pub fn sweep(factor: Factor, config: &SimConfig, values: &[f64]) -> Result<Vec<ExperimentRecord>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let cells = values.iter().map(|v| factor.apply(config, *v)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| (1..=config.repetitions as u64).map(move |r| (c, r))).collect();
    let outcomes = jobs.par_iter().map(|&(c, r)| run_trial(&cells[c], r).map(|t| (c, t))).collect::<Result<Vec<_>>>()?;
    let mut records: Vec<ExperimentRecord> = values.iter().map(|v| ExperimentRecord::new(factor.name(), *v)).collect();
    for (c, trial) in &outcomes {
        records[*c].add(trial);
    }
    Ok(records)
}
