//! Pooled per-cell results shared by the simulation sweeps and the case study.

use std::path::PathBuf;

use dplls_core::{summarize, ErrorSummary, RelativeErrors};

/// Outcome of one fitting arm in one repetition.
pub type ArmOutcome = std::result::Result<RelativeErrors, dplls_core::Error>;

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub repetition: u64,
    pub seed: u64,
    pub dp: ArmOutcome,
    pub nondp: ArmOutcome,
}

/// Test-sample errors of one arm pooled over repetitions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArmPool {
    /// `(repetition, relative error)` in repetition order.
    pub errors: Vec<(u64, f64)>,
    pub excluded_near_zero: usize,
    pub failures: usize,
    pub trials: usize,
}

impl ArmPool {
    pub fn add(&mut self, repetition: u64, outcome: &ArmOutcome) {
        self.trials += 1;
        match outcome {
            Ok(errs) => {
                self.errors.extend(errs.values.iter().map(|e| (repetition, *e)));
                self.excluded_near_zero += errs.excluded_near_zero;
            }
            Err(_) => self.failures += 1,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.errors.iter().map(|(_, e)| *e).collect()
    }

    /// `None` when every repetition failed.
    pub fn summary(&self) -> Option<ErrorSummary> {
        let mut s = summarize(&self.values()).ok()?;
        s.excluded_near_zero = self.excluded_near_zero;
        Some(s)
    }
}

/// One cell of a sweep: a factor value with both arms pooled.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub factor_name: String,
    pub factor_value: f64,
    pub dp: ArmPool,
    pub nondp: ArmPool,
    /// Set once the raw errors have been written.
    pub raw_errors_path: Option<PathBuf>,
}

impl ExperimentRecord {
    pub fn new(factor_name: impl Into<String>, factor_value: f64) -> Self {
        Self { factor_name: factor_name.into(), factor_value, dp: ArmPool::default(), nondp: ArmPool::default(), raw_errors_path: None }
    }

    pub fn add(&mut self, trial: &TrialOutcome) {
        self.dp.add(trial.repetition, &trial.dp);
        self.nondp.add(trial.repetition, &trial.nondp);
    }

    pub fn dp_summary(&self) -> Option<ErrorSummary> {
        self.dp.summary()
    }

    pub fn nondp_summary(&self) -> Option<ErrorSummary> {
        self.nondp.summary()
    }
}
