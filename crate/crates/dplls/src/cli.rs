//! Command-line interface: `fit`, `simulate`, `casestudy` and `verify`.
//!
//! Exit codes: 0 success, 1 a verified property failed, 2 usage or input
//! error, 3 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dplls_core::{
    apply_scaling, empirical_sensitivity, fit_dp_detailed, fit_mle, fit_scaling, perturb_weights, privacy_ratio_bound,
    sensitivity, taylor_weights, Dataset, Family, MleOptions, PredictMode, PrivacyBudget,
    SolverOptions,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::cmapss::{self, CaseStudyConfig, CaseSweep};
use crate::error::{Error, Result};
use crate::report::{self, RunManifest};
use crate::simgen::{self, Factor, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const FAMILIES: [&str; 4] = ["sev", "logistic", "weibull", "loglogistic"];
const PREDICT_MODES: [&str; 2] = ["location", "median"];

#[derive(Debug, Parser)]
#[command(name = "dplls", version, about = "Differentially private log-location-scale regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV file.
    Fit(FitArgs),
    /// Run a simulation sweep over one factor.
    Simulate(SimulateArgs),
    /// Run the CMAPSS FD001 case study.
    Casestudy(CaseStudyArgs),
    /// Check the sensitivity bound and the privacy ratio empirically.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Hessian eigenvalues above minus this value are clamped to it.
    #[arg(long, default_value_t = 1e-8)]
    pub concavity_floor: f64,
    /// Smallest admissible inverse scale q.
    #[arg(long, default_value_t = 1e-6)]
    pub q_min: f64,
}

impl SolverArgs {
    fn options(&self) -> Result<SolverOptions> {
        if !(self.concavity_floor > 0.0 && self.concavity_floor.is_finite()) || !(self.q_min > 0.0 && self.q_min.is_finite()) {
            return Err(Error::Config("--concavity-floor and --q-min must be positive".into()));
        }
        Ok(SolverOptions { concavity_floor: self.concavity_floor, q_min: self.q_min })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the response column; all other columns are predictors.
    #[arg(long)]
    pub response: String,
    #[arg(long, value_parser = FAMILIES)]
    pub family: String,
    #[arg(long, required_unless_present = "no_dp", conflicts_with = "no_dp")]
    pub epsilon: Option<f64>,
    /// Fit the exact maximum-likelihood estimate instead.
    #[arg(long)]
    pub no_dp: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "dplls-fit")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_parser = FAMILIES)]
    pub family: String,
    /// Factor to sweep: dimension, sample_size or epsilon.
    #[arg(long, value_parser = ["dimension", "sample_size", "epsilon"])]
    pub factor: String,
    /// Comma-separated factor values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Sample size when it is not the swept factor.
    #[arg(short = 'n', long, default_value_t = 10_000)]
    pub n: usize,
    /// Feature dimension when it is not the swept factor.
    #[arg(short = 'd', long, default_value_t = 25)]
    pub d: usize,
    /// Privacy budget when it is not the swept factor.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub repetitions: usize,
    #[arg(long, visible_alias = "seed", default_value_t = 0)]
    pub seed_base: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, value_parser = PREDICT_MODES, default_value = "location")]
    pub predict_mode: String,
    /// Worker threads; 0 uses all cores. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub threads: usize,
    #[arg(long, default_value = "dplls-sim")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CaseStudyArgs {
    /// Directory holding train_FD001.txt, test_FD001.txt and RUL_FD001.txt.
    #[arg(long)]
    pub cmapss_dir: Option<PathBuf>,
    #[arg(long, required_unless_present = "cmapss_dir")]
    pub train: Option<PathBuf>,
    #[arg(long, required_unless_present = "cmapss_dir")]
    pub test: Option<PathBuf>,
    #[arg(long, required_unless_present = "cmapss_dir")]
    pub truth: Option<PathBuf>,
    /// Which factor to sweep: dimension (principal components) or epsilon.
    #[arg(long, value_parser = ["dimension", "epsilon"])]
    pub sweep: String,
    /// Comma-separated values; defaults to 3,4,5,6 components or the standard budget grid.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    /// Budget for the dimension sweep.
    #[arg(long, default_value_t = 5.0)]
    pub epsilon: f64,
    /// Component count for the epsilon sweep.
    #[arg(long, default_value_t = 3)]
    pub components: usize,
    #[arg(long, value_parser = FAMILIES, default_value = "sev")]
    pub family: String,
    #[arg(long, default_value_t = 500)]
    pub repetitions: usize,
    #[arg(long, visible_alias = "seed", default_value_t = 0)]
    pub seed_base: u64,
    #[arg(long, default_value_t = cmapss::DEFAULT_HORIZON)]
    pub horizon: usize,
    /// 1-based sensor numbers to fuse.
    #[arg(long, value_delimiter = ',', default_values_t = cmapss::DEFAULT_SENSORS)]
    pub sensors: Vec<usize>,
    #[arg(long, value_parser = PREDICT_MODES, default_value = "location")]
    pub predict_mode: String,
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub threads: usize,
    #[arg(long, default_value = "dplls-casestudy")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_parser = FAMILIES)]
    pub family: String,
    #[arg(short = 'd', long)]
    pub d: usize,
    /// Random neighboring pairs for the sensitivity search.
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Rows in each random dataset.
    #[arg(short = 'n', long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Budgets for the privacy-ratio sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 1.0, 5.0])]
    pub epsilons: Vec<f64>,
    /// Neighboring pairs in the privacy-ratio sweep.
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    /// Released weight vectors drawn per pair.
    #[arg(long, default_value_t = 10)]
    pub observed: usize,
}

fn family(name: &str) -> Result<Family> {
    Family::from_name(name).ok_or_else(|| Error::Config(format!("unknown family {name:?}")))
}

fn predict_mode(name: &str) -> Result<PredictMode> {
    PredictMode::from_name(name).ok_or_else(|| Error::Config(format!("unknown prediction mode {name:?}")))
}

fn budget(epsilon: f64) -> Result<PrivacyBudget> {
    PrivacyBudget::new(epsilon).map_err(|_| Error::Config(format!("epsilon must be positive and finite, got {epsilon}")))
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Reads a CSV with a header row; `response` names the response column.
pub fn read_csv_dataset(path: &Path, response: &str, family: Family) -> Result<(Dataset, Vec<String>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Input { path: path.to_path_buf(), message: format!("{other:?}") },
    })?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let y_col = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::Input { path: path.to_path_buf(), message: format!("no column named {response:?}") })?;
    let names: Vec<String> = headers.iter().enumerate().filter(|(j, _)| *j != y_col).map(|(_, h)| h.clone()).collect();
    if names.is_empty() {
        return Err(Error::Input { path: path.to_path_buf(), message: "no predictor columns".into() });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { path: path.to_path_buf(), line, message: e.to_string() })?;
        if rec.len() != headers.len() {
            return Err(Error::Parse { path: path.to_path_buf(), line, message: format!("expected {} fields, found {}", headers.len(), rec.len()) });
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Parse { path: path.to_path_buf(), line, message: format!("column {:?}: bad number {field:?}", headers[j]) })?;
            if j == y_col {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = ys.len();
    let x = DMatrix::from_row_slice(n, names.len(), &xs);
    let data = Dataset::new(x, DVector::from_vec(ys), family).map_err(|e| Error::Input { path: path.to_path_buf(), message: e.to_string() })?;
    Ok((data, names))
}

#[derive(Serialize)]
struct FitDiagnostics {
    family: &'static str,
    method: &'static str,
    epsilon: Option<f64>,
    noise_seed: Option<u64>,
    concavity_repaired: bool,
    q_clamped: bool,
    objective_value: f64,
    iterations: usize,
    n: usize,
    d: usize,
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let fam = family(&args.family)?;
    let (data, names) = read_csv_dataset(&args.data, &args.response, fam)?;
    let spec = fit_scaling(&data)?;
    let scaled = apply_scaling(&data, &spec)?;
    report::create_dir(&args.out_dir)?;
    let mut outputs = Vec::new();
    let (fit, eps) = if args.no_dp {
        (fit_mle(&scaled, &MleOptions::default())?, None)
    } else {
        let eps = args.epsilon.ok_or_else(|| Error::Config("--epsilon or --no-dp is required".into()))?;
        let dp = fit_dp_detailed(&scaled, budget(eps)?, args.seed, &args.solver.options()?)?;
        let path = args.out_dir.join("weights.csv");
        report::write_weights(&path, &dp.weights)?;
        outputs.push(path);
        (dp.fit, Some(eps))
    };
    let coef_path = args.out_dir.join("coefficients.csv");
    report::write_coefficients(&coef_path, &names, &fit, &spec)?;
    outputs.insert(0, coef_path);
    let diag = FitDiagnostics {
        family: fam.name(),
        method: if args.no_dp { "mle" } else { "functional-mechanism" },
        epsilon: eps,
        noise_seed: fit.diagnostics.noise_seed,
        concavity_repaired: fit.diagnostics.concavity_repaired,
        q_clamped: fit.diagnostics.q_clamped,
        objective_value: fit.diagnostics.objective_value,
        iterations: fit.diagnostics.iterations,
        n: data.n(),
        d: data.d(),
    };
    let diag_path = args.out_dir.join("diagnostics.json");
    std::fs::write(&diag_path, serde_json::to_string_pretty(&diag)? + "\n").map_err(|e| Error::io(&diag_path, e))?;
    outputs.push(diag_path);
    let raw = spec.to_raw_params(&fit.params)?;
    println!("family {}  n {}  d {}  {}", fam.name(), data.n(), data.d(), if args.no_dp { "maximum likelihood".to_string() } else { format!("epsilon {}", eps.unwrap_or_default()) });
    println!("sigma {}", raw.sigma);
    println!("intercept {}", raw.beta[0]);
    for (j, name) in names.iter().enumerate() {
        println!("{name} {}", raw.beta[j + 1]);
    }
    if fit.diagnostics.concavity_repaired || fit.diagnostics.q_clamped {
        println!("note: concavity repaired {}, q clamped {}", fit.diagnostics.concavity_repaired, fit.diagnostics.q_clamped);
    }
    RunManifest::new("fit", serde_json::to_value(args)?, Some(args.seed), &outputs).write(&args.out_dir)?;
    Ok(EXIT_OK)
}

fn print_records(records: &[crate::record::ExperimentRecord]) {
    println!("{:>12} {:>6} {:>10} {:>10} {:>10} {:>8} {:>8}", "value", "arm", "median", "q1", "q3", "count", "failed");
    for r in records {
        for (arm, pool) in [("dp", &r.dp), ("nondp", &r.nondp)] {
            match pool.summary() {
                Some(s) => println!("{:>12} {:>6} {:>10.4} {:>10.4} {:>10.4} {:>8} {:>8}", r.factor_value, arm, s.median, s.q1, s.q3, s.count, pool.failures),
                None => println!("{:>12} {:>6} {:>10} {:>10} {:>10} {:>8} {:>8}", r.factor_value, arm, "-", "-", "-", 0, pool.failures),
            }
        }
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let mut config = SimConfig {
        family: family(&args.family)?,
        n: args.n,
        d: args.d,
        epsilon: args.epsilon,
        repetitions: args.repetitions,
        train_fraction: args.train_fraction,
        seed_base: args.seed_base,
        predict_mode: predict_mode(&args.predict_mode)?,
        solver: args.solver.options()?,
        mle: MleOptions::default(),
    };
    let factor = Factor::from_name(&args.factor).ok_or_else(|| Error::Config(format!("unknown factor {:?}", args.factor)))?;
    config = factor.apply(&config, *args.values.first().ok_or_else(|| Error::Config("--values is empty".into()))?)?;
    let mut records = with_threads(args.threads, || simgen::sweep(factor, &config, &args.values))??;
    let outputs = report::write_records(&args.out_dir, &mut records)?;
    print_records(&records);
    RunManifest::new("simulate", serde_json::to_value(args)?, Some(args.seed_base), &outputs).write(&args.out_dir)?;
    Ok(EXIT_OK)
}

pub fn cmd_casestudy(args: &CaseStudyArgs) -> Result<i32> {
    let (train, test, truth) = match &args.cmapss_dir {
        Some(dir) => {
            let (a, b, c) = cmapss::fd001_paths(dir);
            (args.train.clone().unwrap_or(a), args.test.clone().unwrap_or(b), args.truth.clone().unwrap_or(c))
        }
        None => (
            args.train.clone().ok_or_else(|| Error::Config("--train is required".into()))?,
            args.test.clone().ok_or_else(|| Error::Config("--test is required".into()))?,
            args.truth.clone().ok_or_else(|| Error::Config("--truth is required".into()))?,
        ),
    };
    let sweep = match args.sweep.as_str() {
        "dimension" => {
            let components = if args.values.is_empty() {
                cmapss::DEFAULT_COMPONENTS.to_vec()
            } else {
                args.values
                    .iter()
                    .map(|v| if *v >= 1.0 && v.fract() == 0.0 { Ok(*v as usize) } else { Err(Error::Config(format!("component count must be a positive integer, got {v}"))) })
                    .collect::<Result<Vec<_>>>()?
            };
            budget(args.epsilon)?;
            CaseSweep::Dimension { components, epsilon: args.epsilon }
        }
        _ => {
            let values = if args.values.is_empty() { cmapss::default_epsilons() } else { args.values.clone() };
            for v in &values {
                budget(*v)?;
            }
            CaseSweep::Epsilon { values, components: args.components }
        }
    };
    let config = CaseStudyConfig {
        family: family(&args.family)?,
        sweep,
        repetitions: args.repetitions,
        seed_base: args.seed_base,
        horizon: args.horizon,
        sensors: args.sensors.clone(),
        predict_mode: predict_mode(&args.predict_mode)?,
        solver: args.solver.options()?,
        mle: MleOptions::default(),
    };
    let data = cmapss::ingest_cmapss(&train, &test, &truth)?;
    let mut records = with_threads(args.threads, || cmapss::run_case_study(&data, &config))??;
    let outputs = report::write_records(&args.out_dir, &mut records)?;
    print_records(&records);
    RunManifest::new("casestudy", serde_json::to_value(args)?, Some(args.seed_base), &outputs).write(&args.out_dir)?;
    Ok(EXIT_OK)
}

/// Largest privacy log-ratio over random neighbors and released weights.
pub fn max_privacy_ratio(fam: Family, n: usize, d: usize, eps: f64, pairs: usize, observed: usize, seed: u64) -> Result<f64> {
    let budget = budget(eps)?;
    let mut rng = dplls_core::noise_rng(seed);
    rng.set_stream(3);
    let mut worst = f64::NEG_INFINITY;
    for pair in 0..pairs {
        let data = dplls_core::privacy::random_bounded_dataset(n, d, fam, &mut rng)?;
        let (row, y) = dplls_core::privacy::random_bounded_row(d, &mut rng);
        let i = rng.random_range(0..n);
        let neighbor = dplls_core::privacy::replace_row(&data, i, &row, y)?;
        let (a, b) = (taylor_weights(&data), taylor_weights(&neighbor));
        for k in 0..observed {
            let noise_seed = seed.wrapping_mul(1_000_003).wrapping_add((pair * observed + k) as u64);
            let released = perturb_weights(if k % 2 == 0 { &a } else { &b }, fam, budget, noise_seed)?;
            worst = worst.max(privacy_ratio_bound(&a, &b, &released, fam, budget)?);
        }
    }
    Ok(worst)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    if args.trials == 0 {
        return Err(Error::Config("--trials must be at least 1".into()));
    }
    if args.d == 0 || args.n == 0 || args.pairs == 0 || args.observed == 0 {
        return Err(Error::Config("--d, --n, --pairs and --observed must be at least 1".into()));
    }
    let fam = family(&args.family)?;
    let mut failed = false;
    let bound = sensitivity(fam, args.d)?;
    let observed = empirical_sensitivity(fam, args.n, args.d, args.trials, args.seed)?;
    let ok = observed <= bound;
    failed |= !ok;
    println!(
        "{} sensitivity family={} d={} trials={} observed_max={:.6} bound={:.6}",
        if ok { "PASS" } else { "FAIL" },
        fam.name(),
        args.d,
        args.trials,
        observed,
        bound
    );
    for &eps in &args.epsilons {
        let worst = max_privacy_ratio(fam, args.n, args.d, eps, args.pairs, args.observed, args.seed)?;
        let ok = worst <= eps;
        failed |= !ok;
        println!(
            "{} privacy-ratio family={} d={} epsilon={} pairs={} observed={} max_log_ratio={:.6}",
            if ok { "PASS" } else { "FAIL" },
            fam.name(),
            args.d,
            eps,
            args.pairs,
            args.observed,
            worst
        );
    }
    Ok(if failed { EXIT_PROPERTY_FAILED } else { EXIT_OK })
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Casestudy(a) => cmd_casestudy(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
