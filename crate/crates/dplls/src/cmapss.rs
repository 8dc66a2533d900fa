//! CMAPSS turbofan case study: ingestion, truncation, PCA fusion of the
//! selected sensors, and the component-count and privacy-budget sweeps.
//!
//! Files use the whitespace-separated NASA layout: unit number, cycle,
//! three operational settings and 21 sensor readings per row. The truth
//! file holds one remaining-useful-life value per test engine.

use std::fs;
use std::path::{Path, PathBuf};

use dplls_core::{apply_scaling, fit_dp, fit_mle, fit_scaling, Dataset, Family, MleOptions, PredictMode, PrivacyBudget, SolverOptions};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::record::ExperimentRecord;
use crate::simgen::evaluate_arm;

pub const SETTING_COUNT: usize = 3;
pub const SENSOR_COUNT: usize = 21;
pub const COLUMN_COUNT: usize = 2 + SETTING_COUNT + SENSOR_COUNT;
pub const DEFAULT_SENSORS: [usize; 3] = [4, 17, 20];
pub const DEFAULT_HORIZON: usize = 150;

/// Per-engine degradation history.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineSignal {
    pub engine_id: u32,
    /// `cycles x 3` operational settings.
    pub settings: DMatrix<f64>,
    /// `cycles x 21` sensor readings; sensor `s` (1-based) is column `s - 1`.
    pub sensors: DMatrix<f64>,
    /// Total life in cycles.
    pub ttf: u32,
}

impl EngineSignal {
    pub fn cycles(&self) -> usize {
        self.sensors.nrows()
    }

    /// Rows in the source layout, cycles numbered from 1.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.cycles())
            .map(|t| {
                let mut row = vec![self.engine_id as f64, (t + 1) as f64];
                row.extend(self.settings.row(t).iter());
                row.extend(self.sensors.row(t).iter());
                row
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmapssData {
    pub train: Vec<EngineSignal>,
    pub test: Vec<EngineSignal>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses a signal file. Engines must appear in blocks numbered `1, 2, ...`
/// with cycles `1, 2, ...` inside each block. The returned `ttf` is the
/// observed cycle count.
pub fn parse_signals(text: &str, path: &Path) -> Result<Vec<EngineSignal>> {
    let parse_error = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut engines: Vec<(u32, Vec<[f64; COLUMN_COUNT - 2]>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != COLUMN_COUNT {
            return Err(parse_error(lineno, format!("expected {COLUMN_COUNT} columns, found {}", fields.len())));
        }
        let unit: u32 = fields[0].parse().map_err(|_| parse_error(lineno, format!("bad unit number {:?}", fields[0])))?;
        let cycle: usize = fields[1].parse().map_err(|_| parse_error(lineno, format!("bad cycle number {:?}", fields[1])))?;
        let mut values = [0.0; COLUMN_COUNT - 2];
        for (k, f) in fields[2..].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| parse_error(lineno, format!("bad reading {f:?} in column {}", k + 3)))?;
            if !v.is_finite() {
                return Err(parse_error(lineno, format!("non-finite reading in column {}", k + 3)));
            }
            values[k] = v;
        }
        match engines.last_mut() {
            Some((id, rows)) if *id == unit => {
                if cycle != rows.len() + 1 {
                    return Err(parse_error(lineno, format!("engine {unit}: expected cycle {}, found {cycle}", rows.len() + 1)));
                }
                rows.push(values);
            }
            _ => {
                let expected = engines.len() as u32 + 1;
                if unit != expected {
                    return Err(parse_error(lineno, format!("expected engine {expected}, found engine {unit}")));
                }
                if cycle != 1 {
                    return Err(parse_error(lineno, format!("engine {unit} starts at cycle {cycle}, expected 1")));
                }
                engines.push((unit, vec![values]));
            }
        }
    }
    if engines.is_empty() {
        return Err(Error::Input { path: path.to_path_buf(), message: "no engine rows found".into() });
    }
    Ok(engines
        .into_iter()
        .map(|(engine_id, rows)| {
            let cycles = rows.len();
            EngineSignal {
                engine_id,
                settings: DMatrix::from_fn(cycles, SETTING_COUNT, |t, j| rows[t][j]),
                sensors: DMatrix::from_fn(cycles, SENSOR_COUNT, |t, j| rows[t][SETTING_COUNT + j]),
                ttf: cycles as u32,
            }
        })
        .collect())
}

/// One non-negative integer remaining life per non-empty line.
pub fn parse_truth(text: &str, path: &Path) -> Result<Vec<u32>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<u32>().map_err(|_| Error::Parse { path: path.to_path_buf(), line: i + 1, message: format!("bad remaining life {:?}", l.trim()) })
        })
        .collect()
}

/// Reads the training, test and truth files. Training engines ran to
/// failure, so their life is the observed length; test engines add the
/// remaining life from the truth file.
pub fn ingest_cmapss(train_path: &Path, test_path: &Path, truth_path: &Path) -> Result<CmapssData> {
    let train = parse_signals(&read(train_path)?, train_path)?;
    let mut test = parse_signals(&read(test_path)?, test_path)?;
    let truth = parse_truth(&read(truth_path)?, truth_path)?;
    if truth.len() != test.len() {
        return Err(Error::Input {
            path: truth_path.to_path_buf(),
            message: format!("{} remaining-life values for {} test engines in {}", truth.len(), test.len(), test_path.display()),
        });
    }
    for (engine, rul) in test.iter_mut().zip(truth) {
        engine.ttf += rul;
    }
    Ok(CmapssData { train, test })
}

/// Keeps engines whose life and observed history both reach `horizon`,
/// cut to their first `horizon` cycles.
pub fn truncate_signals(signals: &[EngineSignal], horizon: usize) -> Result<Vec<EngineSignal>> {
    if horizon < 1 {
        return Err(Error::Config("truncation horizon must be at least 1".into()));
    }
    Ok(signals
        .iter()
        .filter(|s| s.ttf as usize >= horizon && s.cycles() >= horizon)
        .map(|s| EngineSignal {
            engine_id: s.engine_id,
            settings: s.settings.rows(0, horizon).into_owned(),
            sensors: s.sensors.rows(0, horizon).into_owned(),
            ttf: s.ttf,
        })
        .collect())
}

fn check_sensors(sensor_ids: &[usize]) -> Result<()> {
    if sensor_ids.is_empty() {
        return Err(Error::Config("at least one sensor is required".into()));
    }
    if let Some(s) = sensor_ids.iter().find(|s| **s < 1 || **s > SENSOR_COUNT) {
        return Err(Error::Config(format!("sensor ids run from 1 to {SENSOR_COUNT}, got {s}")));
    }
    Ok(())
}

/// Selected sensor histories stacked sensor by sensor into one row per
/// engine. All engines must have the same length.
pub fn flatten_signals(signals: &[EngineSignal], sensor_ids: &[usize]) -> Result<DMatrix<f64>> {
    check_sensors(sensor_ids)?;
    let first = signals.first().ok_or_else(|| Error::Config("no engines to flatten".into()))?;
    let len = first.cycles();
    if let Some(s) = signals.iter().find(|s| s.cycles() != len) {
        return Err(Error::Config(format!("engine {} has {} cycles, expected {len}; truncate first", s.engine_id, s.cycles())));
    }
    Ok(DMatrix::from_fn(signals.len(), sensor_ids.len() * len, |i, c| signals[i].sensors[(c % len, sensor_ids[c / len] - 1)]))
}

/// Principal directions of a data matrix, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub mean: DVector<f64>,
    /// Columns are unit principal directions; each column's largest-magnitude
    /// entry is positive.
    pub components: DMatrix<f64>,
    /// Sample variance along each direction (divisor `n - 1`), non-increasing.
    pub variances: DVector<f64>,
}

impl PcaBasis {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::Config(format!("PCA needs at least 2 rows, got {n}")));
        }
        let mean = DVector::from_fn(x.ncols(), |j, _| x.column(j).mean());
        let centered = DMatrix::from_fn(n, x.ncols(), |i, j| x[(i, j)] - mean[j]);
        let svd = centered.svd(false, true);
        let v_t = svd.v_t.ok_or(dplls_core::Error::SingularHessian)?;
        let s = &svd.singular_values;
        let largest = s.max();
        let tol = largest * (n.max(x.ncols()) as f64) * f64::EPSILON;
        let mut order: Vec<usize> = (0..s.len()).filter(|&i| s[i] > tol).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        let mut components = DMatrix::zeros(x.ncols(), order.len());
        for (c, &i) in order.iter().enumerate() {
            let mut dir: DVector<f64> = v_t.row(i).transpose();
            let pivot = dir.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            if pivot < 0.0 {
                dir = -dir;
            }
            components.set_column(c, &dir);
        }
        let variances = DVector::from_iterator(order.len(), order.iter().map(|&i| s[i] * s[i] / (n - 1) as f64));
        Ok(Self { mean, components, variances })
    }

    pub fn rank(&self) -> usize {
        self.components.ncols()
    }

    /// Scores of each row of `x` on the first `k` directions.
    pub fn scores(&self, x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
        if k < 1 || k > self.rank() {
            return Err(Error::Config(format!("requested {k} components but the training data has rank {}", self.rank())));
        }
        if x.ncols() != self.mean.len() {
            return Err(dplls_core::Error::DimensionMismatch { what: "flattened signal length", expected: self.mean.len(), found: x.ncols() }.into());
        }
        let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - self.mean[j]);
        Ok(centered * self.components.columns(0, k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeatures {
    pub engine_id: u32,
    pub features: DVector<f64>,
    pub ttf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedSets {
    pub basis: PcaBasis,
    pub train: Vec<FusedFeatures>,
    pub test: Vec<FusedFeatures>,
}

/// Fits the PCA basis on the training engines only and projects both sets
/// onto its first `k` directions.
pub fn pca_fuse(train: &[EngineSignal], test: &[EngineSignal], sensor_ids: &[usize], k: usize) -> Result<FusedSets> {
    let x_train = flatten_signals(train, sensor_ids)?;
    let basis = PcaBasis::fit(&x_train)?;
    let fuse = |signals: &[EngineSignal], x: &DMatrix<f64>| -> Result<Vec<FusedFeatures>> {
        let scores = basis.scores(x, k)?;
        Ok(signals
            .iter()
            .enumerate()
            .map(|(i, s)| FusedFeatures { engine_id: s.engine_id, features: scores.row(i).transpose(), ttf: s.ttf as f64 })
            .collect())
    };
    let train_features = fuse(train, &x_train)?;
    let test_features = if test.is_empty() { Vec::new() } else { fuse(test, &flatten_signals(test, sensor_ids)?)? };
    if test.first().is_some_and(|t| t.cycles() != train[0].cycles()) {
        return Err(Error::Config("training and test engines are truncated to different lengths".into()));
    }
    Ok(FusedSets { basis, train: train_features, test: test_features })
}

/// Regression data with the fused scores as predictors and life as response.
pub fn to_dataset(features: &[FusedFeatures], family: Family) -> Result<Dataset> {
    let k = features.first().map(|f| f.features.len()).ok_or_else(|| Error::Config("no engines in the regression set".into()))?;
    let x = DMatrix::from_fn(features.len(), k, |i, j| features[i].features[j]);
    let y = DVector::from_iterator(features.len(), features.iter().map(|f| f.ttf));
    Ok(Dataset::new(x, y, family)?)
}

/// Component counts examined at a fixed budget.
pub const DEFAULT_COMPONENTS: [usize; 4] = [3, 4, 5, 6];

/// Budgets examined at a fixed component count.
pub fn default_epsilons() -> Vec<f64> {
    vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 10.0]
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseSweep {
    /// Component counts at budget `epsilon`.
    Dimension { components: Vec<usize>, epsilon: f64 },
    /// Budgets at a fixed component count.
    Epsilon { values: Vec<f64>, components: usize },
}

impl CaseSweep {
    pub fn factor_name(&self) -> &'static str {
        match self {
            CaseSweep::Dimension { .. } => "dimension",
            CaseSweep::Epsilon { .. } => "epsilon",
        }
    }

    /// `(factor value, k, epsilon)` per cell.
    fn cells(&self) -> Vec<(f64, usize, f64)> {
        match self {
            CaseSweep::Dimension { components, epsilon } => components.iter().map(|k| (*k as f64, *k, *epsilon)).collect(),
            CaseSweep::Epsilon { values, components } => values.iter().map(|e| (*e, *components, *e)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyConfig {
    pub family: Family,
    pub sweep: CaseSweep,
    pub repetitions: usize,
    pub seed_base: u64,
    pub horizon: usize,
    pub sensors: Vec<usize>,
    pub predict_mode: PredictMode,
    pub solver: SolverOptions,
    pub mle: MleOptions,
}

impl CaseStudyConfig {
    pub fn new(sweep: CaseSweep) -> Self {
        Self {
            family: Family::sev(),
            sweep,
            repetitions: 500,
            seed_base: 0,
            horizon: DEFAULT_HORIZON,
            sensors: DEFAULT_SENSORS.to_vec(),
            predict_mode: PredictMode::Location,
            solver: SolverOptions::default(),
            mle: MleOptions::default(),
        }
    }
}

/// Truncates, fuses and fits. The data are fixed, so the non-private fit
/// is computed once per cell; the private fit is repeated with seeds
/// `seed_base + 1 ..= seed_base + repetitions`.
pub fn run_case_study(data: &CmapssData, config: &CaseStudyConfig) -> Result<Vec<ExperimentRecord>> {
    if config.repetitions < 1 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let cells = config.sweep.cells();
    if cells.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let train = truncate_signals(&data.train, config.horizon)?;
    let test = truncate_signals(&data.test, config.horizon)?;
    if test.is_empty() {
        return Err(Error::Config(format!("no test engine reaches {} cycles", config.horizon)));
    }
    let mut prepared = Vec::with_capacity(cells.len());
    for &(value, k, epsilon) in &cells {
        let budget = PrivacyBudget::new(epsilon)?;
        let fused = pca_fuse(&train, &test, &config.sensors, k)?;
        let train_set = to_dataset(&fused.train, config.family)?;
        let test_set = to_dataset(&fused.test, config.family)?;
        let spec = fit_scaling(&train_set)?;
        let scaled = apply_scaling(&train_set, &spec)?;
        let nondp = fit_mle(&scaled, &config.mle).and_then(|fit| evaluate_arm(&fit.params, &test_set, &spec, config.predict_mode));
        prepared.push((value, budget, test_set, spec, scaled, nondp));
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| (1..=config.repetitions as u64).map(move |r| (c, r))).collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (_, budget, test_set, spec, scaled, _) = &prepared[c];
            let seed = config.seed_base.wrapping_add(r);
            let dp = fit_dp(scaled, *budget, seed, &config.solver).and_then(|fit| evaluate_arm(&fit.params, test_set, spec, config.predict_mode));
            (c, r, dp)
        })
        .collect();
    let mut records: Vec<ExperimentRecord> = prepared
        .iter()
        .map(|(value, _, _, _, _, nondp)| {
            let mut rec = ExperimentRecord::new(config.sweep.factor_name(), *value);
            rec.nondp.add(0, nondp);
            rec
        })
        .collect();
    for (c, r, dp) in &outcomes {
        records[*c].dp.add(*r, dp);
    }
    Ok(records)
}

/// Default file locations inside a directory holding the FD001 files.
pub fn fd001_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join("train_FD001.txt"), dir.join("test_FD001.txt"), dir.join("RUL_FD001.txt"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(unit: u32, cycle: usize, base: f64) -> String {
        let mut fields = vec![unit.to_string(), cycle.to_string()];
        fields.extend((0..24).map(|j| format!("{}", base + j as f64 * 0.5)));
        fields.join(" ")
    }

    #[test]
    fn parses_blocks_and_lengths() {
        let text: Vec<String> = (1..=3).map(|c| row(1, c, c as f64)).chain((1..=2).map(|c| row(2, c, 10.0))).collect();
        let engines = parse_signals(&text.join("\n"), Path::new("t.txt")).unwrap();
        assert_eq!(engines.len(), 2);
        assert_eq!(engines[0].cycles(), 3);
        assert_eq!(engines[0].ttf, 3);
        assert_eq!(engines[0].sensors[(2, 0)], 3.0 + 1.5);
    }

    #[test]
    fn rejects_gaps() {
        let text = [row(1, 1, 0.0), row(3, 1, 0.0)].join("\n");
        assert!(matches!(parse_signals(&text, Path::new("t")), Err(Error::Parse { line: 2, .. })));
        let text = [row(1, 1, 0.0), row(1, 3, 0.0)].join("\n");
        assert!(parse_signals(&text, Path::new("t")).is_err());
        assert!(parse_signals("1 1 2", Path::new("t")).is_err());
    }

    #[test]
    fn truth_values() {
        assert_eq!(parse_truth("112\n98 \n\n69\n", Path::new("r")).unwrap(), vec![112, 98, 69]);
        assert!(parse_truth("1.5\n", Path::new("r")).is_err());
    }

    #[test]
    fn flattening_is_sensor_major() {
        let s = EngineSignal {
            engine_id: 1,
            settings: DMatrix::zeros(2, 3),
            sensors: DMatrix::from_fn(2, SENSOR_COUNT, |t, j| (100 * (j + 1) + t) as f64),
            ttf: 2,
        };
        let x = flatten_signals(&[s], &[4, 17]).unwrap();
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![400.0, 401.0, 1700.0, 1701.0]);
        assert!(flatten_signals(&[], &[4]).is_err());
    }

    #[test]
    fn epsilon_grid_has_fourteen_distinct_values() {
        let e = default_epsilons();
        assert_eq!(e.len(), 14);
        assert!(e.windows(2).all(|w| w[0] < w[1]));
    }
}
