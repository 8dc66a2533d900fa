//! Laplace perturbation of the Taylor weights and the checks that back the
//! epsilon-DP guarantee.

use libm::{log, sqrt};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Distribution, Family};
use crate::standardize::StandardizedDataset;
use crate::taylor::{taylor_weights, TaylorWeights};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidBudget(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Sensitivity, Laplace scale and seed for one mechanism run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub delta: f64,
    pub scale: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(family: Family, d: usize, budget: PrivacyBudget, seed: u64) -> Result<Self> {
        let delta = sensitivity(family, d)?;
        Ok(Self { delta, scale: delta / budget.epsilon(), seed })
    }
}

/// L1 global sensitivity of the weight vector for data scaled so that
/// `||x_i||_2 <= 1` and `|y_i| <= 1`:
/// `4 + 4 sqrt(d) + d` (SEV) and `2 + 2 sqrt(d) + d/2` (logistic).
pub fn sensitivity(family: Family, d: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidDimension(d));
    }
    let d = d as f64;
    Ok(match family.distribution {
        Distribution::Sev => 4.0 + 4.0 * sqrt(d) + d,
        Distribution::Logistic => 2.0 + 2.0 * sqrt(d) + 0.5 * d,
    })
}

/// Generator for the Laplace noise of a mechanism run seeded with `seed`.
pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inverse-CDF transform of `u` in `(-1/2, 1/2)` to a zero-mean Laplace draw.
pub fn laplace_from_uniform(scale: f64, u: f64) -> f64 {
    let magnitude = -scale * log(1.0 - 2.0 * u.abs());
    if u < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

pub fn laplace_sample<R: RngCore + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    loop {
        let u = rng.random::<f64>() - 0.5;
        // u = -1/2 would give an infinite draw.
        if u > -0.5 {
            return laplace_from_uniform(scale, u);
        }
    }
}

/// Adds an independent `Lap(scale)` draw to every weight in canonical order
/// (see [`TaylorWeights::to_flat`]). The `wph` diagonal is left at zero.
pub fn perturb_weights_with<R: RngCore + ?Sized>(w: &TaylorWeights, scale: f64, rng: &mut R) -> TaylorWeights {
    let mut out = w.clone();
    let noise: alloc::vec::Vec<f64> = (0..w.len()).map(|_| laplace_sample(scale, rng)).collect();
    out.for_each_mut(|slot, e| *slot += e, &noise);
    out
}

pub fn perturb_weights(w: &TaylorWeights, family: Family, budget: PrivacyBudget, seed: u64) -> Result<TaylorWeights> {
    let spec = NoiseSpec::new(family, w.d(), budget, seed)?;
    Ok(perturb_weights_with(w, spec.scale, &mut noise_rng(seed)))
}

/// `sum |a - b|` over all weights.
pub fn weights_l1_distance(a: &TaylorWeights, b: &TaylorWeights) -> Result<f64> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch { what: "weight dimension", expected: a.d(), found: b.d() });
    }
    Ok(a.to_flat().iter().zip(b.to_flat().iter()).map(|(x, y)| (x - y).abs()).sum())
}

/// Log of the density ratio `P(observed | D) / P(observed | D')` under the
/// Laplace mechanism. Differential privacy requires this to be `<= epsilon`.
pub fn privacy_ratio_bound(
    w_d: &TaylorWeights,
    w_d2: &TaylorWeights,
    observed: &TaylorWeights,
    family: Family,
    budget: PrivacyBudget,
) -> Result<f64> {
    if w_d.d() != w_d2.d() || w_d.d() != observed.d() {
        return Err(Error::DimensionMismatch { what: "weight dimension", expected: w_d.d(), found: w_d2.d().max(observed.d()) });
    }
    let delta = sensitivity(family, w_d.d())?;
    let o = observed.to_flat();
    let a = w_d.to_flat();
    let b = w_d2.to_flat();
    let mut acc = 0.0;
    for i in 0..o.len() {
        acc += (o[i] - b[i]).abs() - (o[i] - a[i]).abs();
    }
    Ok(budget.epsilon() / delta * acc)
}

/// One data row inside the scaling bounds: features in `[0, 1/sqrt(d)]`,
/// response in `[-1, 1]`. Coordinates sit on a bound half of the time so
/// the search reaches the extremes.
pub fn random_bounded_row<R: RngCore + ?Sized>(d: usize, rng: &mut R) -> (alloc::vec::Vec<f64>, f64) {
    let top = 1.0 / sqrt(d as f64);
    let mut draw = |lo: f64, hi: f64| match rng.random_range(0..4u8) {
        0 => lo,
        1 => hi,
        _ => lo + (hi - lo) * rng.random::<f64>(),
    };
    let x = (0..d).map(|_| draw(0.0, top)).collect();
    let y = draw(-1.0, 1.0);
    (x, y)
}

/// Random standardized dataset whose rows respect the scaling bounds.
pub fn random_bounded_dataset<R: RngCore + ?Sized>(n: usize, d: usize, family: Family, rng: &mut R) -> Result<StandardizedDataset> {
    let mut x = DMatrix::zeros(n, d);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let (row, yi) = random_bounded_row(d, rng);
        for (j, v) in row.into_iter().enumerate() {
            x[(i, j)] = v;
        }
        y[i] = yi;
    }
    StandardizedDataset::from_scaled(x, y, family)
}

/// Replaces row `i` of `data`, producing a neighboring dataset.
pub fn replace_row(data: &StandardizedDataset, i: usize, x: &[f64], y: f64) -> Result<StandardizedDataset> {
    let mut xm = data.x().clone();
    let mut yv = data.y().clone();
    if x.len() != data.d() {
        return Err(Error::DimensionMismatch { what: "row width", expected: data.d(), found: x.len() });
    }
    for (j, v) in x.iter().enumerate() {
        xm[(i, j)] = *v;
    }
    yv[i] = y;
    StandardizedDataset::new(xm, yv, data.spec().clone(), data.family())
}

/// Largest L1 change of the noiseless weights observed over `trials` random
/// neighboring pairs. Brute-force counterpart of [`sensitivity`].
pub fn empirical_sensitivity(family: Family, n: usize, d: usize, trials: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = random_bounded_dataset(n, d, family, &mut rng)?;
    let w_base = taylor_weights(&base);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let i = rng.random_range(0..n);
        let (row, y) = random_bounded_row(d, &mut rng);
        let neighbor = replace_row(&base, i, &row, y)?;
        worst = worst.max(weights_l1_distance(&w_base, &taylor_weights(&neighbor))?);
    }
    Ok(worst)
}
