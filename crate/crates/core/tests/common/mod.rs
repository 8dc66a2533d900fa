#![allow(dead_code)]

use dplls_core::{Family, StandardizedDataset, TransformedParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform rows inside the scaling bounds.
pub fn bounded_data(rng: &mut ChaCha8Rng, n: usize, d: usize, family: Family) -> StandardizedDataset {
    let top = 1.0 / (d as f64).sqrt();
    let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * top);
    let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    StandardizedDataset::from_scaled(x, y, family).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, d: usize) -> TransformedParams {
    let p = DVector::from_fn(d + 1, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    TransformedParams::new(p, 0.2 + 2.0 * rng.random::<f64>()).unwrap()
}

/// Location-scale data on the standardized scale with known parameters.
pub fn synthetic_scaled(rng: &mut ChaCha8Rng, n: usize, d: usize, family: Family, beta: &[f64], sigma: f64) -> StandardizedDataset {
    let top = 1.0 / (d as f64).sqrt();
    let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * top);
    let y = DVector::from_fn(n, |i, _| {
        let u: f64 = rng.random_range(1e-12..1.0 - 1e-12);
        let eps = match family.distribution {
            dplls_core::Distribution::Sev => (-(1.0 - u).ln()).ln(),
            dplls_core::Distribution::Logistic => (u / (1.0 - u)).ln(),
        };
        let mu = beta[0] + (0..d).map(|j| beta[j + 1] * x[(i, j)]).sum::<f64>();
        mu + sigma * eps
    });
    StandardizedDataset::from_scaled(x, y, family).unwrap()
}
