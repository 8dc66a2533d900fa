mod common;

use common::*;
use dplls_core::{
    empirical_sensitivity, fit_dp_detailed, laplace_sample, noise_rng, perturb_weights, privacy_ratio_bound, sensitivity,
    taylor_weights, Distribution, Family, PrivacyBudget, SolverOptions, StandardizedDataset, TaylorWeights,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

/// Second-order expansion of the per-row log-likelihood summed row by row.
/// SEV: `log q + z - e^z` with `log q` expanded at `q = 1` and `e^z` at `z = 0`.
/// Logistic: `log q + z - 2 softplus(z)` with `softplus(z) ~ ln2 + z/2 + z^2/8`.
fn expanded_objective(data: &StandardizedDataset, p: &DVector<f64>, q: f64) -> f64 {
    let log_q = (q - 1.0) - 0.5 * (q - 1.0) * (q - 1.0);
    let mut total = 0.0;
    for i in 0..data.n() {
        let mut z = data.y()[i] * q - p[0];
        for j in 0..data.d() {
            z -= p[j + 1] * data.x()[(i, j)];
        }
        total += log_q
            + match data.family().distribution {
                Distribution::Sev => z - (1.0 + z + 0.5 * z * z),
                Distribution::Logistic => z - 2.0 * (std::f64::consts::LN_2 + 0.5 * z + z * z / 8.0),
            };
    }
    total
}

#[test]
fn weights_reproduce_the_rowwise_expansion() {
    let mut r = rng(11);
    for family in [Family::sev(), Family::logistic()] {
        for _ in 0..50 {
            let d = r.random_range(1..8);
            let n = r.random_range(1..40);
            let data = bounded_data(&mut r, n, d, family);
            let w = taylor_weights(&data);
            for _ in 0..5 {
                let t = random_params(&mut r, d);
                let a = w.objective(&t.p, t.q).unwrap();
                let b = expanded_objective(&data, &t.p, t.q);
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn expansion_point_value_for_zero_response() {
    let mut r = rng(3);
    for _ in 0..100 {
        let d = r.random_range(1..10);
        let n = r.random_range(1..200);
        for family in [Family::sev(), Family::logistic()] {
            let base = bounded_data(&mut r, n, d, family);
            let data = StandardizedDataset::from_scaled(base.x().clone(), DVector::zeros(n), family).unwrap();
            let v = taylor_weights(&data).objective(&DVector::zeros(d + 1), 1.0).unwrap();
            let expected = match family.distribution {
                Distribution::Sev => -(n as f64),
                Distribution::Logistic => -2.0 * n as f64 * std::f64::consts::LN_2,
            };
            assert!((v - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }
}

#[test]
fn noiseless_weights_structure() {
    let mut r = rng(8);
    let data = bounded_data(&mut r, 30, 4, Family::sev());
    let w = taylor_weights(&data);
    assert_eq!(w.wq, 60.0);
    assert!(w.wq2 <= -15.0);
    assert!((&w.wph - w.wph.transpose()).amax() == 0.0);
    assert_eq!(w.len(), 3 + 2 * 5 + 5 * 4);
}

#[test]
fn hessian_matches_differenced_objective() {
    let mut r = rng(21);
    let data = bounded_data(&mut r, 25, 3, Family::logistic());
    let w = perturb_weights(&taylor_weights(&data), Family::logistic(), PrivacyBudget::new(0.7).unwrap(), 4).unwrap();
    let h = w.hessian();
    let t = random_params(&mut r, 3);
    let v = t.to_vector();
    let f = |v: &DVector<f64>| w.objective(&v.rows(0, 4).into_owned(), v[4]).unwrap();
    let step = 1e-4;
    for a in 0..5 {
        for b in 0..5 {
            let mut pp = v.clone();
            let mut pm = v.clone();
            let mut mp = v.clone();
            let mut mm = v.clone();
            pp[a] += step;
            pp[b] += step;
            pm[a] += step;
            pm[b] -= step;
            mp[a] -= step;
            mp[b] += step;
            mm[a] -= step;
            mm[b] -= step;
            let fd = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * step * step);
            assert!((h[(a, b)] - fd).abs() <= 1e-6 * h[(a, b)].abs().max(1.0), "({a},{b}) {} vs {fd}", h[(a, b)]);
        }
    }
}

#[test]
fn laplace_moments() {
    let mut g = noise_rng(99);
    let scale = 2.0;
    let draws: Vec<f64> = (0..1_000_000).map(|_| laplace_sample(scale, &mut g)).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws.len() as f64;
    let mad = draws.iter().map(|x| x.abs()).sum::<f64>() / draws.len() as f64;
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((var / 8.0 - 1.0).abs() < 0.03, "variance {var}");
    assert!((mad / scale - 1.0).abs() < 0.01, "mean absolute deviation {mad}");
}

#[test]
fn perturbation_reproduces_the_first_draw() {
    let mut r = rng(1);
    let data = bounded_data(&mut r, 20, 3, Family::sev());
    let w = taylor_weights(&data);
    let budget = PrivacyBudget::new(0.5).unwrap();
    let noisy = perturb_weights(&w, Family::sev(), budget, 42).unwrap();
    let scale = (4.0 + 4.0 * 3f64.sqrt() + 3.0) / 0.5;
    let mut g = noise_rng(42);
    let first = laplace_sample(scale, &mut g);
    assert!((noisy.w1 - w.w1 - first).abs() < 1e-9);

    let mut g = noise_rng(42);
    let again: Vec<f64> = w.to_flat().iter().map(|v| v + laplace_sample(scale, &mut g)).collect();
    assert_eq!(again, noisy.to_flat());
    assert_eq!(noisy, perturb_weights(&w, Family::sev(), budget, 42).unwrap());
}

#[test]
fn pooled_noise_has_laplace_variance() {
    let mut r = rng(6);
    let data = bounded_data(&mut r, 50, 5, Family::logistic());
    let w = taylor_weights(&data);
    let eps = 0.8;
    let scale = sensitivity(Family::logistic(), 5).unwrap() / eps;
    let mut resid = Vec::new();
    for seed in 0..4000 {
        let noisy = perturb_weights(&w, Family::logistic(), PrivacyBudget::new(eps).unwrap(), seed).unwrap();
        resid.extend(noisy.to_flat().iter().zip(w.to_flat()).map(|(a, b)| a - b));
    }
    let var = resid.iter().map(|x| x * x).sum::<f64>() / resid.len() as f64;
    assert!((var / (2.0 * scale * scale) - 1.0).abs() < 0.03);
}

#[test]
fn vanishing_noise_leaves_weights_unchanged() {
    let mut r = rng(2);
    let data = bounded_data(&mut r, 20, 4, Family::sev());
    let w = taylor_weights(&data);
    let noisy = perturb_weights(&w, Family::sev(), PrivacyBudget::new(1e12).unwrap(), 5).unwrap();
    for (a, b) in noisy.to_flat().iter().zip(w.to_flat()) {
        assert!((a - b).abs() <= 1e-6);
    }
}

#[test]
fn empirical_sensitivity_stays_below_the_bound() {
    for family in [Family::sev(), Family::logistic()] {
        for d in [1, 2, 5, 10] {
            let observed = empirical_sensitivity(family, 10, d, 2000, d as u64).unwrap();
            let bound = sensitivity(family, d).unwrap();
            assert!(observed <= bound + 1e-9, "{family:?} d={d}: {observed} > {bound}");
            assert!(observed > 0.0);
        }
    }
}

/// Exhaustive search over one-dimensional neighbors on a fine grid of the
/// bounded domain: the worst L1 change of the logistic weights.
fn grid_worst_logistic_d1() -> f64 {
    let grid: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
    let mut worst = 0.0f64;
    let weights = |x: f64, y: f64| {
        let data = StandardizedDataset::from_scaled(DMatrix::from_element(1, 1, x), DVector::from_element(1, y), Family::logistic()).unwrap();
        taylor_weights(&data).to_flat()
    };
    let rows: Vec<(f64, f64, Vec<f64>)> = grid
        .iter()
        .flat_map(|&x| grid.iter().map(move |&t| (x, 2.0 * t - 1.0)))
        .map(|(x, y)| (x, y, weights(x, y)))
        .collect();
    for (_, _, a) in &rows {
        for (_, _, b) in &rows {
            worst = worst.max(a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum());
        }
    }
    worst
}

#[test]
fn logistic_one_dimensional_extremes() {
    let bound = sensitivity(Family::logistic(), 1).unwrap();
    assert_eq!(bound, 4.5);
    let worst = grid_worst_logistic_d1();
    assert!((worst - 2.25).abs() < 1e-12, "grid worst {worst}");
    let observed = empirical_sensitivity(Family::logistic(), 5, 1, 20_000, 17).unwrap();
    assert!(observed <= worst + 1e-9);
    assert!(observed >= 0.75 * worst, "observed {observed}");
}

#[test]
fn privacy_ratio_equals_budget_at_the_worst_observation() {
    let mut r = rng(4);
    let family = Family::sev();
    let d = 3;
    let data = bounded_data(&mut r, 15, d, family);
    let (row, y) = dplls_core::privacy::random_bounded_row(d, &mut r);
    let neighbor = dplls_core::privacy::replace_row(&data, 0, &row, y).unwrap();
    let a = taylor_weights(&data);
    let b = taylor_weights(&neighbor);
    let budget = PrivacyBudget::new(1.0).unwrap();
    let ratio = privacy_ratio_bound(&a, &b, &a, family, budget).unwrap();
    let expected = dplls_core::privacy::weights_l1_distance(&a, &b).unwrap() / sensitivity(family, d).unwrap();
    assert!((ratio - expected).abs() < 1e-12);
    assert!(ratio <= 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn privacy_ratio_never_exceeds_epsilon(seed in any::<u64>(), eps in 0.05f64..10.0, logistic in any::<bool>(), d in 1usize..7) {
        let family = if logistic { Family::logistic() } else { Family::sev() };
        let mut r = rng(seed);
        let data = dplls_core::privacy::random_bounded_dataset(12, d, family, &mut r).unwrap();
        let (row, y) = dplls_core::privacy::random_bounded_row(d, &mut r);
        let i = r.random_range(0..12);
        let neighbor = dplls_core::privacy::replace_row(&data, i, &row, y).unwrap();
        let budget = PrivacyBudget::new(eps).unwrap();
        let a = taylor_weights(&data);
        let b = taylor_weights(&neighbor);
        for k in 0..5u64 {
            let observed = perturb_weights(&a, family, budget, seed.wrapping_add(k)).unwrap();
            let ratio = privacy_ratio_bound(&a, &b, &observed, family, budget).unwrap();
            prop_assert!(ratio <= eps + 1e-9);
        }
    }

    #[test]
    fn flat_round_trip(seed in any::<u64>(), d in 1usize..6) {
        let mut r = rng(seed);
        let data = bounded_data(&mut r, 9, d, Family::sev());
        let w = perturb_weights(&taylor_weights(&data), Family::sev(), PrivacyBudget::new(1.0).unwrap(), seed).unwrap();
        let back = TaylorWeights::from_flat(d, &w.to_flat()).unwrap();
        prop_assert_eq!(back, w);
    }
}

#[test]
fn repair_is_applied_after_noise() {
    let mut r = rng(10);
    let data = bounded_data(&mut r, 40, 3, Family::sev());
    let budget = PrivacyBudget::new(0.3).unwrap();
    let a = fit_dp_detailed(&data, budget, 9, &SolverOptions::default()).unwrap();
    let b = fit_dp_detailed(&data, budget, 9, &SolverOptions { concavity_floor: 5.0, q_min: 1e-3 }).unwrap();
    let released = perturb_weights(&taylor_weights(&data), Family::sev(), budget, 9).unwrap();
    assert_eq!(a.weights, released);
    assert_eq!(b.weights, released);
    assert_eq!(a.fit.diagnostics.noise_seed, Some(9));
}
