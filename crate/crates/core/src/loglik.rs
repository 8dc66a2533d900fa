//! Exact log-likelihoods in the concave `(p, q)` parameterization:
//!
//! ```text
//! l(p, q) = n log q + sum_i psi(z_i),   z_i = y_i q - sum_j p_j x_ij
//! ```
//!
//! with `psi(z) = z - e^z` for SEV and `psi(z) = z - 2 log(1 + e^z)` for the
//! logistic distribution. `x_i0 = 1` is supplied here, never stored.

use libm::{exp, fabs, log, log1p};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Distribution, Family, TransformedParams};
use crate::standardize::StandardizedDataset;

/// `log(1 + e^z)` without overflow for large `|z|`.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + log1p(exp(-fabs(z)))
}

fn logistic_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

/// `psi(z)`, `psi'(z)`, `psi''(z)` for the chosen distribution.
#[inline]
fn psi(distribution: Distribution, z: f64) -> (f64, f64, f64) {
    match distribution {
        Distribution::Sev => {
            let e = exp(z);
            (z - e, 1.0 - e, -e)
        }
        Distribution::Logistic => {
            let s = logistic_sigmoid(z);
            (z - 2.0 * softplus(z), 1.0 - 2.0 * s, -2.0 * s * (1.0 - s))
        }
    }
}

fn check(params: &TransformedParams, data: &StandardizedDataset) -> Result<()> {
    if !(params.q > 0.0) {
        return Err(Error::NonPositiveScale(params.q));
    }
    if params.p.len() != data.d() + 1 {
        return Err(Error::DimensionMismatch { what: "location vector", expected: data.d() + 1, found: params.p.len() });
    }
    Ok(())
}

fn residuals(params: &TransformedParams, data: &StandardizedDataset) -> DVector<f64> {
    data.y() * params.q - data.linear_predictor(&params.p)
}

fn loglik_with(distribution: Distribution, params: &TransformedParams, data: &StandardizedDataset) -> Result<f64> {
    check(params, data)?;
    let z = residuals(params, data);
    let sum: f64 = z.iter().map(|&z| psi(distribution, z).0).sum();
    Ok(data.n() as f64 * log(params.q) + sum)
}

pub fn loglik_sev(params: &TransformedParams, data: &StandardizedDataset) -> Result<f64> {
    loglik_with(Distribution::Sev, params, data)
}

pub fn loglik_logistic(params: &TransformedParams, data: &StandardizedDataset) -> Result<f64> {
    loglik_with(Distribution::Logistic, params, data)
}

pub fn loglik(family: Family, params: &TransformedParams, data: &StandardizedDataset) -> Result<f64> {
    loglik_with(family.distribution, params, data)
}

/// Gradient with respect to `(p_0, ..., p_d, q)`.
pub fn loglik_grad(family: Family, params: &TransformedParams, data: &StandardizedDataset) -> Result<DVector<f64>> {
    Ok(evaluate(family, params, data, false)?.1)
}

/// Hessian with respect to `(p_0, ..., p_d, q)`; negative semidefinite.
pub fn loglik_hessian(family: Family, params: &TransformedParams, data: &StandardizedDataset) -> Result<DMatrix<f64>> {
    Ok(evaluate(family, params, data, true)?.2.expect("hessian requested"))
}

/// Value, gradient and optionally the Hessian in a single pass over the data.
pub(crate) fn evaluate(
    family: Family,
    params: &TransformedParams,
    data: &StandardizedDataset,
    with_hessian: bool,
) -> Result<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
    check(params, data)?;
    let n = data.n();
    let d = data.d();
    let x = data.x();
    let y = data.y();
    let z = residuals(params, data);

    let mut value = n as f64 * log(params.q);
    let mut d1 = DVector::zeros(n);
    let mut d2 = DVector::zeros(n);
    for i in 0..n {
        let (v, a, b) = psi(family.distribution, z[i]);
        value += v;
        d1[i] = a;
        d2[i] = b;
    }

    // dz/dq = y, dz/dp = -(1, x)
    let mut grad = DVector::zeros(d + 2);
    grad[0] = -d1.sum();
    grad.rows_mut(1, d).copy_from(&(-(x.tr_mul(&d1))));
    grad[d + 1] = n as f64 / params.q + y.dot(&d1);

    let hessian = with_hessian.then(|| {
        let mut h = DMatrix::zeros(d + 2, d + 2);
        // p-p block: sum_i b_i z_i z_i^T with z_i = (1, x_i)
        let mut weighted = x.clone();
        for mut col in weighted.column_iter_mut() {
            col.component_mul_assign(&d2);
        }
        h[(0, 0)] = d2.sum();
        let col = weighted.row_sum_tr();
        h.view_mut((1, 0), (d, 1)).copy_from(&col);
        h.view_mut((0, 1), (1, d)).copy_from(&col.transpose());
        h.view_mut((1, 1), (d, d)).copy_from(&x.tr_mul(&weighted));
        // p-q block: -sum_i b_i y_i z_i
        let by = d2.component_mul(y);
        let pq0 = -by.sum();
        let pq = -(x.tr_mul(&by));
        h[(0, d + 1)] = pq0;
        h[(d + 1, 0)] = pq0;
        for j in 0..d {
            h[(j + 1, d + 1)] = pq[j];
            h[(d + 1, j + 1)] = pq[j];
        }
        h[(d + 1, d + 1)] = -(n as f64) / (params.q * params.q) + by.dot(y);
        h
    });
    Ok((value, grad, hessian))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_data(n: usize, d: usize, family: Family) -> StandardizedDataset {
        StandardizedDataset::from_scaled(DMatrix::zeros(n, d), DVector::zeros(n), family).unwrap()
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize, family: Family) -> (StandardizedDataset, TransformedParams) {
        let s = 1.0 / libm::sqrt(d as f64);
        let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * s);
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let p = DVector::from_fn(d + 1, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let q = 0.2 + 2.0 * rng.random::<f64>();
        (StandardizedDataset::from_scaled(x, y, family).unwrap(), TransformedParams::new(p, q).unwrap())
    }

    // Independent per-term evaluation of the transformed log-likelihood.
    fn naive(family: Family, t: &TransformedParams, data: &StandardizedDataset) -> f64 {
        let mut total = 0.0;
        for i in 0..data.n() {
            let mut z = data.y()[i] * t.q - t.p[0];
            for j in 0..data.d() {
                z -= t.p[j + 1] * data.x()[(i, j)];
            }
            total += libm::log(t.q) + z;
            total -= match family.distribution {
                Distribution::Sev => libm::exp(z),
                Distribution::Logistic => 2.0 * libm::log(1.0 + libm::exp(z)),
            };
        }
        total
    }

    #[test]
    fn expansion_point_values() {
        let t = TransformedParams::expansion_point(1);
        assert_eq!(loglik_sev(&t, &zero_data(1, 1, Family::sev())).unwrap(), -1.0);
        assert_eq!(loglik_sev(&t, &zero_data(3, 1, Family::sev())).unwrap(), -3.0);
        let ln2 = core::f64::consts::LN_2;
        assert!((loglik_logistic(&t, &zero_data(1, 1, Family::logistic())).unwrap() + 2.0 * ln2).abs() < 1e-15);
        assert!((loglik_logistic(&t, &zero_data(4, 1, Family::logistic())).unwrap() + 8.0 * ln2).abs() < 1e-14);
    }

    #[test]
    fn matches_naive_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for family in [Family::sev(), Family::logistic()] {
            for _ in 0..100 {
                let (data, t) = random_instance(&mut rng, 5, 3, family);
                let a = loglik(family, &t, &data).unwrap();
                let b = naive(family, &t, &data);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn hand_gradient_at_expansion_point() {
        let g = loglik_grad(Family::sev(), &TransformedParams::expansion_point(1), &zero_data(1, 1, Family::sev())).unwrap();
        assert_eq!(g[2], 1.0);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn rejects_non_positive_q() {
        let data = zero_data(2, 1, Family::sev());
        let t = TransformedParams { p: dvector![0.0, 0.0], q: 0.0 };
        assert_eq!(loglik_sev(&t, &data), Err(Error::NonPositiveScale(0.0)));
        assert!(loglik_grad(Family::logistic(), &t, &data).is_err());
    }

    #[test]
    fn logistic_is_stable_for_huge_residuals() {
        let data = StandardizedDataset::from_scaled(DMatrix::zeros(2, 1), dvector![1.0, -1.0], Family::logistic()).unwrap();
        let t = TransformedParams::new(dvector![0.0, 0.0], 1e4).unwrap();
        let v = loglik_logistic(&t, &data).unwrap();
        assert!(v.is_finite());
        // z = +-1e4: psi(z) = z - 2 softplus(z) = -|z|
        let expected = 2.0 * libm::log(1e4) - 2e4;
        assert!((v - expected).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for family in [Family::sev(), Family::logistic()] {
            for _ in 0..20 {
                let (data, t) = random_instance(&mut rng, 6, 2, family);
                let g = loglik_grad(family, &t, &data).unwrap();
                let v = t.to_vector();
                let fd: Vec<f64> = (0..v.len())
                    .map(|k| {
                        let mut a = v.clone();
                        let mut b = v.clone();
                        a[k] += h;
                        b[k] -= h;
                        let fa = loglik(family, &TransformedParams::from_vector(&a).unwrap(), &data).unwrap();
                        let fb = loglik(family, &TransformedParams::from_vector(&b).unwrap(), &data).unwrap();
                        (fa - fb) / (2.0 * h)
                    })
                    .collect();
                for k in 0..v.len() {
                    assert!((g[k] - fd[k]).abs() <= 1e-6 * g[k].abs().max(1.0));
                }
            }
        }
    }
}
