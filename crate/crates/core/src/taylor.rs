//! Second-order polynomial surrogate of the transformed log-likelihood.
//!
//! Expanding `log q` around 1 and the residual term around `z = 0` and
//! truncating at order two gives
//!
//! ```text
//! l~(p, q) = w1 + wq q + wq2 q^2 + sum_j wpq[j] p_j q + sum_j wp2[j] p_j^2
//!          + sum_{j != h} wph[j][h] p_j p_h
//! ```
//!
//! | weight | SEV | logistic |
//! |--------|-----|----------|
//! | `w1`   | `-5n/2` | `-n (3/2 + 2 log 2)` |
//! | `wq`   | `2n` | `2n` |
//! | `wq2`  | `-(n + sum y^2)/2` | `-(n/2 + sum y^2 / 4)` |
//! | `wpq[j]` | `sum y x_j` | `sum y x_j / 2` |
//! | `wp2[j]` | `-sum x_j^2 / 2` | `-sum x_j^2 / 4` |
//! | `wph[j][h]` | `-sum x_j x_h / 2` | `-sum x_j x_h / 4` |
//!
//! Index 0 of the `p` weights is the intercept (`x_i0 = 1`).

use alloc::vec::Vec;

use core::f64::consts::LN_2;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Distribution, Family};
use crate::standardize::StandardizedDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorWeights {
    pub w1: f64,
    pub wq: f64,
    pub wq2: f64,
    /// `w_{p_j q}`, `j = 0..=d`.
    pub wpq: Vec<f64>,
    /// `w_{p_j^2}`, `j = 0..=d`.
    pub wp2: Vec<f64>,
    /// `w_{p_j p_h}` for ordered pairs `j != h`; the diagonal is always zero.
    pub wph: DMatrix<f64>,
}

impl TaylorWeights {
    pub fn zeros(d: usize) -> Self {
        Self {
            w1: 0.0,
            wq: 0.0,
            wq2: 0.0,
            wpq: alloc::vec![0.0; d + 1],
            wp2: alloc::vec![0.0; d + 1],
            wph: DMatrix::zeros(d + 1, d + 1),
        }
    }

    /// Number of non-intercept predictors.
    pub fn d(&self) -> usize {
        self.wpq.len() - 1
    }

    /// Count of independent weights: `3 + 2(d+1) + (d+1)d`.
    pub fn len(&self) -> usize {
        let k = self.wpq.len();
        3 + 2 * k + k * (k - 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Weights in canonical order: `w1, wq, wq2`, `wpq` ascending, `wp2`
    /// ascending, then `wph` row-major skipping the diagonal. Noise is drawn
    /// in this order.
    pub fn to_flat(&self) -> Vec<f64> {
        let k = self.wpq.len();
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&[self.w1, self.wq, self.wq2]);
        out.extend_from_slice(&self.wpq);
        out.extend_from_slice(&self.wp2);
        for j in 0..k {
            for h in 0..k {
                if h != j {
                    out.push(self.wph[(j, h)]);
                }
            }
        }
        out
    }

    /// Inverse of [`TaylorWeights::to_flat`].
    pub fn from_flat(d: usize, flat: &[f64]) -> Result<Self> {
        let mut w = Self::zeros(d);
        if flat.len() != w.len() {
            return Err(Error::DimensionMismatch { what: "flattened weights", expected: w.len(), found: flat.len() });
        }
        w.for_each_mut(|slot, value| *slot = value, flat);
        Ok(w)
    }

    /// Human-readable labels aligned with [`TaylorWeights::to_flat`].
    pub fn labels(d: usize) -> Vec<alloc::string::String> {
        use alloc::format;
        let k = d + 1;
        let mut out = Vec::with_capacity(3 + 2 * k + k * d);
        out.push("w1".into());
        out.push("wq".into());
        out.push("wq2".into());
        out.extend((0..k).map(|j| format!("wpq[{j}]")));
        out.extend((0..k).map(|j| format!("wp2[{j}]")));
        for j in 0..k {
            for h in 0..k {
                if h != j {
                    out.push(format!("wph[{j}][{h}]"));
                }
            }
        }
        out
    }

    /// Visits every weight slot in canonical order, pairing it with `values`.
    pub(crate) fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64, f64), values: &[f64]) {
        let k = self.wpq.len();
        let mut it = values.iter().copied();
        let mut next = || it.next().expect("value count checked by caller");
        f(&mut self.w1, next());
        f(&mut self.wq, next());
        f(&mut self.wq2, next());
        for slot in self.wpq.iter_mut() {
            f(slot, next());
        }
        for slot in self.wp2.iter_mut() {
            f(slot, next());
        }
        for j in 0..k {
            for h in 0..k {
                if h != j {
                    f(&mut self.wph[(j, h)], next());
                }
            }
        }
    }

    fn check_dim(&self, p: &DVector<f64>) -> Result<()> {
        if p.len() != self.wpq.len() {
            return Err(Error::DimensionMismatch { what: "location vector", expected: self.wpq.len(), found: p.len() });
        }
        Ok(())
    }

    /// Value of the polynomial at `(p, q)`.
    pub fn objective(&self, p: &DVector<f64>, q: f64) -> Result<f64> {
        self.check_dim(p)?;
        let k = p.len();
        let mut v = self.w1 + self.wq * q + self.wq2 * q * q;
        for j in 0..k {
            v += self.wpq[j] * p[j] * q + self.wp2[j] * p[j] * p[j];
            for h in 0..k {
                if h != j {
                    v += self.wph[(j, h)] * p[j] * p[h];
                }
            }
        }
        Ok(v)
    }

    /// Gradient with respect to `(p_0, ..., p_d, q)`.
    pub fn gradient(&self, p: &DVector<f64>, q: f64) -> Result<DVector<f64>> {
        self.check_dim(p)?;
        let k = p.len();
        let mut g = DVector::zeros(k + 1);
        let mut dq = self.wq + 2.0 * self.wq2 * q;
        for j in 0..k {
            dq += self.wpq[j] * p[j];
            let mut dp = self.wpq[j] * q + 2.0 * self.wp2[j] * p[j];
            for h in 0..k {
                if h != j {
                    dp += (self.wph[(j, h)] + self.wph[(h, j)]) * p[h];
                }
            }
            g[j] = dp;
        }
        g[k] = dq;
        Ok(g)
    }

    /// Constant Hessian of the quadratic in `(p_0, ..., p_d, q)` order.
    /// Always symmetric, even when the ordered-pair weights are not.
    pub fn hessian(&self) -> DMatrix<f64> {
        let k = self.wpq.len();
        let mut h = DMatrix::zeros(k + 1, k + 1);
        for j in 0..k {
            h[(j, j)] = 2.0 * self.wp2[j];
            for l in 0..k {
                if l != j {
                    h[(j, l)] = self.wph[(j, l)] + self.wph[(l, j)];
                }
            }
            h[(j, k)] = self.wpq[j];
            h[(k, j)] = self.wpq[j];
        }
        h[(k, k)] = 2.0 * self.wq2;
        h
    }

    /// Gradient at the origin, i.e. the linear part: only `q` has one.
    pub fn linear_term(&self) -> DVector<f64> {
        let k = self.wpq.len();
        let mut g = DVector::zeros(k + 1);
        g[k] = self.wq;
        g
    }
}

fn curvature_factor(distribution: Distribution) -> f64 {
    match distribution {
        Distribution::Sev => 1.0,
        Distribution::Logistic => 0.5,
    }
}

/// Noiseless weights of the truncated objective for either family.
pub fn taylor_weights(data: &StandardizedDataset) -> TaylorWeights {
    let c = curvature_factor(data.family().distribution);
    let n = data.n() as f64;
    let d = data.d();
    let x = data.x();
    let y = data.y();

    let w1 = match data.family().distribution {
        Distribution::Sev => -2.5 * n,
        Distribution::Logistic => -n * (1.5 + 2.0 * LN_2),
    };
    let wq2 = -(0.5 * n + 0.5 * c * y.norm_squared());

    let xty = x.tr_mul(y);
    let col_sums = x.row_sum_tr();
    let gram = x.tr_mul(x);

    let mut wpq = Vec::with_capacity(d + 1);
    wpq.push(c * y.sum());
    wpq.extend(xty.iter().map(|v| c * v));

    let mut wp2 = Vec::with_capacity(d + 1);
    wp2.push(-0.5 * c * n);
    wp2.extend((0..d).map(|j| -0.5 * c * gram[(j, j)]));

    let mut wph = DMatrix::zeros(d + 1, d + 1);
    for j in 0..d {
        wph[(0, j + 1)] = -0.5 * c * col_sums[j];
        wph[(j + 1, 0)] = -0.5 * c * col_sums[j];
        for h in 0..d {
            if h != j {
                wph[(j + 1, h + 1)] = -0.5 * c * gram[(j, h)];
            }
        }
    }

    TaylorWeights { w1, wq: 2.0 * n, wq2, wpq, wp2, wph }
}

/// SEV weights regardless of the dataset's family tag.
pub fn taylor_weights_sev(data: &StandardizedDataset) -> TaylorWeights {
    with_distribution(data, Distribution::Sev)
}

/// Logistic weights regardless of the dataset's family tag.
pub fn taylor_weights_logistic(data: &StandardizedDataset) -> TaylorWeights {
    with_distribution(data, Distribution::Logistic)
}

fn with_distribution(data: &StandardizedDataset, distribution: Distribution) -> TaylorWeights {
    if data.family().distribution == distribution {
        return taylor_weights(data);
    }
    let family = Family { distribution, log_response: data.family().log_response };
    let relabeled = StandardizedDataset::new(data.x().clone(), data.y().clone(), data.spec().clone(), family)
        .expect("relabeling a valid dataset keeps it valid");
    taylor_weights(&relabeled)
}
