//! Ordinary least squares with intercept and inferential statistics.
//!
//! The solver works on the centered normal equations (Cholesky, falling
//! back to an eigenvalue pseudoinverse for rank-deficient designs, which
//! happens routinely for ten-item scales compressed near their rank). The
//! K-selection sweep reuses the same Gram workspace through
//! [`OlsCore::solve_leading`], so sliced-prefix fits are bit-identical to
//! fitting the prefix columns directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::stats;

/// Relative eigenvalue cutoff for the pseudoinverse fallback.
const PINV_RCOND: f64 = 1e-12;

/// Inferential statistics attached to a fitted gradient.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegressionStats {
    /// Number of predictors actually used.
    pub k: usize,
    /// Sample count.
    pub n: usize,
    /// Coefficient of determination.
    pub r2: f64,
    /// Adjusted R-squared.
    pub r2_adj: f64,
    /// F statistic with (k, n - k - 1) degrees of freedom.
    pub f: f64,
    /// Upper-tail p-value of `f`; exactly 0 when it underflows 1e-300.
    pub p: f64,
    /// Pearson correlation between fitted and observed outcomes.
    pub r: f64,
}

/// Result of [`fit_ols`].
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub stats: RegressionStats,
    /// True when the design was rank deficient and the pseudoinverse path
    /// was taken.
    pub rank_deficient: bool,
}

/// Centered Gram workspace shared by the public fit and the K sweep.
///
/// Solving at `k` uses the leading k-by-k block, which is exactly the Gram
/// matrix of the first k columns because accumulation is row-by-row.
pub(crate) struct OlsCore {
    pub(crate) xtx: Mat,
    pub(crate) xty: Vec<f64>,
    pub(crate) x_mean: Vec<f64>,
    pub(crate) y_mean: f64,
    pub(crate) sst: f64,
}

impl OlsCore {
    pub(crate) fn new(xt: &Mat, y: &[f64]) -> Result<Self> {
        let n = xt.rows;
        let k = xt.cols;
        assert_eq!(n, y.len());

        let y_mean = y.iter().sum::<f64>() / n as f64;
        let sst: f64 = y.iter().map(|&v| (v - y_mean).powi(2)).sum();
        if sst <= 1e-20 * n as f64 * (1.0 + y_mean * y_mean) {
            return Err(Error::DegenerateOutcome {
                message: "outcome has (numerically) zero variance".to_string(),
            });
        }

        let mut x_mean = vec![0.0f64; k];
        for r in 0..n {
            for (m, &v) in x_mean.iter_mut().zip(xt.row(r)) {
                *m += v;
            }
        }
        for m in x_mean.iter_mut() {
            *m /= n as f64;
        }

        let mut xtx = Mat::zeros(k, k);
        let mut xty = vec![0.0f64; k];
        let mut row_c = vec![0.0f64; k];
        for r in 0..n {
            for (c, (&v, m)) in xt.row(r).iter().zip(&x_mean).enumerate() {
                row_c[c] = v - m;
            }
            let yc = y[r] - y_mean;
            for i in 0..k {
                let xi = row_c[i];
                xty[i] += xi * yc;
                for j in i..k {
                    xtx.data[i * k + j] += xi * row_c[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                xtx.data[i * k + j] = xtx.data[j * k + i];
            }
        }

        Ok(OlsCore {
            xtx,
            xty,
            x_mean,
            y_mean,
            sst,
        })
    }

    /// Solves on the first `k` predictors. Returns (intercept,
    /// coefficients, rank_deficient).
    pub(crate) fn solve_leading(&self, k: usize) -> (f64, Vec<f64>, bool) {
        let full = self.xtx.cols;
        assert!(k <= full);
        let mut a = Mat::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                a.set(i, j, self.xtx.get(i, j));
            }
        }
        let b = &self.xty[..k];
        let (beta, rank_deficient) = match linalg::cholesky_solve(&a, b) {
            Some(x) => (x, false),
            None => (linalg::eigen_pseudo_solve(&a, b, PINV_RCOND), true),
        };
        let mut intercept = self.y_mean;
        for i in 0..k {
            intercept -= beta[i] * self.x_mean[i];
        }
        (intercept, beta, rank_deficient)
    }
}

/// Least-squares fit of `y` on `xt` with an intercept.
///
/// Requires `n >= k + 2` and an outcome with nonzero variance. A
/// rank-deficient design is solved by pseudoinverse and flagged, not
/// rejected.
pub fn fit_ols(xt: &Mat, y: &[f64]) -> Result<OlsFit> {
    let n = xt.rows;
    let k = xt.cols;
    if y.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} rows but {} outcomes",
            y.len()
        )));
    }
    if k == 0 || n < k + 2 {
        return Err(Error::KOutOfRange { k, n, dim: k });
    }

    let core = OlsCore::new(xt, y)?;
    let (intercept, coefficients, rank_deficient) = core.solve_leading(k);

    let mut sse = 0.0f64;
    let mut yhat = Vec::with_capacity(n);
    for r in 0..n {
        let pred = intercept + linalg::dot(xt.row(r), &coefficients);
        yhat.push(pred);
        let e = y[r] - pred;
        sse += e * e;
    }
    let sst = core.sst;
    let r2 = 1.0 - sse / sst;
    let dof_resid = (n - k - 1) as f64;
    let r2_adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / dof_resid;
    let f = if sse <= 0.0 || (1.0 - r2) <= 0.0 {
        f64::INFINITY
    } else {
        (r2 / k as f64) / ((1.0 - r2) / dof_resid)
    };
    let p = stats::f_survival(f, k as f64, dof_resid);
    let r = stats::pearson(&yhat, y).unwrap_or(0.0);

    Ok(OlsFit {
        intercept,
        coefficients,
        stats: RegressionStats {
            k,
            n,
            r2,
            r2_adj,
            f,
            p,
            r,
        },
        rank_deficient,
    })
}
