use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::linalg::qr_least_squares;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// HC1 covariance, row-major `k × k`.
    pub covariance: Vec<Vec<f64>>,
    pub p_values: Vec<f64>,
    /// `p < 0.05`.
    pub significant: Vec<bool>,
    pub n: usize,
    pub k: usize,
}

/// OLS with heteroskedasticity-consistent (HC1) standard errors.
///
/// `x` must already contain the intercept column. The fit uses Householder QR;
/// the sandwich is `n/(n−k) · A Xᵀ diag(e²) X A` with `A = (XᵀX)⁻¹`. p-values
/// are two-sided from a t distribution with `n − k` degrees of freedom.
pub fn ols_robust(y: ArrayView1<'_, f64>, x: ArrayView2<'_, f64>) -> Result<RegressionResult> {
    let (n, k) = x.dim();
    if n <= k {
        return Err(Error::SingularFit(format!("{n} observations for {k} coefficients")));
    }
    let (beta, xtx_inv) = qr_least_squares(x, y)?;
    let resid: Array1<f64> = &y - &x.dot(&beta);

    let mut meat = Array2::<f64>::zeros((k, k));
    for (row, e) in x.rows().into_iter().zip(resid.iter()) {
        let e2 = e * e;
        for a in 0..k {
            for b in 0..k {
                meat[[a, b]] += e2 * row[a] * row[b];
            }
        }
    }
    let scale = n as f64 / (n - k) as f64;
    let cov = xtx_inv.dot(&meat).dot(&xtx_inv) * scale;

    let dist =
        StudentsT::new(0.0, 1.0, (n - k) as f64).map_err(|e| Error::Numerical(format!("t distribution: {e}")))?;
    let std_errors: Vec<f64> = (0..k).map(|j| cov[[j, j]].max(0.0).sqrt()).collect();
    let p_values: Vec<f64> = beta
        .iter()
        .zip(&std_errors)
        .map(|(&b, &se)| {
            if se == 0.0 {
                if b == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                2.0 * (1.0 - dist.cdf((b / se).abs()))
            }
        })
        .collect();
    Ok(RegressionResult {
        coefficients: beta.to_vec(),
        significant: p_values.iter().map(|&p| p < 0.05).collect(),
        std_errors,
        covariance: cov.rows().into_iter().map(|r| r.to_vec()).collect(),
        p_values,
        n,
        k,
    })
}
