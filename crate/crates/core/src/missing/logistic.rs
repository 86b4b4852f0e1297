use ndarray::{Array1, Array2, ArrayView2};
use serde::Serialize;

use crate::dcn::sigmoid;
use crate::linalg::spd_solve;
use crate::{Error, Result};

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-8;

/// L2-penalised logistic regression fitted by IRLS.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub l2: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn logit(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.logit(row))
    }
}

/// Penalised log-likelihood `Σ [y·η − ln(1 + e^η)] − ½·l2·‖β‖²` over all
/// coefficients including the intercept.
fn objective(x: &Array2<f64>, y: &Array1<f64>, beta: &Array1<f64>, l2: f64) -> f64 {
    let eta = x.dot(beta);
    let ll: f64 = eta
        .iter()
        .zip(y)
        .map(|(&e, &t)| {
            t * e
                - if e > 0.0 {
                    e + (-e).exp().ln_1p()
                } else {
                    e.exp().ln_1p()
                }
        })
        .sum();
    ll - 0.5 * l2 * beta.dot(beta)
}

/// Maximises the penalised log-likelihood with Newton/IRLS steps and step
/// halving. The penalty also covers the intercept, which keeps the optimum
/// finite when every label is the same class.
///
/// Converged when the largest coefficient change is below 1e-8; after 100
/// iterations the last iterate is returned with `converged = false`.
pub fn fit_logistic(features: ArrayView2<'_, f64>, labels: &[u8], l2: f64) -> Result<LogisticModel> {
    let (n, d) = features.dim();
    if labels.len() != n {
        return Err(Error::Shape(format!("{n} feature rows for {} labels", labels.len())));
    }
    if n == 0 {
        return Err(Error::InsufficientData("logistic fit needs at least one row".into()));
    }
    let has_both = labels.contains(&0) && labels.contains(&1);
    if !(l2 > 0.0) && !has_both {
        return Err(Error::InsufficientData(
            "single-class labels need a positive L2 penalty".into(),
        ));
    }
    let mut x = Array2::<f64>::ones((n, d + 1));
    x.slice_mut(ndarray::s![.., 1..]).assign(&features);
    let y = Array1::from_iter(labels.iter().map(|&v| f64::from(v)));
    let mut beta = Array1::<f64>::zeros(d + 1);
    let mut current = objective(&x, &y, &beta, l2);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITER {
        iterations += 1;
        let p = x.dot(&beta).mapv(sigmoid);
        let w = p.mapv(|v| (v * (1.0 - v)).max(1e-12));
        let grad = x.t().dot(&(&y - &p)) - &beta * l2;
        let xw = &x * &w.view().insert_axis(ndarray::Axis(1));
        let mut hess = x.t().dot(&xw);
        for j in 0..=d {
            hess[[j, j]] += l2;
        }
        let step = spd_solve(hess.view(), grad.view())
            .map_err(|e| Error::Numerical(format!("IRLS Hessian solve failed: {e}")))?;
        let mut scale = 1.0;
        let mut next = &beta + &step;
        let mut value = objective(&x, &y, &next, l2);
        while value < current && scale > 1e-10 {
            scale *= 0.5;
            next = &beta + &(&step * scale);
            value = objective(&x, &y, &next, l2);
        }
        let change = (&next - &beta).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        beta = next;
        current = value.max(current);
        if change < TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("logistic fit stopped after {iterations} iterations without converging");
    }
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logistic coefficients".into()));
    }
    Ok(LogisticModel {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        l2,
        iterations,
        converged,
    })
}
