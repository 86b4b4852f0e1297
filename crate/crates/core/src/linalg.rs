//! Small dense solvers used by ALS, IRLS, OLS and the trend smoother.
//!
//! Systems here are at most a few hundred unknowns, so straightforward
//! Cholesky and Householder QR are enough.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("cholesky of {}x{}", n, a.ncols())));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Numerical(format!(
                "matrix not positive definite at pivot {j} ({d})"
            )));
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor `L`.
pub fn cholesky_solve_factored(l: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Solves the SPD system `a x = b`.
pub fn spd_solve(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let l = cholesky(a)?;
    Ok(cholesky_solve_factored(l.view(), b))
}

/// Householder QR least squares.
///
/// Returns the coefficient vector and `(XᵀX)⁻¹ = R⁻¹R⁻ᵀ`. Fails when the
/// design is rank deficient relative to `tol` times the largest diagonal of R.
pub fn qr_least_squares(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (n, k) = x.dim();
    if y.len() != n {
        return Err(Error::Shape(format!("design has {n} rows, response {}", y.len())));
    }
    if n < k {
        return Err(Error::SingularFit(format!("{n} observations for {k} coefficients")));
    }
    let mut r = x.to_owned();
    let mut qty = y.to_owned();
    for j in 0..k {
        let mut norm = 0.0;
        for i in j..n {
            norm += r[[i, j]] * r[[i, j]];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            return Err(Error::SingularFit(format!("column {j} is linearly dependent")));
        }
        let alpha = if r[[j, j]] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..n).map(|i| r[[i, j]]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        if vnorm2 > 0.0 {
            for c in j..k {
                let dot: f64 = v.iter().enumerate().map(|(t, vi)| vi * r[[j + t, c]]).sum();
                let f = 2.0 * dot / vnorm2;
                for (t, vi) in v.iter().enumerate() {
                    r[[j + t, c]] -= f * vi;
                }
            }
            let dot: f64 = v.iter().enumerate().map(|(t, vi)| vi * qty[j + t]).sum();
            let f = 2.0 * dot / vnorm2;
            for (t, vi) in v.iter().enumerate() {
                qty[j + t] -= f * vi;
            }
        }
    }
    let max_diag = (0..k).map(|j| r[[j, j]].abs()).fold(0.0, f64::max);
    let tol = max_diag * 1e-12 * (n.max(k) as f64);
    for j in 0..k {
        if r[[j, j]].abs() <= tol {
            return Err(Error::SingularFit(format!("design is rank deficient at column {j}")));
        }
    }
    // back substitution for beta
    let mut beta = Array1::<f64>::zeros(k);
    for i in (0..k).rev() {
        let mut s = qty[i];
        for c in (i + 1)..k {
            s -= r[[i, c]] * beta[c];
        }
        beta[i] = s / r[[i, i]];
    }
    // R⁻¹ (upper triangular)
    let mut rinv = Array2::<f64>::zeros((k, k));
    for c in 0..k {
        rinv[[c, c]] = 1.0 / r[[c, c]];
        for i in (0..c).rev() {
            let mut s = 0.0;
            for t in (i + 1)..=c {
                s += r[[i, t]] * rinv[[t, c]];
            }
            rinv[[i, c]] = -s / r[[i, i]];
        }
    }
    let xtx_inv = rinv.dot(&rinv.t());
    Ok((beta, xtx_inv))
}
