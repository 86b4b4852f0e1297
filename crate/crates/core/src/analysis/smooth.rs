use serde::Serialize;

use crate::{Error, Result};

/// An observed (or aggregated) proportion for one year, with the number of
/// respondents behind it. Counts act as precision weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendPoint {
    pub year: i32,
    pub proportion: f64,
    pub count: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothedPoint {
    pub year: i32,
    pub fitted: f64,
    pub lower: f64,
    pub upper: f64,
}

const Z_95: f64 = 1.959_963_984_540_054;

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

fn xs_nearest(xs: &[f64], x0: f64) -> f64 {
    xs.iter()
        .copied()
        .min_by(|a, b| (a - x0).abs().total_cmp(&(b - x0).abs()))
        .unwrap_or(x0)
}

/// Equivalent-kernel weights `l_i(x0)` of the local linear fit, so that the
/// fitted value is `Σ l_i y_i`. Falls back to a local constant when fewer than
/// two distinct years carry weight.
fn local_weights(xs: &[f64], counts: &[f64], x0: f64, span: f64) -> Vec<f64> {
    let n = xs.len();
    let q = ((span * n as f64).ceil() as usize).clamp(2, n);
    let mut dist: Vec<f64> = xs.iter().map(|x| (x - x0).abs()).collect();
    dist.sort_by(f64::total_cmp);
    // The q-th nearest point would sit exactly on the kernel's zero, and with
    // ties only one year might keep weight; widen by 10% and never below the
    // distance to the second-nearest distinct year, so a line is always
    // identified when the data contain two distinct years.
    let nearest = xs_nearest(xs, x0);
    let second_distinct = xs
        .iter()
        .filter(|&&x| x != nearest)
        .map(|x| (x - x0).abs())
        .fold(f64::INFINITY, f64::min);
    let base = if second_distinct.is_finite() {
        dist[q - 1].max(second_distinct)
    } else {
        dist[q - 1]
    };
    let mut h = 1.1 * base;
    if span > 1.0 {
        h *= span;
    }
    let omega: Vec<f64> = if h > 0.0 {
        xs.iter()
            .zip(counts)
            .map(|(x, c)| c * tricube((x - x0).abs() / h))
            .collect()
    } else {
        xs.iter()
            .zip(counts)
            .map(|(x, c)| if *x == x0 { *c } else { 0.0 })
            .collect()
    };
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (x, w) in xs.iter().zip(&omega) {
        let d = x - x0;
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
    }
    let det = s0 * s2 - s1 * s1;
    if det > 1e-12 * s0 * s2.max(f64::MIN_POSITIVE) && det > 0.0 {
        xs.iter()
            .zip(&omega)
            .map(|(x, w)| w * (s2 - (x - x0) * s1) / det)
            .collect()
    } else {
        omega.iter().map(|w| w / s0).collect()
    }
}

/// Tricube-weighted local linear regression evaluated on every calendar year
/// between the first and last input year.
///
/// The band is `fit ± 1.96·SE`, with `SE(x) = σ̂·sqrt(Σ l_i(x)² / c_i)` and
/// `σ̂² = Σ c_i e_i² / (n − tr L)` from the residuals at the input years.
/// Fitted values are not clipped.
pub fn smooth_trend(series: &[TrendPoint], span: f64) -> Result<Vec<SmoothedPoint>> {
    if series.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "trend smoothing needs at least 3 points, got {}",
            series.len()
        )));
    }
    if !(span > 0.0) || !span.is_finite() {
        return Err(Error::Config(format!("span must be positive, got {span}")));
    }
    for p in series {
        if !(p.count > 0.0) || !p.proportion.is_finite() {
            return Err(Error::Format(format!(
                "year {} has count {} and proportion {}",
                p.year, p.count, p.proportion
            )));
        }
    }
    let mut pts = series.to_vec();
    pts.sort_by_key(|p| p.year);
    let xs: Vec<f64> = pts.iter().map(|p| f64::from(p.year)).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.proportion).collect();
    let cs: Vec<f64> = pts.iter().map(|p| p.count).collect();
    let n = xs.len();

    let mut rss = 0.0;
    let mut trace = 0.0;
    for i in 0..n {
        let l = local_weights(&xs, &cs, xs[i], span);
        let fit: f64 = l.iter().zip(&ys).map(|(a, b)| a * b).sum();
        trace += l[i];
        rss += cs[i] * (ys[i] - fit).powi(2);
    }
    let dof = (n as f64 - trace).max(1.0);
    let sigma = (rss / dof).sqrt();

    let (first, last) = (pts[0].year, pts[n - 1].year);
    Ok((first..=last)
        .map(|year| {
            let l = local_weights(&xs, &cs, f64::from(year), span);
            let fitted: f64 = l.iter().zip(&ys).map(|(a, b)| a * b).sum();
            let var: f64 = l.iter().zip(&cs).map(|(a, c)| a * a / c).sum();
            let half = Z_95 * sigma * var.sqrt();
            SmoothedPoint {
                year,
                fitted,
                lower: fitted - half,
                upper: fitted + half,
            }
        })
        .collect())
}
