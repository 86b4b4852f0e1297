use std::collections::BTreeMap;

use serde::Serialize;

use super::smooth::SmoothedPoint;
use crate::{Error, Result};

/// Absolute slack for margin comparisons, so that a difference which is a
/// margin in decimal (`0.53 − 0.50`) is not pushed outside it by binary rounding.
pub const MARGIN_TOLERANCE: f64 = 1e-9;

/// One individual-level prediction, optionally paired with the observed answer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub individual: usize,
    pub question: usize,
    pub year: usize,
    pub predicted: f64,
    pub observed: Option<u8>,
}

/// Survey-weighted proportions for one `(question, year)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatedCell {
    pub question: usize,
    pub year: usize,
    pub predicted: f64,
    /// Weighted share of positive answers among respondents with an observed answer.
    pub observed: Option<f64>,
    pub respondents: usize,
    /// Kish effective sample size `(Σw)² / Σw²`.
    pub effective_n: f64,
    pub total_weight: f64,
}

#[derive(Default)]
struct CellSums {
    w: f64,
    w2: f64,
    wy_hat: f64,
    n: usize,
    w_obs: f64,
    wy_obs: f64,
}

/// Weighted mean of predicted probabilities per `(question, year)` cell.
///
/// `weights` is indexed by dense individual ID. Cells are returned sorted by
/// question, then year.
pub fn weighted_aggregate(scored: &[Scored], weights: &[f64]) -> Result<Vec<AggregatedCell>> {
    let mut cells: BTreeMap<(usize, usize), CellSums> = BTreeMap::new();
    for s in scored {
        let w = *weights.get(s.individual).ok_or(Error::IndexOutOfRange {
            what: "individual weight",
            index: s.individual,
            size: weights.len(),
        })?;
        let c = cells.entry((s.question, s.year)).or_default();
        c.w += w;
        c.w2 += w * w;
        c.wy_hat += w * s.predicted;
        c.n += 1;
        if let Some(y) = s.observed {
            c.w_obs += w;
            c.wy_obs += w * f64::from(y);
        }
    }
    cells
        .into_iter()
        .map(|((question, year), c)| {
            if c.w <= 0.0 {
                return Err(Error::ZeroWeight { question, year });
            }
            Ok(AggregatedCell {
                question,
                year,
                predicted: (c.wy_hat / c.w).clamp(0.0, 1.0),
                observed: (c.w_obs > 0.0).then(|| c.wy_obs / c.w_obs),
                respondents: c.n,
                effective_n: c.w * c.w / c.w2,
                total_weight: c.w,
            })
        })
        .collect()
}

/// Global line `observed ≈ slope · predicted + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationLine {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub cells: usize,
}

impl CalibrationLine {
    pub fn identity() -> Self {
        CalibrationLine {
            slope: 1.0,
            intercept: 0.0,
            r_squared: f64::NAN,
            cells: 0,
        }
    }

    /// Unclipped rescaled value.
    pub fn apply(&self, p: f64) -> f64 {
        self.slope * p + self.intercept
    }

    /// Rescaled value clipped to a valid proportion.
    pub fn apply_clipped(&self, p: f64) -> f64 {
        self.apply(p).clamp(0.0, 1.0)
    }
}

/// One OLS line fit over every cell that carries an observed proportion.
pub fn fit_rescaling(cells: &[AggregatedCell]) -> Result<CalibrationLine> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = cells
        .iter()
        .filter_map(|c| c.observed.map(|o| (c.predicted, o)))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::SingularFit(format!(
            "{} cells with observed proportions",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::SingularFit("all predicted proportions are identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(CalibrationLine {
        slope,
        intercept,
        r_squared,
        cells: xs.len(),
    })
}

/// Applies the line to every cell's predicted proportion and clips to [0, 1].
pub fn rescale_cells(cells: &[AggregatedCell], line: &CalibrationLine) -> Vec<AggregatedCell> {
    cells
        .iter()
        .map(|c| AggregatedCell {
            predicted: line.apply_clipped(c.predicted),
            ..c.clone()
        })
        .collect()
}

/// Share of cells with `|predicted − observed| ≤ margin`. Cells without an
/// observed proportion are skipped.
pub fn margin_correct_rate(cells: &[AggregatedCell], margin: f64) -> Result<f64> {
    let scored: Vec<bool> = cells
        .iter()
        .filter_map(|c| c.observed.map(|o| (c.predicted - o).abs() <= margin + MARGIN_TOLERANCE))
        .collect();
    if scored.is_empty() {
        return Err(Error::InsufficientData("no cells with observed proportions".into()));
    }
    Ok(scored.iter().filter(|&&b| b).count() as f64 / scored.len() as f64)
}

/// Share of observed points whose value lies inside the smoothed interval
/// `[lower − margin, upper + margin]` at the same year.
pub fn interval_cover_rate(curve: &[SmoothedPoint], observed: &[(i32, f64)], margin: f64) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for &(year, value) in observed {
        let Some(pt) = curve.iter().find(|p| p.year == year) else {
            continue;
        };
        total += 1;
        if value >= pt.lower - margin - MARGIN_TOLERANCE && value <= pt.upper + margin + MARGIN_TOLERANCE {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::InsufficientData("no observed points on the curve's grid".into()));
    }
    Ok(hits as f64 / total as f64)
}
