use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::logistic::{fit_logistic, LogisticModel};
use super::matrix::ResponseMatrix;
use crate::rng::component_rng;
use crate::store::SurveyDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

/// Whether the masked share is fixed per variable or only overall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MaskScope {
    #[default]
    PerVariable,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskOptions {
    pub rate: f64,
    pub seed: u64,
    pub scope: MaskScope,
    /// Penalty for the per-variable missingness regressions.
    pub l2: f64,
    /// A column is an eligible MAR predictor when its missing share is below this.
    pub max_predictor_missing: f64,
}

impl Default for MaskOptions {
    fn default() -> Self {
        MaskOptions {
            rate: 0.1,
            seed: 0,
            scope: MaskScope::PerVariable,
            l2: 1e-4,
            max_predictor_missing: 0.1,
        }
    }
}

/// Cells (row, column) of a [`ResponseMatrix`] flagged as missing.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingMask {
    pub cells: Vec<(usize, usize)>,
    pub mechanism: Mechanism,
    pub rate: f64,
    pub seed: u64,
    /// The fitted missingness model per column, for MAR/MNAR.
    pub models: Vec<Option<LogisticModel>>,
}

impl MissingMask {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Dense boolean layout, `true` where masked.
    pub fn indicator(&self, x: &ResponseMatrix) -> Array2<bool> {
        let mut out = Array2::from_elem((x.nrows(), x.ncols()), false);
        for &(r, c) in &self.cells {
            out[[r, c]] = true;
        }
        out
    }

    /// Dataset positions of the masked responses.
    pub fn positions(&self, x: &ResponseMatrix) -> Result<Vec<usize>> {
        self.cells
            .iter()
            .map(|&(r, c)| {
                x.source(r, c)
                    .ok_or_else(|| Error::Config("matrix was not built from a dataset".into()))
            })
            .collect()
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Config(format!("mask rate must lie in [0, 1), got {rate}")))
    }
}

fn target_size(rate: f64, observed: usize) -> usize {
    (rate * observed as f64).round() as usize
}

/// Uniformly random subset of the observed cells of size `round(rate · observed)`.
pub fn simulate_mcar(x: &ResponseMatrix, rate: f64, seed: u64) -> Result<MissingMask> {
    check_rate(rate)?;
    let mut cells = x.observed_cells();
    let k = target_size(rate, cells.len());
    let mut rng = component_rng(seed, "mask/mcar");
    cells.partial_shuffle(&mut rng, k);
    cells.truncate(k);
    cells.sort_unstable();
    Ok(MissingMask {
        cells,
        mechanism: Mechanism::Mcar,
        rate,
        seed,
        models: vec![None; x.ncols()],
    })
}

/// Largest-remainder split of `total` across groups proportional to `sizes`,
/// so the parts sum to `total` exactly. Remainder ties go to the lower index.
fn apportion(total: usize, sizes: &[usize]) -> Vec<usize> {
    let sum: usize = sizes.iter().sum();
    if sum == 0 {
        return vec![0; sizes.len()];
    }
    let quotas: Vec<f64> = sizes.iter().map(|&s| total as f64 * s as f64 / sum as f64).collect();
    let mut parts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        (quotas[b] - quotas[b].floor())
            .total_cmp(&(quotas[a] - quotas[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = total - parts.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        if parts[i] < sizes[i] {
            parts[i] += 1;
            left -= 1;
        }
    }
    parts
}

/// Picks the `k` highest-probability candidates; candidates are shuffled first
/// so that equal probabilities are broken at random but reproducibly.
fn top_k(mut scored: Vec<((usize, usize), f64)>, k: usize, seed: u64, tag: &str) -> Vec<(usize, usize)> {
    let mut rng = component_rng(seed, tag);
    scored.shuffle(&mut rng);
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.into_iter().take(k).map(|(c, _)| c).collect()
}

/// Fits one missingness regression per column on `design(column)` and masks
/// the observed cells with the highest fitted probabilities.
fn model_based(
    x: &ResponseMatrix,
    opts: &MaskOptions,
    mechanism: Mechanism,
    mut design: impl FnMut(usize) -> Result<Array2<f64>>,
) -> Result<MissingMask> {
    check_rate(opts.rate)?;
    let p = x.ncols();
    let observed_per_col: Vec<usize> = (0..p)
        .map(|c| (0..x.nrows()).filter(|&r| x.get(r, c).is_some()).count())
        .collect();
    let total = target_size(opts.rate, observed_per_col.iter().sum());
    let quotas = apportion(total, &observed_per_col);

    let mut models = Vec::with_capacity(p);
    let mut per_col_scores = Vec::with_capacity(p);
    for c in 0..p {
        if observed_per_col[c] == 0 || (opts.scope == MaskScope::PerVariable && quotas[c] == 0) {
            models.push(None);
            per_col_scores.push(Vec::new());
            continue;
        }
        let features = design(c)?;
        let labels: Vec<u8> = (0..x.nrows()).map(|r| u8::from(x.get(r, c).is_none())).collect();
        let model = fit_logistic(features.view(), &labels, opts.l2)?;
        let scores: Vec<((usize, usize), f64)> = (0..x.nrows())
            .filter(|&r| x.get(r, c).is_some())
            .map(|r| ((r, c), model.probability(&features.row(r).to_vec())))
            .collect();
        models.push(Some(model));
        per_col_scores.push(scores);
    }

    let mut cells = match opts.scope {
        MaskScope::PerVariable => {
            let mut cells = Vec::with_capacity(total);
            for (c, scores) in per_col_scores.into_iter().enumerate() {
                cells.extend(top_k(scores, quotas[c], opts.seed, &format!("mask/column/{c}")));
            }
            cells
        }
        MaskScope::Global => top_k(
            per_col_scores.into_iter().flatten().collect(),
            total,
            opts.seed,
            "mask/global",
        ),
    };
    cells.sort_unstable();
    Ok(MissingMask {
        cells,
        mechanism,
        rate: opts.rate,
        seed: opts.seed,
        models,
    })
}

/// MAR: each column's missingness is regressed on the columns that are rarely
/// missing (mean-imputed where they are), then the most-likely-missing
/// observed cells are masked.
pub fn simulate_mar(x: &ResponseMatrix, opts: &MaskOptions) -> Result<MissingMask> {
    let eligible: Vec<usize> = (0..x.ncols())
        .filter(|&c| x.column_missing_fraction(c) < opts.max_predictor_missing)
        .collect();
    if eligible.is_empty() {
        return Err(Error::MechanismInfeasible(format!(
            "no column has less than {:.0}% missing values",
            100.0 * opts.max_predictor_missing
        )));
    }
    let means = x.column_means();
    model_based(x, opts, Mechanism::Mar, |target| {
        let predictors: Vec<usize> = eligible.iter().copied().filter(|&c| c != target).collect();
        if predictors.is_empty() {
            return Err(Error::MechanismInfeasible(format!(
                "column {target} is the only rarely-missing column"
            )));
        }
        Ok(Array2::from_shape_fn((x.nrows(), predictors.len()), |(r, j)| {
            let c = predictors[j];
            x.get(r, c).map_or(means[c], f64::from)
        }))
    })
}

/// MNAR: each column's missingness is regressed on respondent demographics
/// (`demographics` has one row per matrix row, already one-hot encoded).
pub fn simulate_mnar(x: &ResponseMatrix, demographics: ArrayView2<'_, f64>, opts: &MaskOptions) -> Result<MissingMask> {
    if demographics.nrows() != x.nrows() {
        return Err(Error::Shape(format!(
            "{} demographic rows for {} matrix rows",
            demographics.nrows(),
            x.nrows()
        )));
    }
    let owned = demographics.to_owned();
    model_based(x, opts, Mechanism::Mnar, |_| Ok(owned.clone()))
}

/// Writes the masked cells as `yearid,variable,year`.
pub fn write_mask(ds: &SurveyDataset, x: &ResponseMatrix, mask: &MissingMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "yearid,variable,year").map_err(io)?;
    for &(r, c) in &mask.cells {
        let (individual, year) = x.row_key(r);
        writeln!(
            out,
            "{},{},{}",
            ds.respondent_key(individual),
            ds.variable(c),
            ds.year_value(year)
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}
