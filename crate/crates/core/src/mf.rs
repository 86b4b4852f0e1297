//! Alternating-least-squares matrix factorization baseline.
//!
//! The pooled individual × question matrix `S` is approximated by `I Q` with
//! `I ∈ R^{n×r}`, `Q ∈ R^{r×p}`, minimising
//! `Σ_obs (I_i·Q_q − S_iq)² + λ(‖I‖²_F + ‖Q‖²_F)`. Each half-step solves every
//! row (then column) exactly as an `r × r` ridge system, so the objective can
//! only go down.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::spd_solve;
use crate::rng::component_rng;
use crate::tensor_io::{read_tensors, write_tensors, NamedTensor};
use crate::{Error, Result};

const KIND: &str = "mf-factors";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfConfig {
    pub rank: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for MfConfig {
    fn default() -> Self {
        MfConfig {
            rank: 50,
            lambda: 10.0,
            iterations: 15,
            seed: 42,
        }
    }
}

/// One observed entry `S[row, col] = value`. Repeated cells are allowed and
/// each contributes its own squared error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfFactors {
    /// `n × r`.
    individuals: Array2<f64>,
    /// Stored `p × r`; exposed as `r × p`.
    questions_t: Array2<f64>,
    pub lambda: f64,
    pub iterations: usize,
}

impl MfFactors {
    pub fn from_parts(individuals: Array2<f64>, questions: ArrayView2<'_, f64>, lambda: f64) -> Result<Self> {
        if individuals.ncols() != questions.nrows() {
            return Err(Error::Shape(format!(
                "individual factors have rank {}, question factors {}",
                individuals.ncols(),
                questions.nrows()
            )));
        }
        Ok(MfFactors {
            individuals,
            questions_t: questions.t().to_owned(),
            lambda,
            iterations: 0,
        })
    }

    pub fn rank(&self) -> usize {
        self.individuals.ncols()
    }

    pub fn individual_factors(&self) -> ArrayView2<'_, f64> {
        self.individuals.view()
    }

    /// `Q`, shape `r × p`.
    pub fn question_factors(&self) -> ArrayView2<'_, f64> {
        self.questions_t.t()
    }

    pub fn individual_factors_mut(&mut self) -> &mut Array2<f64> {
        &mut self.individuals
    }

    /// Regularised squared error of the current factors on `obs`.
    pub fn objective(&self, obs: &[Observation]) -> f64 {
        let fit: f64 = obs
            .iter()
            .map(|o| {
                let e = self.individuals.row(o.row).dot(&self.questions_t.row(o.col)) - o.value;
                e * e
            })
            .sum();
        let norm = |a: &Array2<f64>| a.iter().map(|v| v * v).sum::<f64>();
        fit + self.lambda * (norm(&self.individuals) + norm(&self.questions_t))
    }
}

/// Raw score `I_i · Q_q`. Unclamped, so it can exceed [0, 1].
pub fn mf_predict(f: &MfFactors, individual: usize, question: usize) -> Result<f64> {
    if individual >= f.individuals.nrows() {
        return Err(Error::IndexOutOfRange {
            what: "individual",
            index: individual,
            size: f.individuals.nrows(),
        });
    }
    if question >= f.questions_t.nrows() {
        return Err(Error::IndexOutOfRange {
            what: "question",
            index: question,
            size: f.questions_t.nrows(),
        });
    }
    Ok(f.individuals.row(individual).dot(&f.questions_t.row(question)))
}

/// Ridge solution `(Σ v vᵀ + λ I)⁻¹ Σ s v` over the given entries, where `v`
/// is the fixed factor row on the other side. No entries gives the zero vector.
pub fn ridge_row(entries: &[(usize, f64)], fixed: &Array2<f64>, lambda: f64) -> Result<Array1<f64>> {
    let r = fixed.ncols();
    if entries.is_empty() {
        return Ok(Array1::zeros(r));
    }
    let mut a = Array2::<f64>::zeros((r, r));
    let mut b = Array1::<f64>::zeros(r);
    for &(other, s) in entries {
        let v = fixed.row(other);
        let v = v.as_slice().expect("factor rows are contiguous");
        for i in 0..r {
            let vi = v[i];
            b[i] += s * vi;
            let row = a.row_mut(i).into_slice().expect("contiguous");
            for j in i..r {
                row[j] += vi * v[j];
            }
        }
    }
    for i in 0..r {
        a[[i, i]] += lambda;
        for j in 0..i {
            a[[i, j]] = a[[j, i]];
        }
    }
    spd_solve(a.view(), b.view()).map_err(|e| Error::Numerical(format!("ALS ridge solve: {e}")))
}

fn grouped(obs: &[Observation], count: usize, key: impl Fn(&Observation) -> (usize, usize)) -> Vec<Vec<(usize, f64)>> {
    let mut out = vec![Vec::new(); count];
    for o in obs {
        let (k, other) = key(o);
        out[k].push((other, o.value));
    }
    out
}

/// Fits the factorization and returns it with the objective after
/// initialisation and after every half-step (`2·iterations + 1` values).
pub fn als_fit(obs: &[Observation], rows: usize, cols: usize, cfg: &MfConfig) -> Result<(MfFactors, Vec<f64>)> {
    if cfg.rank == 0 {
        return Err(Error::Config("factor rank must be at least 1".into()));
    }
    if !(cfg.lambda > 0.0) {
        return Err(Error::Config(format!("ALS needs λ > 0, got {}", cfg.lambda)));
    }
    for o in obs {
        if o.row >= rows || o.col >= cols {
            return Err(Error::IndexOutOfRange {
                what: if o.row >= rows { "row" } else { "column" },
                index: if o.row >= rows { o.row } else { o.col },
                size: if o.row >= rows { rows } else { cols },
            });
        }
        if !o.value.is_finite() {
            return Err(Error::NonFinite(format!("observation ({}, {})", o.row, o.col)));
        }
    }
    let mut rng = component_rng(cfg.seed, "mf/init");
    let individuals = Array2::from_shape_simple_fn((rows, cfg.rank), || rng.random_range(0.0..0.1));
    let questions_t = Array2::from_shape_simple_fn((cols, cfg.rank), || rng.random_range(0.0..0.1));
    let mut f = MfFactors {
        individuals,
        questions_t,
        lambda: cfg.lambda,
        iterations: 0,
    };
    let by_row = grouped(obs, rows, |o| (o.row, o.col));
    let by_col = grouped(obs, cols, |o| (o.col, o.row));

    let mut trace = Vec::with_capacity(2 * cfg.iterations + 1);
    trace.push(f.objective(obs));
    for _ in 0..cfg.iterations {
        for (i, entries) in by_row.iter().enumerate() {
            let sol = ridge_row(entries, &f.questions_t, cfg.lambda)?;
            f.individuals.row_mut(i).assign(&sol);
        }
        trace.push(f.objective(obs));
        for (q, entries) in by_col.iter().enumerate() {
            let sol = ridge_row(entries, &f.individuals, cfg.lambda)?;
            f.questions_t.row_mut(q).assign(&sol);
        }
        trace.push(f.objective(obs));
        f.iterations += 1;
    }
    if f.individuals.iter().chain(f.questions_t.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ALS factors".into()));
    }
    Ok((f, trace))
}

/// Writes `I` (`n × r`) and `Q` (`r × p`) in the tensor manifest format.
pub fn save_factors(path: impl AsRef<Path>, f: &MfFactors, meta: serde_json::Value) -> Result<()> {
    let q = f.question_factors();
    let tensors = [
        NamedTensor::new(
            "I",
            vec![f.individuals.nrows(), f.rank()],
            f.individuals.iter().copied().collect(),
        ),
        NamedTensor::new("Q", vec![q.nrows(), q.ncols()], q.iter().copied().collect()),
    ];
    let meta = serde_json::json!({ "lambda": f.lambda, "iterations": f.iterations, "extra": meta });
    write_tensors(path, KIND, meta, &tensors)
}

pub fn load_factors(path: impl AsRef<Path>) -> Result<MfFactors> {
    let (manifest, tensors) = read_tensors(path)?;
    if manifest.kind != KIND {
        return Err(Error::Format(format!("expected {KIND}, found {}", manifest.kind)));
    }
    let [i, q] = <[NamedTensor; 2]>::try_from(tensors)
        .map_err(|t| Error::Format(format!("factor file has {} tensors, expected 2", t.len())))?;
    let shape2 = |t: &NamedTensor| -> Result<(usize, usize)> {
        match t.shape[..] {
            [a, b] => Ok((a, b)),
            _ => Err(Error::Format(format!("tensor {} is not a matrix", t.name))),
        }
    };
    let individuals = Array2::from_shape_vec(shape2(&i)?, i.data).map_err(|e| Error::Shape(e.to_string()))?;
    let questions = Array2::from_shape_vec(shape2(&q)?, q.data).map_err(|e| Error::Shape(e.to_string()))?;
    let lambda = manifest.meta["lambda"].as_f64().unwrap_or(f64::NAN);
    let mut f = MfFactors::from_parts(individuals, questions.view(), lambda)?;
    f.iterations = manifest.meta["iterations"].as_u64().unwrap_or(0) as usize;
    Ok(f)
}
