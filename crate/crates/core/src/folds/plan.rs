use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::component_rng;
use crate::store::SurveyDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Imputation,
    Retrodiction,
    Unasked,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Imputation, TaskKind::Retrodiction, TaskKind::Unasked];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Imputation => "imputation",
            TaskKind::Retrodiction => "retrodiction",
            TaskKind::Unasked => "unasked",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "imputation" => Ok(TaskKind::Imputation),
            "retrodiction" => Ok(TaskKind::Retrodiction),
            "unasked" => Ok(TaskKind::Unasked),
            other => Err(Error::Config(format!(
                "unknown task {other:?}; expected imputation, retrodiction or unasked"
            ))),
        }
    }
}

/// The unit a scheme assigns to folds, in dense IDs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnitKey {
    /// `(individual, question, year)`.
    Response(usize, usize, usize),
    /// `(question, year)`.
    Cell(usize, usize),
    Question(usize),
}

/// Assignment of every unit, and through it every response, to one of `k` folds.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub task: TaskKind,
    pub num_folds: usize,
    pub seed: u64,
    units: Vec<UnitKey>,
    unit_fold: Vec<usize>,
    record_unit: Vec<usize>,
}

impl FoldPlan {
    pub fn units(&self) -> &[UnitKey] {
        &self.units
    }

    pub fn unit_fold(&self, unit: usize) -> usize {
        self.unit_fold[unit]
    }

    /// Unit index of a dataset record.
    pub fn unit_of(&self, record: usize) -> usize {
        self.record_unit[record]
    }

    pub fn record_fold(&self, record: usize) -> usize {
        self.unit_fold[self.record_unit[record]]
    }

    pub fn num_records(&self) -> usize {
        self.record_unit.len()
    }

    /// Number of units per fold.
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_folds];
        for &f in &self.unit_fold {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn units_in_fold(&self, fold: usize) -> Vec<usize> {
        (0..self.units.len()).filter(|&u| self.unit_fold[u] == fold).collect()
    }

    pub fn units_outside_fold(&self, fold: usize) -> Vec<usize> {
        (0..self.units.len()).filter(|&u| self.unit_fold[u] != fold).collect()
    }

    /// Dataset positions held out in round `fold`, ascending.
    pub fn held_out_records(&self, fold: usize) -> Vec<usize> {
        (0..self.record_unit.len())
            .filter(|&i| self.record_fold(i) == fold)
            .collect()
    }

    /// Dataset positions available for training in round `fold`, ascending.
    pub fn training_records(&self, fold: usize) -> Vec<usize> {
        (0..self.record_unit.len())
            .filter(|&i| self.record_fold(i) != fold)
            .collect()
    }

    /// Records grouped by unit index.
    pub fn records_by_unit(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.units.len()];
        for (rec, &u) in self.record_unit.iter().enumerate() {
            out[u].push(rec);
        }
        out
    }
}

fn check(ds: &SurveyDataset, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if ds.is_empty() {
        return Err(Error::InsufficientData(
            "cannot build folds over an empty dataset".into(),
        ));
    }
    Ok(())
}

/// Builds the plan from per-record unit keys: units are the sorted distinct
/// keys and `assign` fills one fold per unit.
fn build(
    ds: &SurveyDataset,
    task: TaskKind,
    k: usize,
    seed: u64,
    key: impl Fn(usize, usize, usize) -> UnitKey,
    assign: impl FnOnce(&[UnitKey]) -> Vec<usize>,
) -> FoldPlan {
    let mut index: BTreeMap<UnitKey, usize> = BTreeMap::new();
    for r in ds.responses() {
        index.insert(key(r.individual, r.question, r.year), 0);
    }
    for (i, v) in index.values_mut().enumerate() {
        *v = i;
    }
    let record_unit = ds
        .responses()
        .iter()
        .map(|r| index[&key(r.individual, r.question, r.year)])
        .collect();
    let units: Vec<UnitKey> = index.into_keys().collect();
    let unit_fold = assign(&units);
    FoldPlan {
        task,
        num_folds: k,
        seed,
        units,
        unit_fold,
        record_unit,
    }
}

/// Random balanced assignment: shuffle, then deal round-robin. Fold sizes
/// differ by at most one.
fn deal<R: Rng>(count: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    let mut fold = vec![0; count];
    for (pos, &u) in order.iter().enumerate() {
        fold[u] = pos % k;
    }
    fold
}

/// Every response is its own unit.
pub fn make_response_folds(ds: &SurveyDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    check(ds, k)?;
    let mut rng = component_rng(seed, "folds/imputation");
    Ok(build(ds, TaskKind::Imputation, k, seed, UnitKey::Response, |u| {
        deal(u.len(), k, &mut rng)
    }))
}

/// Every `(question, year)` cell is a unit. With `stratify_years`, cells are
/// dealt to folds separately within each year, starting at a random fold, so
/// each year loses about `1/k` of its questions per round.
pub fn make_year_question_folds(ds: &SurveyDataset, k: usize, seed: u64, stratify_years: bool) -> Result<FoldPlan> {
    check(ds, k)?;
    let mut rng = component_rng(seed, "folds/retrodiction");
    Ok(build(
        ds,
        TaskKind::Retrodiction,
        k,
        seed,
        |_, q, y| UnitKey::Cell(q, y),
        |units| {
            if !stratify_years {
                return deal(units.len(), k, &mut rng);
            }
            let mut by_year: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, u) in units.iter().enumerate() {
                if let UnitKey::Cell(_, y) = u {
                    by_year.entry(*y).or_default().push(i);
                }
            }
            let mut fold = vec![0; units.len()];
            for cells in by_year.values_mut() {
                cells.shuffle(&mut rng);
                let offset = rng.random_range(0..k);
                for (pos, &u) in cells.iter().enumerate() {
                    fold[u] = (offset + pos) % k;
                }
            }
            fold
        },
    ))
}

/// Every question is a unit: a held-out question loses all its responses in
/// every year.
pub fn make_question_folds(ds: &SurveyDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    check(ds, k)?;
    if ds.num_questions() < k {
        log::warn!(
            "{} questions for {k} folds: some folds will be empty",
            ds.num_questions()
        );
    }
    let mut rng = component_rng(seed, "folds/unasked");
    Ok(build(
        ds,
        TaskKind::Unasked,
        k,
        seed,
        |_, q, _| UnitKey::Question(q),
        |u| deal(u.len(), k, &mut rng),
    ))
}

pub fn make_plan(ds: &SurveyDataset, task: TaskKind, k: usize, seed: u64, stratify_years: bool) -> Result<FoldPlan> {
    match task {
        TaskKind::Imputation => make_response_folds(ds, k, seed),
        TaskKind::Retrodiction => make_year_question_folds(ds, k, seed, stratify_years),
        TaskKind::Unasked => make_question_folds(ds, k, seed),
    }
}
