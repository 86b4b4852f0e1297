use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::plan::{make_plan, FoldPlan, TaskKind};
use super::train::{examples_of, records_of, train_model, validation_split, EpochStats};
use crate::analysis::auc;
use crate::dcn::{predict, DcnConfig};
use crate::embed::EmbeddingMatrix;
use crate::mf::{als_fit, mf_predict, MfConfig, Observation};
use crate::rng::{component_rng, derive_seed};
use crate::store::SurveyDataset;
use crate::{Error, Result};

/// Cross-validation settings. The run seed is `dcn.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub dcn: DcnConfig,
    pub folds: usize,
    /// Share of each round's training units held back for early stopping.
    pub validation_fraction: f64,
    /// Deal retrodiction cells to folds within each year.
    pub stratify_years: bool,
    /// Only run the first `rounds` rounds (all when `None`).
    pub rounds: Option<usize>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            dcn: DcnConfig::default(),
            folds: 10,
            validation_fraction: 0.1,
            stratify_years: true,
            rounds: None,
        }
    }
}

impl CvConfig {
    pub fn seed(&self) -> u64 {
        self.dcn.seed
    }

    fn round_count(&self) -> usize {
        self.rounds.map_or(self.folds, |r| r.min(self.folds))
    }
}

/// An out-of-fold prediction for one dataset record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Position of the record in the dataset.
    pub record: usize,
    pub fold: usize,
    pub individual: usize,
    pub question: usize,
    pub year: usize,
    pub observed: u8,
    pub predicted: f64,
}

impl From<&Prediction> for crate::analysis::Scored {
    fn from(p: &Prediction) -> Self {
        crate::analysis::Scored {
            individual: p.individual,
            question: p.question,
            year: p.year,
            predicted: p.predicted,
            observed: Some(p.observed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundSummary {
    pub fold: usize,
    pub train_records: usize,
    pub valid_records: usize,
    pub held_out_records: usize,
    pub auc: Option<f64>,
    pub initial_loss: Option<f64>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub history: Vec<EpochStats>,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub task: TaskKind,
    pub plan: FoldPlan,
    /// Sorted by record position.
    pub predictions: Vec<Prediction>,
    pub rounds: Vec<RoundSummary>,
}

impl CvResult {
    pub fn labels(&self) -> Vec<u8> {
        self.predictions.iter().map(|p| p.observed).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.predictions.iter().map(|p| p.predicted).collect()
    }

    /// AUC pooled over every out-of-fold prediction.
    pub fn auc(&self) -> Result<f64> {
        auc(&self.labels(), &self.scores())
    }
}

fn check_embeddings(ds: &SurveyDataset, emb: &EmbeddingMatrix) -> Result<()> {
    if emb.labels() != ds.questions().keys() {
        return Err(Error::Alignment(
            ds.questions()
                .keys()
                .iter()
                .filter(|v| !emb.labels().contains(v))
                .cloned()
                .collect(),
        ));
    }
    Ok(())
}

/// Training and held-out records of one round, after keeping a `keep` share
/// of the training units.
struct RoundSplit {
    fit: Vec<usize>,
    valid: Vec<usize>,
    held_out: Vec<usize>,
}

fn split_round(plan: &FoldPlan, by_unit: &[Vec<usize>], round: usize, keep: f64, cfg: &CvConfig) -> Result<RoundSplit> {
    let seed = cfg.seed();
    let mut train_units = plan.units_outside_fold(round);
    if keep < 1.0 {
        let count = (keep * train_units.len() as f64).round() as usize;
        if count == 0 {
            return Err(Error::EmptyTraining(format!(
                "keeping {keep} of {} training units leaves none",
                train_units.len()
            )));
        }
        train_units.shuffle(&mut component_rng(
            seed,
            &format!("subsample/{}/{keep}/{round}", plan.task),
        ));
        train_units.truncate(count);
        train_units.sort_unstable();
    }
    let (fit_units, valid_units) = validation_split(
        &train_units,
        cfg.validation_fraction,
        seed,
        &format!("validation/{}/{round}", plan.task),
    );
    Ok(RoundSplit {
        fit: records_of(plan, by_unit, &fit_units),
        valid: records_of(plan, by_unit, &valid_units),
        held_out: records_of(plan, by_unit, &plan.units_in_fold(round)),
    })
}

fn collect(
    ds: &SurveyDataset,
    plan: &FoldPlan,
    round: usize,
    held_out: &[usize],
    scores: &[f64],
    out: &mut Vec<Prediction>,
) {
    for (&rec, &p) in held_out.iter().zip(scores) {
        let r = ds.responses()[rec];
        out.push(Prediction {
            record: rec,
            fold: round,
            individual: r.individual,
            question: r.question,
            year: r.year,
            observed: r.value,
            predicted: p,
        });
    }
    debug_assert!(held_out.iter().all(|&rec| plan.record_fold(rec) == round));
}

fn run_dcn(ds: &SurveyDataset, emb: &EmbeddingMatrix, plan: &FoldPlan, cfg: &CvConfig, keep: f64) -> Result<CvResult> {
    check_embeddings(ds, emb)?;
    let frozen = emb.rows().view();
    let by_unit = plan.records_by_unit();
    let mut predictions = Vec::with_capacity(ds.len());
    let mut rounds = Vec::with_capacity(cfg.round_count());
    for round in 0..cfg.round_count() {
        let split = split_round(plan, &by_unit, round, keep, cfg)?;
        if split.held_out.is_empty() {
            log::warn!("fold {round} is empty; skipping");
            continue;
        }
        log::info!(
            "{} round {round}: {} training, {} validation, {} held-out records",
            plan.task,
            split.fit.len(),
            split.valid.len(),
            split.held_out.len()
        );
        let seed = derive_seed(cfg.seed(), &format!("round/{}/{round}", plan.task));
        let model = train_model(ds, frozen, &split.fit, &split.valid, &cfg.dcn, seed)?;
        let (examples, labels) = examples_of(ds, &split.held_out);
        let scores = predict(&model.params, frozen, &examples, cfg.dcn.batch_size.max(256))?;
        rounds.push(RoundSummary {
            fold: round,
            train_records: split.fit.len(),
            valid_records: split.valid.len(),
            held_out_records: split.held_out.len(),
            auc: auc(&labels, &scores).ok(),
            initial_loss: Some(model.initial_loss),
            best_epoch: Some(model.best_epoch),
            stopped_early: model.stopped_early,
            history: model.history,
        });
        collect(ds, plan, round, &split.held_out, &scores, &mut predictions);
    }
    predictions.sort_by_key(|p| p.record);
    Ok(CvResult {
        task: plan.task,
        plan: plan.clone(),
        predictions,
        rounds,
    })
}

/// Full k-fold evaluation of the network under one scheme. Every response
/// receives exactly one out-of-fold prediction (when all rounds run).
pub fn run_cross_validation(
    ds: &SurveyDataset,
    emb: &EmbeddingMatrix,
    task: TaskKind,
    cfg: &CvConfig,
) -> Result<CvResult> {
    let plan = make_plan(ds, task, cfg.folds, cfg.seed(), cfg.stratify_years)?;
    run_dcn(ds, emb, &plan, cfg, 1.0)
}

/// The same rounds with the ALS baseline: every training response becomes an
/// entry of the pooled individual × question matrix. Unasked questions have
/// no observed column, so that task is rejected.
pub fn run_mf_cross_validation(ds: &SurveyDataset, task: TaskKind, cfg: &CvConfig, mf: &MfConfig) -> Result<CvResult> {
    if task == TaskKind::Unasked {
        return Err(Error::Unsupported(
            "matrix factorization cannot score questions with no observed responses".into(),
        ));
    }
    let plan = make_plan(ds, task, cfg.folds, cfg.seed(), cfg.stratify_years)?;
    let by_unit = plan.records_by_unit();
    let mut predictions = Vec::with_capacity(ds.len());
    let mut rounds = Vec::new();
    for round in 0..cfg.round_count() {
        let train = records_of(&plan, &by_unit, &plan.units_outside_fold(round));
        let held_out = records_of(&plan, &by_unit, &plan.units_in_fold(round));
        if held_out.is_empty() {
            continue;
        }
        let obs: Vec<Observation> = train
            .iter()
            .map(|&i| {
                let r = ds.responses()[i];
                Observation {
                    row: r.individual,
                    col: r.question,
                    value: f64::from(r.value),
                }
            })
            .collect();
        let mf_cfg = MfConfig {
            seed: derive_seed(cfg.seed(), &format!("mf/{task}/{round}")),
            ..mf.clone()
        };
        let (factors, _) = als_fit(&obs, ds.num_individuals(), ds.num_questions(), &mf_cfg)?;
        let scores = held_out
            .iter()
            .map(|&i| {
                let r = ds.responses()[i];
                mf_predict(&factors, r.individual, r.question)
            })
            .collect::<Result<Vec<f64>>>()?;
        let labels: Vec<u8> = held_out.iter().map(|&i| ds.responses()[i].value).collect();
        rounds.push(RoundSummary {
            fold: round,
            train_records: train.len(),
            valid_records: 0,
            held_out_records: held_out.len(),
            auc: auc(&labels, &scores).ok(),
            initial_loss: None,
            best_epoch: None,
            stopped_early: false,
            history: Vec::new(),
        });
        collect(ds, &plan, round, &held_out, &scores, &mut predictions);
    }
    predictions.sort_by_key(|p| p.record);
    Ok(CvResult {
        task,
        plan,
        predictions,
        rounds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Share of each round's training units removed.
    pub fraction: f64,
    pub auc: f64,
    pub predictions: usize,
}

/// Re-runs cross-validation with a growing share of training units removed
/// (units of the task's own granularity). `fraction = 0` reproduces the
/// standard run exactly.
pub fn missingness_sweep(
    ds: &SurveyDataset,
    emb: &EmbeddingMatrix,
    task: TaskKind,
    fractions: &[f64],
    cfg: &CvConfig,
) -> Result<Vec<SweepRow>> {
    let plan = make_plan(ds, task, cfg.folds, cfg.seed(), cfg.stratify_years)?;
    fractions
        .iter()
        .map(|&f| {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Config(format!("sweep fraction {f} outside [0, 1)")));
            }
            let result = run_dcn(ds, emb, &plan, cfg, 1.0 - f)?;
            Ok(SweepRow {
                fraction: f,
                auc: result.auc()?,
                predictions: result.predictions.len(),
            })
        })
        .collect()
}

/// Writes `fold,year,yearid,variable,observed,predicted`, one row per
/// prediction in record order.
pub fn write_predictions(ds: &SurveyDataset, predictions: &[Prediction], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "fold,year,yearid,variable,observed,predicted").map_err(io)?;
    for p in predictions {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.fold,
            ds.year_value(p.year),
            ds.respondent_key(p.individual),
            ds.variable(p.question),
            p.observed,
            p.predicted
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

/// One row of a predictions file, with raw keys.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PredictionRecord {
    pub fold: usize,
    pub year: i32,
    pub yearid: i64,
    pub variable: String,
    pub observed: u8,
    pub predicted: f64,
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                line: i as u64 + 2,
                message: e.to_string(),
            })
        })
        .collect()
}
