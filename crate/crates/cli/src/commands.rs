use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;
use survey_dcn::analysis::{
    accuracy_f1, auc, correlation, fit_rescaling, interval_cover_rate, margin_correct_rate, rescale_cells,
    smooth_trend, weighted_aggregate, AggregatedCell, CalibrationLine, Scored, TrendPoint,
};
use survey_dcn::dcn::{
    block_importance, feature_importance, load_checkpoint, predict, save_checkpoint, CheckpointIndex, Example,
    FeatureImportance,
};
use survey_dcn::embed::{build_prompt, export_vectors, load_embeddings, EmbeddingMatrix};
use survey_dcn::folds::{
    read_predictions, run_cross_validation, run_mf_cross_validation, train_model, validation_split, write_predictions,
    CvResult, PredictionRecord, TaskKind,
};
use survey_dcn::missing::{
    generate_synthetic_survey, read_demographics, simulate_mar, simulate_mcar, simulate_mnar, write_mask, Mechanism,
    ResponseMatrix,
};
use survey_dcn::store::{
    dataset_stats, ingest_raw_responses, ingest_responses, write_responses, BinarizationMap, SurveyDataset,
};

use crate::config::{require_path, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{companion_payload, RunContext};

type Core<T> = survey_dcn::Result<T>;

fn csv_writer(path: &Path) -> Core<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| survey_dcn::Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_err(e: csv::Error) -> survey_dcn::Error {
    survey_dcn::Error::Format(e.to_string())
}

/// Writes serialisable rows as CSV with a header derived from the struct fields.
fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| survey_dcn::Error::io(path, e))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path).map_err(|e| survey_dcn::Error::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(survey_dcn::Error::from)?;
    Ok(())
}

fn load_dataset(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<SurveyDataset> {
    let data = cfg.require_data()?;
    ctx.input(data);
    let options = cfg.ingest_options();
    let ds = if cfg.binarize_map.is_some() {
        let map_path = require_path(&cfg.binarize_map, "--binarize-map")?;
        ctx.input(map_path);
        ingest_raw_responses(data, &BinarizationMap::load(map_path)?, &options)?
    } else {
        ingest_responses(data, &options)?
    };
    log::info!(
        "{} responses: {} individuals, {} questions, {} years",
        ds.len(),
        ds.num_individuals(),
        ds.num_questions(),
        ds.num_years()
    );
    Ok(ds)
}

fn load_aligned_embeddings(cfg: &RunConfig, ds: &SurveyDataset, ctx: &mut RunContext) -> CliResult<EmbeddingMatrix> {
    let path = cfg.require_embeddings()?;
    ctx.input(path);
    if let Some(payload) = companion_payload(path) {
        ctx.input(&payload);
    }
    Ok(load_embeddings(path, ds)?)
}

pub fn cmd_ingest(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<()> {
    let ds = load_dataset(cfg, ctx)?;
    write_responses(&ds, ctx.artifact("responses.csv"))?;
    let stats = dataset_stats(&ds);
    let path = ctx.artifact("cells.csv");
    let file = File::create(&path).map_err(|e| survey_dcn::Error::io(&path, e))?;
    stats.write_csv(BufWriter::new(file)).map_err(csv_err)?;
    write_json(&ctx.artifact("stats.json"), &stats)?;
    ctx.summarize("records", stats.records);
    ctx.summarize("individuals", stats.individuals);
    ctx.summarize("questions", stats.questions);
    ctx.summarize("years", stats.years);
    ctx.summarize("sparsity", stats.sparsity);
    Ok(())
}

#[derive(Serialize)]
struct PromptRow<'a> {
    variable: &'a str,
    prompt: String,
}

pub fn cmd_embed_validate(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<()> {
    let ds = load_dataset(cfg, ctx)?;
    let emb = load_aligned_embeddings(cfg, &ds, ctx)?;
    export_vectors(&emb, ctx.artifact("embeddings.json"))?;
    let prompts = (0..ds.num_questions())
        .map(|q| {
            Ok(PromptRow {
                variable: ds.variable(q),
                prompt: build_prompt(ds.question_text(q))?,
            })
        })
        .collect::<Core<Vec<_>>>()?;
    write_rows(&ctx.artifact("prompts.csv"), &prompts)?;
    ctx.summarize("dim", emb.dim());
    ctx.summarize("count", emb.count());
    ctx.summarize("model_tag", &emb.model_tag);
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<()> {
    ctx.sub_seed("synthetic/latent");
    let survey = generate_synthetic_survey(&cfg.synth)?;
    write_responses(&survey.dataset, ctx.artifact("responses.csv"))?;
    export_vectors(&survey.embeddings, ctx.artifact("embeddings.json"))?;
    let bayes = survey.bayes_auc()?;
    log::info!("generated {} responses; Bayes AUC {bayes:.4}", survey.dataset.len());
    ctx.summarize("records", survey.dataset.len());
    ctx.summarize("bayes_auc", bayes);
    Ok(())
}

#[derive(Serialize)]
struct HistoryRow {
    fold: Option<usize>,
    epoch: usize,
    train_loss: f64,
    valid_loss: Option<f64>,
    valid_auc: Option<f64>,
    learning_rate: f64,
}

#[derive(Serialize)]
struct ImportanceRow {
    layer: usize,
    component: &'static str,
    score: f64,
}

fn importance_rows(layer: usize, f: &FeatureImportance) -> impl Iterator<Item = ImportanceRow> + '_ {
    FeatureImportance::LABELS
        .iter()
        .zip(f.as_array())
        .map(move |(&component, score)| ImportanceRow {
            layer,
            component,
            score,
        })
}

/// Trains on every response, holding back a response-level validation share
/// for early stopping.
fn fit_full_model(
    ds: &SurveyDataset,
    emb: &EmbeddingMatrix,
    cfg: &RunConfig,
    ctx: &mut RunContext,
) -> CliResult<survey_dcn::folds::TrainedModel> {
    let all: Vec<usize> = (0..ds.len()).collect();
    let tag = "validation/full";
    ctx.sub_seed(tag);
    let (fit, valid) = validation_split(&all, cfg.validation_fraction, cfg.seed(), tag);
    let seed = ctx.sub_seed("round/full");
    let frozen = emb.rows().view();
    Ok(train_model(ds, frozen, &fit, &valid, &cfg.dcn, seed)?)
}

pub fn cmd_train(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<()> {
    let ds = load_dataset(cfg, ctx)?;
    let emb = load_aligned_embeddings(cfg, &ds, ctx)?;
    let model = fit_full_model(&ds, &emb, cfg, ctx)?;
    save_checkpoint(
        ctx.artifact("model.json"),
        &model.params,
        &cfg.dcn,
        &CheckpointIndex::from_dataset(&ds),
    )?;
    let history: Vec<HistoryRow> = model
        .history
        .iter()
        .map(|h| HistoryRow {
            fold: None,
            epoch: h.epoch,
            train_loss: h.train_loss,
            valid_loss: h.valid_loss,
            valid_auc: h.valid_auc,
            learning_rate: h.learning_rate,
        })
        .collect();
    write_rows(&ctx.artifact("history.csv"), &history)?;
    let rows: Vec<ImportanceRow> = importance_rows(0, &feature_importance(&model.params)?).collect();
    write_rows(&ctx.artifact("importance.csv"), &rows)?;
    ctx.summarize("initial_loss", model.initial_loss);
    ctx.summarize("best_epoch", model.best_epoch);
    ctx.summarize("stopped_early", model.stopped_early);
    ctx.summarize(
        "best_valid_auc",
        model.history.get(model.best_epoch - 1).and_then(|h| h.valid_auc),
    );
    Ok(())
}

/// Pooled classification metrics of a set of out-of-fold predictions.
#[derive(Debug, Clone, Serialize)]
pub struct PooledMetrics {
    pub predictions: usize,
    pub auc: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn pooled_metrics(labels: &[u8], scores: &[f64]) -> CliResult<PooledMetrics> {
    let c = accuracy_f1(labels, scores, 0.5)?;
    Ok(PooledMetrics {
        predictions: labels.len(),
        auc: auc(labels, scores)?,
        accuracy: c.accuracy,
        precision: c.precision,
        recall: c.recall,
        f1: c.f1,
    })
}

fn write_cv_outputs(ds: &SurveyDataset, model: &str, result: &CvResult, ctx: &mut RunContext) -> CliResult<()> {
    let task = result.task;
    write_predictions(
        ds,
        &result.predictions,
        ctx.artifact(&format!("predictions_{model}_{task}.csv")),
    )?;
    let history: Vec<HistoryRow> = result
        .rounds
        .iter()
        .flat_map(|r| {
            r.history.iter().map(|h| HistoryRow {
                fold: Some(r.fold),
                epoch: h.epoch,
                train_loss: h.train_loss,
                valid_loss: h.valid_loss,
                valid_auc: h.valid_auc,
                learning_rate: h.learning_rate,
            })
        })
        .collect();
    if !history.is_empty() {
        write_rows(&ctx.artifact(&format!("history_{model}_{task}.csv")), &history)?;
    }
    #[derive(Serialize)]
    struct RoundRow {
        fold: usize,
        train_records: usize,
        valid_records: usize,
        held_out_records: usize,
        auc: Option<f64>,
        initial_loss: Option<f64>,
        best_epoch: Option<usize>,
        stopped_early: bool,
    }
    let rounds: Vec<RoundRow> = result
        .rounds
        .iter()
        .map(|r| RoundRow {
            fold: r.fold,
            train_records: r.train_records,
            valid_records: r.valid_records,
            held_out_records: r.held_out_records,
            auc: r.auc,
            initial_loss: r.initial_loss,
            best_epoch: r.best_epoch,
            stopped_early: r.stopped_early,
        })
        .collect();
    write_rows(&ctx.artifact(&format!("rounds_{model}_{task}.csv")), &rounds)?;
    let metrics = pooled_metrics(&result.labels(), &result.scores())?;
    log::info!(
        "{model} {task}: pooled AUC {:.4} over {} predictions",
        metrics.auc,
        metrics.predictions
    );
    ctx.summarize("metrics", &metrics);
    Ok(())
}

fn record_fold_seeds(cfg: &RunConfig, task: TaskKind, ctx: &mut RunContext) {
    ctx.sub_seed(&format!("folds/{task}"));
    for r in 0..cfg.rounds.map_or(cfg.folds, |n| n.min(cfg.folds)) {
        ctx.sub_seed(&format!("round/{task}/{r}"));
        ctx.sub_seed(&format!("validation/{task}/{r}"));
    }
}

pub fn cmd_cv(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<()> {
    let ds = load_dataset(cfg, ctx)?;
    let emb = load_aligned_embeddings(cfg, &ds, ctx)?;
    record_fold_seeds(cfg, cfg.task, ctx);
    let result = run_cross_validation(&ds, &emb, cfg.task, &cfg.cv_config())?;
    write_cv_outputs(&ds, "dcn", &result, ctx)
}

pub fn cmd_mf(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<()> {
    if cfg.task == TaskKind::Unasked {
        return Err(CliError::Usage(
            "`mf --task unasked` is impossible: a question with no training responses has no factor".into(),
        ));
    }
    let ds = load_dataset(cfg, ctx)?;
    ctx.sub_seed(&format!("folds/{}", cfg.task));
    let result = run_mf_cross_validation(&ds, cfg.task, &cfg.cv_config(), &cfg.mf)?;
    write_cv_outputs(&ds, "als", &result, ctx)
}

pub fn cmd_simulate(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<()> {
    let ds = load_dataset(cfg, ctx)?;
    let x = ResponseMatrix::from_dataset(&ds);
    let mask = match cfg.mechanism {
        Mechanism::Mcar => simulate_mcar(&x, cfg.mask.rate, cfg.mask.seed)?,
        Mechanism::Mar => simulate_mar(&x, &cfg.mask)?,
        Mechanism::Mnar => {
            let path = require_path(&cfg.demographics, "--demographics")?;
            ctx.input(path);
            let demographics = read_demographics(path)?;
            let keys: Vec<i64> = (0..x.nrows()).map(|r| ds.respondent_key(x.row_key(r).0)).collect();
            simulate_mnar(&x, demographics.design(&keys)?.view(), &cfg.mask)?
        }
    };
    write_mask(&ds, &x, &mask, ctx.artifact("mask.csv"))?;
    let mut masked = vec![false; ds.len()];
    for pos in mask.positions(&x)? {
        masked[pos] = true;
    }
    write_responses(&ds.filter_records(|i, _| !masked[i])?, ctx.artifact("retained.csv"))?;
    write_responses(&ds.filter_records(|i, _| masked[i])?, ctx.artifact("held_out.csv"))?;
    let observed = x.observed_count();
    ctx.summarize("mechanism", mask.mechanism);
    ctx.summarize("observed_cells", observed);
    ctx.summarize("masked_cells", mask.len());
    ctx.summarize("masked_fraction", mask.len() as f64 / observed.max(1) as f64);
    ctx.summarize("models_fitted", mask.models.iter().filter(|m| m.is_some()).count());
    Ok(())
}

/// Resolves prediction rows against the dataset's indexes.
fn scored_from_records(ds: &SurveyDataset, rows: &[PredictionRecord], source: &Path) -> CliResult<Vec<Scored>> {
    rows.iter()
        .map(|r| {
            let missing = |what: &str, key: String| {
                CliError::Dependency(format!(
                    "{} references {what} {key} absent from --data",
                    source.display()
                ))
            };
            Ok(Scored {
                individual: ds
                    .individuals()
                    .encode(&r.yearid)
                    .ok_or_else(|| missing("respondent", r.yearid.to_string()))?,
                question: ds
                    .questions()
                    .encode(r.variable.as_str())
                    .ok_or_else(|| missing("variable", r.variable.clone()))?,
                year: ds
                    .years()
                    .encode(&r.year)
                    .ok_or_else(|| missing("year", r.year.to_string()))?,
                predicted: r.predicted,
                observed: Some(r.observed),
            })
        })
        .collect()
}

fn read_prediction_file(path: &Path, ctx: &mut RunContext) -> CliResult<Vec<PredictionRecord>> {
    if !path.exists() {
        return Err(CliError::Dependency(format!(
            "prediction file {} does not exist",
            path.display()
        )));
    }
    ctx.input(path);
    Ok(read_predictions(path)?)
}

#[derive(Serialize)]
struct CellRow<'a> {
    variable: &'a str,
    year: i32,
    predicted: f64,
    rescaled: f64,
    observed: Option<f64>,
    respondents: usize,
    effective_n: f64,
    total_weight: f64,
}

fn write_cells(ds: &SurveyDataset, cells: &[AggregatedCell], line: &CalibrationLine, path: &Path) -> CliResult<()> {
    let rows: Vec<CellRow> = cells
        .iter()
        .map(|c| CellRow {
            variable: ds.variable(c.question),
            year: ds.year_value(c.year),
            predicted: c.predicted,
            rescaled: line.apply_clipped(c.predicted),
            observed: c.observed,
            respondents: c.respondents,
            effective_n: c.effective_n,
            total_weight: c.total_weight,
        })
        .collect();
    write_rows(path, &rows)
}

/// Cell-level summary of aggregated out-of-fold predictions.
#[derive(Debug, Clone, Serialize)]
pub struct CellMetrics {
    pub cells: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub correlation: f64,
    pub correct_within_margin: f64,
}

fn cell_metrics(cells: &[AggregatedCell], margin: f64) -> CliResult<(CalibrationLine, CellMetrics)> {
    let line = fit_rescaling(cells)?;
    let rescaled = rescale_cells(cells, &line);
    let (pred, obs): (Vec<f64>, Vec<f64>) = cells
        .iter()
        .filter_map(|c| c.observed.map(|o| (c.predicted, o)))
        .unzip();
    let metrics = CellMetrics {
        cells: pred.len(),
        slope: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        correlation: correlation(&pred, &obs)?,
        correct_within_margin: margin_correct_rate(&rescaled, margin)?,
    };
    Ok((line, metrics))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn cmd_aggregate(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<()> {
    let ds = load_dataset(cfg, ctx)?;
    let weights = ds.individual_weights();
    let mut summary = BTreeMap::new();
    for path in &cfg.predictions {
        let rows = read_prediction_file(path, ctx)?;
        let cells = weighted_aggregate(&scored_from_records(&ds, &rows, path)?, &weights)?;
        let (line, metrics) = cell_metrics(&cells, cfg.margin)?;
        let stem = file_stem(path);
        let name = stem.strip_prefix("predictions_").unwrap_or(&stem);
        write_cells(&ds, &cells, &line, &ctx.artifact(&format!("cells_{name}.csv")))?;
        summary.insert(name.to_string(), metrics);
    }
    write_json(&ctx.artifact("calibration.json"), &summary)?;
    ctx.summarize("files", summary);
    Ok(())
}

#[derive(Serialize)]
struct TrendRow<'a> {
    variable: &'a str,
    year: i32,
    smoothed: f64,
    lower: f64,
    upper: f64,
    observed: Option<f64>,
}

pub fn cmd_retrodict(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<()> {
    let ds = load_dataset(cfg, ctx)?;
    let emb = load_aligned_embeddings(cfg, &ds, ctx)?;
    let questions: Vec<usize> = if cfg.variables.is_empty() {
        (0..ds.num_questions()).collect()
    } else {
        cfg.variables
            .iter()
            .map(|v| {
                ds.questions()
                    .encode(v.as_str())
                    .ok_or_else(|| CliError::Usage(format!("variable {v:?} is not in --data")))
            })
            .collect::<CliResult<_>>()?
    };
    let model = fit_full_model(&ds, &emb, cfg, ctx)?;

    // Every respondent of every year, for each requested question.
    let observed: HashMap<(usize, usize, usize), u8> = ds
        .responses()
        .iter()
        .map(|r| ((r.individual, r.question, r.year), r.value))
        .collect();
    let individual_year = ds.individual_years();
    let mut examples = Vec::with_capacity(questions.len() * ds.num_individuals());
    for &question in &questions {
        for (individual, &year) in individual_year.iter().enumerate() {
            examples.push(Example {
                individual,
                question,
                year,
            });
        }
    }
    let scores = predict(&model.params, emb.rows().view(), &examples, cfg.dcn.batch_size.max(256))?;
    let scored: Vec<Scored> = examples
        .iter()
        .zip(&scores)
        .map(|(e, &p)| Scored {
            individual: e.individual,
            question: e.question,
            year: e.year,
            predicted: p,
            observed: observed.get(&(e.individual, e.question, e.year)).copied(),
        })
        .collect();
    let weights = ds.individual_weights();
    let cells = weighted_aggregate(&scored, &weights)?;

    let line = if cfg.predictions.is_empty() {
        log::warn!("no out-of-fold predictions given; fitting the rescaling line on in-sample cells");
        fit_rescaling(&cells)?
    } else {
        let mut oof = Vec::new();
        for path in &cfg.predictions {
            let rows = read_prediction_file(path, ctx)?;
            oof.extend(scored_from_records(&ds, &rows, path)?);
        }
        fit_rescaling(&weighted_aggregate(&oof, &weights)?)?
    };
    write_cells(&ds, &cells, &line, &ctx.artifact("cells.csv"))?;
    let rescaled = rescale_cells(&cells, &line);

    let mut trend = Vec::new();
    let mut cover = Vec::new();
    for &question in &questions {
        let series: Vec<&AggregatedCell> = rescaled.iter().filter(|c| c.question == question).collect();
        let points: Vec<TrendPoint> = series
            .iter()
            .map(|c| TrendPoint {
                year: ds.year_value(c.year),
                proportion: c.predicted,
                count: c.respondents as f64,
            })
            .collect();
        let curve = smooth_trend(&points, cfg.span)?;
        let obs: Vec<(i32, f64)> = series
            .iter()
            .filter_map(|c| c.observed.map(|o| (ds.year_value(c.year), o)))
            .collect();
        if !obs.is_empty() {
            cover.push(interval_cover_rate(&curve, &obs, cfg.margin)?);
        }
        let by_year: HashMap<i32, f64> = obs.into_iter().collect();
        trend.extend(curve.iter().map(|p| TrendRow {
            variable: ds.variable(question),
            year: p.year,
            smoothed: p.fitted,
            lower: p.lower,
            upper: p.upper,
            observed: by_year.get(&p.year).copied(),
        }));
    }
    write_rows(&ctx.artifact("trend.csv"), &trend)?;
    ctx.summarize("calibration", line);
    ctx.summarize("variables", questions.len());
    if rescaled.iter().any(|c| c.observed.is_some()) {
        ctx.summarize(
            "observed_cells_within_margin",
            margin_correct_rate(&rescaled, cfg.margin)?,
        );
    }
    if !cover.is_empty() {
        ctx.summarize(
            "mean_interval_cover_rate",
            cover.iter().sum::<f64>() / cover.len() as f64,
        );
    }
    Ok(())
}

pub fn cmd_importance(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<()> {
    let path = require_path(&cfg.checkpoint, "--checkpoint")?;
    ctx.input(path);
    let ckpt = load_checkpoint(path)?;
    let n = ckpt.params.embed_dim();
    let mut rows = Vec::new();
    for (layer, cross) in ckpt.params.cross.iter().enumerate() {
        rows.extend(importance_rows(layer, &block_importance(cross.weight.view(), n)?));
    }
    write_rows(&ctx.artifact("importance.csv"), &rows)?;
    ctx.summarize("first_layer", feature_importance(&ckpt.params)?);
    Ok(())
}

/// One row of the run report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub model: String,
    pub task: String,
    pub pooled: PooledMetrics,
    pub cells: CellMetrics,
}

const REPORT_HEADER: [&str; 14] = [
    "model",
    "task",
    "predictions",
    "auc",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "cells",
    "slope",
    "intercept",
    "r_squared",
    "correlation",
    "correct_within_margin",
];

fn write_report(path: &Path, rows: &[ReportRow]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in rows {
        let (p, c) = (&r.pooled, &r.cells);
        let mut record = vec![r.model.clone(), r.task.clone(), p.predictions.to_string()];
        record.extend([p.auc, p.accuracy, p.precision, p.recall, p.f1].map(|v| v.to_string()));
        record.push(c.cells.to_string());
        record.extend(
            [
                c.slope,
                c.intercept,
                c.r_squared,
                c.correlation,
                c.correct_within_margin,
            ]
            .map(|v| v.to_string()),
        );
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| survey_dcn::Error::io(path, e))?;
    Ok(())
}

/// Splits `predictions_<model>_<task>` into its model and task.
fn model_and_task(stem: &str) -> (String, String) {
    let rest = stem.strip_prefix("predictions_").unwrap_or(stem);
    match rest.rsplit_once('_') {
        Some((model, task)) if task.parse::<TaskKind>().is_ok() => (model.to_string(), task.to_string()),
        _ => (rest.to_string(), String::new()),
    }
}

pub fn cmd_report(cfg: &RunConfig, ctx: &mut RunContext) -> CliResult<()> {
    let ds = load_dataset(cfg, ctx)?;
    let weights = ds.individual_weights();
    let mut report = Vec::new();
    for path in &cfg.predictions {
        let rows = read_prediction_file(path, ctx)?;
        let labels: Vec<u8> = rows.iter().map(|r| r.observed).collect();
        let scores: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
        let cells = weighted_aggregate(&scored_from_records(&ds, &rows, path)?, &weights)?;
        let (_, cell) = cell_metrics(&cells, cfg.margin)?;
        let (model, task) = model_and_task(&file_stem(path));
        report.push(ReportRow {
            model,
            task,
            pooled: pooled_metrics(&labels, &scores)?,
            cells: cell,
        });
    }
    write_report(&ctx.artifact("report.csv"), &report)?;
    ctx.summarize("rows", &report);
    Ok(())
}
