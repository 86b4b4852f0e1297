use std::time::Instant;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use serde::Serialize;

use super::plan::FoldPlan;
use crate::analysis::auc;
use crate::dcn::{
    adam_step, backward, forward_batch, learning_rate_at, mean_bce, predict, AdamState, DcnConfig, DcnParameters,
    Dropout, Example,
};
use crate::rng::{component_rng, derive_seed};
use crate::store::SurveyDataset;
use crate::{Error, Result};

/// Records used to estimate the loss before the first update.
const INITIAL_LOSS_SAMPLE: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's mini-batches (dropout active).
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub valid_auc: Option<f64>,
    pub learning_rate: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    /// Parameters from the epoch with the best validation score.
    pub params: DcnParameters,
    pub history: Vec<EpochStats>,
    /// Inference-mode training loss before any update, estimated on up to
    /// 5000 evenly spaced training records.
    pub initial_loss: f64,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub steps: u64,
}

/// Splits training units into (fit, validation) with `fraction` of them,
/// rounded, going to validation. At least one unit stays on each side when
/// there are two or more units and `fraction > 0`.
pub fn validation_split(units: &[usize], fraction: f64, seed: u64, tag: &str) -> (Vec<usize>, Vec<usize>) {
    if fraction <= 0.0 || units.len() < 2 {
        return (units.to_vec(), Vec::new());
    }
    let count = ((fraction * units.len() as f64).round() as usize).clamp(1, units.len() - 1);
    let mut order = units.to_vec();
    order.shuffle(&mut component_rng(seed, tag));
    let mut valid = order[..count].to_vec();
    let mut fit = order[count..].to_vec();
    valid.sort_unstable();
    fit.sort_unstable();
    (fit, valid)
}

/// Expands unit indices to their dataset records, ascending.
pub(crate) fn records_of(plan: &FoldPlan, by_unit: &[Vec<usize>], units: &[usize]) -> Vec<usize> {
    debug_assert_eq!(by_unit.len(), plan.units().len());
    let mut out: Vec<usize> = units.iter().flat_map(|&u| by_unit[u].iter().copied()).collect();
    out.sort_unstable();
    out
}

pub(crate) fn examples_of(ds: &SurveyDataset, records: &[usize]) -> (Vec<Example>, Vec<u8>) {
    records
        .iter()
        .map(|&i| {
            let r = ds.responses()[i];
            (
                Example {
                    individual: r.individual,
                    question: r.question,
                    year: r.year,
                },
                r.value,
            )
        })
        .unzip()
}

/// Trains one network on `train` records, early-stopping on the AUC of the
/// `valid` records (their mean loss when AUC is undefined) with the
/// configured patience, and returns the best epoch's parameters.
///
/// All randomness (initialisation, shuffling, dropout) is drawn from streams
/// derived from `seed`.
pub fn train_model(
    ds: &SurveyDataset,
    frozen: ArrayView2<'_, f64>,
    train: &[usize],
    valid: &[usize],
    cfg: &DcnConfig,
    seed: u64,
) -> Result<TrainedModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyTraining("no training records".into()));
    }
    if frozen.nrows() != ds.num_questions() {
        return Err(Error::Shape(format!(
            "{} embedding rows for {} questions",
            frozen.nrows(),
            ds.num_questions()
        )));
    }
    let mut params = DcnParameters::init(
        cfg,
        frozen.ncols(),
        ds.num_individuals(),
        ds.num_years(),
        derive_seed(seed, "train/init"),
    )?;
    let mut adam = AdamState::new(&params);
    let mut shuffle_rng = component_rng(seed, "train/shuffle");
    let mut dropout_rng = component_rng(seed, "train/dropout");

    let (train_ex, train_y) = examples_of(ds, train);
    let (valid_ex, valid_y) = examples_of(ds, valid);

    let stride = train_ex.len().div_ceil(INITIAL_LOSS_SAMPLE).max(1);
    let (probe_ex, probe_y): (Vec<Example>, Vec<u8>) = train_ex
        .iter()
        .zip(&train_y)
        .step_by(stride)
        .map(|(e, y)| (*e, *y))
        .unzip();
    let initial_loss = mean_bce(&predict(&params, frozen, &probe_ex, cfg.batch_size.max(256))?, &probe_y);

    let mut order: Vec<usize> = (0..train_ex.len()).collect();
    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(f64, usize, DcnParameters)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut batch_ex = Vec::with_capacity(cfg.batch_size);
    let mut batch_y = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch_ex.clear();
            batch_y.clear();
            batch_ex.extend(chunk.iter().map(|&i| train_ex[i]));
            batch_y.extend(chunk.iter().map(|&i| train_y[i]));
            let dropout = (cfg.dropout > 0.0).then(|| Dropout {
                rate: cfg.dropout,
                rng: &mut dropout_rng,
            });
            let cache = forward_batch(&params, frozen, &batch_ex, dropout)?;
            let (grads, loss) = backward(&cache, &batch_y, &params)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch}, step {}",
                    adam.step
                )));
            }
            loss_sum += loss * chunk.len() as f64;
            adam_step(&mut params, &grads, &mut adam, cfg)?;
        }
        let train_loss = loss_sum / order.len() as f64;

        let (valid_loss, valid_auc) = if valid_ex.is_empty() {
            (None, None)
        } else {
            let probs = predict(&params, frozen, &valid_ex, cfg.batch_size.max(256))?;
            (Some(mean_bce(&probs, &valid_y)), auc(&valid_y, &probs).ok())
        };
        history.push(EpochStats {
            epoch,
            train_loss,
            valid_loss,
            valid_auc,
            learning_rate: learning_rate_at(cfg, adam.step.saturating_sub(1)),
            seconds: start.elapsed().as_secs_f64(),
        });
        log::info!(
            "epoch {epoch}: train loss {train_loss:.4}, valid loss {}, valid AUC {}",
            valid_loss.map_or("-".into(), |v| format!("{v:.4}")),
            valid_auc.map_or("-".into(), |v| format!("{v:.4}")),
        );

        let score = match (valid_auc, valid_loss) {
            (Some(a), _) => a,
            (None, Some(l)) => -l,
            (None, None) => f64::NEG_INFINITY,
        };
        let improved = best.as_ref().is_none_or(|(b, _, _)| score > *b) || valid_ex.is_empty();
        if improved {
            best = Some((score, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }

    let (params, best_epoch) = match best {
        Some((_, e, p)) => (p, e),
        None => (params, 0),
    };
    Ok(TrainedModel {
        params,
        history,
        initial_loss,
        best_epoch,
        stopped_early,
        steps: adam.step,
    })
}
