//! WebAssembly bindings for the static page in `www/`.
//!
//! Each export takes plain numbers or comma-separated text and returns a JSON
//! string, so the page needs no bundler. The `*_json` functions hold the logic
//! and are callable natively for tests.

use serde::Serialize;
use survey_dcn::analysis::{auc, smooth_trend, SmoothedPoint, TrendPoint};
use survey_dcn::mf::{als_fit, mf_predict, MfConfig, Observation};
use survey_dcn::missing::{generate_synthetic_survey, SyntheticConfig};
use wasm_bindgen::prelude::*;

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| format!("could not read {what} value {t:?}")))
        .collect()
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Smooth a yearly proportion series; `counts` may be empty for unit weights.
pub fn smooth_json(years: &str, proportions: &str, counts: &str, span: f64) -> Result<String, String> {
    let years: Vec<i32> = parse_list(years, "year")?;
    let props: Vec<f64> = parse_list(proportions, "proportion")?;
    let mut counts: Vec<f64> = parse_list(counts, "count")?;
    if counts.is_empty() {
        counts = vec![1.0; years.len()];
    }
    if years.len() != props.len() || years.len() != counts.len() {
        return Err(format!(
            "{} years, {} proportions and {} counts must line up",
            years.len(),
            props.len(),
            counts.len()
        ));
    }
    let series: Vec<TrendPoint> = years
        .iter()
        .zip(&props)
        .zip(&counts)
        .map(|((&year, &proportion), &count)| TrendPoint {
            year,
            proportion,
            count,
        })
        .collect();
    let fitted: Vec<SmoothedPoint> = smooth_trend(&series, span).map_err(|e| e.to_string())?;
    to_json(&fitted)
}

#[derive(Serialize)]
struct RocSummary {
    auc: f64,
    /// `(false positive rate, true positive rate)` at each distinct threshold.
    curve: Vec<(f64, f64)>,
}

/// ROC AUC of scores against 0/1 labels, plus the curve for plotting.
pub fn roc_json(labels: &str, scores: &str) -> Result<String, String> {
    let labels: Vec<u8> = parse_list(labels, "label")?;
    let scores: Vec<f64> = parse_list(scores, "score")?;
    if labels.iter().any(|&l| l > 1) {
        return Err("labels must be 0 or 1".into());
    }
    let area = auc(&labels, &scores).map_err(|e| e.to_string())?;
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut curve = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            tp += 1.0
        } else {
            fp += 1.0
        }
        if order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]) {
            curve.push((fp / neg, tp / pos));
        }
    }
    to_json(&RocSummary { auc: area, curve })
}

#[derive(Serialize)]
struct AlsSummary {
    responses: usize,
    held_out: usize,
    objective: Vec<f64>,
    held_out_auc: f64,
    bayes_auc: f64,
}

/// Fit ALS to a small planted survey, holding out every tenth response.
pub fn planted_als_json(
    individuals: usize,
    rank: usize,
    lambda: f64,
    iterations: usize,
    seed: u64,
) -> Result<String, String> {
    let survey = generate_synthetic_survey(&SyntheticConfig {
        individuals,
        questions: 30,
        years: 4,
        seed,
        ..SyntheticConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let ds = &survey.dataset;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, r) in ds.responses().iter().enumerate() {
        let o = Observation {
            row: r.individual,
            col: r.question,
            value: f64::from(r.value),
        };
        if i % 10 == 0 {
            test.push(o)
        } else {
            train.push(o)
        }
    }
    let cfg = MfConfig {
        rank,
        lambda,
        iterations,
        seed,
    };
    let (factors, objective) =
        als_fit(&train, ds.num_individuals(), ds.num_questions(), &cfg).map_err(|e| e.to_string())?;
    let labels: Vec<u8> = test.iter().map(|o| o.value as u8).collect();
    let scores = test
        .iter()
        .map(|o| mf_predict(&factors, o.row, o.col))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| e.to_string())?;
    to_json(&AlsSummary {
        responses: ds.len(),
        held_out: test.len(),
        objective,
        held_out_auc: auc(&labels, &scores).map_err(|e| e.to_string())?,
        bayes_auc: survey.bayes_auc().map_err(|e| e.to_string())?,
    })
}

#[wasm_bindgen]
pub fn smooth(years: &str, proportions: &str, counts: &str, span: f64) -> Result<String, JsError> {
    smooth_json(years, proportions, counts, span).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn roc(labels: &str, scores: &str) -> Result<String, JsError> {
    roc_json(labels, scores).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = plantedAls)]
pub fn planted_als(
    individuals: usize,
    rank: usize,
    lambda: f64,
    iterations: usize,
    seed: u32,
) -> Result<String, JsError> {
    planted_als_json(individuals, rank, lambda, iterations, u64::from(seed)).map_err(|e| JsError::new(&e))
}
