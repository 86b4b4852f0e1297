use std::collections::{BTreeMap, HashMap, HashSet};

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use super::aggregate::Scored;
use super::metrics::{auc, correlation};
use crate::embed::EmbeddingMatrix;
use crate::store::SurveyDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAuc<K> {
    pub key: K,
    pub auc: f64,
    pub responses: usize,
    pub positives: usize,
}

/// Per-group AUCs. Groups whose labels are all one class are left out and
/// counted in `excluded`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAucTable<K> {
    pub rows: Vec<GroupAuc<K>>,
    pub excluded: usize,
}

fn grouped_auc<K: Ord + Copy>(scored: &[Scored], key: impl Fn(&Scored) -> K) -> Result<GroupAucTable<K>> {
    let mut groups: BTreeMap<K, (Vec<u8>, Vec<f64>)> = BTreeMap::new();
    for s in scored {
        if let Some(y) = s.observed {
            let g = groups.entry(key(s)).or_default();
            g.0.push(y);
            g.1.push(s.predicted);
        }
    }
    let mut rows = Vec::with_capacity(groups.len());
    let mut excluded = 0;
    for (k, (labels, scores)) in groups {
        match auc(&labels, &scores) {
            Ok(a) => rows.push(GroupAuc {
                key: k,
                auc: a,
                responses: labels.len(),
                positives: labels.iter().filter(|&&y| y == 1).count(),
            }),
            Err(Error::UndefinedAuc) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(GroupAucTable { rows, excluded })
}

/// AUC over each individual's labelled predictions.
pub fn individual_auc(scored: &[Scored]) -> Result<GroupAucTable<usize>> {
    grouped_auc(scored, |s| s.individual)
}

/// AUC over each `(question, year)` cell's labelled predictions.
pub fn opinion_auc(scored: &[Scored]) -> Result<GroupAucTable<(usize, usize)>> {
    grouped_auc(scored, |s| (s.question, s.year))
}

/// Column-wise z-scores using the sample standard deviation. Constant columns
/// become all zeros.
pub fn zscore_columns(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = a.to_owned();
    let n = a.nrows() as f64;
    for mut col in out.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let sd = var.sqrt();
        col.mapv_inplace(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 });
    }
    out
}

/// Opinion-level covariates for each requested `(question, year)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionCovariates {
    pub cells: Vec<(usize, usize)>,
    pub names: Vec<&'static str>,
    pub raw: Array2<f64>,
    pub standardized: Array2<f64>,
}

/// Computes, per cell: number of responses, response rate among that year's
/// respondents, response variance `p(1 − p)`, the question's mean cosine
/// similarity to every other question's raw embedding and, when an ideology
/// score is supplied per individual, the Pearson correlation between ideology
/// and the binary answer (0 where undefined).
pub fn opinion_covariates(
    ds: &SurveyDataset,
    cells: &[(usize, usize)],
    embeddings: &EmbeddingMatrix,
    ideology: Option<&[Option<f64>]>,
) -> Result<OpinionCovariates> {
    if embeddings.count() != ds.num_questions() {
        return Err(Error::Shape(format!(
            "{} embedding rows for {} questions",
            embeddings.count(),
            ds.num_questions()
        )));
    }
    if let Some(ideo) = ideology {
        if ideo.len() != ds.num_individuals() {
            return Err(Error::Shape(format!(
                "{} ideology scores for {} individuals",
                ideo.len(),
                ds.num_individuals()
            )));
        }
    }

    let mut year_respondents: Vec<HashSet<usize>> = vec![HashSet::new(); ds.num_years()];
    let mut by_cell: HashMap<(usize, usize), Vec<(usize, u8)>> = HashMap::new();
    for r in ds.responses() {
        year_respondents[r.year].insert(r.individual);
        by_cell
            .entry((r.question, r.year))
            .or_default()
            .push((r.individual, r.value));
    }

    let rows = embeddings.rows();
    let norms: Vec<f64> = rows.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let p = rows.nrows();
    let mean_cosine: Vec<f64> = (0..p)
        .map(|q| {
            if p < 2 {
                return 0.0;
            }
            let mut total = 0.0;
            for o in (0..p).filter(|&o| o != q) {
                let denom = norms[q] * norms[o];
                if denom > 0.0 {
                    total += rows.row(q).dot(&rows.row(o)) / denom;
                }
            }
            total / (p - 1) as f64
        })
        .collect();

    let mut names = vec!["sample_size", "response_rate", "response_variance", "mean_cosine"];
    if ideology.is_some() {
        names.push("ideology_correlation");
    }
    let mut raw = Array2::zeros((cells.len(), names.len()));
    for (row, &(q, y)) in cells.iter().enumerate() {
        let answers = by_cell.get(&(q, y)).map(Vec::as_slice).unwrap_or(&[]);
        let count = answers.len() as f64;
        let share = if answers.is_empty() {
            0.0
        } else {
            answers.iter().map(|a| f64::from(a.1)).sum::<f64>() / count
        };
        let in_year = year_respondents.get(y).map_or(0, HashSet::len);
        raw[[row, 0]] = count;
        raw[[row, 1]] = if in_year == 0 { 0.0 } else { count / in_year as f64 };
        raw[[row, 2]] = share * (1.0 - share);
        raw[[row, 3]] = *mean_cosine.get(q).ok_or(Error::IndexOutOfRange {
            what: "question",
            index: q,
            size: p,
        })?;
        if let Some(ideo) = ideology {
            let (xs, ys): (Vec<f64>, Vec<f64>) = answers
                .iter()
                .filter_map(|&(i, v)| ideo[i].map(|s| (s, f64::from(v))))
                .unzip();
            raw[[row, 4]] = correlation(&xs, &ys).unwrap_or(0.0);
        }
    }
    let standardized = zscore_columns(raw.view());
    Ok(OpinionCovariates {
        cells: cells.to_vec(),
        names,
        raw,
        standardized,
    })
}
