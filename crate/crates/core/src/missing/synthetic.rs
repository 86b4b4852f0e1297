use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::auc;
use crate::dcn::sigmoid;
use crate::embed::{EmbeddingMatrix, ExtractionMode};
use crate::rng::component_rng;
use crate::store::{ResponseRecord, SurveyDataset};
use crate::{Error, Result};

/// Planted low-rank survey: respondents `u`, questions `q` and years `t` get
/// standard normal latent vectors and answer with
/// `logit = α + β(u·q + q·t + u·t) + noise·ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Respondents per year; respondents are year-scoped, as in a repeated
    /// cross-section.
    pub individuals: usize,
    pub questions: usize,
    pub years: usize,
    pub latent_dim: usize,
    pub observed_fraction: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Standard deviation of Gaussian noise added to each logit.
    pub noise: f64,
    /// Width of the emitted question vectors: `q` padded with N(0, 1) noise.
    pub embed_dim: usize,
    pub first_year: i32,
    pub year_step: i32,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            individuals: 500,
            questions: 60,
            years: 10,
            latent_dim: 8,
            observed_fraction: 0.4,
            alpha: 0.0,
            beta: 1.5,
            noise: 0.0,
            embed_dim: 32,
            first_year: 1972,
            year_step: 2,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSurvey {
    pub dataset: SurveyDataset,
    pub embeddings: EmbeddingMatrix,
    /// Generating logit of every response, in dataset order.
    pub true_logits: Vec<f64>,
}

impl SyntheticSurvey {
    /// AUC of the generating logits against the sampled answers: the ceiling
    /// any model can reach on this draw.
    pub fn bayes_auc(&self) -> Result<f64> {
        let labels: Vec<u8> = self.dataset.responses().iter().map(|r| r.value).collect();
        auc(&labels, &self.true_logits)
    }
}

fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

pub fn generate_synthetic_survey(cfg: &SyntheticConfig) -> Result<SyntheticSurvey> {
    if cfg.individuals == 0 || cfg.questions == 0 || cfg.years == 0 || cfg.latent_dim == 0 {
        return Err(Error::Config("synthetic survey sizes must be positive".into()));
    }
    if !(cfg.observed_fraction > 0.0 && cfg.observed_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "observed fraction must lie in (0, 1], got {}",
            cfg.observed_fraction
        )));
    }
    if cfg.embed_dim < cfg.latent_dim {
        return Err(Error::Config(format!(
            "embedding width {} is smaller than the latent dimension {}",
            cfg.embed_dim, cfg.latent_dim
        )));
    }
    if cfg.individuals > 9999 {
        return Err(Error::Config(
            "at most 9999 respondents per year fit the yearid convention".into(),
        ));
    }
    let (n, p, y, k) = (cfg.individuals, cfg.questions, cfg.years, cfg.latent_dim);

    let mut latent = component_rng(cfg.seed, "synthetic/latent");
    let q = normal_matrix(p, k, &mut latent);
    let t = normal_matrix(y, k, &mut latent);
    let u = normal_matrix(n * y, k, &mut latent);

    let mut weights_rng = component_rng(cfg.seed, "synthetic/weights");
    let weights: Vec<f64> = (0..n * y).map(|_| weights_rng.random_range(0.5..1.5)).collect();

    let total = n * y * p;
    let keep = ((cfg.observed_fraction * total as f64).round() as usize).max(1);
    let mut obs_rng = component_rng(cfg.seed, "synthetic/observed");
    let mut cells = rand::seq::index::sample(&mut obs_rng, total, keep).into_vec();
    cells.sort_unstable();

    let uq = u.dot(&q.t());
    let tq = t.dot(&q.t());
    let mut resp_rng = component_rng(cfg.seed, "synthetic/responses");
    let width = p.to_string().len().max(2);
    let variables: Vec<String> = (0..p).map(|j| format!("v{:0width$}", j + 1)).collect();
    let mut records = Vec::with_capacity(keep);
    let mut logits = Vec::with_capacity(keep);
    for cell in cells {
        // cell = respondent · p + question, respondent = year · n + i
        let (respondent, j) = (cell / p, cell % p);
        let (yr, i) = (respondent / n, respondent % n);
        let ut = u.row(respondent).dot(&t.row(yr));
        let eps: f64 = StandardNormal.sample(&mut resp_rng);
        let logit = cfg.alpha + cfg.beta * (uq[[respondent, j]] + tq[[yr, j]] + ut) + cfg.noise * eps;
        let bit = u8::from(resp_rng.random::<f64>() < sigmoid(logit));
        let year = cfg.first_year + cfg.year_step * yr as i32;
        records.push(ResponseRecord {
            year,
            respondent_key: i64::from(year) * 10_000 + i as i64 + 1,
            variable: variables[j].clone(),
            question_text: format!(
                "Synthetic opinion item {}: do you agree with statement {}?",
                j + 1,
                j + 1
            ),
            binarized: bit,
            weight: weights[respondent],
        });
        logits.push(logit);
    }
    let dataset = SurveyDataset::from_records(records)?;

    let mut emb_rng = component_rng(cfg.seed, "synthetic/embedding");
    let padding = normal_matrix(p, cfg.embed_dim - k, &mut emb_rng);
    let mut vectors = Array2::zeros((p, cfg.embed_dim));
    vectors.slice_mut(ndarray::s![.., ..k]).assign(&q);
    vectors.slice_mut(ndarray::s![.., k..]).assign(&padding);
    let embeddings = EmbeddingMatrix::new(variables, vectors, "synthetic-planted", ExtractionMode::LastToken)?;
    // questions absent from the sampled cells are dropped
    let embeddings = embeddings.align(&dataset)?;

    Ok(SyntheticSurvey {
        dataset,
        embeddings,
        true_logits: logits,
    })
}
