use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::index::IdIndex;
use crate::{Error, Result};

/// One response as it appears in the canonical CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub year: i32,
    pub respondent_key: i64,
    pub variable: String,
    pub question_text: String,
    pub binarized: u8,
    pub weight: f64,
}

/// A response with every key resolved to its dense ID.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub individual: usize,
    pub question: usize,
    pub year: usize,
    pub value: u8,
    pub weight: f64,
}

/// Immutable, indexed collection of binarized responses.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDataset {
    responses: Vec<Response>,
    individuals: IdIndex<i64>,
    questions: IdIndex<String>,
    years: IdIndex<i32>,
    question_texts: Vec<String>,
}

impl SurveyDataset {
    /// Builds all indexes from raw records, preserving record order.
    ///
    /// The first text seen for a variable wins; later differing texts only warn.
    pub fn from_records(records: Vec<ResponseRecord>) -> Result<Self> {
        let individuals = IdIndex::from_keys(records.iter().map(|r| r.respondent_key));
        let questions = IdIndex::from_keys(records.iter().map(|r| r.variable.clone()));
        let years = IdIndex::from_keys(records.iter().map(|r| r.year));

        let mut texts: Vec<Option<String>> = vec![None; questions.len()];
        let mut seen = HashSet::with_capacity(records.len());
        let mut responses = Vec::with_capacity(records.len());
        for r in &records {
            if r.binarized > 1 {
                return Err(Error::InvalidResponse {
                    line: 0,
                    value: r.binarized.to_string(),
                });
            }
            if !(r.weight >= 0.0) || !r.weight.is_finite() {
                return Err(Error::Format(format!(
                    "weight {} for respondent {} is not a finite non-negative number",
                    r.weight, r.respondent_key
                )));
            }
            let individual = individuals.encode(&r.respondent_key).expect("indexed");
            let question = questions.encode(r.variable.as_str()).expect("indexed");
            let year = years.encode(&r.year).expect("indexed");
            if !seen.insert((individual, question, year)) {
                return Err(Error::DuplicateKey {
                    respondent: r.respondent_key,
                    variable: r.variable.clone(),
                    year: r.year,
                });
            }
            match &texts[question] {
                None => texts[question] = Some(r.question_text.clone()),
                Some(t) if *t != r.question_text => log::warn!(
                    "variable {} has conflicting question texts; keeping the first",
                    r.variable
                ),
                Some(_) => {}
            }
            responses.push(Response {
                individual,
                question,
                year,
                value: r.binarized,
                weight: r.weight,
            });
        }
        Ok(Self {
            responses,
            individuals,
            questions,
            years,
            question_texts: texts.into_iter().map(Option::unwrap_or_default).collect(),
        })
    }

    pub fn empty() -> Self {
        Self::from_records(Vec::new()).expect("empty dataset is valid")
    }

    pub fn responses(&self) -> &[Response] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn num_individuals(&self) -> usize {
        self.individuals.len()
    }

    pub fn num_questions(&self) -> usize {
        self.questions.len()
    }

    pub fn num_years(&self) -> usize {
        self.years.len()
    }

    pub fn individuals(&self) -> &IdIndex<i64> {
        &self.individuals
    }

    pub fn questions(&self) -> &IdIndex<String> {
        &self.questions
    }

    pub fn years(&self) -> &IdIndex<i32> {
        &self.years
    }

    pub fn question_text(&self, question: usize) -> &str {
        &self.question_texts[question]
    }

    pub fn question_texts(&self) -> &[String] {
        &self.question_texts
    }

    pub fn variable(&self, question: usize) -> &str {
        self.questions.decode(question).map(String::as_str).unwrap_or("")
    }

    pub fn year_value(&self, year: usize) -> i32 {
        *self.years.decode(year).expect("year rank in range")
    }

    pub fn respondent_key(&self, individual: usize) -> i64 {
        *self.individuals.decode(individual).expect("individual in range")
    }

    /// Reconstructs the raw record at position `i`.
    pub fn record(&self, i: usize) -> ResponseRecord {
        let r = &self.responses[i];
        ResponseRecord {
            year: self.year_value(r.year),
            respondent_key: self.respondent_key(r.individual),
            variable: self.variable(r.question).to_string(),
            question_text: self.question_texts[r.question].clone(),
            binarized: r.value,
            weight: r.weight,
        }
    }

    pub fn records(&self) -> impl Iterator<Item = ResponseRecord> + '_ {
        (0..self.len()).map(move |i| self.record(i))
    }

    /// Survey weight per individual, taken from that individual's first response.
    pub fn individual_weights(&self) -> Vec<f64> {
        let mut w = vec![f64::NAN; self.num_individuals()];
        for r in &self.responses {
            if w[r.individual].is_nan() {
                w[r.individual] = r.weight;
            }
        }
        w
    }

    /// The year rank in which each individual responded (first response wins).
    pub fn individual_years(&self) -> Vec<usize> {
        let mut y = vec![usize::MAX; self.num_individuals()];
        for r in &self.responses {
            if y[r.individual] == usize::MAX {
                y[r.individual] = r.year;
            }
        }
        y
    }

    /// Keeps only responses whose positions satisfy `keep`, re-deriving every index.
    pub fn filter_records(&self, mut keep: impl FnMut(usize, &Response) -> bool) -> Result<Self> {
        let records = self
            .responses
            .iter()
            .enumerate()
            .filter(|(i, r)| keep(*i, r))
            .map(|(i, _)| self.record(i))
            .collect();
        Self::from_records(records)
    }

    /// Lookup from `(individual, question, year)` to response position.
    pub fn position_index(&self) -> HashMap<(usize, usize, usize), usize> {
        self.responses
            .iter()
            .enumerate()
            .map(|(i, r)| ((r.individual, r.question, r.year), i))
            .collect()
    }
}
