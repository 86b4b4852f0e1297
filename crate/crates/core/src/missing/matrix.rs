use std::collections::BTreeMap;

use crate::store::SurveyDataset;
use crate::{Error, Result};

/// Dense view of a dataset with one row per respondent-wave `(individual,
/// year)` and one column per question. With year-scoped respondent keys a row
/// is simply an individual.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    rows: Vec<(usize, usize)>,
    cols: usize,
    values: Vec<Option<u8>>,
    /// Position of the source response in the dataset, per cell.
    source: Vec<Option<usize>>,
}

impl ResponseMatrix {
    pub fn from_dataset(ds: &SurveyDataset) -> Self {
        let mut row_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for r in ds.responses() {
            row_of.entry((r.individual, r.year)).or_insert(0);
        }
        for (i, v) in row_of.values_mut().enumerate() {
            *v = i;
        }
        let cols = ds.num_questions();
        let mut values = vec![None; row_of.len() * cols];
        let mut source = vec![None; row_of.len() * cols];
        for (pos, r) in ds.responses().iter().enumerate() {
            let cell = row_of[&(r.individual, r.year)] * cols + r.question;
            values[cell] = Some(r.value);
            source[cell] = Some(pos);
        }
        ResponseMatrix {
            rows: row_of.into_keys().collect(),
            cols,
            values,
            source,
        }
    }

    /// Builds a matrix directly; `None` marks a missing cell.
    pub fn from_rows(rows: Vec<Vec<Option<u8>>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged response matrix".into()));
        }
        if rows.iter().flatten().flatten().any(|&v| v > 1) {
            return Err(Error::Format("response matrix entries must be 0 or 1".into()));
        }
        let n = rows.len();
        Ok(ResponseMatrix {
            rows: (0..n).map(|i| (i, 0)).collect(),
            cols,
            values: rows.into_iter().flatten().collect(),
            source: vec![None; n * cols],
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// `(individual, year)` dense IDs behind a row.
    pub fn row_key(&self, row: usize) -> (usize, usize) {
        self.rows[row]
    }

    pub fn get(&self, row: usize, col: usize) -> Option<u8> {
        self.values[row * self.cols + col]
    }

    /// Dataset position of the response stored in a cell, when built from a dataset.
    pub fn source(&self, row: usize, col: usize) -> Option<usize> {
        self.source[row * self.cols + col]
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Observed cells in row-major order.
    pub fn observed_cells(&self) -> Vec<(usize, usize)> {
        (0..self.nrows())
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .filter(|&(r, c)| self.get(r, c).is_some())
            .collect()
    }

    pub fn column_missing_fraction(&self, col: usize) -> f64 {
        if self.nrows() == 0 {
            return 1.0;
        }
        let missing = (0..self.nrows()).filter(|&r| self.get(r, col).is_none()).count();
        missing as f64 / self.nrows() as f64
    }

    /// Column means over observed cells (0 for an empty column).
    pub fn column_means(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|c| {
                let (sum, n) = (0..self.nrows())
                    .filter_map(|r| self.get(r, c))
                    .fold((0.0, 0usize), |(s, n), v| (s + f64::from(v), n + 1));
                if n == 0 {
                    0.0
                } else {
                    sum / n as f64
                }
            })
            .collect()
    }
}
