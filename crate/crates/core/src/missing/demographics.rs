use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::path::Path;

use ndarray::Array2;

use crate::{Error, Result};

/// Categorical respondent attributes keyed by respondent key (`yearid`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Demographics {
    columns: Vec<String>,
    rows: HashMap<i64, Vec<String>>,
}

impl Demographics {
    pub fn new(columns: Vec<String>) -> Self {
        Demographics {
            columns,
            rows: HashMap::new(),
        }
    }

    pub fn insert(&mut self, key: i64, values: Vec<String>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::Shape(format!(
                "respondent {key} has {} demographic values, expected {}",
                values.len(),
                self.columns.len()
            )));
        }
        self.rows.insert(key, values);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// One-hot design for the given respondents, dropping each column's first
    /// category (in sorted order among these respondents) as the reference.
    /// Every key must be present.
    pub fn design(&self, keys: &[i64]) -> Result<Array2<f64>> {
        let missing: Vec<i64> = keys
            .iter()
            .filter(|k| !self.rows.contains_key(k))
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !missing.is_empty() {
            return Err(Error::DemographicCoverage(missing));
        }
        let mut levels: Vec<Vec<&str>> = Vec::with_capacity(self.columns.len());
        for c in 0..self.columns.len() {
            let set: BTreeSet<&str> = keys.iter().map(|k| self.rows[k][c].as_str()).collect();
            levels.push(set.into_iter().skip(1).collect());
        }
        let width: usize = levels.iter().map(Vec::len).sum();
        let mut out = Array2::zeros((keys.len(), width));
        for (r, k) in keys.iter().enumerate() {
            let mut offset = 0;
            for (c, lv) in levels.iter().enumerate() {
                if let Some(pos) = lv.iter().position(|l| *l == self.rows[k][c]) {
                    out[[r, offset + pos]] = 1.0;
                }
                offset += lv.len();
            }
        }
        Ok(out)
    }
}

/// Reads `yearid,<column>,<column>,...`; every non-key column is categorical.
pub fn read_demographics(path: impl AsRef<Path>) -> Result<Demographics> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let key_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("yearid"))
        .ok_or_else(|| Error::Format(format!("{} has no yearid column", path.display())))?;
    let columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != key_col)
        .map(|(_, h)| h.to_string())
        .collect();
    let mut demo = Demographics::new(columns);
    for (i, row) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let key: i64 = row[key_col].parse().map_err(|_| Error::Parse {
            line,
            message: format!("yearid {:?} is not an integer", &row[key_col]),
        })?;
        let values = row
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != key_col)
            .map(|(_, v)| v.to_string())
            .collect();
        demo.insert(key, values).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
    }
    Ok(demo)
}
