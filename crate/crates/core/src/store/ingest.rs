use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::binarize::BinarizationMap;
use super::dataset::{ResponseRecord, SurveyDataset};
use crate::{Error, Result};

/// Canonical header of the response CSV. `weight` is optional on input.
pub const RESPONSE_HEADER: [&str; 6] = ["year", "yearid", "variable", "question", "binarized", "weight"];

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Ignore any weight column and use 1.0 for every response.
    pub ignore_weights: bool,
    /// When set, only these variables are kept.
    pub include: Option<Vec<String>>,
    pub exclude: Vec<String>,
}

impl IngestOptions {
    fn validate(&self) -> Result<()> {
        if let Some(include) = &self.include {
            let ex: HashSet<&str> = self.exclude.iter().map(String::as_str).collect();
            let mut both: Vec<String> = include.iter().filter(|v| ex.contains(v.as_str())).cloned().collect();
            if !both.is_empty() {
                both.sort();
                both.dedup();
                return Err(Error::FilterConflict(both));
            }
        }
        Ok(())
    }

    fn keeps(&self, variable: &str) -> bool {
        if self.exclude.iter().any(|v| v == variable) {
            return false;
        }
        match &self.include {
            Some(inc) => inc.iter().any(|v| v == variable),
            None => true,
        }
    }
}

struct Columns {
    year: usize,
    yearid: usize,
    variable: usize,
    question: usize,
    value: usize,
    option_set: Option<usize>,
    weight: Option<usize>,
}

fn find(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn columns(headers: &csv::StringRecord, value_col: &str, raw: bool) -> Result<Columns> {
    let need = |name: &str| {
        find(headers, name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column {name:?}"),
        })
    };
    Ok(Columns {
        year: need("year")?,
        yearid: need("yearid")?,
        variable: need("variable")?,
        question: need("question")?,
        value: need(value_col)?,
        option_set: if raw { Some(need("option_set")?) } else { None },
        weight: find(headers, "weight"),
    })
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn parse_field<T: std::str::FromStr>(row: &csv::StringRecord, col: usize, name: &str, line: u64) -> Result<T> {
    let raw = row.get(col).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing field {name}"),
    })?;
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {name} from {raw:?}"),
    })
}

fn read_rows(
    path: &Path,
    options: &IngestOptions,
    raw: bool,
    mut value_of: impl FnMut(&csv::StringRecord, &Columns, u64) -> Result<u8>,
) -> Result<Vec<ResponseRecord>> {
    options.validate()?;
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let value_col = if raw { "response" } else { "binarized" };
    let cols = columns(headers, value_col, raw)?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let variable = row.get(cols.variable).unwrap_or("").trim().to_string();
        if variable.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty variable name".into(),
            });
        }
        let year: i32 = parse_field(&row, cols.year, "year", line)?;
        let respondent_key: i64 = parse_field(&row, cols.yearid, "yearid", line)?;
        let binarized = value_of(&row, &cols, line)?;
        let weight = match cols.weight {
            Some(c) if !options.ignore_weights => {
                let w: f64 = parse_field(&row, c, "weight", line)?;
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("weight {w} must be finite and non-negative"),
                    });
                }
                w
            }
            _ => 1.0,
        };
        if !options.keeps(&variable) {
            continue;
        }
        if !seen.insert((respondent_key, variable.clone(), year)) {
            return Err(Error::DuplicateKey {
                respondent: respondent_key,
                variable,
                year,
            });
        }
        records.push(ResponseRecord {
            year,
            respondent_key,
            question_text: row.get(cols.question).unwrap_or("").to_string(),
            variable,
            binarized,
            weight,
        });
    }
    Ok(records)
}

/// Reads canonical response rows without building indexes.
pub fn read_responses(path: impl AsRef<Path>, options: &IngestOptions) -> Result<Vec<ResponseRecord>> {
    read_rows(path.as_ref(), options, false, |row, cols, line| {
        let raw = row.get(cols.value).unwrap_or("").trim();
        match raw {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(Error::InvalidResponse {
                line,
                value: other.to_string(),
            }),
        }
    })
}

/// Ingests the canonical CSV `year,yearid,variable,question,binarized[,weight]`.
pub fn ingest_responses(path: impl AsRef<Path>, options: &IngestOptions) -> Result<SurveyDataset> {
    SurveyDataset::from_records(read_responses(path, options)?)
}

/// Ingests unbinarized responses `year,yearid,variable,question,option_set,response[,weight]`,
/// mapping each response label through `map` using the row's option-set key.
pub fn ingest_raw_responses(
    path: impl AsRef<Path>,
    map: &BinarizationMap,
    options: &IngestOptions,
) -> Result<SurveyDataset> {
    let records = read_rows(path.as_ref(), options, true, |row, cols, _line| {
        let key = row.get(cols.option_set.expect("raw columns")).unwrap_or("");
        let label = row.get(cols.value).unwrap_or("");
        map.lookup(key, label)
    })?;
    SurveyDataset::from_records(records)
}

/// Writes the canonical CSV, always including the weight column.
pub fn write_responses(ds: &SurveyDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let io = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(RESPONSE_HEADER).map_err(io)?;
    for r in ds.records() {
        w.write_record([
            r.year.to_string(),
            r.respondent_key.to_string(),
            r.variable,
            r.question_text,
            r.binarized.to_string(),
            r.weight.to_string(),
        ])
        .map_err(io)?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}
