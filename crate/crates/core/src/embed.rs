//! Question prompts and the embedding interchange format.
//!
//! An embedding file is a JSON manifest (`dim`, `count`, `model_tag`,
//! `extraction_mode`, ordered `variables`, `payload`) next to a raw
//! row-major little-endian `f32` payload. A delimited fallback with one
//! `variable,v1,...,vD` row per question is also accepted.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::store::SurveyDataset;
use crate::tensor_io::{f32_bytes, payload_path, read_f32s};
use crate::{Error, Result};

/// Instruction-style wrapper placed around every survey question before it is
/// sent to a language model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub prefix: String,
    pub infix: String,
    pub suffix: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            prefix: "Below is an instruction that describes a task. Write a response that appropriately completes the request.\n\n".into(),
            infix: "### Instruction:".into(),
            suffix: "\n\n### Response:".into(),
        }
    }
}

impl PromptTemplate {
    pub fn render(&self, question: &str) -> Result<String> {
        if question.is_empty() {
            return Err(Error::EmptyQuestion);
        }
        let mut s = String::with_capacity(self.prefix.len() + self.infix.len() + question.len() + self.suffix.len());
        s.push_str(&self.prefix);
        s.push_str(&self.infix);
        s.push_str(question);
        s.push_str(&self.suffix);
        Ok(s)
    }
}

pub fn build_prompt(question_text: &str) -> Result<String> {
    PromptTemplate::default().render(question_text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionMode {
    LastToken,
    Pooled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingManifest {
    pub dim: usize,
    pub count: usize,
    pub model_tag: String,
    pub extraction_mode: ExtractionMode,
    pub variables: Vec<String>,
    pub payload: String,
}

/// One vector per label, stored as `f64` but always representable in `f32`
/// when it came from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub model_tag: String,
    pub extraction_mode: ExtractionMode,
    labels: Vec<String>,
    rows: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn new(
        labels: Vec<String>,
        rows: Array2<f64>,
        model_tag: impl Into<String>,
        extraction_mode: ExtractionMode,
    ) -> Result<Self> {
        if labels.len() != rows.nrows() {
            return Err(Error::Shape(format!(
                "{} labels for {} embedding rows",
                labels.len(),
                rows.nrows()
            )));
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::CorruptEmbedding(format!(
                "non-finite value in row {}",
                pos / rows.ncols().max(1)
            )));
        }
        Ok(Self {
            model_tag: model_tag.into(),
            extraction_mode,
            labels,
            rows,
        })
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn count(&self) -> usize {
        self.rows.nrows()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.rows.row(i)
    }

    /// Reorders rows to the dataset's dense question IDs, dropping extra variables.
    pub fn align(&self, ds: &SurveyDataset) -> Result<Self> {
        let by_label: HashMap<&str, usize> = self.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let missing: Vec<String> = ds
            .questions()
            .keys()
            .iter()
            .filter(|v| !by_label.contains_key(v.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::Alignment(missing));
        }
        let extra = self.count().saturating_sub(ds.num_questions());
        if extra > 0 {
            log::warn!("dropping {extra} embedding rows for variables absent from the dataset");
        }
        let mut rows = Array2::zeros((ds.num_questions(), self.dim()));
        for (q, var) in ds.questions().keys().iter().enumerate() {
            rows.row_mut(q).assign(&self.rows.row(by_label[var.as_str()]));
        }
        Ok(Self {
            model_tag: self.model_tag.clone(),
            extraction_mode: self.extraction_mode,
            labels: ds.questions().keys().to_vec(),
            rows,
        })
    }
}

fn read_manifest_file(path: &Path) -> Result<EmbeddingMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: EmbeddingManifest = serde_json::from_str(&text)?;
    if manifest.variables.len() != manifest.count {
        return Err(Error::Format(format!(
            "manifest declares count {} but lists {} variables",
            manifest.count,
            manifest.variables.len()
        )));
    }
    let payload = path.with_file_name(&manifest.payload);
    let bytes = std::fs::read(&payload).map_err(|e| Error::io(&payload, e))?;
    let expected = manifest.count * manifest.dim * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, manifest implies {expected} ({} x {} x 4)",
            bytes.len(),
            manifest.count,
            manifest.dim
        )));
    }
    let values: Vec<f64> = read_f32s(&bytes).into_iter().map(f64::from).collect();
    let rows =
        Array2::from_shape_vec((manifest.count, manifest.dim), values).map_err(|e| Error::Format(e.to_string()))?;
    EmbeddingMatrix::new(manifest.variables, rows, manifest.model_tag, manifest.extraction_mode)
}

fn read_delimited(path: &Path) -> Result<EmbeddingMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut dim = None;
    for row in reader.records() {
        let row = row.map_err(|e| Error::Format(e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if line == 1 && row.get(0).map(|s| s.trim()) == Some("variable") {
            continue;
        }
        let d = row.len().saturating_sub(1);
        match dim {
            None => dim = Some(d),
            Some(prev) if prev != d => return Err(Error::Format(format!("line {line}: {d} values, expected {prev}"))),
            _ => {}
        }
        labels.push(row[0].trim().to_string());
        for field in row.iter().skip(1) {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("line {line}: cannot parse {field:?}")))?;
            values.push(f64::from(v));
        }
    }
    let rows =
        Array2::from_shape_vec((labels.len(), dim.unwrap_or(0)), values).map_err(|e| Error::Format(e.to_string()))?;
    EmbeddingMatrix::new(labels, rows, "delimited", ExtractionMode::LastToken)
}

/// Reads an embedding file without aligning it to a dataset.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("tsv") | Some("txt") => read_delimited(path),
        _ => read_manifest_file(path),
    }
}

/// Reads an embedding file and aligns row `i` to dense question ID `i` of `ds`.
pub fn load_embeddings(path: impl AsRef<Path>, ds: &SurveyDataset) -> Result<EmbeddingMatrix> {
    read_embeddings(path)?.align(ds)
}

/// Writes the manifest and its `.bin` payload.
pub fn export_vectors(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let payload = payload_path(path);
    let manifest = EmbeddingManifest {
        dim: matrix.dim(),
        count: matrix.count(),
        model_tag: matrix.model_tag.clone(),
        extraction_mode: matrix.extraction_mode,
        variables: matrix.labels.clone(),
        payload: payload
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    std::fs::write(&payload, f32_bytes(matrix.rows.iter().copied())).map_err(|e| Error::io(&payload, e))?;
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(path, e))
}
