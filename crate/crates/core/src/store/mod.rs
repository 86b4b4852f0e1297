//! Sparse survey response storage.
//!
//! Responses are `(individual, question, year)` triples carrying a binary
//! answer and a survey weight. Raw keys are encoded to dense contiguous IDs
//! in ascending key order so the same input always produces the same IDs.

mod binarize;
mod dataset;
mod index;
mod ingest;
mod stats;

pub use binarize::{apply_binarization, normalize_label, BinarizationMap};
pub use dataset::{Response, ResponseRecord, SurveyDataset};
pub use index::{encode_ids, IdIndex};
pub use ingest::{ingest_raw_responses, ingest_responses, read_responses, write_responses, IngestOptions};
pub use stats::{dataset_stats, CellStats, DatasetStats};
