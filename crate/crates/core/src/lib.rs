//! Opinion prediction over sparse, binarized survey responses.
//!
//! The crate is organised around the pipeline a survey analyst runs:
//!
//! - [`store`]: ingest, binarize and index `(individual, question, year)` responses.
//! - [`embed`]: prompt template and the question-embedding interchange format.
//! - [`dcn`]: the three-embedding deep cross network with hand-derived gradients.
//! - [`folds`]: the three cross-validation schemes and the training loop.
//! - [`mf`]: alternating-least-squares matrix factorization baseline.
//! - [`missing`]: MCAR/MAR/MNAR mask simulation and the planted synthetic survey.
//! - [`analysis`]: metrics, weighted aggregation, rescaling, trend smoothing, robust OLS.
//!
//! All training arithmetic is `f64`; `f32` only appears at storage boundaries.

pub mod analysis;
pub mod dcn;
pub mod embed;
pub mod error;
pub mod folds;
pub mod linalg;
pub mod mf;
pub mod missing;
pub mod rng;
pub mod store;
pub mod tensor_io;

pub use error::{Error, Result};
