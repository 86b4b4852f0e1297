//! The three cross-validation schemes and the training loop that runs them.
//!
//! - imputation: individual responses are held out;
//! - retrodiction: whole `(question, year)` cells are held out;
//! - unasked: whole questions are held out, leaving only their text embedding.

mod cv;
mod plan;
mod train;

pub use cv::{
    missingness_sweep, read_predictions, run_cross_validation, run_mf_cross_validation, write_predictions, CvConfig,
    CvResult, Prediction, PredictionRecord, RoundSummary, SweepRow,
};
pub use plan::{
    make_plan, make_question_folds, make_response_folds, make_year_question_folds, FoldPlan, TaskKind, UnitKey,
};
pub use train::{train_model, validation_split, EpochStats, TrainedModel};
