//! Missingness simulation over an observed response matrix, the logistic
//! models that drive MAR/MNAR masking, and the planted synthetic survey used
//! for desk-scale experiments.

mod demographics;
mod logistic;
mod masks;
mod matrix;
mod synthetic;

pub use demographics::{read_demographics, Demographics};
pub use logistic::{fit_logistic, LogisticModel};
pub use masks::{
    simulate_mar, simulate_mcar, simulate_mnar, write_mask, MaskOptions, MaskScope, Mechanism, MissingMask,
};
pub use matrix::ResponseMatrix;
pub use synthetic::{generate_synthetic_survey, SyntheticConfig, SyntheticSurvey};
