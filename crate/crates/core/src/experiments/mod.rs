//! Monte Carlo drivers comparing matrix simulations with symbolic
//! predictions, with deterministic seeding and CSV/JSON reports.

mod config;
mod report;
mod runners;
mod stats;

pub use config::{
    preset_config, preset_names, word_preset, CenteringRule, EnsembleSpec, ExperimentConfig,
    ExperimentKind, VectorSpec, WordEntry, WordSuite,
};
pub use report::{write_csv, write_summary, CriterionResult, ExperimentReport, ReportRow};
pub use runners::run;
pub use stats::{estimate_complex, fit_two_term, log_log_slope, ExpansionFit, MomentEstimate};

use crate::functionals::FunctionalError;
use crate::matrix::MatrixError;
use crate::products::ProductError;
use crate::word::ParseError;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Product(#[from] ProductError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
