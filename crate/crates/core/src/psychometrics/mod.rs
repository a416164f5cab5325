//! Psychometric analysis of graded responses: bounded 2PL IRT, Baker
//! discrimination bands, Cohen's kappa and descriptive tables.

mod bands;
pub mod irt;
mod kappa;
mod matrix;
pub mod report;

use thiserror::Error;

pub use bands::{classify_discrimination, DiscriminationBand};
pub use irt::{
    cross_entropy_loss, entropy_floor, fit_2pl, fit_2pl_observed, icc_probability,
    AbilityEstimate, AbilityEstimates, FitConfig, FitReport, FitResult, ItemEstimate,
    ItemParameters, StopReason,
};
pub use kappa::cohens_kappa;
pub use matrix::ScoreMatrix;
pub use report::{descriptive_report, score_matrix, ReportTables};

#[derive(Debug, Error)]
pub enum PsychometricsError {
    #[error("score matrix has no observed cells")]
    EmptyMask,
    #[error("{kind} `{id}` has no observed scores")]
    Unobserved { kind: &'static str, id: String },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("score {score} for ({student}, {item}) is outside [0, 1]")]
    ScoreOutOfRange {
        student: String,
        item: String,
        score: f64,
    },
    #[error("expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("parameters outside their bounds")]
    OutOfBounds,
    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("discrimination {0} is outside [0, 2]")]
    DiscriminationOutOfRange(f64),
    #[error("label lists differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("no labels to compare")]
    NoLabels,
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for PsychometricsError {
    fn from(e: csv::Error) -> Self {
        PsychometricsError::Csv(e.to_string())
    }
}
