//! Correlation, least squares, collinearity diagnostics and the rating
//! models built on top of them.

use thiserror::Error;

use crate::absa::Aspect;

pub mod correlation;
pub mod dist;
pub mod models;
pub mod ols;
pub mod vif;

pub use correlation::{corr_matrix, pearson, CorrelationMatrix, CorrelationResult};
pub use dist::{t_cdf, t_two_sided_p};
pub use models::{
    center, fit_interactions, fit_model1, fit_model2, model2_design, sensitivity_run, stars, SensitivityResult,
};
pub use ols::{ols_fit, DesignMatrix, RegressionFit, INTERCEPT};
pub use vif::{vif, VifEntry, VifReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("need more observations than parameters (n = {n}, p = {p})")]
    InsufficientData { n: usize, p: usize },
    #[error("response has zero variance")]
    ZeroVarianceResponse,
    #[error("collinear columns: {}", .columns.join(", "))]
    Collinear { columns: Vec<String> },
    #[error("non-finite value")]
    NonFinite,
    #[error("invalid degrees of freedom {0}")]
    InvalidDegreesOfFreedom(f64),
    #[error("need at least 3 paired observations, got {0}")]
    TooFewObservations(usize),
    #[error("`{0}` has zero variance")]
    ZeroVariance(String),
    #[error("facility `{facility_id}` has no {} mentions", .aspect.label())]
    MissingAspect { facility_id: String, aspect: Aspect },
    #[error("invalid policy pair: {0}")]
    InvalidPolicy(String),
}
