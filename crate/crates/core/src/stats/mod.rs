//! Error summaries and the significance machinery used on ablation curves.

mod errors;
mod holm;
mod significance;
mod special;
mod welch;

pub use errors::{error_stats, ErrorStats};
pub use holm::{holm_correct, HolmAdjusted, ALPHA};
pub use significance::{first_significant_ratio, AttitudeAxis, ErrorMetric, RatioTest, SignificanceSummary};
pub use special::{ln_gamma, regularized_incomplete_beta, student_t_cdf};
pub use welch::{welch_t_test, WelchResult};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} predictions vs {1} actual values")]
    LengthMismatch(usize, usize),
    #[error("sample of size {0} is too small (need at least 2)")]
    TooSmall(usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("{0}")]
    Invalid(String),
}
