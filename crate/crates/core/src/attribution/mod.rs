//! Permutation importance, the iterative sensor-ablation protocol and
//! Monte-Carlo permutation Shapley values with near-limit region counts.

mod ablation;
mod importance;
mod near_limit;
mod shapley;

pub use ablation::{ablate, ablate_trial, AblationConfig, AblationCurve, AblationPoint};
pub use importance::{permutation_importance, rank_descending, ImportanceReport};
pub use near_limit::{near_limit_attribution, top_k, NearLimitConfig, NearLimitResult, RegionCount, ShapReport};
pub use shapley::{shapley_values, ShapleyValues};

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

use crate::dataset::{DatasetError, NearLimit};
use crate::nn::{MlpModel, NnError};

/// Anything that maps a batch of input rows to output rows.
pub trait Regressor: Sync {
    fn predict(&self, x: ArrayView2<f64>) -> Array2<f64>;
}

impl Regressor for MlpModel {
    fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward(x)
    }
}

impl<F> Regressor for F
where
    F: Fn(ArrayView2<f64>) -> Array2<f64> + Sync,
{
    fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self(x)
    }
}

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("near-limit subset for {criterion} has {size} samples, too few to split; relax the near-limit threshold")]
    SubsetTooSmall { criterion: NearLimit, size: usize },
    #[error("trial seeds must be distinct (seed {0} repeats)")]
    DuplicateSeed(u64),
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn check_distinct(seeds: &[u64]) -> Result<(), AttributionError> {
    let mut seen = std::collections::BTreeSet::new();
    for &s in seeds {
        if !seen.insert(s) {
            return Err(AttributionError::DuplicateSeed(s));
        }
    }
    if seeds.is_empty() {
        return Err(AttributionError::Invalid("at least one trial seed is required".into()));
    }
    Ok(())
}
