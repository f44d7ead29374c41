use serde::{Deserialize, Serialize};

use super::{holm_correct, welch_t_test, StatsError};
use crate::attribution::AblationCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttitudeAxis {
    Pitch,
    Roll,
}

impl AttitudeAxis {
    pub fn name(self) -> &'static str {
        match self {
            AttitudeAxis::Pitch => "pitch",
            AttitudeAxis::Roll => "roll",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorMetric {
    Mean,
    Max,
}

impl ErrorMetric {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMetric::Mean => "mean",
            ErrorMetric::Max => "max",
        }
    }
}

/// Welch test of one reduction ratio against the baseline, Holm-adjusted
/// within its (metric, axis) family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioTest {
    pub ratio: f64,
    pub t: f64,
    pub df: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceSummary {
    pub metric: ErrorMetric,
    pub axis: AttitudeAxis,
    pub tests: Vec<RatioTest>,
    /// Smallest ratio whose adjusted p is below 0.05.
    pub first_significant: Option<f64>,
}

/// Compares each nonzero reduction ratio with the baseline (ratio 0) across
/// trials, Holm-corrects over the ratios, and reports the first significant one.
///
/// Ratios are matched by position; only steps present in every curve are tested.
pub fn first_significant_ratio(
    curves: &[AblationCurve],
    metric: ErrorMetric,
    axis: AttitudeAxis,
) -> Result<SignificanceSummary, StatsError> {
    if curves.len() < 2 {
        return Err(StatsError::TooSmall(curves.len()));
    }
    if curves.iter().any(|c| c.points.first().map(|p| p.ratio) != Some(0.0)) {
        return Err(StatsError::Invalid("every curve needs a baseline point at ratio 0".into()));
    }
    let steps = curves.iter().map(|c| c.points.len()).min().unwrap_or(0);
    let column = |k: usize| -> Vec<f64> {
        curves.iter().map(|c| c.points[k].value(axis, metric)).collect()
    };
    let baseline = column(0);
    let mut raw = Vec::with_capacity(steps.saturating_sub(1));
    for k in 1..steps {
        raw.push((curves[0].points[k].ratio, welch_t_test(&column(k), &baseline)?));
    }
    let adjusted = holm_correct(&raw.iter().map(|(_, w)| w.p).collect::<Vec<_>>());
    let tests: Vec<RatioTest> = raw
        .iter()
        .zip(&adjusted)
        .map(|((ratio, w), h)| RatioTest {
            ratio: *ratio,
            t: w.t,
            df: w.df,
            p_raw: w.p,
            p_adjusted: h.adjusted,
            significant: h.significant,
        })
        .collect();
    let first_significant = tests.iter().find(|t| t.significant).map(|t| t.ratio);
    Ok(SignificanceSummary { metric, axis, tests, first_significant })
}
