use serde::{Deserialize, Serialize};

use super::StatsError;

/// Summary of absolute errors `|predicted − actual|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub max: f64,
    pub mean_abs: f64,
    /// Sample standard deviation (n − 1) of the absolute errors; 0 for a single value.
    pub std_abs: f64,
}

pub fn error_stats(predicted: &[f64], actual: &[f64]) -> Result<ErrorStats, StatsError> {
    if predicted.len() != actual.len() {
        return Err(StatsError::LengthMismatch(predicted.len(), actual.len()));
    }
    if predicted.is_empty() {
        return Err(StatsError::Empty);
    }
    let abs: Vec<f64> = predicted.iter().zip(actual).map(|(p, a)| (p - a).abs()).collect();
    if abs.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = abs.len() as f64;
    let mean_abs = abs.iter().sum::<f64>() / n;
    let max = abs.iter().copied().fold(0.0, f64::max);
    let std_abs = if abs.len() > 1 {
        (abs.iter().map(|v| (v - mean_abs).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ErrorStats { max, mean_abs, std_abs })
}
