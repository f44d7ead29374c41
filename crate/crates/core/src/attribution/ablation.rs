use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_distinct, permutation_importance, AttributionError};
use crate::dataset::{prepare, PrepareConfig, Record};
use crate::nn::{self, MlpModel, TrainConfig};
use crate::sensor_label;
use crate::stats::{AttitudeAxis, ErrorMetric};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub train: TrainConfig,
    pub prepare: PrepareConfig,
    pub n_shuffles: usize,
    /// Stop after this many evaluated steps (`None` runs until one feature is left).
    pub max_steps: Option<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            train: TrainConfig::default(),
            prepare: PrepareConfig::default(),
            n_shuffles: 10,
            max_steps: None,
        }
    }
}

/// Errors after `removed` features have been held constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub removed: usize,
    pub ratio: f64,
    pub pitch_mean: f64,
    pub pitch_max: f64,
    pub roll_mean: f64,
    pub roll_max: f64,
    pub final_train_loss: f64,
    /// Feature judged most important at this step and removed for the next.
    pub removed_label: Option<String>,
}

impl AblationPoint {
    pub fn value(&self, axis: AttitudeAxis, metric: ErrorMetric) -> f64 {
        match (axis, metric) {
            (AttitudeAxis::Pitch, ErrorMetric::Mean) => self.pitch_mean,
            (AttitudeAxis::Pitch, ErrorMetric::Max) => self.pitch_max,
            (AttitudeAxis::Roll, ErrorMetric::Mean) => self.roll_mean,
            (AttitudeAxis::Roll, ErrorMetric::Max) => self.roll_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCurve {
    pub trial_seed: u64,
    pub total_features: usize,
    pub points: Vec<AblationPoint>,
}

/// One trial of iterative most-important-feature removal.
///
/// Each step retrains from the same fresh initialization with the removed
/// channels held at their training mean (0 after standardization) in both
/// splits, so the network keeps all of its inputs.
pub fn ablate_trial(records: &[Record], cfg: &AblationConfig, trial_seed: u64) -> Result<AblationCurve, AttributionError> {
    let data = prepare(records, &cfg.prepare, trial_seed)?;
    let total = data.train.features();
    let train_cfg = TrainConfig { seed: trial_seed, ..cfg.train.clone() };
    let pitch = crate::AXIS_NAMES.iter().position(|a| *a == "pitch").unwrap();
    let roll = crate::AXIS_NAMES.iter().position(|a| *a == "roll").unwrap();
    let mut removed: Vec<usize> = Vec::new();
    let mut points = Vec::with_capacity(total);
    let limit = cfg.max_steps.unwrap_or(total).min(total);
    while points.len() < limit {
        let train = data.train.with_constant_columns(&removed);
        let test = data.test.with_constant_columns(&removed);
        let mut model = MlpModel::init(&dimensions(&train), trial_seed)?;
        nn::train(&mut model, &train, None, &train_cfg)?;
        let eval = nn::evaluate(&model, &test)?;
        let remaining: Vec<usize> = (0..total).filter(|f| !removed.contains(f)).collect();
        let next = if remaining.len() >= 2 && points.len() + 1 < limit {
            let report = permutation_importance(
                &model,
                test.inputs.view(),
                test.targets.view(),
                &remaining,
                cfg.n_shuffles,
                trial_seed,
            )?;
            report.top()
        } else {
            None
        };
        points.push(AblationPoint {
            removed: removed.len(),
            ratio: removed.len() as f64 / total as f64,
            pitch_mean: eval.stats[pitch].mean_abs,
            pitch_max: eval.stats[pitch].max,
            roll_mean: eval.stats[roll].mean_abs,
            roll_max: eval.stats[roll].max,
            final_train_loss: model.loss(train.inputs.view(), train.targets.view()),
            removed_label: next.map(sensor_label),
        });
        match next {
            Some(f) => removed.push(f),
            None => break,
        }
    }
    Ok(AblationCurve { trial_seed, total_features: total, points })
}

fn dimensions(t: &crate::dataset::Tensors) -> Vec<usize> {
    let mut w = nn::DEFAULT_WIDTHS.to_vec();
    w[0] = t.features();
    *w.last_mut().unwrap() = t.targets.ncols();
    w
}

/// Runs [`ablate_trial`] for each seed (in parallel); curves come back in seed order.
pub fn ablate(records: &[Record], cfg: &AblationConfig, seeds: &[u64]) -> Result<Vec<AblationCurve>, AttributionError> {
    check_distinct(seeds)?;
    seeds.par_iter().map(|&s| ablate_trial(records, cfg, s)).collect()
}
