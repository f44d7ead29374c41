use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_distinct, shapley_values, AttributionError};
use crate::capsule::Row;
use crate::dataset::{filter_near_limit, prepare, NearLimit, PrepareConfig, Record};
use crate::nn::{self, MlpModel, TrainConfig, DEFAULT_WIDTHS};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearLimitConfig {
    pub train: TrainConfig,
    pub prepare: PrepareConfig,
    pub background_rows: usize,
    pub n_permutations: usize,
}

impl Default for NearLimitConfig {
    fn default() -> Self {
        NearLimitConfig {
            train: TrainConfig::default(),
            prepare: PrepareConfig::default(),
            background_rows: 100,
            n_permutations: 200,
        }
    }
}

/// One trial's aggregated attributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapReport {
    pub trial_seed: u64,
    pub criterion: NearLimit,
    /// Mean over evaluated rows of `Σ_outputs |φ|`, one per feature, with
    /// `φ` expressed in meters and degrees.
    pub aggregate: Vec<f64>,
    pub top3: [usize; 3],
    pub evaluated_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCount {
    pub mid_capsular: usize,
    pub transitional: usize,
    pub bone_attachment: usize,
    /// Trials in which each feature made the top 3.
    pub frequency: Vec<usize>,
    /// Features with the highest nonzero frequency.
    pub most_frequent: Vec<usize>,
}

impl RegionCount {
    pub fn total(&self) -> usize {
        self.mid_capsular + self.transitional + self.bone_attachment
    }

    pub fn get(&self, row: Row) -> usize {
        match row {
            Row::MidCapsular => self.mid_capsular,
            Row::Transitional => self.transitional,
            Row::BoneAttachment => self.bone_attachment,
        }
    }

    pub fn from_reports(reports: &[ShapReport], regions: &[Row]) -> Self {
        let mut c = RegionCount {
            mid_capsular: 0,
            transitional: 0,
            bone_attachment: 0,
            frequency: vec![0; regions.len()],
            most_frequent: Vec::new(),
        };
        for r in reports {
            for &f in &r.top3 {
                c.frequency[f] += 1;
                match regions[f] {
                    Row::MidCapsular => c.mid_capsular += 1,
                    Row::Transitional => c.transitional += 1,
                    Row::BoneAttachment => c.bone_attachment += 1,
                }
            }
        }
        let max = c.frequency.iter().copied().max().unwrap_or(0);
        if max > 0 {
            c.most_frequent = (0..c.frequency.len()).filter(|&f| c.frequency[f] == max).collect();
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearLimitResult {
    pub criterion: NearLimit,
    pub subset_size: usize,
    pub reports: Vec<ShapReport>,
    pub regions: RegionCount,
}

/// The `k` largest entries, ties broken by lower index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

fn trial(subset: &[Record], criterion: NearLimit, cfg: &NearLimitConfig, trial_seed: u64) -> Result<ShapReport, AttributionError> {
    let data = prepare(subset, &cfg.prepare, trial_seed)?;
    let mut widths = DEFAULT_WIDTHS.to_vec();
    widths[0] = data.train.features();
    let mut model = MlpModel::init(&widths, trial_seed)?;
    nn::train(&mut model, &data.train, None, &TrainConfig { seed: trial_seed, ..cfg.train.clone() })?;

    let mut bg: Vec<usize> = (0..data.train.len()).collect();
    bg.shuffle(&mut seed::rng(trial_seed, &[stream::BACKGROUND]));
    bg.truncate(cfg.background_rows.max(1));
    bg.sort_unstable();
    let background = data.train.select_rows(&bg).inputs;

    let phi = shapley_values(&model, data.test.inputs.view(), background.view(), cfg.n_permutations, trial_seed)?;
    // attributions are differences of outputs, so only the scale (not the
    // offset) of the target coding applies when expressing them in meters/degrees
    let units: Vec<f64> = (0..phi.values.shape()[2]).map(|k| data.test.codec.unit_scale(k)).collect();
    let n_rows = phi.values.shape()[0];
    let aggregate: Vec<f64> = (0..phi.values.shape()[1])
        .map(|f| {
            let s: f64 = (0..n_rows)
                .map(|r| phi.values.slice(ndarray::s![r, f, ..]).iter().zip(&units).map(|(v, u)| (v * u).abs()).sum::<f64>())
                .sum();
            s / n_rows as f64
        })
        .collect();
    if aggregate.iter().any(|a| !a.is_finite()) {
        return Err(AttributionError::Invalid("non-finite attribution".into()));
    }
    let t = top_k(&aggregate, 3);
    Ok(ShapReport { trial_seed, criterion, aggregate, top3: [t[0], t[1], t[2]], evaluated_rows: n_rows })
}

/// Trains one model per seed on the near-limit subset and attributes its
/// test-portion predictions. `regions[f]` is the capsule row of feature `f`.
pub fn near_limit_attribution(
    records: &[Record],
    criterion: NearLimit,
    regions: &[Row],
    cfg: &NearLimitConfig,
    seeds: &[u64],
) -> Result<NearLimitResult, AttributionError> {
    check_distinct(seeds)?;
    let subset = filter_near_limit(records, criterion);
    // the split needs at least one test row and a few training rows
    if subset.len() < 5 {
        return Err(AttributionError::SubsetTooSmall { criterion, size: subset.len() });
    }
    if regions.len() != crate::NUM_SENSORS {
        return Err(AttributionError::Invalid(format!("expected {} region labels, got {}", crate::NUM_SENSORS, regions.len())));
    }
    let reports: Vec<ShapReport> = seeds
        .par_iter()
        .map(|&s| trial(&subset, criterion, cfg, s))
        .collect::<Result<_, _>>()?;
    let regions = RegionCount::from_reports(&reports, regions);
    Ok(NearLimitResult { criterion, subset_size: subset.len(), reports, regions })
}
