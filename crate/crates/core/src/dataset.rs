//! On-disk record format, train/test split, input standardization and the
//! near-limit subsets used for attribution.
//!
//! The CSV layout is fixed: `t`, the 60 channels `adc0_data0 … adc3_data14`
//! in board/index order, then `x,y,z,roll,pitch,yaw`. Floats are written with
//! 17 significant digits so a write/read cycle is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capsule::{channel_labels, Pose, SimulationRun, ADC_MAX};
use crate::seed::{self, stream};
use crate::{NUM_OUTPUTS, NUM_SENSORS};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {message}")]
    Validation { line: u64, message: String },
    #[error("header does not match the dataset schema: {0}")]
    Schema(String),
    #[error("invalid dataset config: {0}")]
    Config(String),
    #[error("training split is empty")]
    EmptyTraining,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// One time-aligned sample: all channel counts and the reference pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub counts: [u16; NUM_SENSORS],
    pub pose: Pose,
}

/// Pairs each frame of a simulation with its recorded pose label.
pub fn records_from_run(run: &SimulationRun) -> Vec<Record> {
    run.frames
        .iter()
        .zip(&run.recorded)
        .map(|(f, p)| Record { t: f.t, counts: f.counts, pose: *p })
        .collect()
}

/// The 67 column names, in file order.
pub fn csv_header() -> Vec<String> {
    let mut h = Vec::with_capacity(1 + NUM_SENSORS + NUM_OUTPUTS);
    h.push("t".to_string());
    h.extend(channel_labels());
    h.extend(crate::AXIS_NAMES.iter().map(|s| s.to_string()));
    h
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(records: &[Record], writer: W) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header())?;
    let mut row: Vec<String> = Vec::with_capacity(1 + NUM_SENSORS + NUM_OUTPUTS);
    for r in records {
        row.clear();
        row.push(fmt_float(r.t));
        row.extend(r.counts.iter().map(|c| c.to_string()));
        row.extend(r.pose.to_array().iter().map(|&v| fmt_float(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[Record], path: &Path) -> Result<(), DatasetError> {
    write_csv(records, BufWriter::new(File::create(path)?))
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<Record>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let expected = csv_header();
    let header = rdr.headers()?.clone();
    if header.len() != expected.len() {
        return Err(DatasetError::Schema(format!(
            "expected {} columns, found {}",
            expected.len(),
            header.len()
        )));
    }
    if let Some((i, (got, want))) =
        header.iter().zip(&expected).enumerate().find(|(_, (g, w))| g.trim() != w.as_str())
    {
        return Err(DatasetError::Schema(format!("column {i} is `{got}`, expected `{want}`")));
    }

    let mut out = Vec::new();
    for result in rdr.records() {
        let rec = result?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != expected.len() {
            return Err(DatasetError::Parse {
                line,
                message: format!("expected {} fields, found {}", expected.len(), rec.len()),
            });
        }
        let float = |i: usize| -> Result<f64, DatasetError> {
            let v: f64 = rec[i].trim().parse().map_err(|e| DatasetError::Parse {
                line,
                message: format!("column `{}`: {e}", expected[i]),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::Validation {
                    line,
                    message: format!("column `{}` is not finite", expected[i]),
                });
            }
            Ok(v)
        };
        let t = float(0)?;
        let mut counts = [0u16; NUM_SENSORS];
        for (c, slot) in counts.iter_mut().enumerate() {
            let col = c + 1;
            let v: i64 = rec[col].trim().parse().map_err(|e| DatasetError::Parse {
                line,
                message: format!("column `{}`: {e}", expected[col]),
            })?;
            if !(0..=i64::from(ADC_MAX)).contains(&v) {
                return Err(DatasetError::Validation {
                    line,
                    message: format!("column `{}`: count {v} outside [0, {ADC_MAX}]", expected[col]),
                });
            }
            *slot = v as u16;
        }
        let mut pose = [0.0; NUM_OUTPUTS];
        for (k, p) in pose.iter_mut().enumerate() {
            *p = float(1 + NUM_SENSORS + k)?;
        }
        out.push(Record { t, counts, pose: Pose::from_array(pose) });
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<Record>, DatasetError> {
    read_csv(BufReader::new(File::open(path)?))
}

/// Disjoint, exhaustive train/test index sets (each sorted ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub test_fraction: f64,
    pub seed: u64,
}

/// Uniform random split of `n` records with `round(test_fraction · n)` held out.
pub fn split(n: usize, test_fraction: f64, seed: u64) -> Result<Split, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::Config(format!(
            "test fraction {test_fraction} must lie strictly between 0 and 1"
        )));
    }
    if n < 5 {
        return Err(DatasetError::Config(format!("{n} records are too few to split (need 5)")));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed, &[stream::SPLIT]));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, test, test_fraction, seed })
}

/// Near-range-of-motion subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NearLimit {
    /// |roll| > 20°
    Twist,
    /// |pitch| > 70° or |yaw| > 70°
    Bend,
    /// |axial displacement| > 2 mm (axial = x)
    PushPull,
}

impl NearLimit {
    pub const ALL: [NearLimit; 3] = [NearLimit::Twist, NearLimit::Bend, NearLimit::PushPull];

    pub fn matches(self, pose: &Pose) -> bool {
        match self {
            NearLimit::Twist => pose.roll.abs() > 20.0,
            NearLimit::Bend => pose.pitch.abs() > 70.0 || pose.yaw.abs() > 70.0,
            NearLimit::PushPull => pose.x.abs() > 0.002,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NearLimit::Twist => "twist",
            NearLimit::Bend => "bend",
            NearLimit::PushPull => "pushpull",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "twist" => Some(NearLimit::Twist),
            "bend" => Some(NearLimit::Bend),
            "pushpull" | "push-pull" | "push_pull" => Some(NearLimit::PushPull),
            _ => None,
        }
    }

    /// Subset size the physical rig produced for this criterion.
    pub fn reference_count(self) -> usize {
        match self {
            NearLimit::Twist => 415,
            NearLimit::Bend => 207,
            NearLimit::PushPull => 75,
        }
    }
}

/// Records meeting `criterion`, in their original order.
pub fn filter_near_limit(records: &[Record], criterion: NearLimit) -> Vec<Record> {
    records.iter().filter(|r| criterion.matches(&r.pose)).cloned().collect()
}

impl std::fmt::Display for NearLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Units the network is trained in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TargetMode {
    /// Meters and degrees, as recorded.
    PaperRaw,
    /// Meters and radians.
    RadiansMeters,
    /// Meters and radians, then z-scored per output with training statistics.
    #[default]
    Standardized,
}

impl TargetMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paper_raw" | "PaperRaw" => Some(TargetMode::PaperRaw),
            "radians_meters" | "RadiansMeters" => Some(TargetMode::RadiansMeters),
            "standardized" | "Standardized" => Some(TargetMode::Standardized),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetMode::PaperRaw => "paper_raw",
            TargetMode::RadiansMeters => "radians_meters",
            TargetMode::Standardized => "standardized",
        }
    }

    fn radians(self) -> bool {
        self != TargetMode::PaperRaw
    }

    /// Pose (meters, degrees) to this mode's physical units, before any
    /// per-output scaling.
    pub fn encode(self, pose: &Pose) -> [f64; NUM_OUTPUTS] {
        let mut a = pose.to_array();
        if self.radians() {
            for v in &mut a[3..] {
                *v = v.to_radians();
            }
        }
        a
    }

    /// Inverse of [`TargetMode::encode`].
    pub fn decode(self, target: &[f64]) -> [f64; NUM_OUTPUTS] {
        let mut a = [0.0; NUM_OUTPUTS];
        a.copy_from_slice(&target[..NUM_OUTPUTS]);
        if self.radians() {
            for v in &mut a[3..] {
                *v = v.to_degrees();
            }
        }
        a
    }
}

/// Maps poses to network targets and back: unit conversion followed by
/// `(v − offset) / scale` per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCodec {
    pub mode: TargetMode,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl TargetCodec {
    /// Unit conversion only.
    pub fn identity(mode: TargetMode) -> Self {
        TargetCodec { mode, offset: vec![0.0; NUM_OUTPUTS], scale: vec![1.0; NUM_OUTPUTS] }
    }

    /// For [`TargetMode::Standardized`], fits per-output mean and population
    /// standard deviation on `rows`; other modes get the identity scaling.
    pub fn fit(records: &[Record], rows: &[usize], mode: TargetMode) -> Self {
        if mode != TargetMode::Standardized || rows.is_empty() {
            return Self::identity(mode);
        }
        let n = rows.len() as f64;
        let encoded: Vec<[f64; NUM_OUTPUTS]> = rows.iter().map(|&i| mode.encode(&records[i].pose)).collect();
        let offset: Vec<f64> = (0..NUM_OUTPUTS).map(|k| encoded.iter().map(|e| e[k]).sum::<f64>() / n).collect();
        let scale = (0..NUM_OUTPUTS)
            .map(|k| {
                let s = (encoded.iter().map(|e| (e[k] - offset[k]).powi(2)).sum::<f64>() / n).sqrt();
                if s > 0.0 { s } else { 1.0 }
            })
            .collect();
        TargetCodec { mode, offset, scale }
    }

    pub fn encode(&self, pose: &Pose) -> [f64; NUM_OUTPUTS] {
        let mut a = self.mode.encode(pose);
        for ((v, o), s) in a.iter_mut().zip(&self.offset).zip(&self.scale) {
            *v = (*v - o) / s;
        }
        a
    }

    /// Factor converting a difference in output `k` to meters or degrees.
    pub fn unit_scale(&self, k: usize) -> f64 {
        let angle = if self.mode.radians() && k >= 3 { 180.0 / std::f64::consts::PI } else { 1.0 };
        self.scale[k] * angle
    }

    /// Network output back to meters and degrees.
    pub fn decode(&self, target: &[f64]) -> [f64; NUM_OUTPUTS] {
        let mut a = [0.0; NUM_OUTPUTS];
        for (k, v) in a.iter_mut().enumerate() {
            *v = target[k] * self.scale[k] + self.offset[k];
        }
        self.mode.decode(&a)
    }
}

/// Default lower bound on the per-channel divisor, in ADC counts.
///
/// Live channels spread over ~100 counts; rail-pinned channels only show
/// clipped readout noise (~1 count). Without a floor the latter would be
/// scaled up to unit-variance noise inputs.
pub const DEFAULT_MIN_STD: f64 = 10.0;

/// Per-channel input scaling and target coding, fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Divisor per channel: `max(std, min_std)`, or 1 for a constant channel when `min_std` is 0.
    pub std: Vec<f64>,
    pub min_std: f64,
    pub targets: TargetCodec,
}

impl Standardizer {
    /// Fits channel means and (population) standard deviations on the rows in
    /// `train`, with the divisor floored at `min_std` counts.
    pub fn fit(records: &[Record], train: &[usize], target_mode: TargetMode, min_std: f64) -> Result<Self, DatasetError> {
        if train.is_empty() {
            return Err(DatasetError::EmptyTraining);
        }
        if !(min_std >= 0.0 && min_std.is_finite()) {
            return Err(DatasetError::Config(format!("min_std must be finite and >= 0, got {min_std}")));
        }
        let n = train.len() as f64;
        let mut mean = vec![0.0; NUM_SENSORS];
        for &i in train {
            for (m, &c) in mean.iter_mut().zip(&records[i].counts) {
                *m += f64::from(c);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; NUM_SENSORS];
        for &i in train {
            for ((v, &c), m) in var.iter_mut().zip(&records[i].counts).zip(&mean) {
                *v += (f64::from(c) - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt().max(min_std);
                if s > 0.0 { s } else { 1.0 }
            })
            .collect();
        let targets = TargetCodec::fit(records, train, target_mode);
        Ok(Standardizer { mean, std, min_std, targets })
    }

    pub fn target_mode(&self) -> TargetMode {
        self.targets.mode
    }

    pub fn input_row(&self, counts: &[u16]) -> Vec<f64> {
        counts.iter().enumerate().map(|(c, &v)| (f64::from(v) - self.mean[c]) / self.std[c]).collect()
    }

    pub fn inputs(&self, records: &[Record], rows: &[usize]) -> Array2<f64> {
        let mut x = Array2::zeros((rows.len(), NUM_SENSORS));
        for (mut out, &i) in x.axis_iter_mut(Axis(0)).zip(rows) {
            for (c, o) in out.iter_mut().enumerate() {
                *o = (f64::from(records[i].counts[c]) - self.mean[c]) / self.std[c];
            }
        }
        x
    }

    pub fn targets(&self, records: &[Record], rows: &[usize]) -> Array2<f64> {
        let mut y = Array2::zeros((rows.len(), NUM_OUTPUTS));
        for (mut out, &i) in y.axis_iter_mut(Axis(0)).zip(rows) {
            for (o, v) in out.iter_mut().zip(self.targets.encode(&records[i].pose)) {
                *o = v;
            }
        }
        y
    }
}

/// Model-ready inputs and targets; `codec` maps targets back to meters/degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensors {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub codec: TargetCodec,
}

impl Tensors {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn features(&self) -> usize {
        self.inputs.ncols()
    }

    /// Copy with the given input columns held at 0, which is the training
    /// mean in standardized units.
    pub fn with_constant_columns(&self, columns: &[usize]) -> Tensors {
        let mut t = self.clone();
        for &c in columns {
            t.inputs.column_mut(c).fill(0.0);
        }
        t
    }

    pub fn select_rows(&self, rows: &[usize]) -> Tensors {
        Tensors {
            inputs: self.inputs.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
            codec: self.codec.clone(),
        }
    }
}

/// Split records plus the fitted standardizer.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: Tensors,
    pub test: Tensors,
    pub standardizer: Standardizer,
    pub split: Split,
}

/// Standardizes inputs with training-split statistics and encodes targets.
pub fn standardize(
    records: &[Record],
    split: &Split,
    target_mode: TargetMode,
    min_std: f64,
) -> Result<PreparedData, DatasetError> {
    let standardizer = Standardizer::fit(records, &split.train, target_mode, min_std)?;
    let tensors = |rows: &[usize]| Tensors {
        inputs: standardizer.inputs(records, rows),
        targets: standardizer.targets(records, rows),
        codec: standardizer.targets.clone(),
    };
    Ok(PreparedData {
        train: tensors(&split.train),
        test: tensors(&split.test),
        standardizer: standardizer.clone(),
        split: split.clone(),
    })
}

/// Split and standardization settings shared by training and the analyses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub test_fraction: f64,
    pub target_mode: TargetMode,
    pub min_std: f64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig { test_fraction: 0.2, target_mode: TargetMode::default(), min_std: DEFAULT_MIN_STD }
    }
}

/// Seeded split followed by [`standardize`].
pub fn prepare(records: &[Record], cfg: &PrepareConfig, seed: u64) -> Result<PreparedData, DatasetError> {
    let split = split(records.len(), cfg.test_fraction, seed)?;
    standardize(records, &split, cfg.target_mode, cfg.min_std)
}
