//! Command-level operations: each one reads a [`Config`], runs one or more
//! pipeline stages, and writes its artifacts plus a `manifest.json` into an
//! output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::attribution::{self, AblationCurve, AttributionError, NearLimitResult};
use crate::capsule::{generate_trajectory, simulate, CapsuleGeometry, Pose, Row, SimError};
use crate::config::{Config, ConfigError};
use crate::dataset::{self, prepare, read_csv_file, write_csv_file, DatasetError, NearLimit, Record};
use crate::nn::{self, Checkpoint, Evaluation, MlpModel, NnError, TrainReport, CHECKPOINT_VERSION, DEFAULT_WIDTHS};
use crate::report::{self, ReportError};
use crate::stats::{first_significant_ratio, AttitudeAxis, ErrorMetric, SignificanceSummary, StatsError};
use crate::AXIS_NAMES;

/// Failure of a command, split by whose fault it is.
#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad input, config or output location (exit code 2).
    #[error("{0}")]
    User(String),
    /// A broken internal invariant (exit code 3).
    #[error("internal error: {0}")]
    Internal(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::User(_) => 2,
            PipelineError::Internal(_) => 3,
        }
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::User(e.to_string())
    }
}

impl From<ReportError> for PipelineError {
    fn from(e: ReportError) -> Self {
        PipelineError::User(e.to_string())
    }
}

impl From<DatasetError> for PipelineError {
    fn from(e: DatasetError) -> Self {
        PipelineError::User(format!("dataset: {e}"))
    }
}

impl From<SimError> for PipelineError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::AdcRange(_) => PipelineError::Internal(e.to_string()),
            _ => PipelineError::User(e.to_string()),
        }
    }
}

impl From<NnError> for PipelineError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Io(_) | NnError::Checkpoint(_) | NnError::InvalidConfig(_) => PipelineError::User(e.to_string()),
            _ => PipelineError::Internal(e.to_string()),
        }
    }
}

impl From<AttributionError> for PipelineError {
    fn from(e: AttributionError) -> Self {
        match e {
            AttributionError::Nn(e) => e.into(),
            AttributionError::Dataset(e) => e.into(),
            AttributionError::SubsetTooSmall { .. } | AttributionError::DuplicateSeed(_) => {
                PipelineError::User(e.to_string())
            }
            AttributionError::Invalid(_) => PipelineError::Internal(e.to_string()),
        }
    }
}

impl From<StatsError> for PipelineError {
    fn from(e: StatsError) -> Self {
        PipelineError::Internal(format!("statistics: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Everything needed to rerun a command and get the same files back.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// `complete`, `running`, or `failed: <reason>`.
    pub status: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, Vec<u64>>,
    pub versions: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    /// Paths relative to the output directory, in creation order.
    pub outputs: Vec<String>,
    pub timings_seconds: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, cfg: &Config) -> Self {
        let config = cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let seeds = BTreeMap::from([
            ("simulation".to_string(), vec![cfg.simulation.seed]),
            ("split".to_string(), vec![cfg.dataset.split_seed]),
            ("train".to_string(), vec![cfg.train.seed]),
            ("ablation".to_string(), cfg.ablation_seeds()),
            ("attribution".to_string(), cfg.attribution_seeds()),
        ]);
        let versions = BTreeMap::from([
            ("jointsense".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("checkpoint".to_string(), CHECKPOINT_VERSION.to_string()),
        ]);
        RunManifest {
            command: command.to_string(),
            status: "running".into(),
            config,
            seeds,
            versions,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_seconds: BTreeMap::new(),
            notes: Vec::new(),
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Output directory plus the manifest being accumulated for it.
struct Run {
    root: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn start(command: &str, cfg: &Config, root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .map_err(|e| PipelineError::User(format!("cannot create output directory {}: {e}", root.display())))?;
        let mut run = Run { root: root.to_path_buf(), manifest: RunManifest::new(command, cfg) };
        run.write_text("config.txt", &cfg.to_config_string())?;
        run.save_manifest()?;
        Ok(run)
    }

    /// Path for a new output file, created under the root and recorded in the manifest.
    fn output(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| PipelineError::User(format!("cannot create {}: {e}", parent.display())))?;
        }
        if !self.manifest.outputs.iter().any(|o| o == rel) {
            self.manifest.outputs.push(rel.to_string());
        }
        Ok(path)
    }

    fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        let path = self.output(rel)?;
        report::write_text(&path, text)?;
        Ok(())
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f(self);
        self.manifest.timings_seconds.insert(stage.to_string(), t0.elapsed().as_secs_f64());
        if let Err(e) = &out {
            self.manifest.status = format!("failed in {stage}: {e}");
        }
        // keep a partial manifest on disk whatever happens
        let _ = self.save_manifest();
        out
    }

    fn save_manifest(&self) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| PipelineError::Internal(format!("manifest serialization: {e}")))?;
        report::write_text(&self.root.join(MANIFEST_FILE), &(json + "\n"))?;
        Ok(())
    }

    fn finish(mut self) -> Result<RunManifest> {
        self.manifest.status = "complete".into();
        self.save_manifest()?;
        Ok(self.manifest)
    }
}

fn read_dataset(path: &Path) -> Result<Vec<Record>> {
    read_csv_file(path).map_err(|e| PipelineError::User(format!("cannot read dataset {}: {e}", path.display())))
}

/// Capsule row of each channel, in channel order.
pub fn sensor_regions(cfg: &Config) -> Result<Vec<Row>> {
    Ok(CapsuleGeometry::nominal(&cfg.geometry)?.layout.rows())
}

// ---- simulate -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub records: Vec<Record>,
    pub pinned_channels: Vec<usize>,
    /// Offset between recorded and true pose at the last sample (zero without drift).
    pub final_drift_offset: Pose,
    pub manifest: RunManifest,
}

fn simulate_stage(cfg: &Config, run: &mut Run, rel: &str) -> Result<(Vec<Record>, Vec<usize>, Pose)> {
    let seed = cfg.simulation.seed;
    let geometry = CapsuleGeometry::new(&cfg.geometry, seed)?;
    let trajectory = generate_trajectory(&cfg.trajectory(), seed)?;
    let drift = cfg.drift();
    let sim = simulate(&geometry, &trajectory, &cfg.failure_plan(), &drift, &cfg.readout(), seed)?;
    let records = dataset::records_from_run(&sim);
    let path = run.output(rel)?;
    write_csv_file(&records, &path).map_err(|e| PipelineError::User(format!("cannot write {}: {e}", path.display())))?;
    let (t0, t1) = (trajectory[0].t, trajectory[trajectory.len() - 1].t);
    let offset = drift.offset_at(t1, t0, t1);
    let pinned = sim.pinned_channels();
    run.manifest.notes.push(format!("{} samples, {} rail-pinned channels", records.len(), pinned.len()));
    if drift.enabled {
        run.manifest.notes.push(format!(
            "drift final offset: x={} m, y={} m, z={} m, roll={} deg, pitch={} deg, yaw={} deg",
            offset.x, offset.y, offset.z, offset.roll, offset.pitch, offset.yaw
        ));
    }
    Ok((records, pinned, offset))
}

/// Simulates the capsule and writes `dataset.csv`.
pub fn cmd_simulate(cfg: &Config, out: &Path) -> Result<SimulateOutcome> {
    cfg.validate()?;
    let mut run = Run::start("simulate", cfg, out)?;
    let (records, pinned_channels, final_drift_offset) = run.timed("simulate", |r| simulate_stage(cfg, r, "dataset.csv"))?;
    let manifest = run.finish()?;
    Ok(SimulateOutcome { records, pinned_channels, final_drift_offset, manifest })
}

// ---- train ----------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub evaluation: Evaluation,
    pub test_rows: usize,
    pub checkpoint: Checkpoint,
    pub manifest: RunManifest,
}

fn train_stage(cfg: &Config, records: &[Record], run: &mut Run, dir: &str) -> Result<(TrainReport, Evaluation, usize, Checkpoint)> {
    let data = prepare(records, &cfg.dataset.prepare, cfg.dataset.split_seed)?;
    let mut widths = DEFAULT_WIDTHS.to_vec();
    widths[0] = data.train.features();
    let mut model = MlpModel::init(&widths, cfg.train.seed)?;
    let report = nn::train(&mut model, &data.train, Some(&data.test), &cfg.train)?;
    let evaluation = nn::evaluate(&model, &data.test)?;
    let seeds = BTreeMap::from([("split".to_string(), cfg.dataset.split_seed), ("train".to_string(), cfg.train.seed)]);
    let checkpoint = Checkpoint::new(model, data.standardizer.clone(), cfg.train.clone(), seeds);
    checkpoint.save(&run.output(&format!("{dir}checkpoint.json"))?)?;
    report::write_loss_curve(&run.output(&format!("{dir}loss_curve.csv"))?, &report.epoch_losses)?;
    report::write_error_table(&run.output(&format!("{dir}position_errors.csv"))?, &evaluation.stats, &[0, 1, 2])?;
    report::write_error_table(&run.output(&format!("{dir}attitude_errors.csv"))?, &evaluation.stats, &[3, 4, 5])?;
    Ok((report, evaluation, data.test.len(), checkpoint))
}

/// Trains the estimator on a dataset CSV; writes the checkpoint, loss curve
/// and error tables (meters for position, degrees for attitude).
pub fn cmd_train(cfg: &Config, dataset: &Path, out: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    let records = read_dataset(dataset)?;
    let mut run = Run::start("train", cfg, out)?;
    run.manifest.inputs.push(dataset.display().to_string());
    let (report, evaluation, test_rows, checkpoint) = run.timed("train", |r| train_stage(cfg, &records, r, ""))?;
    let manifest = run.finish()?;
    Ok(TrainOutcome { report, evaluation, test_rows, checkpoint, manifest })
}

// ---- ablate ---------------------------------------------------------------

pub const SINGLE_TRIAL_NOTE: &str =
    "only one trial: no statistical analysis can be performed; error bars show nothing across trials";

#[derive(Debug, Clone)]
pub struct AblateOutcome {
    pub curves: Vec<AblationCurve>,
    /// One per (metric, axis); empty for a single trial.
    pub significance: Vec<SignificanceSummary>,
    pub note: Option<String>,
    pub manifest: RunManifest,
}

impl AblateOutcome {
    pub fn first_significant(&self, metric: ErrorMetric, axis: AttitudeAxis) -> Option<f64> {
        self.significance.iter().find(|s| s.metric == metric && s.axis == axis).and_then(|s| s.first_significant)
    }
}

const FAMILIES: [(ErrorMetric, AttitudeAxis); 4] = [
    (ErrorMetric::Mean, AttitudeAxis::Pitch),
    (ErrorMetric::Mean, AttitudeAxis::Roll),
    (ErrorMetric::Max, AttitudeAxis::Pitch),
    (ErrorMetric::Max, AttitudeAxis::Roll),
];

fn fmt_ratio(r: Option<f64>) -> String {
    r.map(|r| format!("{:.1}%", r * 100.0)).unwrap_or_else(|| "none".into())
}

fn ablate_stage(
    cfg: &Config,
    records: &[Record],
    run: &mut Run,
    dir: &str,
) -> Result<(Vec<AblationCurve>, Vec<SignificanceSummary>, Option<String>)> {
    let seeds = cfg.ablation_seeds();
    let curves = attribution::ablate(records, &cfg.ablation_config(), &seeds)?;
    report::write_ablation_csv(&run.output(&format!("{dir}ablation.csv"))?, &curves)?;
    for axis in [AttitudeAxis::Pitch, AttitudeAxis::Roll] {
        let svg = report::ablation_svg(&curves, axis, cfg.ablation.magnify);
        run.write_text(&format!("{dir}ablation_{}.svg", axis.name()), &svg)?;
    }
    let mut text = format!("ablation over {} trial(s), seeds {:?}\n", curves.len(), seeds);
    let (summaries, note) = if curves.len() < 2 {
        text.push_str(SINGLE_TRIAL_NOTE);
        text.push('\n');
        (Vec::new(), Some(SINGLE_TRIAL_NOTE.to_string()))
    } else {
        let s: Vec<SignificanceSummary> = FAMILIES
            .iter()
            .map(|&(m, a)| first_significant_ratio(&curves, m, a))
            .collect::<std::result::Result<_, _>>()?;
        report::write_significance_csv(&run.output(&format!("{dir}significance.csv"))?, &s)?;
        text.push_str("Welch's t-test vs. ratio 0, Holm-corrected within each metric/axis family, alpha 0.05\n");
        for x in &s {
            let _ = writeln!(text, "first significant {} error ratio, {}: {}", x.metric.name(), x.axis.name(), fmt_ratio(x.first_significant));
        }
        (s, None)
    };
    run.write_text(&format!("{dir}ablation_summary.txt"), &text)?;
    Ok((curves, summaries, note))
}

/// Iterative sensor ablation over the configured trials.
pub fn cmd_ablate(cfg: &Config, dataset: &Path, out: &Path) -> Result<AblateOutcome> {
    cfg.validate()?;
    let records = read_dataset(dataset)?;
    let mut run = Run::start("ablate", cfg, out)?;
    run.manifest.inputs.push(dataset.display().to_string());
    let (curves, significance, note) = run.timed("ablate", |r| ablate_stage(cfg, &records, r, ""))?;
    if let Some(n) = &note {
        run.manifest.notes.push(n.clone());
    }
    let manifest = run.finish()?;
    Ok(AblateOutcome { curves, significance, note, manifest })
}

// ---- attribute ------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AttributeOutcome {
    pub results: Vec<NearLimitResult>,
    pub manifest: RunManifest,
}

fn threshold_text(c: NearLimit) -> &'static str {
    match c {
        NearLimit::Twist => "|roll| > 20 deg",
        NearLimit::Bend => "|pitch| or |yaw| > 70 deg",
        NearLimit::PushPull => "|axial displacement| > 2 mm",
    }
}

fn attribute_stage(cfg: &Config, records: &[Record], run: &mut Run, dir: &str) -> Result<Vec<NearLimitResult>> {
    let regions = sensor_regions(cfg)?;
    let seeds = cfg.attribution_seeds();
    let nl = cfg.near_limit_config();
    let mut results = Vec::new();
    let mut text = String::new();
    for &criterion in &cfg.attribution.criteria {
        let result = attribution::near_limit_attribution(records, criterion, &regions, &nl, &seeds).map_err(|e| match e {
            AttributionError::SubsetTooSmall { size, .. } => PipelineError::User(format!(
                "near-limit subset for {criterion} ({}) has {size} samples; at least 5 are needed — lower the threshold or simulate a wider range of motion",
                threshold_text(criterion)
            )),
            e => e.into(),
        })?;
        for r in &result.reports {
            let stem = format!("{dir}shap_{}_trial{}", criterion.name(), r.trial_seed);
            report::write_shap_csv(&run.output(&format!("{stem}.csv"))?, r, &regions)?;
            run.write_text(&format!("{stem}.svg"), &report::shap_bar_svg(r, &result.regions.most_frequent))?;
        }
        let c = &result.regions;
        let _ = writeln!(
            text,
            "{criterion}: subset {} samples (reference dataset: {}); top-3 counts mid-capsular {}, transitional {}, bone attachment {} (total {})",
            result.subset_size,
            criterion.reference_count(),
            c.mid_capsular,
            c.transitional,
            c.bone_attachment,
            c.total()
        );
        let labels: Vec<String> = c.most_frequent.iter().map(|&f| crate::sensor_label(f)).collect();
        let max = c.most_frequent.first().map(|&f| c.frequency[f]).unwrap_or(0);
        let _ = writeln!(text, "  most frequent in top 3 ({max}/{} trials): {}", result.reports.len(), labels.join(", "));
        results.push(result);
    }
    let table: Vec<(String, usize, _)> =
        results.iter().map(|r| (r.criterion.name().to_string(), r.subset_size, r.regions.clone())).collect();
    report::write_region_counts(&run.output(&format!("{dir}region_counts.csv"))?, &table)?;
    run.write_text(&format!("{dir}attribution_summary.txt"), &text)?;
    Ok(results)
}

/// Near-limit Shapley attribution for each configured criterion.
pub fn cmd_attribute(cfg: &Config, dataset: &Path, out: &Path) -> Result<AttributeOutcome> {
    cfg.validate()?;
    if cfg.attribution.criteria.is_empty() {
        return Err(PipelineError::User("no near-limit criterion selected".into()));
    }
    let records = read_dataset(dataset)?;
    let mut run = Run::start("attribute", cfg, out)?;
    run.manifest.inputs.push(dataset.display().to_string());
    let results = run.timed("attribute", |r| attribute_stage(cfg, &records, r, ""))?;
    let manifest = run.finish()?;
    Ok(AttributeOutcome { results, manifest })
}

// ---- repro ----------------------------------------------------------------

/// One pass/fail line of the reproduction summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!("[{}] criterion {}: {} ({})", if self.passed { "PASS" } else { "FAIL" }, self.criterion, self.name, self.detail)
    }
}

/// Reference values from the physical joint, in output order x, y, z (m), roll, pitch, yaw (deg).
pub const REFERENCE_MEAN_ERROR: [f64; 6] = [0.0023, 0.0020, 0.0033, 0.7211, 1.3025, 1.3744];
pub const REFERENCE_MAX_ERROR: [f64; 6] = [0.0195, 0.0149, 0.0247, 6.1621, 7.8585, 9.4371];
pub const REFERENCE_STD_ERROR: [f64; 6] = [0.0028, 0.0022, 0.0037, 0.8798, 1.4239, 1.5882];
/// First significant reduction ratio, mean then max error, for pitch and roll.
pub const REFERENCE_FIRST_SIGNIFICANT: [(ErrorMetric, AttitudeAxis, f64); 4] = [
    (ErrorMetric::Mean, AttitudeAxis::Pitch, 0.257),
    (ErrorMetric::Mean, AttitudeAxis::Roll, 0.286),
    (ErrorMetric::Max, AttitudeAxis::Pitch, 0.486),
    (ErrorMetric::Max, AttitudeAxis::Roll, 0.514),
];
/// Top-3 counts (mid-capsular, transitional, bone attachment) over five trials.
pub fn reference_region_counts(c: NearLimit) -> [usize; 3] {
    match c {
        NearLimit::Twist => [3, 6, 6],
        NearLimit::Bend => [0, 9, 6],
        NearLimit::PushPull => [5, 6, 4],
    }
}

pub fn estimation_checks(eval: &Evaluation) -> Vec<Check> {
    let s = &eval.stats;
    let att = [s[3].mean_abs, s[4].mean_abs, s[5].mean_abs];
    let pos = [s[0].mean_abs, s[1].mean_abs, s[2].mean_abs];
    vec![
        Check {
            criterion: 2,
            name: "mean attitude error <= 2 deg on roll, pitch, yaw".into(),
            passed: att.iter().all(|&e| e <= 2.0),
            detail: format!("{:.3}, {:.3}, {:.3} deg", att[0], att[1], att[2]),
        },
        Check {
            criterion: 2,
            name: "mean position error <= 5 mm per axis".into(),
            passed: pos.iter().all(|&e| e <= 0.005),
            detail: format!("{:.3}, {:.3}, {:.3} mm", pos[0] * 1e3, pos[1] * 1e3, pos[2] * 1e3),
        },
    ]
}

pub fn ablation_checks(curves: &[AblationCurve], significance: &[SignificanceSummary]) -> Vec<Check> {
    let mut out = Vec::new();
    // (a) every evaluated point at ratio >= 0.9 is worse than the trial's own baseline
    let worse = curves
        .iter()
        .filter(|c| {
            let base = c.points[0].pitch_mean;
            let late: Vec<f64> = c.points.iter().filter(|p| p.ratio >= 0.9 - 1e-12).map(|p| p.pitch_mean).collect();
            !late.is_empty() && late.iter().all(|&v| v > base)
        })
        .count();
    let need = (curves.len() * 9).div_ceil(10);
    out.push(Check {
        criterion: 3,
        name: "pitch mean error at ratio >= 0.9 exceeds baseline in >= 9/10 trials".into(),
        passed: !curves.is_empty() && worse >= need,
        detail: format!("{worse}/{} trials", curves.len()),
    });
    // (b) mean error becomes significant no later than max error
    let first = |m, a| significance.iter().find(|s| s.metric == m && s.axis == a).map(|s| s.first_significant);
    for axis in [AttitudeAxis::Pitch, AttitudeAxis::Roll] {
        let (mean, max) = (first(ErrorMetric::Mean, axis), first(ErrorMetric::Max, axis));
        let passed = match (mean, max) {
            (Some(mean), Some(max)) => mean.unwrap_or(f64::INFINITY) <= max.unwrap_or(f64::INFINITY),
            _ => false,
        };
        out.push(Check {
            criterion: 3,
            name: format!("first significant ratio, mean <= max ({})", axis.name()),
            passed,
            detail: format!("mean {}, max {}", fmt_ratio(mean.flatten()), fmt_ratio(max.flatten())),
        });
    }
    // (c) a redundancy plateau: mean attitude error stays within 2x baseline up to some nonzero ratio
    let plateau = plateau_end(curves);
    out.push(Check {
        criterion: 3,
        name: "redundancy plateau (mean attitude error <= 2x baseline) exists".into(),
        passed: plateau.is_some(),
        detail: format!("holds up to ratio {}", fmt_ratio(plateau)),
    });
    out
}

/// Largest ratio `r > 0` such that at every step up to `r` the across-trial
/// mean of the mean error is within twice its baseline, for pitch and roll.
pub fn plateau_end(curves: &[AblationCurve]) -> Option<f64> {
    let means: Vec<Vec<(f64, f64)>> = [AttitudeAxis::Pitch, AttitudeAxis::Roll]
        .iter()
        .map(|&a| report::ablation_summary(curves, a, ErrorMetric::Mean).into_iter().map(|(r, m, _)| (r, m)).collect())
        .collect();
    let steps = means[0].len();
    let mut end = None;
    for k in 1..steps {
        if means.iter().all(|axis| axis[k].1 <= 2.0 * axis[0].1) {
            end = Some(means[0][k].0);
        } else {
            break;
        }
    }
    end
}

pub fn attribution_checks(results: &[NearLimitResult], trials: usize) -> Vec<Check> {
    results
        .iter()
        .filter(|r| matches!(r.criterion, NearLimit::Twist | NearLimit::Bend))
        .map(|r| {
            let c = &r.regions;
            let outer = c.transitional + c.bone_attachment;
            let total = c.total();
            Check {
                criterion: 6,
                name: format!("{}: >= 60% of top-3 in transitional or bone-attachment rows, counts sum to {}", r.criterion, 3 * trials),
                passed: total == 3 * trials && total > 0 && outer as f64 >= 0.6 * total as f64,
                detail: format!("{outer}/{total}"),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ReproOutcome {
    pub simulate: (Vec<Record>, Pose),
    pub train: TrainOutcomeCore,
    pub ablation: Option<(Vec<AblationCurve>, Vec<SignificanceSummary>)>,
    pub attribution: Option<Vec<NearLimitResult>>,
    pub checks: Vec<Check>,
    pub summary: String,
    pub manifest: RunManifest,
}

#[derive(Debug, Clone)]
pub struct TrainOutcomeCore {
    pub report: TrainReport,
    pub evaluation: Evaluation,
    pub test_rows: usize,
}

/// Simulate → train → evaluate → ablate → attribute, each stage in its own
/// subdirectory, plus `summary.txt` comparing against the reference joint.
pub fn cmd_repro(cfg: &Config, out: &Path) -> Result<ReproOutcome> {
    cfg.validate()?;
    let mut run = Run::start("repro", cfg, out)?;
    let (_, _, drift) = run.timed("simulate", |r| simulate_stage(cfg, r, "simulate/dataset.csv"))?;
    // later stages read the CSV back, exactly as the separate commands would
    let dataset_path = out.join("simulate/dataset.csv");
    let records = read_dataset(&dataset_path)?;
    let (report, evaluation, test_rows, _) = run.timed("train", |r| train_stage(cfg, &records, r, "train/"))?;

    let mut checks = estimation_checks(&evaluation);
    let mut summary = String::new();
    let _ = writeln!(summary, "reproduction summary");
    let _ = writeln!(summary, "dataset: {} samples, {} test rows", records.len(), test_rows);
    let _ = writeln!(summary, "\nestimation error on the test split (reference joint in brackets)");
    let _ = writeln!(summary, "{:<6} {:>22} {:>22} {:>22}", "axis", "max", "mean", "std");
    for (k, name) in AXIS_NAMES.iter().enumerate() {
        let (scale, unit) = if k < 3 { (1e3, "mm") } else { (1.0, "deg") };
        let s = &evaluation.stats[k];
        let cell = |v: f64, r: f64| format!("{:.3} [{:.3}] {unit}", v * scale, r * scale);
        let _ = writeln!(
            summary,
            "{:<6} {:>22} {:>22} {:>22}",
            name,
            cell(s.max, REFERENCE_MAX_ERROR[k]),
            cell(s.mean_abs, REFERENCE_MEAN_ERROR[k]),
            cell(s.std_abs, REFERENCE_STD_ERROR[k])
        );
    }

    let ablation = if cfg.repro.ablation {
        let (curves, sig, note) = run.timed("ablate", |r| ablate_stage(cfg, &records, r, "ablate/"))?;
        let _ = writeln!(summary, "\nsensor ablation, {} trials", curves.len());
        if let Some(n) = note {
            let _ = writeln!(summary, "{n}");
        }
        for (m, a, reference) in REFERENCE_FIRST_SIGNIFICANT {
            let got = sig.iter().find(|s| s.metric == m && s.axis == a).and_then(|s| s.first_significant);
            let _ = writeln!(summary, "first significant {} error ratio, {}: {} [{:.1}%]", m.name(), a.name(), fmt_ratio(got), reference * 100.0);
        }
        checks.extend(ablation_checks(&curves, &sig));
        Some((curves, sig))
    } else {
        None
    };

    let attribution = if cfg.repro.attribution && !cfg.attribution.criteria.is_empty() {
        let results = run.timed("attribute", |r| attribute_stage(cfg, &records, r, "attribute/"))?;
        let _ = writeln!(summary, "\nnear-limit attribution, {} trials per criterion", cfg.attribution_seeds().len());
        for r in &results {
            let c = &r.regions;
            let [m, t, b] = reference_region_counts(r.criterion);
            let _ = writeln!(
                summary,
                "{}: subset {} [{}]; top-3 mid/transitional/attachment {}/{}/{} [{m}/{t}/{b}]",
                r.criterion,
                r.subset_size,
                r.criterion.reference_count(),
                c.mid_capsular,
                c.transitional,
                c.bone_attachment
            );
        }
        checks.extend(attribution_checks(&results, cfg.attribution_seeds().len()));
        Some(results)
    } else {
        None
    };

    if cfg.simulation.drift {
        let _ = writeln!(
            summary,
            "\nreference drift at the final sample: x={} m, y={} m, z={} m, roll={} deg, pitch={} deg, yaw={} deg",
            drift.x, drift.y, drift.z, drift.roll, drift.pitch, drift.yaw
        );
    }
    let _ = writeln!(summary, "\nchecks");
    for c in &checks {
        let _ = writeln!(summary, "{}", c.line());
    }
    run.write_text("summary.txt", &summary)?;
    let manifest = run.finish()?;
    Ok(ReproOutcome {
        simulate: (records, drift),
        train: TrainOutcomeCore { report, evaluation, test_rows },
        ablation,
        attribution,
        checks,
        summary,
        manifest,
    })
}
