//! Run configuration: a line-oriented `section.key = value` file plus
//! per-key overrides.
//!
//! ```text
//! # comments start with '#'
//! simulation.samples = 1263
//! dataset.target_mode = standardized
//! ablation.seeds = 1,2,3
//! ```
//!
//! Every key has a default, so an empty file is a valid config.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::attribution::{AblationConfig, NearLimitConfig};
use crate::capsule::{DriftModel, FailurePlan, GeometryConfig, ReadoutConfig, TrajectoryConfig, Wander};
use crate::dataset::{NearLimit, PrepareConfig, TargetMode};
use crate::nn::TrainConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `section.key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("cannot read config file {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSection {
    pub seed: u64,
    pub samples: usize,
    pub period: f64,
    pub failed_sensors: usize,
    pub disconnects: usize,
    pub noise_sigma: f64,
    pub gain: f64,
    pub rest_voltage: f64,
    pub drift: bool,
    pub wander: bool,
    pub wander_angle: f64,
    pub wander_translation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSection {
    pub split_seed: u64,
    pub prepare: PrepareConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationSection {
    pub trials: usize,
    /// Explicit trial seeds; empty means `1..=trials`.
    pub seeds: Vec<u64>,
    pub shuffles: usize,
    /// 0 runs until one feature is left.
    pub max_steps: usize,
    /// Error-bar magnification in the SVG chart (CSV is always unscaled).
    pub magnify: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionSection {
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub criteria: Vec<NearLimit>,
    pub background_rows: usize,
    pub permutations: usize,
}

/// Which optional stages `repro` runs after simulate/train.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproSection {
    pub ablation: bool,
    pub attribution: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub simulation: SimulationSection,
    pub geometry: GeometryConfig,
    pub dataset: DatasetSection,
    pub train: TrainConfig,
    pub ablation: AblationSection,
    pub attribution: AttributionSection,
    pub repro: ReproSection,
}

impl Default for Config {
    fn default() -> Self {
        let readout = ReadoutConfig::default();
        let wander = Wander::default();
        let traj = TrajectoryConfig::default();
        Config {
            simulation: SimulationSection {
                seed: 1,
                samples: traj.samples,
                period: traj.period,
                failed_sensors: 20,
                disconnects: 0,
                noise_sigma: readout.noise_sigma,
                gain: readout.gain,
                rest_voltage: readout.rest_voltage,
                drift: false,
                wander: true,
                wander_angle: wander.angle_amplitude,
                wander_translation: wander.translation_amplitude,
            },
            geometry: GeometryConfig::default(),
            dataset: DatasetSection { split_seed: 1, prepare: PrepareConfig::default() },
            train: TrainConfig { seed: 1, ..TrainConfig::default() },
            ablation: AblationSection { trials: 10, seeds: Vec::new(), shuffles: 10, max_steps: 0, magnify: 1.0 },
            attribution: AttributionSection {
                trials: 5,
                seeds: Vec::new(),
                criteria: NearLimit::ALL.to_vec(),
                background_rows: 100,
                permutations: 200,
            },
            repro: ReproSection { ablation: true, attribution: true },
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value { key: key.into(), value: value.into(), reason: e.to_string() })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: Display,
{
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

fn parse_triple(key: &str, value: &str) -> Result<[f64; 3], ConfigError> {
    let v: Vec<f64> = parse_list(key, value)?;
    v.try_into().map_err(|_| ConfigError::Value { key: key.into(), value: value.into(), reason: "expected three comma-separated numbers".into() })
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Value { key: key.into(), value: value.into(), reason: reason.into() }
}

impl Config {
    /// All keys in file order.
    pub fn keys() -> Vec<&'static str> {
        Config::default().entries().into_iter().map(|(k, _)| k).collect()
    }

    /// `(key, value)` for every key, formatted so that [`Config::set`] reads
    /// the value back exactly.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.simulation;
        let g = &self.geometry;
        let d = &self.dataset;
        let t = &self.train;
        let a = &self.ablation;
        let at = &self.attribution;
        vec![
            ("simulation.seed", s.seed.to_string()),
            ("simulation.samples", s.samples.to_string()),
            ("simulation.period", s.period.to_string()),
            ("simulation.failed_sensors", s.failed_sensors.to_string()),
            ("simulation.disconnects", s.disconnects.to_string()),
            ("simulation.noise_sigma", s.noise_sigma.to_string()),
            ("simulation.gain", s.gain.to_string()),
            ("simulation.rest_voltage", s.rest_voltage.to_string()),
            ("simulation.drift", s.drift.to_string()),
            ("simulation.wander", s.wander.to_string()),
            ("simulation.wander_angle", s.wander_angle.to_string()),
            ("simulation.wander_translation", s.wander_translation.to_string()),
            ("geometry.sphere_radius", g.sphere_radius.to_string()),
            ("geometry.capsule_thickness", g.capsule_thickness.to_string()),
            ("geometry.fixed_ring_latitude", g.fixed_ring_latitude.to_string()),
            ("geometry.moving_ring_latitude", g.moving_ring_latitude.to_string()),
            ("geometry.row_latitudes", join(&g.row_latitudes)),
            ("geometry.row_axis_angles", join(&g.row_axis_angles)),
            ("geometry.gauge_length", g.gauge_length.to_string()),
            ("geometry.position_jitter", g.position_jitter.to_string()),
            ("geometry.axis_jitter", g.axis_jitter.to_string()),
            ("dataset.split_seed", d.split_seed.to_string()),
            ("dataset.test_fraction", d.prepare.test_fraction.to_string()),
            ("dataset.target_mode", d.prepare.target_mode.name().to_string()),
            ("dataset.min_std", d.prepare.min_std.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.beta1", t.beta1.to_string()),
            ("train.beta2", t.beta2.to_string()),
            ("train.epsilon", t.epsilon.to_string()),
            ("ablation.trials", a.trials.to_string()),
            ("ablation.seeds", join(&a.seeds)),
            ("ablation.shuffles", a.shuffles.to_string()),
            ("ablation.max_steps", a.max_steps.to_string()),
            ("ablation.magnify", a.magnify.to_string()),
            ("attribution.trials", at.trials.to_string()),
            ("attribution.seeds", join(&at.seeds)),
            ("attribution.criteria", at.criteria.iter().map(|c| c.name()).collect::<Vec<_>>().join(",")),
            ("attribution.background_rows", at.background_rows.to_string()),
            ("attribution.permutations", at.permutations.to_string()),
            ("repro.ablation", self.repro.ablation.to_string()),
            ("repro.attribution", self.repro.attribution.to_string()),
        ]
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let s = &mut self.simulation;
        let g = &mut self.geometry;
        match key {
            "simulation.seed" => s.seed = parse(key, v)?,
            "simulation.samples" => s.samples = parse(key, v)?,
            "simulation.period" => s.period = parse(key, v)?,
            "simulation.failed_sensors" => s.failed_sensors = parse(key, v)?,
            "simulation.disconnects" => s.disconnects = parse(key, v)?,
            "simulation.noise_sigma" => s.noise_sigma = parse(key, v)?,
            "simulation.gain" => s.gain = parse(key, v)?,
            "simulation.rest_voltage" => s.rest_voltage = parse(key, v)?,
            "simulation.drift" => s.drift = parse(key, v)?,
            "simulation.wander" => s.wander = parse(key, v)?,
            "simulation.wander_angle" => s.wander_angle = parse(key, v)?,
            "simulation.wander_translation" => s.wander_translation = parse(key, v)?,
            "geometry.sphere_radius" => g.sphere_radius = parse(key, v)?,
            "geometry.capsule_thickness" => g.capsule_thickness = parse(key, v)?,
            "geometry.fixed_ring_latitude" => g.fixed_ring_latitude = parse(key, v)?,
            "geometry.moving_ring_latitude" => g.moving_ring_latitude = parse(key, v)?,
            "geometry.row_latitudes" => g.row_latitudes = parse_triple(key, v)?,
            "geometry.row_axis_angles" => g.row_axis_angles = parse_triple(key, v)?,
            "geometry.gauge_length" => g.gauge_length = parse(key, v)?,
            "geometry.position_jitter" => g.position_jitter = parse(key, v)?,
            "geometry.axis_jitter" => g.axis_jitter = parse(key, v)?,
            "dataset.split_seed" => self.dataset.split_seed = parse(key, v)?,
            "dataset.test_fraction" => self.dataset.prepare.test_fraction = parse(key, v)?,
            "dataset.target_mode" => {
                self.dataset.prepare.target_mode =
                    TargetMode::parse(v).ok_or_else(|| invalid(key, v, "expected standardized, radians_meters or paper_raw"))?
            }
            "dataset.min_std" => self.dataset.prepare.min_std = parse(key, v)?,
            "train.seed" => self.train.seed = parse(key, v)?,
            "train.learning_rate" => self.train.learning_rate = parse(key, v)?,
            "train.batch_size" => self.train.batch_size = parse(key, v)?,
            "train.epochs" => self.train.epochs = parse(key, v)?,
            "train.beta1" => self.train.beta1 = parse(key, v)?,
            "train.beta2" => self.train.beta2 = parse(key, v)?,
            "train.epsilon" => self.train.epsilon = parse(key, v)?,
            "ablation.trials" => self.ablation.trials = parse(key, v)?,
            "ablation.seeds" => self.ablation.seeds = parse_list(key, v)?,
            "ablation.shuffles" => self.ablation.shuffles = parse(key, v)?,
            "ablation.max_steps" => self.ablation.max_steps = parse(key, v)?,
            "ablation.magnify" => self.ablation.magnify = parse(key, v)?,
            "attribution.trials" => self.attribution.trials = parse(key, v)?,
            "attribution.seeds" => self.attribution.seeds = parse_list(key, v)?,
            "attribution.criteria" => {
                self.attribution.criteria = v
                    .split(',')
                    .map(str::trim)
                    .filter(|c| !c.is_empty())
                    .map(|c| NearLimit::parse(c).ok_or_else(|| invalid(key, c, "expected twist, bend or pushpull")))
                    .collect::<Result<_, _>>()?
            }
            "attribution.background_rows" => self.attribution.background_rows = parse(key, v)?,
            "attribution.permutations" => self.attribution.permutations = parse(key, v)?,
            "repro.ablation" => self.repro.ablation = parse(key, v)?,
            "repro.attribution" => self.repro.attribution = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, _)| k.contains('.') && !k.contains(char::is_whitespace))
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate { line: i + 1, key: key.into() });
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse_str(&text)
    }

    /// Applies `(key, value)` overrides in order, then validates.
    pub fn apply_overrides<K: AsRef<str>, V: AsRef<str>>(&mut self, overrides: &[(K, V)]) -> Result<(), ConfigError> {
        for (k, v) in overrides {
            self.set(k.as_ref(), v.as_ref())?;
        }
        self.validate()
    }

    /// Writes every key in the config grammar; parsing the result gives back `self`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (k, v) in self.entries() {
            let s = k.split('.').next().unwrap_or("");
            if s != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = s;
            }
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// Range checks that do not need the rest of the pipeline.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.simulation;
        let check = |ok: bool, key: &str, value: String, reason: &str| if ok { Ok(()) } else { Err(invalid(key, &value, reason)) };
        check(s.samples >= 1, "simulation.samples", s.samples.to_string(), "must be >= 1")?;
        check(s.period > 0.0 && s.period.is_finite(), "simulation.period", s.period.to_string(), "must be > 0")?;
        check(s.noise_sigma >= 0.0 && s.noise_sigma.is_finite(), "simulation.noise_sigma", s.noise_sigma.to_string(), "must be >= 0")?;
        check(s.gain.is_finite(), "simulation.gain", s.gain.to_string(), "must be finite")?;
        check(
            (0.0..=crate::capsule::SUPPLY_VOLTS).contains(&s.rest_voltage),
            "simulation.rest_voltage",
            s.rest_voltage.to_string(),
            "must lie within the supply range",
        )?;
        check(
            s.failed_sensors + s.disconnects <= crate::NUM_SENSORS,
            "simulation.failed_sensors",
            s.failed_sensors.to_string(),
            "failed plus disconnecting sensors exceed 60",
        )?;
        let f = self.dataset.prepare.test_fraction;
        check(f > 0.0 && f < 1.0, "dataset.test_fraction", f.to_string(), "must lie in (0, 1)")?;
        let m = self.dataset.prepare.min_std;
        check(m >= 0.0 && m.is_finite(), "dataset.min_std", m.to_string(), "must be >= 0")?;
        self.train.validate().map_err(|e| invalid("train", "", &e.to_string()))?;
        check(self.ablation.trials >= 1, "ablation.trials", self.ablation.trials.to_string(), "must be >= 1")?;
        check(self.ablation.shuffles >= 1, "ablation.shuffles", self.ablation.shuffles.to_string(), "must be >= 1")?;
        check(self.ablation.magnify > 0.0, "ablation.magnify", self.ablation.magnify.to_string(), "must be > 0")?;
        check(self.attribution.trials >= 1, "attribution.trials", self.attribution.trials.to_string(), "must be >= 1")?;
        check(self.attribution.background_rows >= 1, "attribution.background_rows", self.attribution.background_rows.to_string(), "must be >= 1")?;
        check(self.attribution.permutations >= 1, "attribution.permutations", self.attribution.permutations.to_string(), "must be >= 1")?;
        for (key, seeds, trials) in [
            ("ablation.seeds", &self.ablation.seeds, self.ablation.trials),
            ("attribution.seeds", &self.attribution.seeds, self.attribution.trials),
        ] {
            let value = join(seeds);
            if !seeds.is_empty() && seeds.len() != trials {
                return Err(invalid(key, &value, &format!("expected {trials} seeds (one per trial)")));
            }
            let mut sorted = seeds.clone();
            sorted.sort_unstable();
            sorted.dedup();
            check(sorted.len() == seeds.len(), key, value, "duplicate seed")?;
        }
        Ok(())
    }

    pub fn trajectory(&self) -> TrajectoryConfig {
        let s = &self.simulation;
        TrajectoryConfig {
            samples: s.samples,
            period: s.period,
            wander: s.wander.then_some(Wander { angle_amplitude: s.wander_angle, translation_amplitude: s.wander_translation }),
            ..TrajectoryConfig::default()
        }
    }

    pub fn readout(&self) -> ReadoutConfig {
        let s = &self.simulation;
        ReadoutConfig { rest_voltage: s.rest_voltage, gain: s.gain, noise_sigma: s.noise_sigma }
    }

    pub fn failure_plan(&self) -> FailurePlan {
        let s = &self.simulation;
        if s.failed_sensors == 0 && s.disconnects == 0 {
            FailurePlan::AllActive
        } else {
            FailurePlan::Random { failed_at_start: s.failed_sensors, disconnects: s.disconnects }
        }
    }

    pub fn drift(&self) -> DriftModel {
        if self.simulation.drift {
            DriftModel::measured()
        } else {
            DriftModel::default()
        }
    }

    pub fn ablation_seeds(&self) -> Vec<u64> {
        if self.ablation.seeds.is_empty() {
            (1..=self.ablation.trials as u64).collect()
        } else {
            self.ablation.seeds.clone()
        }
    }

    pub fn attribution_seeds(&self) -> Vec<u64> {
        if self.attribution.seeds.is_empty() {
            (1..=self.attribution.trials as u64).collect()
        } else {
            self.attribution.seeds.clone()
        }
    }

    pub fn ablation_config(&self) -> AblationConfig {
        AblationConfig {
            train: self.train.clone(),
            prepare: self.dataset.prepare.clone(),
            n_shuffles: self.ablation.shuffles,
            max_steps: (self.ablation.max_steps > 0).then_some(self.ablation.max_steps),
        }
    }

    pub fn near_limit_config(&self) -> NearLimitConfig {
        NearLimitConfig {
            train: self.train.clone(),
            prepare: self.dataset.prepare.clone(),
            background_rows: self.attribution.background_rows,
            n_permutations: self.attribution.permutations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(Config::parse_str("").unwrap(), Config::default());
        assert_eq!(Config::parse_str("# only a comment\n\n").unwrap(), Config::default());
    }

    #[test]
    fn defaults_match_the_estimator_setup() {
        let c = Config::default();
        assert_eq!(c.simulation.samples, 1263);
        assert_eq!(c.simulation.failed_sensors, 20);
        assert_eq!(c.simulation.noise_sigma, 0.01);
        assert_eq!(c.train.epochs, 100);
        assert_eq!(c.train.batch_size, 32);
        assert_eq!(c.train.learning_rate, 0.001);
        assert_eq!(c.dataset.prepare.test_fraction, 0.2);
        assert_eq!(c.ablation_seeds().len(), 10);
        assert_eq!(c.attribution_seeds(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn snapshot_round_trips() {
        let mut c = Config::default();
        c.set("simulation.period", "0.0123456789012345").unwrap();
        c.set("ablation.seeds", "9, 4,7 ,1,2,3,5,6,8,10").unwrap();
        c.set("attribution.criteria", "bend").unwrap();
        c.set("geometry.row_axis_angles", "10,-20.5,33").unwrap();
        let back = Config::parse_str(&c.to_config_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn every_key_is_settable() {
        let c = Config::default();
        for (k, v) in c.entries() {
            let mut d = Config::default();
            d.set(k, &v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        assert_eq!(Config::keys().len(), c.entries().len());
    }

    #[test]
    fn overrides_win() {
        let mut c = Config::parse_str("train.epochs = 5\n").unwrap();
        c.apply_overrides(&[("train.epochs", "7"), ("simulation.samples", "10")]).unwrap();
        assert_eq!(c.train.epochs, 7);
        assert_eq!(c.simulation.samples, 10);
    }

    #[test]
    fn errors_are_specific() {
        assert!(matches!(Config::parse_str("nonsense"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(Config::parse_str("a.b = 1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(Config::parse_str("train.epochs = x"), Err(ConfigError::Value { .. })));
        assert!(matches!(
            Config::parse_str("train.epochs = 3\ntrain.epochs = 4"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert!(Config::parse_str("train.epochs = 0").is_err());
        assert!(Config::parse_str("ablation.trials = 2\nablation.seeds = 3,3").is_err());
        assert!(Config::parse_str("dataset.target_mode = furlongs").is_err());
        assert!(Config::parse_str("geometry.row_latitudes = 1,2").is_err());
    }
}
