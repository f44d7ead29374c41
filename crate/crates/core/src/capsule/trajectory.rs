use std::f64::consts::PI;

use rand::Rng;

use super::{Pose, SimError};
use crate::seed::{self, stream};

/// What the joint does during one segment of the recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Hold,
    /// Twist to `+a`, through to `-a`, and back (degrees).
    Roll(f64),
    Pitch(f64),
    Yaw(f64),
    /// Push–pull along the bone axis to `±a` meters.
    Axial(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub motion: Motion,
    /// Share of the total sample count given to this segment.
    pub weight: f64,
}

/// Low-amplitude multi-axis drift superimposed on the scripted motion so the
/// samples do not sit exactly on the coordinate axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wander {
    /// Degrees, applied to roll, pitch and yaw.
    pub angle_amplitude: f64,
    /// Meters, applied to x, y and z.
    pub translation_amplitude: f64,
}

impl Default for Wander {
    fn default() -> Self {
        Wander { angle_amplitude: 2.0, translation_amplitude: 0.001 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub samples: usize,
    /// Seconds between samples.
    pub period: f64,
    pub plan: Vec<Segment>,
    pub wander: Option<Wander>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            samples: 1263,
            period: 0.1,
            plan: TrajectoryConfig::default_plan(),
            wander: Some(Wander::default()),
        }
    }
}

impl TrajectoryConfig {
    /// Neutral hold, roll ±45°, pitch ±90°, yaw ±90°, push–pull ±1 cm, return to neutral.
    pub fn default_plan() -> Vec<Segment> {
        vec![
            Segment { motion: Motion::Hold, weight: 0.05 },
            Segment { motion: Motion::Roll(45.0), weight: 0.30 },
            Segment { motion: Motion::Pitch(90.0), weight: 0.22 },
            Segment { motion: Motion::Yaw(90.0), weight: 0.22 },
            Segment { motion: Motion::Axial(0.01), weight: 0.13 },
            Segment { motion: Motion::Hold, weight: 0.08 },
        ]
    }

    /// Recording length in seconds (time of the last sample).
    pub fn duration(&self) -> f64 {
        self.samples.saturating_sub(1) as f64 * self.period
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub pose: Pose,
}

/// Raised-cosine ramp from 0 to 1 over `s ∈ [0, 1]`.
fn ramp(s: f64) -> f64 {
    (1.0 - (PI * s).cos()) / 2.0
}

/// Sweep profile 0 → +1 → −1 → 0 over `tau ∈ [0, 1]`, with ramp durations 1:2:1.
fn sweep(tau: f64) -> f64 {
    if tau <= 0.25 {
        ramp(tau / 0.25)
    } else if tau <= 0.75 {
        1.0 - 2.0 * ramp((tau - 0.25) / 0.5)
    } else {
        -1.0 + ramp((tau - 0.75) / 0.25)
    }
}

/// Splits `total` samples across segments in proportion to their weights,
/// giving every segment at least one sample.
fn allocate(plan: &[Segment], total: usize) -> Vec<usize> {
    let n = plan.len();
    let sum: f64 = plan.iter().map(|s| s.weight).sum();
    let spare = total - n;
    let exact: Vec<f64> = plan.iter().map(|s| s.weight / sum * spare as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize + 1).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut by_fraction: Vec<usize> = (0..n).collect();
    by_fraction.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in by_fraction.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

struct WanderField {
    // per axis: (amplitude, [(frequency Hz, phase)])
    axes: [(f64, [(f64, f64); 2]); 6],
}

impl WanderField {
    fn new(w: &Wander, seed: u64) -> Self {
        let mut rng = seed::rng(seed, &[stream::WANDER]);
        let mut axes = [(0.0, [(0.0, 0.0); 2]); 6];
        for (axis, slot) in axes.iter_mut().enumerate() {
            let amplitude = if axis < 3 { w.translation_amplitude } else { w.angle_amplitude };
            let mut waves = [(0.0, 0.0); 2];
            for wave in &mut waves {
                *wave = (rng.random_range(0.02..0.08), rng.random_range(0.0..2.0 * PI));
            }
            *slot = (amplitude, waves);
        }
        WanderField { axes }
    }

    fn at(&self, t: f64, envelope: f64) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (o, (amplitude, waves)) in out.iter_mut().zip(&self.axes) {
            let s: f64 = waves.iter().map(|(f, p)| (2.0 * PI * f * t + p).sin()).sum();
            *o = amplitude * envelope * s / 2.0;
        }
        out
    }
}

fn clamp_to_rom(mut pose: Pose) -> Pose {
    pose.roll = pose.roll.clamp(-45.0, 45.0);
    pose.pitch = pose.pitch.clamp(-90.0, 90.0);
    pose.yaw = pose.yaw.clamp(-90.0, 90.0);
    let norm = pose.translation().norm();
    if norm > 0.012 {
        let k = 0.012 / norm;
        pose.x *= k;
        pose.y *= k;
        pose.z *= k;
    }
    pose
}

/// Scripted slow joint motion: one sample every `period` seconds, segments
/// joined end to end, each sweep a chain of raised-cosine ramps.
///
/// The first and last poses are exactly the identity.
pub fn generate_trajectory(
    config: &TrajectoryConfig,
    seed: u64,
) -> Result<Vec<TrajectoryPoint>, SimError> {
    if config.plan.is_empty() {
        return Err(SimError::Trajectory("segment plan is empty".into()));
    }
    if config.samples < config.plan.len() {
        return Err(SimError::Trajectory(format!(
            "{} samples cannot cover {} segments",
            config.samples,
            config.plan.len()
        )));
    }
    if !(config.period > 0.0) {
        return Err(SimError::Trajectory("sample period must be positive".into()));
    }
    if config.plan.iter().any(|s| !(s.weight > 0.0)) {
        return Err(SimError::Trajectory("segment weights must be positive".into()));
    }
    let counts = allocate(&config.plan, config.samples);
    let wander = config.wander.as_ref().map(|w| WanderField::new(w, seed));
    let last = config.samples - 1;
    let mut out = Vec::with_capacity(config.samples);
    for (segment, &n) in config.plan.iter().zip(&counts) {
        for j in 0..n {
            let tau = (j + 1) as f64 / n as f64;
            let mut pose = Pose::identity();
            match segment.motion {
                Motion::Hold => {}
                Motion::Roll(a) => pose.roll = a * sweep(tau),
                Motion::Pitch(a) => pose.pitch = a * sweep(tau),
                Motion::Yaw(a) => pose.yaw = a * sweep(tau),
                Motion::Axial(a) => pose.x = a * sweep(tau),
            }
            let i = out.len();
            let t = i as f64 * config.period;
            if let Some(field) = &wander {
                if i != 0 && i != last {
                    let envelope = (PI * i as f64 / last as f64).sin().powi(2);
                    let d = field.at(t, envelope);
                    let mut a = pose.to_array();
                    for (v, dv) in a.iter_mut().zip(d) {
                        *v += dv;
                    }
                    pose = clamp_to_rom(Pose::from_array(a));
                }
            }
            out.push(TrajectoryPoint { t, pose });
        }
    }
    // the first segment's first sample is reached after one step of its ramp
    out[0].pose = Pose::identity();
    Ok(out)
}
