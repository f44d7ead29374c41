use rayon::prelude::*;

use super::readout::{sensor_voltage, to_adc, ReadoutConfig};
use super::{gauge_strain, CapsuleGeometry, FailurePlan, Pose, SimError, TrajectoryPoint};
use crate::NUM_SENSORS;

/// One digitized sample of all 60 channels, in (board, index) order.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub t: f64,
    pub counts: [u16; NUM_SENSORS],
}

/// Slow pose-tracking drift of the reference measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftModel {
    pub enabled: bool,
    /// Offset accumulated by the final sample; grows linearly in time from zero.
    pub final_offset: Pose,
}

impl DriftModel {
    /// Start/end offsets measured on the physical rig.
    pub const MEASURED_OFFSET: Pose =
        Pose { x: 0.001, y: 0.002, z: 0.004, roll: 0.203, pitch: 1.082, yaw: 1.053 };

    pub fn measured() -> Self {
        DriftModel { enabled: true, final_offset: Self::MEASURED_OFFSET }
    }

    /// Offset added to the recorded pose at time `t` of a run spanning
    /// `[t_first, t_last]`; exactly `final_offset` at `t_last`.
    pub fn offset_at(&self, t: f64, t_first: f64, t_last: f64) -> Pose {
        if !self.enabled {
            return Pose::identity();
        }
        let span = t_last - t_first;
        let frac = if span > 0.0 { (t - t_first) / span } else { 1.0 };
        Pose::from_array(self.final_offset.to_array().map(|d| d * frac))
    }
}

impl Default for DriftModel {
    fn default() -> Self {
        DriftModel { enabled: false, final_offset: Self::MEASURED_OFFSET }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    /// Layout with the failure plan applied.
    pub geometry: CapsuleGeometry,
    pub frames: Vec<SensorFrame>,
    /// Pose labels as the reference tracker reports them (drift included).
    pub recorded: Vec<Pose>,
    /// Pose the capsule was actually in.
    pub truth: Vec<Pose>,
}

impl SimulationRun {
    /// Channels that read a rail value in every frame.
    pub fn pinned_channels(&self) -> Vec<usize> {
        (0..NUM_SENSORS)
            .filter(|&c| {
                let first = self.frames[0].counts[c];
                (first <= 10 || first >= 618)
                    && self.frames.iter().all(|f| f.counts[c].abs_diff(first) <= 10)
            })
            .collect()
    }
}

/// Runs the capsule along `trajectory`, reading every gauge through the
/// bridge, amplifier and ADC.
pub fn simulate(
    geometry: &CapsuleGeometry,
    trajectory: &[TrajectoryPoint],
    failure_plan: &FailurePlan,
    drift: &DriftModel,
    readout: &ReadoutConfig,
    seed: u64,
) -> Result<SimulationRun, SimError> {
    if trajectory.is_empty() {
        return Err(SimError::Trajectory("trajectory is empty".into()));
    }
    let mut geometry = geometry.clone();
    let t_first = trajectory[0].t;
    let t_last = trajectory[trajectory.len() - 1].t;
    failure_plan.apply(&mut geometry.layout, t_last, seed)?;

    let frames = trajectory
        .par_iter()
        .map(|point| {
            let mut counts = [0u16; NUM_SENSORS];
            for (c, sensor) in counts.iter_mut().zip(geometry.layout.sensors()) {
                let eps = gauge_strain(&geometry, &point.pose, sensor)?;
                *c = to_adc(sensor_voltage(eps, sensor, point.t, seed, readout))?;
            }
            Ok(SensorFrame { t: point.t, counts })
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let truth: Vec<Pose> = trajectory.iter().map(|p| p.pose).collect();
    let recorded = if drift.enabled {
        trajectory
            .iter()
            .map(|p| {
                let mut a = p.pose.to_array();
                for (v, d) in a.iter_mut().zip(drift.offset_at(p.t, t_first, t_last).to_array()) {
                    *v += d;
                }
                Pose::from_array(a)
            })
            .collect()
    } else {
        truth.clone()
    };
    Ok(SimulationRun { geometry, frames, recorded, truth })
}
