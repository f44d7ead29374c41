//! Strain-gauge joint capsule simulator.
//!
//! The capsule is a thin spherical shell spanning two attachment rings: one on
//! the fixed bone, one on the moving bone. Membrane points between the rings
//! follow a rigid motion interpolated by their latitude fraction, gauges read
//! the resulting change in endpoint distance, and a bridge/amplifier/ADC model
//! turns strain into 0..=628 counts.

mod deform;
mod layout;
mod pose;
mod readout;
mod simulate;
mod trajectory;

pub use deform::{deform_point, gauge_endpoints, gauge_strain, SurfacePoint};
pub use layout::{
    channel_labels, CapsuleGeometry, FailurePlan, GeometryConfig, Row, SensorLayout, SensorSpec,
    SensorStatus,
};
pub use pose::Pose;
pub use readout::{sensor_voltage, to_adc, ReadoutConfig, ADC_MAX, SUPPLY_VOLTS};
pub use simulate::{simulate, DriftModel, SensorFrame, SimulationRun};
pub use trajectory::{generate_trajectory, Motion, Segment, TrajectoryConfig, TrajectoryPoint, Wander};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("latitude {latitude:.3}° lies outside the attachment ring span [{fixed:.3}°, {moving:.3}°]")]
    OutsideRingSpan { latitude: f64, fixed: f64, moving: f64 },
    #[error("voltage {0} V is outside the ADC input range [0, 3.3] V")]
    AdcRange(f64),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid trajectory config: {0}")]
    Trajectory(String),
    #[error("invalid failure plan: {0}")]
    FailurePlan(String),
}
