//! Simulated biomimetic joint capsule with 60 strain-gauge joint receptors,
//! a small feedforward estimator of 6-DOF proprioception, and the receptor
//! redundancy / attribution analyses built on top of it.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`capsule`] synthesizes sensor frames from joint motion.
//! * [`dataset`] holds the CSV record format, splitting and standardization.
//! * [`nn`] is the 60→128→64→32→6 network, Adam training and checkpoints.
//! * [`attribution`] covers permutation importance, sensor ablation and
//!   Monte-Carlo Shapley values.
//! * [`stats`] has error summaries, Welch's t-test and Holm correction.
//! * [`pipeline`] chains everything into the command-level operations that the
//!   CLI exposes, writing CSV and SVG artifacts through [`report`].

pub mod attribution;
pub mod capsule;
pub mod config;
pub mod dataset;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod seed;
pub mod stats;

/// Number of strain-gauge channels on the capsule.
pub const NUM_SENSORS: usize = 60;
/// Number of ADC boards; each carries [`SENSORS_PER_BOARD`] gauges.
pub const NUM_BOARDS: usize = 4;
pub const SENSORS_PER_BOARD: usize = 15;
/// Pose components estimated by the network, in `x, y, z, roll, pitch, yaw` order.
pub const NUM_OUTPUTS: usize = 6;

/// Names of the six pose axes in network output order.
pub const AXIS_NAMES: [&str; NUM_OUTPUTS] = ["x", "y", "z", "roll", "pitch", "yaw"];

/// Channel label for a flat sensor index, e.g. `adc2_data7`.
pub fn sensor_label(flat_index: usize) -> String {
    let board = flat_index / SENSORS_PER_BOARD;
    let index = flat_index % SENSORS_PER_BOARD;
    format!("adc{board}_data{index}")
}
