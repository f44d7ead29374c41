use rand::Rng;
use rand_distr::StandardNormal;

use super::{SensorSpec, SimError};
use crate::seed::{self, stream};

/// Upper rail of the readout circuit, volts.
pub const SUPPLY_VOLTS: f64 = 3.3;
/// ADC count at [`SUPPLY_VOLTS`].
pub const ADC_MAX: u16 = 628;

/// Bridge + amplifier model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutConfig {
    /// Output at zero strain (bridge balanced at mid-rail).
    pub rest_voltage: f64,
    /// Volts per unit strain after amplification.
    pub gain: f64,
    /// Standard deviation of additive Gaussian noise, volts.
    pub noise_sigma: f64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        ReadoutConfig { rest_voltage: 1.65, gain: 2.5, noise_sigma: 0.01 }
    }
}

impl ReadoutConfig {
    /// Noise-free, unclamped response to strain `eps`.
    pub fn pre_clamp_voltage(&self, eps: f64) -> f64 {
        self.rest_voltage + self.gain * eps
    }
}

/// Noise sample for one sensor at one instant. The stream is keyed by
/// (seed, sensor, t), so frames can be generated in any order.
fn noise(sensor: &SensorSpec, t: f64, noise_seed: u64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let mut rng = seed::rng(noise_seed, &[stream::NOISE, sensor.flat_index() as u64, t.to_bits()]);
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

/// Rail a broken channel is pinned to, fixed per sensor by the seed.
pub(crate) fn failure_rail(sensor: &SensorSpec, noise_seed: u64) -> f64 {
    if seed::derive(noise_seed, &[stream::RAIL, sensor.flat_index() as u64]) & 1 == 1 {
        SUPPLY_VOLTS
    } else {
        0.0
    }
}

/// Amplifier output for strain `eps` on `sensor` at time `t`, clamped to the
/// supply rails. Broken channels read their rail plus noise.
pub fn sensor_voltage(
    eps: f64,
    sensor: &SensorSpec,
    t: f64,
    noise_seed: u64,
    config: &ReadoutConfig,
) -> f64 {
    let eta = noise(sensor, t, noise_seed, config.noise_sigma);
    let v = if sensor.status.is_failed_at(t) {
        failure_rail(sensor, noise_seed) + eta
    } else {
        config.pre_clamp_voltage(eps) + eta
    };
    v.clamp(0.0, SUPPLY_VOLTS)
}

/// Digitizes a voltage in `[0, 3.3]` to `0..=628` counts.
pub fn to_adc(volts: f64) -> Result<u16, SimError> {
    if !(0.0..=SUPPLY_VOLTS).contains(&volts) {
        return Err(SimError::AdcRange(volts));
    }
    let counts = (volts * f64::from(ADC_MAX) / SUPPLY_VOLTS).round();
    Ok(counts.clamp(0.0, f64::from(ADC_MAX)) as u16)
}
