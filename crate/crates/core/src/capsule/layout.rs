use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;

use super::SimError;
use crate::seed::{self, stream};
use crate::{sensor_label, NUM_BOARDS, NUM_SENSORS, SENSORS_PER_BOARD};

/// Latitude band of a receptor, from the capsule midsection toward the
/// moving-bone attachment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Row {
    MidCapsular,
    Transitional,
    BoneAttachment,
}

impl Row {
    pub const ALL: [Row; 3] = [Row::MidCapsular, Row::Transitional, Row::BoneAttachment];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Row::MidCapsular => "mid_capsular",
            Row::Transitional => "transitional",
            Row::BoneAttachment => "bone_attachment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensorStatus {
    Active,
    FailedAtStart,
    /// Lead wire breaks at the given time in seconds.
    DisconnectsAt(f64),
}

impl SensorStatus {
    /// Whether the channel reads a rail value at time `t`.
    pub fn is_failed_at(&self, t: f64) -> bool {
        match *self {
            SensorStatus::Active => false,
            SensorStatus::FailedAtStart => true,
            SensorStatus::DisconnectsAt(t0) => t >= t0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub board: usize,
    pub index: usize,
    pub label: String,
    pub row: Row,
    /// Degrees; 0 lies in the `y = 0` plane on the `+z` side.
    pub center_longitude: f64,
    /// Degrees from the capsule equator, positive toward the moving bone.
    pub center_latitude: f64,
    /// Gauge direction as an angle from the local meridian (degrees, positive toward east).
    pub axis_angle: f64,
    /// Unit vector tangent to the sphere at the sensor center.
    pub gauge_axis: Vector3<f64>,
    pub gauge_length: f64,
    pub status: SensorStatus,
}

impl SensorSpec {
    /// Builds a gauge at the given spherical position, deriving the tangent
    /// axis from `axis_angle`.
    pub fn new(
        board: usize,
        index: usize,
        row: Row,
        latitude: f64,
        longitude: f64,
        axis_angle: f64,
        gauge_length: f64,
    ) -> Self {
        let (north, east) = tangent_basis(latitude, longitude);
        let a = axis_angle.to_radians();
        SensorSpec {
            board,
            index,
            label: format!("adc{board}_data{index}"),
            row,
            center_longitude: longitude,
            center_latitude: latitude,
            axis_angle,
            gauge_axis: north * a.cos() + east * a.sin(),
            gauge_length,
            status: SensorStatus::Active,
        }
    }

    /// Position in the (board, index) channel order.
    pub fn flat_index(&self) -> usize {
        self.board * SENSORS_PER_BOARD + self.index
    }

    /// Unit vector from the sphere center to the sensor center.
    pub fn center_direction(&self) -> Vector3<f64> {
        unit_direction(self.center_latitude, self.center_longitude)
    }

    /// The same sensor reflected through `y = 0`.
    pub fn mirrored(&self) -> Self {
        let mut m = SensorSpec::new(
            self.board,
            self.index,
            self.row,
            self.center_latitude,
            -self.center_longitude,
            -self.axis_angle,
            self.gauge_length,
        );
        m.status = self.status;
        m
    }
}

/// Unit vector at (latitude, longitude) in degrees.
pub(crate) fn unit_direction(latitude: f64, longitude: f64) -> Vector3<f64> {
    let (phi, lambda) = (latitude.to_radians(), longitude.to_radians());
    Vector3::new(phi.sin(), phi.cos() * lambda.sin(), phi.cos() * lambda.cos())
}

/// Local (north, east) unit tangents at (latitude, longitude).
pub(crate) fn tangent_basis(latitude: f64, longitude: f64) -> (Vector3<f64>, Vector3<f64>) {
    let (phi, lambda) = (latitude.to_radians(), longitude.to_radians());
    let north = Vector3::new(phi.cos(), -phi.sin() * lambda.sin(), -phi.sin() * lambda.cos());
    let east = Vector3::new(0.0, lambda.cos(), -lambda.sin());
    (north, east)
}

/// The 60 receptors in (board, index) order.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorLayout {
    sensors: Vec<SensorSpec>,
}

impl SensorLayout {
    pub fn new(mut sensors: Vec<SensorSpec>) -> Result<Self, SimError> {
        if sensors.len() != NUM_SENSORS {
            return Err(SimError::Geometry(format!(
                "expected {NUM_SENSORS} sensors, got {}",
                sensors.len()
            )));
        }
        sensors.sort_by_key(|s| (s.board, s.index));
        for (i, s) in sensors.iter().enumerate() {
            if s.flat_index() != i || s.board >= NUM_BOARDS || s.index >= SENSORS_PER_BOARD {
                return Err(SimError::Geometry(format!(
                    "sensor {} does not fit the {NUM_BOARDS}x{SENSORS_PER_BOARD} board grid",
                    s.label
                )));
            }
        }
        for row in Row::ALL {
            let n = sensors.iter().filter(|s| s.row == row).count();
            if n != NUM_SENSORS / 3 {
                return Err(SimError::Geometry(format!("row {} has {n} sensors", row.name())));
            }
        }
        Ok(SensorLayout { sensors })
    }

    pub fn sensors(&self) -> &[SensorSpec] {
        &self.sensors
    }

    pub fn get(&self, flat_index: usize) -> &SensorSpec {
        &self.sensors[flat_index]
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    /// Row of every channel, in channel order.
    pub fn rows(&self) -> Vec<Row> {
        self.sensors.iter().map(|s| s.row).collect()
    }

    pub fn mirrored(&self) -> Self {
        SensorLayout { sensors: self.sensors.iter().map(SensorSpec::mirrored).collect() }
    }

    pub fn set_status(&mut self, flat_index: usize, status: SensorStatus) {
        self.sensors[flat_index].status = status;
    }

    pub fn failed_at_start(&self) -> Vec<usize> {
        self.sensors
            .iter()
            .filter(|s| s.status == SensorStatus::FailedAtStart)
            .map(SensorSpec::flat_index)
            .collect()
    }
}

/// Construction parameters for the capsule and its receptor layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub sphere_radius: f64,
    pub capsule_thickness: f64,
    pub fixed_ring_latitude: f64,
    pub moving_ring_latitude: f64,
    /// Nominal latitude of the mid-capsular, transitional and bone-attachment rows.
    pub row_latitudes: [f64; 3],
    /// Nominal gauge direction per row, degrees from the meridian.
    pub row_axis_angles: [f64; 3],
    pub gauge_length: f64,
    /// Placement scatter, ± meters along each tangent direction.
    pub position_jitter: f64,
    /// Orientation scatter, ± degrees.
    pub axis_jitter: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            sphere_radius: 0.050,
            capsule_thickness: 0.002,
            fixed_ring_latitude: -60.0,
            moving_ring_latitude: 60.0,
            row_latitudes: [0.0, 20.0, 40.0],
            row_axis_angles: [90.0, 45.0, 45.0],
            gauge_length: 0.005,
            position_jitter: 0.002,
            axis_jitter: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapsuleGeometry {
    pub sphere_radius: f64,
    pub capsule_thickness: f64,
    pub fixed_ring_latitude: f64,
    pub moving_ring_latitude: f64,
    pub layout: SensorLayout,
}

impl CapsuleGeometry {
    /// Capsule with the receptor layout scattered by `seed`, mimicking manual
    /// gauge placement.
    pub fn new(config: &GeometryConfig, seed: u64) -> Result<Self, SimError> {
        Self::build(config, Some(seed))
    }

    /// Capsule with every receptor at its nominal position and orientation.
    pub fn nominal(config: &GeometryConfig) -> Result<Self, SimError> {
        Self::build(config, None)
    }

    fn build(config: &GeometryConfig, seed: Option<u64>) -> Result<Self, SimError> {
        if !(config.sphere_radius > 0.0) || !(config.capsule_thickness >= 0.0) {
            return Err(SimError::Geometry("radius must be positive, thickness non-negative".into()));
        }
        if !(config.gauge_length > 0.0) {
            return Err(SimError::Geometry("gauge length must be positive".into()));
        }
        if !(config.fixed_ring_latitude < config.moving_ring_latitude) {
            return Err(SimError::Geometry("fixed ring must lie below the moving ring".into()));
        }
        let r = config.sphere_radius;
        let per_row = NUM_SENSORS / 3;
        let spacing = 360.0 / per_row as f64;
        let mut rng = seed.map(|s| seed::rng(s, &[stream::LAYOUT]));
        let mut sensors = Vec::with_capacity(NUM_SENSORS);
        for board in 0..NUM_BOARDS {
            for index in 0..SENSORS_PER_BOARD {
                let row = Row::ALL[index / 5];
                let slot = board * 5 + index % 5;
                // rows are staggered by a third of the slot spacing
                let mut longitude = slot as f64 * spacing + row.ordinal() as f64 * spacing / 3.0;
                let mut latitude = config.row_latitudes[row.ordinal()];
                let mut axis = config.row_axis_angles[row.ordinal()];
                if let Some(rng) = rng.as_mut() {
                    let dn = rng.random_range(-1.0..=1.0) * config.position_jitter;
                    let de = rng.random_range(-1.0..=1.0) * config.position_jitter;
                    latitude += (dn / r).to_degrees();
                    longitude += (de / (r * latitude.to_radians().cos())).to_degrees();
                    axis += rng.random_range(-1.0..=1.0) * config.axis_jitter;
                }
                if longitude > 180.0 {
                    longitude -= 360.0;
                }
                sensors.push(SensorSpec::new(
                    board,
                    index,
                    row,
                    latitude,
                    longitude,
                    axis,
                    config.gauge_length,
                ));
            }
        }
        let geometry = CapsuleGeometry {
            sphere_radius: r,
            capsule_thickness: config.capsule_thickness,
            fixed_ring_latitude: config.fixed_ring_latitude,
            moving_ring_latitude: config.moving_ring_latitude,
            layout: SensorLayout::new(sensors)?,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Checks that every gauge, including its endpoints, lies strictly
    /// between the attachment rings.
    pub fn validate(&self) -> Result<(), SimError> {
        for s in self.layout.sensors() {
            for p in super::gauge_endpoints(self, s) {
                if p.latitude <= self.fixed_ring_latitude || p.latitude >= self.moving_ring_latitude
                {
                    return Err(SimError::OutsideRingSpan {
                        latitude: p.latitude,
                        fixed: self.fixed_ring_latitude,
                        moving: self.moving_ring_latitude,
                    });
                }
            }
        }
        Ok(())
    }

    /// Volume of the latex shell, in m³.
    pub fn shell_volume(&self) -> f64 {
        let outer = self.sphere_radius + self.capsule_thickness;
        4.0 / 3.0 * std::f64::consts::PI * (outer.powi(3) - self.sphere_radius.powi(3))
    }

    /// The geometry reflected through `y = 0`.
    pub fn mirrored(&self) -> Self {
        CapsuleGeometry { layout: self.layout.mirrored(), ..self.clone() }
    }
}

/// Which receptors are broken, and when.
#[derive(Debug, Clone, PartialEq)]
pub enum FailurePlan {
    AllActive,
    /// `failed_at_start` channels pinned from the first sample, plus
    /// `disconnects` channels that break at a random time during the run.
    Random { failed_at_start: usize, disconnects: usize },
    /// Status per channel, in channel order.
    Explicit(Vec<SensorStatus>),
}

impl Default for FailurePlan {
    fn default() -> Self {
        FailurePlan::Random { failed_at_start: 20, disconnects: 0 }
    }
}

impl FailurePlan {
    /// Writes statuses into `layout`. `duration` bounds disconnect times.
    pub fn apply(&self, layout: &mut SensorLayout, duration: f64, seed: u64) -> Result<(), SimError> {
        match self {
            FailurePlan::AllActive => {
                for i in 0..layout.len() {
                    layout.set_status(i, SensorStatus::Active);
                }
            }
            FailurePlan::Random { failed_at_start, disconnects } => {
                if failed_at_start + disconnects > layout.len() {
                    return Err(SimError::FailurePlan(format!(
                        "{} failures requested for {} sensors",
                        failed_at_start + disconnects,
                        layout.len()
                    )));
                }
                let mut rng = seed::rng(seed, &[stream::FAILURES]);
                let mut order: Vec<usize> = (0..layout.len()).collect();
                order.shuffle(&mut rng);
                for i in 0..layout.len() {
                    layout.set_status(i, SensorStatus::Active);
                }
                for &i in &order[..*failed_at_start] {
                    layout.set_status(i, SensorStatus::FailedAtStart);
                }
                for &i in &order[*failed_at_start..failed_at_start + disconnects] {
                    let t0 = rng.random_range(0.0..duration.max(f64::MIN_POSITIVE));
                    layout.set_status(i, SensorStatus::DisconnectsAt(t0));
                }
            }
            FailurePlan::Explicit(statuses) => {
                if statuses.len() != layout.len() {
                    return Err(SimError::FailurePlan(format!(
                        "{} statuses for {} sensors",
                        statuses.len(),
                        layout.len()
                    )));
                }
                for (i, s) in statuses.iter().enumerate() {
                    layout.set_status(i, *s);
                }
            }
        }
        Ok(())
    }
}

/// Label of every channel, in channel order.
pub fn channel_labels() -> Vec<String> {
    (0..NUM_SENSORS).map(sensor_label).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn geometry() -> CapsuleGeometry {
        CapsuleGeometry::new(&GeometryConfig::default(), 7).unwrap()
    }

    #[test]
    fn layout_has_sixty_unique_sensors_on_four_boards() {
        let g = geometry();
        let s = g.layout.sensors();
        assert_eq!(s.len(), 60);
        let pairs: HashSet<_> = s.iter().map(|s| (s.board, s.index)).collect();
        assert_eq!(pairs.len(), 60);
        for b in 0..4 {
            assert_eq!(s.iter().filter(|s| s.board == b).count(), 15);
        }
        assert_eq!(s[0].label, "adc0_data0");
        assert_eq!(s[59].label, "adc3_data14");
        assert_eq!(channel_labels()[17], "adc1_data2");
    }

    #[test]
    fn rows_have_twenty_sensors_ordered_by_latitude() {
        let g = geometry();
        let mean_lat = |row: Row| {
            let v: Vec<f64> = g
                .layout
                .sensors()
                .iter()
                .filter(|s| s.row == row)
                .map(|s| s.center_latitude)
                .collect();
            assert_eq!(v.len(), 20);
            v.iter().sum::<f64>() / v.len() as f64
        };
        let (m, t, b) = (
            mean_lat(Row::MidCapsular),
            mean_lat(Row::Transitional),
            mean_lat(Row::BoneAttachment),
        );
        assert!(m.abs() < t.abs() && t < b && b < g.moving_ring_latitude);
        // higher-numbered sensors sit closer to the bone attachment
        for s in g.layout.sensors() {
            assert_eq!(s.row, Row::ALL[s.index / 5]);
        }
    }

    #[test]
    fn gauge_axes_are_unit_tangents() {
        let g = geometry();
        for s in g.layout.sensors() {
            assert!((s.gauge_axis.norm() - 1.0).abs() < 1e-12);
            assert!(s.gauge_axis.dot(&s.center_direction()).abs() < 1e-12);
        }
    }

    #[test]
    fn shell_volume_matches_reported_capsule_volume() {
        let v_cm3 = geometry().shell_volume() * 1e6;
        assert!((v_cm3 - 62.84).abs() / 62.84 < 0.05, "volume {v_cm3} cm³");
    }

    #[test]
    fn rings_out_of_order_are_rejected() {
        let cfg = GeometryConfig { fixed_ring_latitude: 50.0, moving_ring_latitude: 10.0, ..Default::default() };
        assert!(CapsuleGeometry::new(&cfg, 1).is_err());
        let cfg = GeometryConfig { moving_ring_latitude: 41.0, ..Default::default() };
        assert!(matches!(
            CapsuleGeometry::new(&cfg, 1),
            Err(SimError::OutsideRingSpan { .. })
        ));
    }

    #[test]
    fn default_failure_plan_fails_twenty() {
        let mut g = geometry();
        FailurePlan::default().apply(&mut g.layout, 126.3, 3).unwrap();
        assert_eq!(g.layout.failed_at_start().len(), 20);
        let mut again = geometry();
        FailurePlan::default().apply(&mut again.layout, 126.3, 3).unwrap();
        assert_eq!(g.layout.failed_at_start(), again.layout.failed_at_start());
    }

    #[test]
    fn oversized_failure_plan_is_an_error() {
        let mut g = geometry();
        let plan = FailurePlan::Random { failed_at_start: 50, disconnects: 11 };
        assert!(plan.apply(&mut g.layout, 1.0, 0).is_err());
    }
}
