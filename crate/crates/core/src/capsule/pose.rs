use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// 6-DOF joint state. Translations in meters, rotations in degrees.
///
/// Rotations compose intrinsically in Z-Y-X order: `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
/// The bone axis is `x`, so roll is twist and pitch/yaw are bending.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Pose {
    pub const fn identity() -> Self {
        Pose { x: 0.0, y: 0.0, z: 0.0, roll: 0.0, pitch: 0.0, yaw: 0.0 }
    }

    /// Components in network output order `x, y, z, roll, pitch, yaw`.
    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Pose { x: a[0], y: a[1], z: a[2], roll: a[3], pitch: a[4], yaw: a[5] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_euler_angles(
            self.roll.to_radians(),
            self.pitch.to_radians(),
            self.yaw.to_radians(),
        )
    }

    /// Pose reflected through the `y = 0` plane. Roll, yaw and `y` change
    /// sign; pitch, `x` and `z` are unchanged.
    pub fn mirrored(&self) -> Self {
        Pose { y: -self.y, roll: -self.roll, yaw: -self.yaw, ..*self }
    }

    /// Whether the pose lies inside the joint's range of motion
    /// (|roll| ≤ 45°, |pitch|, |yaw| ≤ 90°, translation ≤ 12 mm).
    pub fn within_rom(&self) -> bool {
        self.roll.abs() <= 45.0
            && self.pitch.abs() <= 90.0
            && self.yaw.abs() <= 90.0
            && self.translation().norm() <= 0.012
    }
}
