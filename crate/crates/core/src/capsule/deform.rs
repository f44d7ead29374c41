use nalgebra::{Point3, Vector3};

use super::layout::unit_direction;
use super::{CapsuleGeometry, Pose, SensorSpec, SimError};

/// A point on the undeformed capsule sphere, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub latitude: f64,
    pub longitude: f64,
}

impl SurfacePoint {
    pub fn new(latitude: f64, longitude: f64) -> Self {
        SurfacePoint { latitude, longitude }
    }

    pub fn direction(&self) -> Vector3<f64> {
        unit_direction(self.latitude, self.longitude)
    }

    pub fn from_direction(v: &Vector3<f64>) -> Self {
        let v = v.normalize();
        SurfacePoint {
            latitude: v.x.clamp(-1.0, 1.0).asin().to_degrees(),
            longitude: v.y.atan2(v.z).to_degrees(),
        }
    }
}

/// Deformed position (meters) of a membrane point under `pose`.
///
/// The point moves with the rigid motion interpolated at its latitude
/// fraction `u` between the fixed ring (`u = 0`) and the moving ring
/// (`u = 1`): the rotation is the pose rotation scaled along its shortest arc,
/// and the translation is scaled linearly.
pub fn deform_point(
    geometry: &CapsuleGeometry,
    pose: &Pose,
    point: SurfacePoint,
) -> Result<Point3<f64>, SimError> {
    let (fixed, moving) = (geometry.fixed_ring_latitude, geometry.moving_ring_latitude);
    if !(fixed..=moving).contains(&point.latitude) {
        return Err(SimError::OutsideRingSpan { latitude: point.latitude, fixed, moving });
    }
    let u = (point.latitude - fixed) / (moving - fixed);
    let rest = point.direction() * geometry.sphere_radius;
    let rotation = pose.rotation().powf(u);
    Ok(Point3::from(rotation * rest + pose.translation() * u))
}

/// The two gauge endpoints, half a gauge length either side of the center
/// along the great circle in the gauge direction.
pub fn gauge_endpoints(geometry: &CapsuleGeometry, sensor: &SensorSpec) -> [SurfacePoint; 2] {
    let half_arc = sensor.gauge_length / (2.0 * geometry.sphere_radius);
    let c = sensor.center_direction();
    let a = sensor.gauge_axis;
    let plus = c * half_arc.cos() + a * half_arc.sin();
    let minus = c * half_arc.cos() - a * half_arc.sin();
    [SurfacePoint::from_direction(&plus), SurfacePoint::from_direction(&minus)]
}

/// Engineering strain of a gauge under `pose`: relative change of the
/// endpoint distance from its rest value. Positive is stretch.
///
/// Depends only on the current pose, so the response is static and
/// non-adapting.
pub fn gauge_strain(
    geometry: &CapsuleGeometry,
    pose: &Pose,
    sensor: &SensorSpec,
) -> Result<f64, SimError> {
    let [plus, minus] = gauge_endpoints(geometry, sensor);
    let rest = (plus.direction() - minus.direction()).norm() * geometry.sphere_radius;
    let deformed =
        (deform_point(geometry, pose, plus)? - deform_point(geometry, pose, minus)?).norm();
    Ok(deformed / rest - 1.0)
}
