use nalgebra::Vector3;

use crate::quat::UnitQuat;
use crate::{AttitudeError, UNIT_NORM_TOL};

/// Below this vector-part norm the angle-axis error switches to its
/// small-angle limit `f_q = 2 u` to keep gradients finite.
const SMALL_ANGLE_EPS: f64 = 1e-8;

fn check_unit(q: &UnitQuat) -> Result<(), AttitudeError> {
    let norm = q.coords.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(AttitudeError::NonUnitQuaternion { norm });
    }
    Ok(())
}

/// Orientation error `q_e = q_D ⊗ q⁻¹`, canonicalized to the short
/// path: the sign is flipped when the scalar part is negative so the
/// encoded angle stays in `[0, π]`.
pub fn quat_error(q_desired: &UnitQuat, q: &UnitQuat) -> Result<UnitQuat, AttitudeError> {
    check_unit(q_desired)?;
    check_unit(q)?;
    let mut e = (q_desired * q.inverse()).into_inner();
    if e.w < 0.0 {
        e = -e;
    }
    Ok(UnitQuat::new_normalize(e))
}

/// Geodesic error angle `θ = arccos(2 (q_D · q)² − 1) ∈ [0, π]`.
pub fn attitude_error_angle(q_desired: &UnitQuat, q: &UnitQuat) -> f64 {
    let dot = q_desired.coords.dot(&q.coords);
    (2.0 * dot * dot - 1.0).clamp(-1.0, 1.0).acos()
}

/// Angle-axis orientation error `f_q = θ u_e` with `u_e` the normalized
/// vector part of the (short-path) quaternion error. Falls back to
/// `2 u` near zero error.
pub fn attitude_error_vector(q_desired: &UnitQuat, q: &UnitQuat) -> Vector3<f64> {
    let mut e = (q_desired.into_inner() * q.inverse().into_inner()).normalize();
    if e.w < 0.0 {
        e = -e;
    }
    let u = e.imag();
    let u_norm = u.norm();
    if u_norm < SMALL_ANGLE_EPS {
        return 2.0 * u;
    }
    let theta = attitude_error_angle(q_desired, q);
    (theta / u_norm) * u
}
