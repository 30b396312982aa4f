use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};

/// Scalar-first Hamilton-convention unit quaternion.
pub type UnitQuat = UnitQuaternion<f64>;

/// Hamilton product `a ⊗ b`.
pub fn quat_mul(a: &UnitQuat, b: &UnitQuat) -> UnitQuat {
    a * b
}

/// Conjugate; equals the inverse for unit quaternions.
pub fn quat_conjugate(q: &UnitQuat) -> UnitQuat {
    q.inverse()
}

pub fn quat_from_axis_angle(axis: &Vector3<f64>, angle: f64) -> UnitQuat {
    UnitQuat::from_axis_angle(&Unit::new_normalize(*axis), angle)
}

/// Build a unit quaternion from scalar-first components, renormalizing.
pub fn quat_normalize(w: f64, x: f64, y: f64, z: f64) -> UnitQuat {
    UnitQuat::new_normalize(Quaternion::new(w, x, y, z))
}

/// True when `a` and `b` represent the same orientation within `tol`,
/// honoring the double cover (`q` equals `-q`).
pub fn orientation_close(a: &UnitQuat, b: &UnitQuat, tol: f64) -> bool {
    let dot = a.coords.dot(&b.coords);
    (1.0 - dot.abs()) <= tol
}
