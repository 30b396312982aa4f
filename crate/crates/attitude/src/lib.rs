//! Torso attitude model: Hamilton-convention quaternion algebra,
//! angle-axis orientation errors, rigid-body rotational dynamics and a
//! fixed-step RK4 integrator shared by the planners and the simulator.
//!
//! Quaternions are scalar-first `[w, x, y, z]`. Every producing
//! operation returns a unit quaternion (renormalized where needed), and
//! `q` / `-q` are treated as the same orientation.

mod dynamics;
mod error;
mod integrate;
mod quat;

pub use dynamics::{body_dynamics, body_dynamics_generic, BodyInertia, BodyState};
pub use error::{attitude_error_angle, attitude_error_vector, quat_error};
pub use integrate::{integrate_rk4, rk4_step_generic, QuatBlock};
pub use quat::{
    orientation_close, quat_conjugate, quat_from_axis_angle, quat_mul, quat_normalize, UnitQuat,
};

use thiserror::Error;

/// Unit-norm tolerance enforced on quaternion inputs.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AttitudeError {
    #[error("quaternion norm {norm} outside unit tolerance")]
    NonUnitQuaternion { norm: f64 },
    #[error("body inertia is not symmetric positive-definite")]
    BadInertia,
    #[error("non-finite state encountered during integration")]
    NumericalFailure,
}
