use freefall_autodiff::Field;
use nalgebra::{Matrix3, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::quat::UnitQuat;
use crate::AttitudeError;

/// Torso rotational state: orientation plus body-frame angular rate.
#[derive(Clone, Copy, Debug)]
pub struct BodyState {
    pub q: UnitQuat,
    pub omega: Vector3<f64>,
}

impl BodyState {
    pub fn rest() -> Self {
        Self {
            q: UnitQuat::identity(),
            omega: Vector3::zeros(),
        }
    }

    pub fn to_vector(&self) -> SVector<f64, 7> {
        SVector::<f64, 7>::from([
            self.q.w,
            self.q.i,
            self.q.j,
            self.q.k,
            self.omega.x,
            self.omega.y,
            self.omega.z,
        ])
    }

    pub fn from_vector(x: &SVector<f64, 7>) -> Self {
        Self {
            q: crate::quat::quat_normalize(x[0], x[1], x[2], x[3]),
            omega: Vector3::new(x[4], x[5], x[6]),
        }
    }
}

/// Torso inertia tensor with the body-torque box used by the planner.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BodyInertia {
    inertia: Matrix3<f64>,
    #[serde(skip)]
    inertia_inv: Matrix3<f64>,
    pub tau_lower: Vector3<f64>,
    pub tau_upper: Vector3<f64>,
}

impl BodyInertia {
    pub fn new(
        inertia: Matrix3<f64>,
        tau_lower: Vector3<f64>,
        tau_upper: Vector3<f64>,
    ) -> Result<Self, AttitudeError> {
        if (inertia - inertia.transpose()).norm() > 1e-12 {
            return Err(AttitudeError::BadInertia);
        }
        let eig = inertia.symmetric_eigenvalues();
        if eig.min() <= 0.0 {
            return Err(AttitudeError::BadInertia);
        }
        let inertia_inv = inertia.try_inverse().ok_or(AttitudeError::BadInertia)?;
        Ok(Self {
            inertia,
            inertia_inv,
            tau_lower,
            tau_upper,
        })
    }

    /// Diagonal inertia with symmetric torque bounds.
    pub fn diagonal(ix: f64, iy: f64, iz: f64, tau_max: f64) -> Self {
        Self::new(
            Matrix3::from_diagonal(&Vector3::new(ix, iy, iz)),
            Vector3::repeat(-tau_max),
            Vector3::repeat(tau_max),
        )
        .expect("diagonal inertia must be SPD")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.inertia
    }

    pub fn inverse(&self) -> &Matrix3<f64> {
        &self.inertia_inv
    }

    /// Rebuild the cached inverse (after deserialization).
    pub fn refresh(&mut self) {
        self.inertia_inv = self
            .inertia
            .try_inverse()
            .expect("inertia must stay invertible");
    }
}

/// Rigid-torso rotational dynamics:
/// `q̇ = ½ q ⊗ (0, ω)`, `ω̇ = I⁻¹ (τ − ω × I ω)`.
///
/// State layout `[q_w, q_x, q_y, q_z, ω_x, ω_y, ω_z]`.
pub fn body_dynamics_generic<F: Field>(x: &[F], tau: &[F], inertia: &BodyInertia) -> [F; 7] {
    let (qw, qx, qy, qz) = (x[0], x[1], x[2], x[3]);
    let w = [x[4], x[5], x[6]];

    // Hamilton product q ⊗ (0, ω), scaled by 1/2.
    let half = F::from_f64(0.5);
    let qdot_w = -(qx * w[0] + qy * w[1] + qz * w[2]) * half;
    let qdot_x = (qw * w[0] + qy * w[2] - qz * w[1]) * half;
    let qdot_y = (qw * w[1] + qz * w[0] - qx * w[2]) * half;
    let qdot_z = (qw * w[2] + qx * w[1] - qy * w[0]) * half;

    let i = inertia.matrix();
    let i_inv = inertia.inverse();
    let mut iw = [F::zero(); 3];
    for r in 0..3 {
        for c in 0..3 {
            iw[r] = iw[r] + F::from_f64(i[(r, c)]) * w[c];
        }
    }
    let gyro = [
        w[1] * iw[2] - w[2] * iw[1],
        w[2] * iw[0] - w[0] * iw[2],
        w[0] * iw[1] - w[1] * iw[0],
    ];
    let mut wdot = [F::zero(); 3];
    for r in 0..3 {
        for c in 0..3 {
            wdot[r] = wdot[r] + F::from_f64(i_inv[(r, c)]) * (tau[c] - gyro[c]);
        }
    }
    [qdot_w, qdot_x, qdot_y, qdot_z, wdot[0], wdot[1], wdot[2]]
}

/// `f64` front end over [`body_dynamics_generic`].
pub fn body_dynamics(
    state: &BodyState,
    tau: &Vector3<f64>,
    inertia: &BodyInertia,
) -> SVector<f64, 7> {
    let x = state.to_vector();
    let d = body_dynamics_generic::<f64>(x.as_slice(), tau.as_slice(), inertia);
    SVector::<f64, 7>::from(d)
}
