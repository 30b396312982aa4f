use freefall_autodiff::{solve_in_place, Field};
use nalgebra::{Matrix5, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::LegGeometry;
use crate::kinematics::{
    closure_jacobian_dot_generic, closure_jacobian_generic, closure_residual_generic,
};
use crate::LegError;

/// Joint state of one leg: `[φ_MH, φ_11, φ_21, φ_12, φ_22]` and rates.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LegState {
    pub phi: [f64; 5],
    pub phidot: [f64; 5],
}

impl LegState {
    pub fn at_rest(phi: [f64; 5]) -> Self {
        Self {
            phi,
            phidot: [0.0; 5],
        }
    }

    pub fn to_vector(&self) -> SVector<f64, 10> {
        let mut x = SVector::<f64, 10>::zeros();
        for k in 0..5 {
            x[k] = self.phi[k];
            x[5 + k] = self.phidot[k];
        }
        x
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let mut s = Self {
            phi: [0.0; 5],
            phidot: [0.0; 5],
        };
        s.phi.copy_from_slice(&x[..5]);
        s.phidot.copy_from_slice(&x[5..10]);
        s
    }
}

/// Torques on the actuated joints `(φ_MH, φ_11, φ_12)`; the passive
/// knees receive zero through the fixed selection map.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct ActuatedTorque(pub [f64; 3]);

impl ActuatedTorque {
    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::from(self.0)
    }

    pub fn full(&self) -> [f64; 5] {
        [self.0[0], self.0[1], 0.0, self.0[2], 0.0]
    }

    pub fn clamped(&self, limit: &[f64; 3]) -> ActuatedTorque {
        let mut t = self.0;
        for k in 0..3 {
            t[k] = t[k].clamp(-limit[k], limit[k]);
        }
        ActuatedTorque(t)
    }
}

/// Extra stabilization on the closure constraint at the acceleration
/// level; bounds drift under long fixed-step integrations.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Baumgarte {
    pub zeta: f64,
    pub omega: f64,
}

impl Default for Baumgarte {
    fn default() -> Self {
        Self {
            zeta: 1.0,
            omega: 50.0,
        }
    }
}

const T_MAP: [[f64; 5]; 5] = [
    // Q = T φ: absolute angles from joint angles (shin angles are
    // thigh + knee).
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 1.0],
];

pub(crate) struct ChainParams {
    pub thigh_len: f64,
    pub thigh_mass: f64,
    pub thigh_com: f64,
    pub it_perp: f64,
    pub it_axial: f64,
    pub shin_len: f64,
    pub shin_mass: f64,
    pub shin_com: f64,
    pub is_perp: f64,
    pub is_axial: f64,
    /// Point mass carried at the paw, attached through this chain.
    pub tip_mass: f64,
}

pub(crate) fn chains(geom: &LegGeometry) -> [ChainParams; 2] {
    [
        ChainParams {
            thigh_len: geom.l1,
            thigh_mass: geom.thigh_mass,
            thigh_com: geom.thigh_com,
            it_perp: geom.thigh_inertia_perp,
            it_axial: geom.thigh_inertia_axial,
            shin_len: geom.l2,
            shin_mass: geom.shin_mass,
            shin_com: geom.shin_com,
            is_perp: geom.shin_inertia_perp,
            is_axial: geom.shin_inertia_axial,
            tip_mass: geom.paw_mass,
        },
        ChainParams {
            thigh_len: geom.l3,
            thigh_mass: geom.thigh_mass,
            thigh_com: geom.thigh_com,
            it_perp: geom.thigh_inertia_perp,
            it_axial: geom.thigh_inertia_axial,
            shin_len: geom.l4,
            shin_mass: geom.shin_mass,
            shin_com: geom.shin_com,
            is_perp: geom.shin_inertia_perp,
            is_axial: geom.shin_inertia_axial,
            tip_mass: 0.0,
        },
    ]
}

/// Mass matrix and its configuration gradient in absolute-angle
/// coordinates `Q = (φ_MH, θ_t1, θ_s1, θ_t2, θ_s2)`. The tilt
/// coordinate decouples from the in-plane rates, and the two chains
/// decouple from each other; only the tilt-tilt entry depends on the
/// in-plane configuration.
fn mass_matrix_abs<F: Field>(geom: &LegGeometry, q: &[F; 5]) -> ([[F; 5]; 5], [[[F; 5]; 5]; 5]) {
    let mut m = [[F::zero(); 5]; 5];
    let mut dm = [[[F::zero(); 5]; 5]; 5];

    let hy = geom.housing_com[1];
    m[0][0] = F::from_f64(geom.housing_inertia_axis + geom.housing_mass * hy * hy);

    for (c, p) in chains(geom).iter().enumerate() {
        let (it, is) = (1 + 2 * c, 2 + 2 * c);
        let (ct, st) = (q[it].cos(), q[it].sin());
        let (cs, ss) = (q[is].cos(), q[is].sin());

        let mt_ct2 = F::from_f64(p.thigh_mass * p.thigh_com * p.thigh_com);
        let iat = F::from_f64(p.it_axial);
        let ipt = F::from_f64(p.it_perp);
        let ias = F::from_f64(p.is_axial);
        let ips = F::from_f64(p.is_perp);
        let ms = F::from_f64(p.shin_mass);
        let mp = F::from_f64(p.tip_mass);
        let lt = F::from_f64(p.thigh_len);
        let ls = F::from_f64(p.shin_len);
        let cshin = F::from_f64(p.shin_com);
        let two = F::from_f64(2.0);

        // Extension (plane) coordinates of the shin COM and the paw.
        let py_s = lt * ct + cshin * cs;
        let py_p = lt * ct + ls * cs;

        // Tilt-tilt entry.
        let m00 = mt_ct2 * ct * ct
            + iat * st * st
            + ipt * ct * ct
            + ms * py_s * py_s
            + ias * ss * ss
            + ips * cs * cs
            + mp * py_p * py_p;
        m[0][0] = m[0][0] + m00;

        // In-plane block of this chain.
        m[it][it] = mt_ct2 + ipt + (ms + mp) * lt * lt;
        m[is][is] = ms * cshin * cshin + ips + mp * ls * ls;
        let coupling = (ms * lt * cshin + mp * lt * ls) * (q[it] - q[is]).cos();
        m[it][is] = coupling;
        m[is][it] = coupling;

        // Gradients. d m00 / dθt and / dθs:
        let dm00_dt = -two * mt_ct2 * ct * st + two * iat * st * ct - two * ipt * ct * st
            - two * ms * py_s * lt * st
            - two * mp * py_p * lt * st;
        let dm00_ds = two * ias * ss * cs - two * ips * cs * ss
            - two * ms * py_s * cshin * ss
            - two * mp * py_p * ls * ss;
        dm[it][0][0] = dm00_dt;
        dm[is][0][0] = dm00_ds;

        let dcoup = -(ms * lt * cshin + mp * lt * ls) * (q[it] - q[is]).sin();
        dm[it][it][is] = dcoup;
        dm[it][is][it] = dcoup;
        dm[is][it][is] = -dcoup;
        dm[is][is][it] = -dcoup;
    }
    (m, dm)
}

/// Mass matrix in joint coordinates `φ`, with gradient tensor
/// `dm[k][i][j] = ∂M_ij/∂φ_k`.
pub fn mass_matrix_with_grad<F: Field>(
    geom: &LegGeometry,
    phi: &[F],
) -> ([[F; 5]; 5], [[[F; 5]; 5]; 5]) {
    let q = [
        phi[0],
        phi[1],
        phi[1] + phi[2],
        phi[3],
        phi[3] + phi[4],
    ];
    let (mq, dmq) = mass_matrix_abs(geom, &q);

    // M_φ = Tᵀ M_Q T
    let mut m = [[F::zero(); 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            let mut acc = F::zero();
            for a in 0..5 {
                if T_MAP[a][i] == 0.0 {
                    continue;
                }
                for b in 0..5 {
                    if T_MAP[b][j] == 0.0 {
                        continue;
                    }
                    acc = acc + F::from_f64(T_MAP[a][i] * T_MAP[b][j]) * mq[a][b];
                }
            }
            m[i][j] = acc;
        }
    }

    // ∂M_φ/∂φ_k = Tᵀ (Σ_l ∂M_Q/∂Q_l T_lk) T
    let mut dm = [[[F::zero(); 5]; 5]; 5];
    for k in 0..5 {
        let mut dq = [[F::zero(); 5]; 5];
        for l in 0..5 {
            if T_MAP[l][k] == 0.0 {
                continue;
            }
            let w = F::from_f64(T_MAP[l][k]);
            for a in 0..5 {
                for b in 0..5 {
                    dq[a][b] = dq[a][b] + w * dmq[l][a][b];
                }
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                let mut acc = F::zero();
                for a in 0..5 {
                    if T_MAP[a][i] == 0.0 {
                        continue;
                    }
                    for b in 0..5 {
                        if T_MAP[b][j] == 0.0 {
                            continue;
                        }
                        acc = acc + F::from_f64(T_MAP[a][i] * T_MAP[b][j]) * dq[a][b];
                    }
                }
                dm[k][i][j] = acc;
            }
        }
    }
    (m, dm)
}

/// Coriolis/centrifugal bias `C(φ, φ̇) φ̇` from the Christoffel symbols
/// of the mass-matrix gradient.
fn coriolis_bias<F: Field>(dm: &[[[F; 5]; 5]; 5], phidot: &[F]) -> [F; 5] {
    let half = F::from_f64(0.5);
    let mut bias = [F::zero(); 5];
    for i in 0..5 {
        let mut acc = F::zero();
        for j in 0..5 {
            for k in 0..5 {
                let gamma = half * (dm[k][i][j] + dm[j][i][k] - dm[i][j][k]);
                acc = acc + gamma * phidot[j] * phidot[k];
            }
        }
        bias[i] = acc;
    }
    bias
}

/// Joint acceleration and closure force of the constrained leg:
/// `M φ̈ + C φ̇ + D φ̇ = B τ + Hᵀ λ` with `λ` eliminating the
/// constraint acceleration (gravity-free flight frame).
pub fn leg_accel_generic<F: Field>(
    geom: &LegGeometry,
    phi: &[F],
    phidot: &[F],
    tau: &[F],
    baumgarte: Option<Baumgarte>,
) -> ([F; 5], [F; 2]) {
    let (m, dm) = mass_matrix_with_grad(geom, phi);
    let bias = coriolis_bias(&dm, phidot);

    // u = B τ − C φ̇ − D φ̇
    let mut u = [F::zero(); 5];
    u[0] = tau[0];
    u[1] = tau[1];
    u[3] = tau[2];
    for i in 0..5 {
        u[i] = u[i] - bias[i] - F::from_f64(geom.damping[i]) * phidot[i];
    }

    // Solve M [x | Y] = [u | Hᵀ] in one factorization-equivalent pass.
    let h = closure_jacobian_generic(geom, phi);
    let mut minv_u = u;
    let mut minv_ht = [[F::zero(); 2]; 5];
    {
        let mut a: Vec<F> = m.iter().flatten().copied().collect();
        let mut rhs = minv_u.to_vec();
        solve_in_place(&mut a, &mut rhs, 5);
        minv_u.copy_from_slice(&rhs);
    }
    for col in 0..2 {
        let mut a: Vec<F> = m.iter().flatten().copied().collect();
        let mut rhs: Vec<F> = (0..5).map(|r| h[col][r]).collect();
        solve_in_place(&mut a, &mut rhs, 5);
        for r in 0..5 {
            minv_ht[r][col] = rhs[r];
        }
    }

    // S λ = −(H M⁻¹ u + Ḣ φ̇ [+ stabilization])
    let hd = closure_jacobian_dot_generic(geom, phi, phidot);
    let mut rhs = [F::zero(); 2];
    for r in 0..2 {
        let mut acc = F::zero();
        for c in 0..5 {
            acc = acc + h[r][c] * minv_u[c] + hd[r][c] * phidot[c];
        }
        rhs[r] = acc;
    }
    if let Some(b) = baumgarte {
        let hval = closure_residual_generic(geom, phi);
        let two_zw = F::from_f64(2.0 * b.zeta * b.omega);
        let w2 = F::from_f64(b.omega * b.omega);
        for r in 0..2 {
            let mut hdot = F::zero();
            for c in 0..5 {
                hdot = hdot + h[r][c] * phidot[c];
            }
            rhs[r] = rhs[r] + two_zw * hdot + w2 * hval[r];
        }
    }
    let mut s = [
        F::zero(),
        F::zero(),
        F::zero(),
        F::zero(),
    ];
    for r in 0..2 {
        for c in 0..2 {
            let mut acc = F::zero();
            for k in 0..5 {
                acc = acc + h[r][k] * minv_ht[k][c];
            }
            s[r * 2 + c] = acc;
        }
    }
    let mut lambda = [-rhs[0], -rhs[1]];
    {
        let mut a = s;
        let mut b_vec = lambda.to_vec();
        solve_in_place(&mut a, &mut b_vec, 2);
        lambda.copy_from_slice(&b_vec);
    }

    let mut acc = [F::zero(); 5];
    for r in 0..5 {
        acc[r] = minv_u[r] + minv_ht[r][0] * lambda[0] + minv_ht[r][1] * lambda[1];
    }
    (acc, lambda)
}

/// State derivative of the 10-dim leg state under actuated torques.
pub fn leg_state_derivative_generic<F: Field>(
    geom: &LegGeometry,
    x: &[F],
    tau: &[F],
    baumgarte: Option<Baumgarte>,
) -> Vec<F> {
    let (acc, _) = leg_accel_generic(geom, &x[..5], &x[5..10], tau, baumgarte);
    let mut dx = Vec::with_capacity(10);
    dx.extend_from_slice(&x[5..10]);
    dx.extend_from_slice(&acc);
    dx
}

/// Public `f64` dynamics with the conditioning guard from the model
/// contract: the closure normal system must stay well conditioned.
pub fn leg_dynamics(
    geom: &LegGeometry,
    state: &LegState,
    tau: &ActuatedTorque,
    baumgarte: Option<Baumgarte>,
) -> Result<(SVector<f64, 10>, Vector2<f64>), LegError> {
    let (m, _) = mass_matrix_with_grad::<f64>(geom, &state.phi);
    let h = closure_jacobian_generic::<f64>(geom, &state.phi);
    // cond(H M⁻¹ Hᵀ) via the 2×2 normal matrix.
    let mut minv_ht = [[0.0; 2]; 5];
    for col in 0..2 {
        let mut a: Vec<f64> = m.iter().flatten().copied().collect();
        let mut rhs: Vec<f64> = (0..5).map(|r| h[col][r]).collect();
        if !solve_in_place(&mut a, &mut rhs, 5) {
            return Err(LegError::NumericalFailure("singular mass matrix"));
        }
        for r in 0..5 {
            minv_ht[r][col] = rhs[r];
        }
    }
    let mut s = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            s[r][c] = (0..5).map(|k| h[r][k] * minv_ht[k][c]).sum();
        }
    }
    let tr = s[0][0] + s[1][1];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let eig_max = tr / 2.0 + disc;
    let eig_min = tr / 2.0 - disc;
    if eig_min <= 0.0 || eig_max / eig_min > 1e12 {
        return Err(LegError::IllConditioned {
            cond: if eig_min > 0.0 {
                eig_max / eig_min
            } else {
                f64::INFINITY
            },
        });
    }

    let tau = [tau.0[0], tau.0[1], tau.0[2]];
    let x = state.to_vector();
    let (acc, lambda) = leg_accel_generic::<f64>(geom, &x.as_slice()[..5], &x.as_slice()[5..10], &tau, baumgarte);
    let mut dx = SVector::<f64, 10>::zeros();
    for k in 0..5 {
        dx[k] = state.phidot[k];
        dx[5 + k] = acc[k];
    }
    if dx.iter().any(|v| !v.is_finite()) {
        return Err(LegError::NumericalFailure("non-finite acceleration"));
    }
    Ok((dx, Vector2::new(lambda[0], lambda[1])))
}

/// Mass matrix in joint coordinates as an nalgebra matrix.
pub fn mass_matrix(geom: &LegGeometry, phi: &[f64; 5]) -> Matrix5<f64> {
    let (m, _) = mass_matrix_with_grad::<f64>(geom, phi);
    Matrix5::from_fn(|r, c| m[r][c])
}

/// Coriolis matrix `C(φ, φ̇)` (Christoffel convention, `f64` only;
/// used by the Lagrangian-consistency checks).
pub fn coriolis_matrix(geom: &LegGeometry, phi: &[f64; 5], phidot: &[f64; 5]) -> Matrix5<f64> {
    let (_, dm) = mass_matrix_with_grad::<f64>(geom, phi);
    Matrix5::from_fn(|i, j| {
        (0..5)
            .map(|k| 0.5 * (dm[k][i][j] + dm[j][i][k] - dm[i][j][k]) * phidot[k])
            .sum()
    })
}

/// `Ṁ` along `phidot`.
pub fn mass_matrix_dot(geom: &LegGeometry, phi: &[f64; 5], phidot: &[f64; 5]) -> Matrix5<f64> {
    let (_, dm) = mass_matrix_with_grad::<f64>(geom, phi);
    Matrix5::from_fn(|i, j| (0..5).map(|k| dm[k][i][j] * phidot[k]).sum())
}

pub fn kinetic_energy(geom: &LegGeometry, state: &LegState) -> f64 {
    let m = mass_matrix(geom, &state.phi);
    let v = SVector::<f64, 5>::from(state.phidot);
    0.5 * v.dot(&(m * v))
}
