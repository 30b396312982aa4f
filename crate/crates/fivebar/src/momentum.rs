use freefall_autodiff::{Dual, Field};
use nalgebra::{Matrix3x5, SMatrix, Vector3};

use crate::dynamics::{chains, leg_accel_generic, ActuatedTorque, Baumgarte, LegState};
use crate::geometry::{LegGeometry, LegIndex, MountPose};
use crate::kinematics::{dir, dir_d};
use crate::LegError;

fn cross<F: Field>(a: &[F; 3], b: &[F; 3]) -> [F; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Mass, body-frame COM position/velocity and rotational momentum of
/// one rigid part of the leg.
struct PartKin<F: Field> {
    mass: F,
    r: [F; 3],
    v: [F; 3],
    l_rot: [F; 3],
}

/// Planar point plus planar velocity mapped into the body frame
/// through the tilted linkage plane and the mount pose.
#[allow(clippy::too_many_arguments)]
fn lift<F: Field>(
    mount: &MountPose,
    sphi: F,
    cphi: F,
    tilt_rate: F,
    px: F,
    py: F,
    vx: F,
    vy: F,
) -> ([F; 3], [F; 3]) {
    let p_m = [px, py * sphi, -(py * cphi)];
    let v_m = [
        vx,
        vy * sphi + py * cphi * tilt_rate,
        -(vy * cphi) + py * sphi * tilt_rate,
    ];
    let mut r = [F::zero(); 3];
    let mut v = [F::zero(); 3];
    for i in 0..3 {
        let mut ra = F::from_f64(mount.translation[i]);
        let mut va = F::zero();
        for j in 0..3 {
            let rot = F::from_f64(mount.rotation[(i, j)]);
            ra = ra + rot * p_m[j];
            va = va + rot * v_m[j];
        }
        r[i] = ra;
        v[i] = va;
    }
    (r, v)
}

/// Rotational momentum of a slender in-plane link, in mount-frame
/// coordinates: principal decomposition along the link, in-plane
/// normal, and plane normal.
fn rod_rot_momentum<F: Field>(
    theta: F,
    theta_rate: F,
    tilt_rate: F,
    sphi: F,
    cphi: F,
    i_axial: f64,
    i_perp: f64,
) -> [F; 3] {
    let (st, ct) = (theta.sin(), theta.cos());
    let a1 = [st, ct * sphi, -(ct * cphi)];
    let a2 = [-ct, st * sphi, -(st * cphi)];
    let a3 = [F::zero(), cphi, sphi];
    let w1 = tilt_rate * st;
    let w2 = -(tilt_rate * ct);
    let w3 = -theta_rate;
    let ia = F::from_f64(i_axial);
    let ip = F::from_f64(i_perp);
    let mut l = [F::zero(); 3];
    for i in 0..3 {
        l[i] = ia * w1 * a1[i] + ip * w2 * a2[i] + ip * w3 * a3[i];
    }
    l
}

fn parts<F: Field>(
    geom: &LegGeometry,
    mount: &MountPose,
    phi: &[F],
    phidot: &[F],
) -> Vec<PartKin<F>> {
    let sphi = phi[0].sin();
    let cphi = phi[0].cos();
    let tilt_rate = phidot[0];
    let mut out = Vec::with_capacity(6);

    // Housing: COM offset rides the tilted plane.
    {
        let hx = F::from_f64(geom.housing_com[0]);
        let hy = F::from_f64(geom.housing_com[1]);
        let (r, v) = lift(mount, sphi, cphi, tilt_rate, hx, hy, F::zero(), F::zero());
        let l_axis = F::from_f64(geom.housing_inertia_axis) * tilt_rate;
        let mut l_rot = [F::zero(); 3];
        for i in 0..3 {
            l_rot[i] = F::from_f64(mount.rotation[(i, 0)]) * l_axis;
        }
        out.push(PartKin {
            mass: F::from_f64(geom.housing_mass),
            r,
            v,
            l_rot,
        });
    }

    for (c, p) in chains(geom).iter().enumerate() {
        let (it, is) = (1 + 2 * c, 2 + 2 * c);
        let theta_t = if c == 0 { phi[1] } else { phi[3] };
        let theta_s = if c == 0 { phi[1] + phi[2] } else { phi[3] + phi[4] };
        let rate_t = if c == 0 { phidot[1] } else { phidot[3] };
        let rate_s = if c == 0 {
            phidot[1] + phidot[2]
        } else {
            phidot[3] + phidot[4]
        };
        let _ = (it, is);
        let pivot_x = F::from_f64(if c == 0 { geom.l0 / 2.0 } else { -geom.l0 / 2.0 });
        let ut = dir(theta_t);
        let us = dir(theta_s);
        let dt = dir_d(theta_t);
        let ds = dir_d(theta_s);
        let lt = F::from_f64(p.thigh_len);
        let ct_off = F::from_f64(p.thigh_com);
        let cs_off = F::from_f64(p.shin_com);
        let ls = F::from_f64(p.shin_len);

        // Thigh.
        {
            let (r, v) = lift(
                mount,
                sphi,
                cphi,
                tilt_rate,
                pivot_x + ct_off * ut[0],
                ct_off * ut[1],
                ct_off * dt[0] * rate_t,
                ct_off * dt[1] * rate_t,
            );
            let l_m = rod_rot_momentum(
                theta_t, rate_t, tilt_rate, sphi, cphi, p.it_axial, p.it_perp,
            );
            let mut l_rot = [F::zero(); 3];
            for i in 0..3 {
                for j in 0..3 {
                    l_rot[i] = l_rot[i] + F::from_f64(mount.rotation[(i, j)]) * l_m[j];
                }
            }
            out.push(PartKin {
                mass: F::from_f64(p.thigh_mass),
                r,
                v,
                l_rot,
            });
        }

        // Shin.
        {
            let (r, v) = lift(
                mount,
                sphi,
                cphi,
                tilt_rate,
                pivot_x + lt * ut[0] + cs_off * us[0],
                lt * ut[1] + cs_off * us[1],
                lt * dt[0] * rate_t + cs_off * ds[0] * rate_s,
                lt * dt[1] * rate_t + cs_off * ds[1] * rate_s,
            );
            let l_m = rod_rot_momentum(
                theta_s, rate_s, tilt_rate, sphi, cphi, p.is_axial, p.is_perp,
            );
            let mut l_rot = [F::zero(); 3];
            for i in 0..3 {
                for j in 0..3 {
                    l_rot[i] = l_rot[i] + F::from_f64(mount.rotation[(i, j)]) * l_m[j];
                }
            }
            out.push(PartKin {
                mass: F::from_f64(p.shin_mass),
                r,
                v,
                l_rot,
            });
        }

        // Paw point mass, carried through this chain.
        if p.tip_mass > 0.0 {
            let (r, v) = lift(
                mount,
                sphi,
                cphi,
                tilt_rate,
                pivot_x + lt * ut[0] + ls * us[0],
                lt * ut[1] + ls * us[1],
                lt * dt[0] * rate_t + ls * ds[0] * rate_s,
                lt * dt[1] * rate_t + ls * ds[1] * rate_s,
            );
            out.push(PartKin {
                mass: F::from_f64(p.tip_mass),
                r,
                v,
                l_rot: [F::zero(); 3],
            });
        }
    }
    out
}

/// Angular momentum of the whole leg about the body origin, in body
/// coordinates. Linear in `phidot`.
pub fn angular_momentum_generic<F: Field>(
    geom: &LegGeometry,
    mount: &MountPose,
    phi: &[F],
    phidot: &[F],
) -> [F; 3] {
    let mut l = [F::zero(); 3];
    for part in parts(geom, mount, phi, phidot) {
        let rv = cross(&part.r, &part.v);
        for i in 0..3 {
            l[i] = l[i] + part.mass * rv[i] + part.l_rot[i];
        }
    }
    l
}

/// `f64` front end of [`angular_momentum_generic`].
pub fn angular_momentum(geom: &LegGeometry, leg: LegIndex, state: &LegState) -> Vector3<f64> {
    let l = angular_momentum_generic::<f64>(geom, geom.mount(leg), &state.phi, &state.phidot);
    Vector3::from(l)
}

/// Momentum matrix `A(φ)` with `L = A φ̇`, built column-by-column from
/// the linearity of the momentum in the joint rates.
pub fn momentum_matrix(geom: &LegGeometry, leg: LegIndex, phi: &[f64; 5]) -> Matrix3x5<f64> {
    let mount = geom.mount(leg);
    let mut a = Matrix3x5::zeros();
    for j in 0..5 {
        let mut e = [0.0; 5];
        e[j] = 1.0;
        let col = angular_momentum_generic::<f64>(geom, mount, phi, &e);
        for i in 0..3 {
            a[(i, j)] = col[i];
        }
    }
    a
}

/// Momentum rate `dL/dt = (∂L/∂φ) φ̇ + A φ̈` for a given acceleration,
/// the `(∂L/∂φ) φ̇` part evaluated as an exact directional derivative.
fn momentum_rate<F: Field>(
    geom: &LegGeometry,
    mount: &MountPose,
    phi: &[F; 5],
    phidot: &[F; 5],
    phiddot: &[F; 5],
) -> [F; 3] {
    // Directional derivative along φ̇ via a one-epsilon dual layer.
    let mut phi_d = [Dual::<1, F>::constant(F::zero()); 5];
    let mut phidot_d = [Dual::<1, F>::constant(F::zero()); 5];
    for k in 0..5 {
        phi_d[k] = Dual::seeded(phi[k], [phidot[k]]);
        phidot_d[k] = Dual::constant(phidot[k]);
    }
    let l_dir = angular_momentum_generic(geom, mount, &phi_d, &phidot_d);
    // A φ̈ by linearity of L in the rates.
    let a_acc = angular_momentum_generic(geom, mount, phi, phiddot);
    let mut rate = [F::zero(); 3];
    for i in 0..3 {
        rate[i] = l_dir[i].eps[0] + a_acc[i];
    }
    rate
}

/// Torque exerted by the leg on the torso about the body origin:
/// the negative rate of change of the leg's angular momentum.
pub fn reaction_torque(
    geom: &LegGeometry,
    leg: LegIndex,
    state: &LegState,
    tau: &ActuatedTorque,
    baumgarte: Option<Baumgarte>,
) -> Result<Vector3<f64>, LegError> {
    let (acc, _) = leg_accel_generic::<f64>(geom, &state.phi, &state.phidot, &tau.0, baumgarte);
    let rate = momentum_rate::<f64>(
        geom,
        geom.mount(leg),
        &state.phi,
        &state.phidot,
        &acc,
    );
    let v = Vector3::new(-rate[0], -rate[1], -rate[2]);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LegError::NumericalFailure("non-finite reaction torque"));
    }
    Ok(v)
}

/// Reaction torque plus its exact Jacobian with respect to
/// `[φ; φ̇; τ]` (3×13). Drives the torque-tracking residual of the leg
/// planner.
pub fn reaction_torque_with_jacobian(
    geom: &LegGeometry,
    leg: LegIndex,
    state: &LegState,
    tau: &[f64; 3],
) -> (Vector3<f64>, SMatrix<f64, 3, 13>) {
    type D = Dual<13, f64>;
    let mount = geom.mount(leg);
    let mut phi = [D::constant(0.0); 5];
    let mut phidot = [D::constant(0.0); 5];
    let mut tau_d = [D::constant(0.0); 3];
    for k in 0..5 {
        phi[k] = D::variable(state.phi[k], k);
        phidot[k] = D::variable(state.phidot[k], 5 + k);
    }
    for k in 0..3 {
        tau_d[k] = D::variable(tau[k], 10 + k);
    }
    let (acc, _) = leg_accel_generic::<D>(geom, &phi, &phidot, &tau_d, None);
    let rate = momentum_rate::<D>(geom, mount, &phi, &phidot, &acc);

    let value = Vector3::new(-rate[0].re, -rate[1].re, -rate[2].re);
    let mut jac = SMatrix::<f64, 3, 13>::zeros();
    for i in 0..3 {
        for j in 0..13 {
            jac[(i, j)] = -rate[i].eps[j];
        }
    }
    (value, jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::leg_state_derivative_generic;
    use crate::kinematics::{solve_closure_rates, solve_full_configuration};
    use approx::assert_relative_eq;
    use freefall_attitude::integrate_rk4;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn geom() -> LegGeometry {
        LegGeometry::default()
    }

    fn random_state(g: &LegGeometry, rng: &mut impl Rng) -> LegState {
        loop {
            let act = [
                rng.gen_range(-0.9..0.9),
                rng.gen_range(-0.9..0.9),
                rng.gen_range(-0.9..0.9),
            ];
            if let Ok(phi) = solve_full_configuration(g, &act) {
                let rates = [
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(-4.0..4.0),
                ];
                if let Ok(phidot) = solve_closure_rates(g, &phi, &rates) {
                    return LegState { phi, phidot };
                }
            }
        }
    }

    #[test]
    fn static_leg_exerts_no_torque() {
        let g = geom();
        let phi = solve_full_configuration(&g, &[0.2, 0.6, -0.6]).unwrap();
        let t = reaction_torque(
            &g,
            LegIndex::FrontRight,
            &LegState::at_rest(phi),
            &ActuatedTorque::default(),
            None,
        )
        .unwrap();
        assert_relative_eq!(t.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn momentum_matrix_reproduces_momentum() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let s = random_state(&g, &mut rng);
            let a = momentum_matrix(&g, LegIndex::FrontLeft, &s.phi);
            let l_direct = angular_momentum(&g, LegIndex::FrontLeft, &s);
            let l_matrix = a * nalgebra::SVector::<f64, 5>::from(s.phidot);
            assert_relative_eq!((l_direct - l_matrix).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn reaction_torque_matches_momentum_rate_along_trajectory() {
        // Momentum-rate oracle: finite-difference d/dt[A φ̇] along a
        // finely integrated trajectory.
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..10 {
            let s0 = random_state(&g, &mut rng);
            let tau = ActuatedTorque([
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ]);
            let f = |x: &[f64], u: &[f64]| leg_state_derivative_generic::<f64>(&g, x, u, None);
            let h = 1e-5;
            let x0 = s0.to_vector().as_slice().to_vec();
            let xm = integrate_rk4(&f, &x0, &tau.0, h, 1, None).unwrap();
            let xp = integrate_rk4(&f, &x0, &tau.0, h, 2, None).unwrap();
            let sm = LegState::from_slice(&x0);
            let smid = LegState::from_slice(&xm);
            let sp = LegState::from_slice(&xp);
            let leg = LegIndex::FrontRight;
            let lm = angular_momentum(&g, leg, &sm);
            let lp = angular_momentum(&g, leg, &sp);
            let fd = (lp - lm) / (2.0 * h);
            let analytic = reaction_torque(&g, leg, &smid, &tau, None).unwrap();
            let scale = fd.norm().max(1e-6);
            assert!(
                (fd + analytic).norm() / scale <= 1e-4,
                "momentum-rate mismatch: fd {fd:?} vs -analytic {analytic:?}"
            );
        }
    }

    #[test]
    fn torque_jacobian_matches_finite_differences() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = random_state(&g, &mut rng);
        let tau = [1.0, -0.5, 0.7];
        let (v0, jac) = reaction_torque_with_jacobian(&g, LegIndex::FrontRight, &s, &tau);
        let eval = |phi: [f64; 5], phidot: [f64; 5], tau: [f64; 3]| {
            reaction_torque(
                &g,
                LegIndex::FrontRight,
                &LegState { phi, phidot },
                &ActuatedTorque(tau),
                None,
            )
            .unwrap()
        };
        assert_relative_eq!((v0 - eval(s.phi, s.phidot, tau)).norm(), 0.0, epsilon = 1e-12);
        let eps = 1e-6;
        for j in 0..13 {
            let mut phi_hi = s.phi;
            let mut phi_lo = s.phi;
            let mut pd_hi = s.phidot;
            let mut pd_lo = s.phidot;
            let mut tau_hi = tau;
            let mut tau_lo = tau;
            if j < 5 {
                phi_hi[j] += eps;
                phi_lo[j] -= eps;
            } else if j < 10 {
                pd_hi[j - 5] += eps;
                pd_lo[j - 5] -= eps;
            } else {
                tau_hi[j - 10] += eps;
                tau_lo[j - 10] -= eps;
            }
            let fd = (eval(phi_hi, pd_hi, tau_hi) - eval(phi_lo, pd_lo, tau_lo)) / (2.0 * eps);
            for i in 0..3 {
                let scale = fd[i].abs().max(1.0);
                assert!(
                    (fd[i] - jac[(i, j)]).abs() / scale <= 1e-5,
                    "jac[{i}][{j}]: analytic {} vs fd {}",
                    jac[(i, j)],
                    fd[i]
                );
            }
        }
    }
}
