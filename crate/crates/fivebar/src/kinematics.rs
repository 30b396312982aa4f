use freefall_autodiff::Field;
use nalgebra::{Matrix2, Matrix2x5, Vector2};

use crate::geometry::LegGeometry;
use crate::LegError;

/// Planar direction of an in-plane angle measured from the extended
/// (downward) axis toward forward: `u(ψ) = (sin ψ, cos ψ)` in
/// (forward, extension) coordinates.
#[inline]
pub fn dir<F: Field>(angle: F) -> [F; 2] {
    [angle.sin(), angle.cos()]
}

/// Derivative of [`dir`] with respect to the angle.
#[inline]
pub fn dir_d<F: Field>(angle: F) -> [F; 2] {
    [angle.cos(), -angle.sin()]
}

/// Chain pivots in the linkage plane: chain 1 forward of chain 2.
pub fn pivots<F: Field>(geom: &LegGeometry) -> ([F; 2], [F; 2]) {
    let half = F::from_f64(geom.l0 / 2.0);
    ([half, F::zero()], [-half, F::zero()])
}

/// Paw position through chain 1, planar.
pub fn ee_chain1<F: Field>(geom: &LegGeometry, phi: &[F]) -> [F; 2] {
    let (p1, _) = pivots::<F>(geom);
    let l1 = F::from_f64(geom.l1);
    let l2 = F::from_f64(geom.l2);
    let u1 = dir(phi[1]);
    let u2 = dir(phi[1] + phi[2]);
    [p1[0] + l1 * u1[0] + l2 * u2[0], p1[1] + l1 * u1[1] + l2 * u2[1]]
}

/// Paw position through chain 2, planar.
pub fn ee_chain2<F: Field>(geom: &LegGeometry, phi: &[F]) -> [F; 2] {
    let (_, p2) = pivots::<F>(geom);
    let l3 = F::from_f64(geom.l3);
    let l4 = F::from_f64(geom.l4);
    let u1 = dir(phi[3]);
    let u2 = dir(phi[3] + phi[4]);
    [p2[0] + l3 * u1[0] + l4 * u2[0], p2[1] + l3 * u1[1] + l4 * u2[1]]
}

/// Loop-closure residual `h = EE₁ − EE₂` (planar, meters).
pub fn closure_residual_generic<F: Field>(geom: &LegGeometry, phi: &[F]) -> [F; 2] {
    let a = ee_chain1(geom, phi);
    let b = ee_chain2(geom, phi);
    [a[0] - b[0], a[1] - b[1]]
}

/// Constraint Jacobian `H = ∂h/∂φ`, 2×5 with a zero housing column.
pub fn closure_jacobian_generic<F: Field>(geom: &LegGeometry, phi: &[F]) -> [[F; 5]; 2] {
    let l1 = F::from_f64(geom.l1);
    let l2 = F::from_f64(geom.l2);
    let l3 = F::from_f64(geom.l3);
    let l4 = F::from_f64(geom.l4);
    let d11 = dir_d(phi[1]);
    let d12 = dir_d(phi[1] + phi[2]);
    let d21 = dir_d(phi[3]);
    let d22 = dir_d(phi[3] + phi[4]);
    let mut h = [[F::zero(); 5]; 2];
    for r in 0..2 {
        h[r][1] = l1 * d11[r] + l2 * d12[r];
        h[r][2] = l2 * d12[r];
        h[r][3] = -(l3 * d21[r] + l4 * d22[r]);
        h[r][4] = -(l4 * d22[r]);
    }
    h
}

/// Time derivative of the constraint Jacobian along `phidot`.
pub fn closure_jacobian_dot_generic<F: Field>(
    geom: &LegGeometry,
    phi: &[F],
    phidot: &[F],
) -> [[F; 5]; 2] {
    let l1 = F::from_f64(geom.l1);
    let l2 = F::from_f64(geom.l2);
    let l3 = F::from_f64(geom.l3);
    let l4 = F::from_f64(geom.l4);
    // d/dt dir'(θ) = -dir(θ) θ̇
    let u11 = dir(phi[1]);
    let u12 = dir(phi[1] + phi[2]);
    let u21 = dir(phi[3]);
    let u22 = dir(phi[3] + phi[4]);
    let r11 = phidot[1];
    let r12 = phidot[1] + phidot[2];
    let r21 = phidot[3];
    let r22 = phidot[3] + phidot[4];
    let mut hd = [[F::zero(); 5]; 2];
    for r in 0..2 {
        hd[r][1] = -(l1 * u11[r] * r11 + l2 * u12[r] * r12);
        hd[r][2] = -(l2 * u12[r] * r12);
        hd[r][3] = l3 * u21[r] * r21 + l4 * u22[r] * r22;
        hd[r][4] = l4 * u22[r] * r22;
    }
    hd
}

/// `f64` front end returning nalgebra types: residual and Jacobian.
pub fn closure_residual(geom: &LegGeometry, phi: &[f64; 5]) -> (Vector2<f64>, Matrix2x5<f64>) {
    let h = closure_residual_generic::<f64>(geom, phi);
    let j = closure_jacobian_generic::<f64>(geom, phi);
    let mut jm = Matrix2x5::zeros();
    for r in 0..2 {
        for c in 0..5 {
            jm[(r, c)] = j[r][c];
        }
    }
    (Vector2::new(h[0], h[1]), jm)
}

/// Solve the passive knee angles from the actuated thigh angles by
/// intersecting the two shin circles. Returns `(φ_21, φ_22)`.
pub fn solve_closure(geom: &LegGeometry, phi11: f64, phi12: f64) -> Result<(f64, f64), LegError> {
    let p1 = [geom.l0 / 2.0, 0.0];
    let p2 = [-geom.l0 / 2.0, 0.0];
    let k1 = [p1[0] + geom.l1 * phi11.sin(), p1[1] + geom.l1 * phi11.cos()];
    let k2 = [p2[0] + geom.l3 * phi12.sin(), p2[1] + geom.l3 * phi12.cos()];
    let dx = k2[0] - k1[0];
    let dy = k2[1] - k1[1];
    let d2 = dx * dx + dy * dy;
    let d = d2.sqrt();
    let (r1, r2) = (geom.l2, geom.l4);
    if d < 1e-12 || d > r1 + r2 || d < (r1 - r2).abs() {
        return Err(LegError::ClosureUnreachable);
    }
    let a = (r1 * r1 - r2 * r2 + d2) / (2.0 * d);
    let t2 = r1 * r1 - a * a;
    if t2 < 0.0 {
        return Err(LegError::ClosureUnreachable);
    }
    let t = t2.sqrt();
    let mid = [k1[0] + a * dx / d, k1[1] + a * dy / d];
    // Perpendicular to the knee-knee segment; knee_sign picks the
    // branch with the paw on the extended side.
    let perp = [-dy / d, dx / d];
    let cand = |s: f64| [mid[0] + s * t * perp[0], mid[1] + s * t * perp[1]];
    let ee_a = cand(1.0);
    let ee_b = cand(-1.0);
    let ee = if (ee_a[1] - ee_b[1]) * geom.knee_sign >= 0.0 {
        ee_a
    } else {
        ee_b
    };
    let th_s1 = f64::atan2(ee[0] - k1[0], ee[1] - k1[1]);
    let th_s2 = f64::atan2(ee[0] - k2[0], ee[1] - k2[1]);
    let wrap = |x: f64| {
        let mut y = x;
        while y > std::f64::consts::PI {
            y -= 2.0 * std::f64::consts::PI;
        }
        while y < -std::f64::consts::PI {
            y += 2.0 * std::f64::consts::PI;
        }
        y
    };
    Ok((wrap(th_s1 - phi11), wrap(th_s2 - phi12)))
}

/// Full joint vector from the actuated triple `(φ_MH, φ_11, φ_12)`.
pub fn solve_full_configuration(
    geom: &LegGeometry,
    actuated: &[f64; 3],
) -> Result<[f64; 5], LegError> {
    let (k1, k2) = solve_closure(geom, actuated[1], actuated[2])?;
    Ok([actuated[0], actuated[1], k1, actuated[2], k2])
}

/// Passive joint rates consistent with `H φ̇ = 0` given actuated rates
/// `(φ̇_MH, φ̇_11, φ̇_12)`.
pub fn solve_closure_rates(
    geom: &LegGeometry,
    phi: &[f64; 5],
    actuated_rates: &[f64; 3],
) -> Result<[f64; 5], LegError> {
    let (_, h) = closure_residual(geom, phi);
    let hp = Matrix2::new(h[(0, 2)], h[(0, 4)], h[(1, 2)], h[(1, 4)]);
    let rhs = -Vector2::new(
        h[(0, 1)] * actuated_rates[1] + h[(0, 3)] * actuated_rates[2],
        h[(1, 1)] * actuated_rates[1] + h[(1, 3)] * actuated_rates[2],
    );
    let sol = hp
        .lu()
        .solve(&rhs)
        .ok_or(LegError::NumericalFailure("singular passive block"))?;
    Ok([
        actuated_rates[0],
        actuated_rates[1],
        sol[0],
        actuated_rates[2],
        sol[1],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn geom() -> LegGeometry {
        LegGeometry::default()
    }

    #[test]
    fn symmetric_configuration_closes() {
        // With coaxial pivots and equal chain lengths, identical chain
        // angles put both end effectors on the same point.
        let g = geom();
        let phi = [0.3, 0.7, -1.1, 0.7, -1.1];
        let (h, _) = closure_residual(&g, &phi);
        assert_relative_eq!(h.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn constructed_configurations_close() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut solved = 0;
        for _ in 0..500 {
            let phi11 = rng.gen_range(-1.4..1.4);
            let phi12 = rng.gen_range(-1.4..1.4);
            if let Ok((k1, k2)) = solve_closure(&g, phi11, phi12) {
                let phi = [0.0, phi11, k1, phi12, k2];
                let (h, _) = closure_residual(&g, &phi);
                assert!(h.norm() <= 1e-12, "‖h‖ = {}", h.norm());
                solved += 1;
            }
        }
        assert!(solved > 300, "closure should be solvable over most of the box");
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let g = geom();
        let (k1, k2) = solve_closure(&g, 0.5, -0.4).unwrap();
        let phi = [0.2, 0.5, k1, -0.4, k2];
        let (_, jac) = closure_residual(&g, &phi);
        let eps = 1e-6;
        let mut max_err: f64 = 0.0;
        for c in 0..5 {
            let mut hi = phi;
            let mut lo = phi;
            hi[c] += eps;
            lo[c] -= eps;
            let fh = closure_residual_generic::<f64>(&g, &hi);
            let fl = closure_residual_generic::<f64>(&g, &lo);
            for r in 0..2 {
                let fd = (fh[r] - fl[r]) / (2.0 * eps);
                max_err = max_err.max((fd - jac[(r, c)]).abs());
            }
        }
        assert!(max_err <= 1e-6, "max Jacobian error {max_err}");
    }

    #[test]
    fn jacobian_dot_matches_difference_of_jacobians() {
        let g = geom();
        let (k1, k2) = solve_closure(&g, 0.4, -0.6).unwrap();
        let phi = [0.1, 0.4, k1, -0.6, k2];
        let phidot = [0.3, -0.8, 0.5, 0.7, -0.2];
        let hd = closure_jacobian_dot_generic::<f64>(&g, &phi, &phidot);
        let dt = 1e-7;
        let phi_next: Vec<f64> = (0..5).map(|i| phi[i] + dt * phidot[i]).collect();
        let j0 = closure_jacobian_generic::<f64>(&g, &phi);
        let j1 = closure_jacobian_generic::<f64>(&g, &phi_next);
        for r in 0..2 {
            for c in 0..5 {
                let fd = (j1[r][c] - j0[r][c]) / dt;
                assert_relative_eq!(hd[r][c], fd, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn unreachable_configuration_reports_error() {
        let g = geom();
        // Thighs pointing opposite ways far beyond what the shins span.
        let mut wide = g.clone();
        wide.l0 = 1.2;
        assert!(matches!(
            solve_closure(&wide, 1.5, -1.5),
            Err(LegError::ClosureUnreachable)
        ));
    }

    #[test]
    fn closure_rates_satisfy_velocity_constraint() {
        let g = geom();
        let phi = solve_full_configuration(&g, &[0.2, 0.6, -0.5]).unwrap();
        let rates = solve_closure_rates(&g, &phi, &[1.0, -2.0, 1.5]).unwrap();
        let (_, h) = closure_residual(&g, &phi);
        let mut v = [0.0; 2];
        for r in 0..2 {
            for c in 0..5 {
                v[r] += h[(r, c)] * rates[c];
            }
        }
        assert_relative_eq!(v[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(v[1], 0.0, epsilon = 1e-12);
    }
}
