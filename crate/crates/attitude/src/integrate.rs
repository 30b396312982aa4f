use freefall_autodiff::Field;

use crate::AttitudeError;

/// Marks a unit quaternion occupying `x[offset..offset+4]`; it is
/// renormalized after every RK4 step to bound drift.
#[derive(Clone, Copy, Debug)]
pub struct QuatBlock(pub usize);

fn renormalize<F: Field>(x: &mut [F], block: QuatBlock) {
    let o = block.0;
    let n2 = x[o] * x[o] + x[o + 1] * x[o + 1] + x[o + 2] * x[o + 2] + x[o + 3] * x[o + 3];
    let inv = F::one() / n2.sqrt();
    for k in 0..4 {
        x[o + k] = x[o + k] * inv;
    }
}

/// One classical RK4 step of `ẋ = f(x, u)` with step `h`.
pub fn rk4_step_generic<F: Field>(
    f: &impl Fn(&[F], &[F]) -> Vec<F>,
    x: &[F],
    u: &[F],
    h: f64,
    quat: Option<QuatBlock>,
) -> Vec<F> {
    let n = x.len();
    let h = F::from_f64(h);
    let half = F::from_f64(0.5);
    let sixth = F::from_f64(1.0 / 6.0);
    let two = F::from_f64(2.0);

    let k1 = f(x, u);
    let mut tmp: Vec<F> = (0..n).map(|i| x[i] + half * h * k1[i]).collect();
    let k2 = f(&tmp, u);
    for i in 0..n {
        tmp[i] = x[i] + half * h * k2[i];
    }
    let k3 = f(&tmp, u);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    let k4 = f(&tmp, u);

    let mut out: Vec<F> = (0..n)
        .map(|i| x[i] + sixth * h * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect();
    if let Some(block) = quat {
        renormalize(&mut out, block);
    }
    out
}

/// Fixed-step RK4 over `n` steps of size `h`. Fails on non-finite
/// intermediate states.
pub fn integrate_rk4(
    f: &impl Fn(&[f64], &[f64]) -> Vec<f64>,
    x0: &[f64],
    u: &[f64],
    h: f64,
    n: usize,
    quat: Option<QuatBlock>,
) -> Result<Vec<f64>, AttitudeError> {
    assert!(h > 0.0, "step size must be positive");
    assert!(n >= 1, "need at least one step");
    let mut x = x0.to_vec();
    for _ in 0..n {
        x = rk4_step_generic(f, &x, u, h, quat);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(AttitudeError::NumericalFailure);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{body_dynamics_generic, BodyInertia, BodyState};
    use crate::quat::UnitQuat;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    #[test]
    fn zero_field_returns_input() {
        let f = |x: &[f64], _u: &[f64]| vec![0.0; x.len()];
        let x = integrate_rk4(&f, &[1.0, -2.0, 3.0], &[], 0.1, 10, None).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn exponential_growth_matches_analytic() {
        let f = |x: &[f64], _u: &[f64]| vec![x[0]];
        let x = integrate_rk4(&f, &[1.0], &[], 0.01, 100, None).unwrap();
        assert_relative_eq!(x[0], std::f64::consts::E, epsilon = 1e-5);
    }

    #[test]
    fn fourth_order_convergence_on_body_dynamics() {
        let inertia = BodyInertia::diagonal(0.49, 0.92, 1.01, 4.0);
        let f = |x: &[f64], u: &[f64]| body_dynamics_generic::<f64>(x, u, &inertia).to_vec();
        let x0 = BodyState {
            q: UnitQuat::identity(),
            omega: Vector3::new(0.4, 1.1, -0.6),
        }
        .to_vector();
        let tau = [0.0; 3];
        // No renormalization here: it rescales the error and hides the
        // raw integrator order.
        let reference = integrate_rk4(&f, x0.as_slice(), &tau, 1e-5, 100_000, None).unwrap();
        let err = |h: f64, n: usize| -> f64 {
            let x = integrate_rk4(&f, x0.as_slice(), &tau, h, n, None).unwrap();
            x.iter()
                .zip(reference.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let e_coarse = err(0.05, 20);
        let e_fine = err(0.025, 40);
        let ratio = e_coarse / e_fine;
        assert!(
            (8.0..40.0).contains(&ratio),
            "expected ≈16x error reduction, got {ratio:.2}"
        );
    }

    #[test]
    fn quaternion_norm_stays_unit_over_long_runs() {
        let inertia = BodyInertia::diagonal(0.49, 0.92, 1.01, 4.0);
        let f = |x: &[f64], u: &[f64]| body_dynamics_generic::<f64>(x, u, &inertia).to_vec();
        let x0 = BodyState {
            q: UnitQuat::identity(),
            omega: Vector3::new(1.0, -2.0, 0.5),
        }
        .to_vector();
        let x = integrate_rk4(&f, x0.as_slice(), &[0.0; 3], 1e-3, 10_000, Some(QuatBlock(0)))
            .unwrap();
        let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-9);
    }
}
