//! Forward-mode dual numbers with a const-generic number of derivative
//! directions, generic over the inner scalar so they nest (first
//! derivatives of quantities that are themselves dual-valued).
//!
//! The model code in this workspace is written once over [`Field`] and
//! instantiated with `f64` for plain evaluation, `Dual<N, f64>` for
//! Jacobians, and `Dual<M, Dual<N, f64>>` for directional second
//! derivatives. Gradients come out exact to machine precision, which is
//! what the finite-difference sensitivity checks validate against.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar algebra required by the model code (dynamics, kinematics,
/// residuals). Implemented for `f64` and for `Dual` over any `Field`.
pub trait Field:
    Copy
    + Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    /// Underlying real value with all derivative structure stripped.
    /// Used for pivoting and branch decisions only.
    fn real(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn powi(self, n: i32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl Field for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn real(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Dual number `re + Σ eps[i]·δ_i` carrying N independent derivative
/// directions.
#[derive(Clone, Copy, Debug)]
pub struct Dual<const N: usize, F: Field> {
    pub re: F,
    pub eps: [F; N],
}

impl<const N: usize, F: Field> Dual<N, F> {
    pub fn constant(re: F) -> Self {
        Self {
            re,
            eps: [F::zero(); N],
        }
    }

    /// Variable seeded with derivative 1 in direction `dir`.
    pub fn variable(re: F, dir: usize) -> Self {
        let mut eps = [F::zero(); N];
        eps[dir] = F::one();
        Self { re, eps }
    }

    /// Variable with an arbitrary seed vector (used for directional
    /// derivatives along a state velocity).
    pub fn seeded(re: F, eps: [F; N]) -> Self {
        Self { re, eps }
    }

    fn map2(self, rhs: Self, re: F, f: impl Fn(F, F) -> F) -> Self {
        let mut eps = [F::zero(); N];
        for i in 0..N {
            eps[i] = f(self.eps[i], rhs.eps[i]);
        }
        Self { re, eps }
    }
}

impl<const N: usize, F: Field> Add for Dual<N, F> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.map2(rhs, self.re + rhs.re, |a, b| a + b)
    }
}

impl<const N: usize, F: Field> Sub for Dual<N, F> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.map2(rhs, self.re - rhs.re, |a, b| a - b)
    }
}

impl<const N: usize, F: Field> Mul for Dual<N, F> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.map2(rhs, self.re * rhs.re, |a, b| a * rhs.re + self.re * b)
    }
}

impl<const N: usize, F: Field> Div for Dual<N, F> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let re = self.re / rhs.re;
        self.map2(rhs, re, |a, b| (a - re * b) / rhs.re)
    }
}

impl<const N: usize, F: Field> Neg for Dual<N, F> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut eps = [F::zero(); N];
        for i in 0..N {
            eps[i] = -self.eps[i];
        }
        Self { re: -self.re, eps }
    }
}

impl<const N: usize, F: Field> Field for Dual<N, F> {
    fn from_f64(x: f64) -> Self {
        Self::constant(F::from_f64(x))
    }
    fn real(self) -> f64 {
        self.re.real()
    }
    fn sin(self) -> Self {
        let (s, c) = (self.re.sin(), self.re.cos());
        let mut eps = [F::zero(); N];
        for i in 0..N {
            eps[i] = c * self.eps[i];
        }
        Self { re: s, eps }
    }
    fn cos(self) -> Self {
        let (s, c) = (self.re.sin(), self.re.cos());
        let mut eps = [F::zero(); N];
        for i in 0..N {
            eps[i] = -s * self.eps[i];
        }
        Self { re: c, eps }
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        let half_inv = F::from_f64(0.5) / r;
        let mut eps = [F::zero(); N];
        for i in 0..N {
            eps[i] = half_inv * self.eps[i];
        }
        Self { re: r, eps }
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        let mut eps = [F::zero(); N];
        for i in 0..N {
            eps[i] = e * self.eps[i];
        }
        Self { re: e, eps }
    }
}

/// Solve `a x = b` in place for a small dense system with partial
/// pivoting on the real part. `a` is row-major `n×n`, `b` has `n`
/// entries; the solution overwrites `b`. Returns `false` when a pivot
/// is numerically zero.
pub fn solve_in_place<F: Field>(a: &mut [F], b: &mut [F], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let mut piv = col;
        let mut piv_mag = a[col * n + col].real().abs();
        for row in (col + 1)..n {
            let mag = a[row * n + col].real().abs();
            if mag > piv_mag {
                piv = row;
                piv_mag = mag;
            }
        }
        if piv_mag < 1e-300 {
            return false;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let inv = F::one() / a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] * inv;
            for k in col..n {
                a[row * n + k] = a[row * n + k] - factor * a[col * n + k];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc = acc - a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type D2 = Dual<2, f64>;

    fn f<F: Field>(x: F, y: F) -> F {
        x.sin() * y + (x * x + y).sqrt() / y.exp()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x0, y0) = (0.7, 1.3);
        let g = f(D2::variable(x0, 0), D2::variable(y0, 1));
        let h = 1e-7;
        let dfdx = (f(x0 + h, y0) - f(x0 - h, y0)) / (2.0 * h);
        let dfdy = (f(x0, y0 + h) - f(x0, y0 - h)) / (2.0 * h);
        assert_relative_eq!(g.eps[0], dfdx, epsilon = 1e-6);
        assert_relative_eq!(g.eps[1], dfdy, epsilon = 1e-6);
        assert_relative_eq!(g.re, f(x0, y0), epsilon = 1e-14);
    }

    #[test]
    fn nested_duals_give_second_derivatives() {
        // d²/dx² sin(x) = -sin(x)
        type DD = Dual<1, Dual<1, f64>>;
        let x = DD::variable(Dual::variable(0.4, 0), 0);
        let s = x.sin();
        assert_relative_eq!(s.eps[0].eps[0], -f64::sin(0.4), epsilon = 1e-14);
    }

    #[test]
    fn dual_linear_solve_propagates_derivatives() {
        // Solve [[1, t], [0, 1]] x = [t, 2], x = [t - 2t, 2] = [-t, 2]
        type D1 = Dual<1, f64>;
        let t = D1::variable(0.9, 0);
        let mut a = [
            D1::from_f64(1.0),
            t,
            D1::from_f64(0.0),
            D1::from_f64(1.0),
        ];
        let mut b = [t, D1::from_f64(2.0)];
        assert!(solve_in_place(&mut a, &mut b, 2));
        assert_relative_eq!(b[0].re, -0.9, epsilon = 1e-14);
        assert_relative_eq!(b[0].eps[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(b[1].re, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn pivoting_survives_zero_leading_entry() {
        let mut a = [0.0, 1.0, 1.0, 0.0];
        let mut b = [3.0, 5.0];
        assert!(solve_in_place(&mut a, &mut b, 2));
        assert_relative_eq!(b[0], 5.0);
        assert_relative_eq!(b[1], 3.0);
    }
}
