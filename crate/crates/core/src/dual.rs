//! Forward-mode dual numbers with a const-generic gradient arity.
//!
//! Element kernels run once with `DualN<N>` (N = number of local unknowns) to
//! produce the element residual together with its exact Jacobian columns.
//! Quantities treated in a fixed-point fashion (cut geometry, mortar pairings,
//! stabilization scalings) enter the kernels as plain `f64` constants, so they
//! are excluded from the linearization by construction.

use crate::math::Scalar;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug)]
pub struct DualN<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> DualN<N> {
    #[inline]
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    /// Independent variable number `i` with value `v`.
    #[inline]
    pub fn variable(v: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { v, d }
    }
}

impl<const N: usize> Add for DualN<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        self.v += o.v;
        for k in 0..N {
            self.d[k] += o.d[k];
        }
        self
    }
}

impl<const N: usize> Sub for DualN<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        self.v -= o.v;
        for k in 0..N {
            self.d[k] -= o.d[k];
        }
        self
    }
}

impl<const N: usize> Mul for DualN<N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; N];
        for k in 0..N {
            d[k] = self.d[k] * o.v + self.v * o.d[k];
        }
        Self {
            v: self.v * o.v,
            d,
        }
    }
}

impl<const N: usize> Div for DualN<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let v = self.v * inv;
        let mut d = [0.0; N];
        for k in 0..N {
            d[k] = (self.d[k] - v * o.d[k]) * inv;
        }
        Self { v, d }
    }
}

impl<const N: usize> Neg for DualN<N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for k in 0..N {
            self.d[k] = -self.d[k];
        }
        self
    }
}

impl<const N: usize> AddAssign for DualN<N> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.v += o.v;
        for k in 0..N {
            self.d[k] += o.d[k];
        }
    }
}

impl<const N: usize> SubAssign for DualN<N> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.v -= o.v;
        for k in 0..N {
            self.d[k] -= o.d[k];
        }
    }
}

impl<const N: usize> Mul<f64> for DualN<N> {
    type Output = Self;
    #[inline]
    fn mul(mut self, s: f64) -> Self {
        self.v *= s;
        for k in 0..N {
            self.d[k] *= s;
        }
        self
    }
}

impl<const N: usize> Add<f64> for DualN<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, s: f64) -> Self {
        self.v += s;
        self
    }
}

impl<const N: usize> Sub<f64> for DualN<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, s: f64) -> Self {
        self.v -= s;
        self
    }
}

impl<const N: usize> Div<f64> for DualN<N> {
    type Output = Self;
    #[inline]
    fn div(mut self, s: f64) -> Self {
        let inv = 1.0 / s;
        self.v *= inv;
        for k in 0..N {
            self.d[k] *= inv;
        }
        self
    }
}

impl<const N: usize> Scalar for DualN<N> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }

    #[inline]
    fn value(&self) -> f64 {
        self.v
    }

    #[inline]
    fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        let c = 0.5 / r;
        let mut d = [0.0; N];
        for k in 0..N {
            d[k] = c * self.d[k];
        }
        Self { v: r, d }
    }

    #[inline]
    fn ln(self) -> Self {
        let c = 1.0 / self.v;
        let mut d = [0.0; N];
        for k in 0..N {
            d[k] = c * self.d[k];
        }
        Self {
            v: self.v.ln(),
            d,
        }
    }

    #[inline]
    fn powf(self, e: f64) -> Self {
        let v = self.v.powf(e);
        let c = if e == 0.0 { 0.0 } else { e * self.v.powf(e - 1.0) };
        let mut d = [0.0; N];
        for k in 0..N {
            d[k] = c * self.d[k];
        }
        Self { v, d }
    }

    #[inline]
    fn lift(value: f64, partials: &[(Self, f64)]) -> Self {
        let mut d = [0.0; N];
        for (arg, coeff) in partials {
            for k in 0..N {
                d[k] += coeff * arg.d[k];
            }
        }
        Self { v: value, d }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-7 * x.abs().max(1.0);
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x0 = 0.7;
        let f = |x: f64| (x * x + 3.0 * x).sqrt() * x.ln() / (x + 2.0);
        let xd = DualN::<1>::variable(x0, 0);
        let yd = (xd * xd + xd * 3.0).sqrt() * xd.ln() / (xd + 2.0);
        assert!((yd.v - f(x0)).abs() < 1e-14);
        assert!((yd.d[0] - fd(f, x0)).abs() < 1e-6);
    }

    #[test]
    fn powf_vs_fd() {
        let x0 = 1.3;
        let f = |x: f64| x.powf(8.0);
        let xd = DualN::<1>::variable(x0, 0);
        let yd = xd.powf(8.0);
        assert!((yd.d[0] - fd(f, x0)).abs() / fd(f, x0).abs() < 1e-7);
    }

    #[test]
    fn lift_applies_chain_rule() {
        // y = g(x) with externally known g and dg/dx, then z = y * x.
        let x = DualN::<1>::variable(2.0, 0);
        let gval = 5.0;
        let dgdx = 3.0;
        let y = DualN::lift(gval, &[(x, dgdx)]);
        let z = y * x;
        // dz/dx = dg/dx * x + g = 3*2 + 5 = 11
        assert!((z.d[0] - 11.0).abs() < 1e-14);
    }
}
