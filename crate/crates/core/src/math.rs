//! Small fixed-size linear algebra over a generic scalar, plus Gauss rules.
//!
//! The element kernels in [`crate::forms`] and [`crate::interface`] are written
//! once, generic over [`Scalar`], and instantiated with `f64` (residual) or a
//! dual number (residual + consistent tangent).

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Scalar abstraction for element kernels.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Mul<f64, Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn powf(self, e: f64) -> Self;
    /// Chain-rule lift of an externally computed value with known partial
    /// derivatives with respect to previously computed scalars (used for
    /// implicit functions like the porosity closure).
    fn lift(value: f64, partials: &[(Self, f64)]) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
    #[inline]
    fn lift(value: f64, _partials: &[(Self, f64)]) -> Self {
        value
    }
}

/// 2-vector over a generic scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec2<S = f64> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Vec2<S> {
    #[inline]
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }
    #[inline]
    pub fn zero() -> Self {
        Self::new(S::from_f64(0.0), S::from_f64(0.0))
    }
    #[inline]
    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y
    }
    #[inline]
    pub fn norm_sq(self) -> S {
        self.dot(self)
    }
    #[inline]
    pub fn norm(self) -> S {
        self.norm_sq().sqrt()
    }
    /// Rotate by +90 degrees: (x, y) -> (-y, x).
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }
    #[inline]
    pub fn scale(self, s: S) -> Self {
        Self::new(self.x * s, self.y * s)
    }
    #[inline]
    pub fn comp(self, d: usize) -> S {
        match d {
            0 => self.x,
            _ => self.y,
        }
    }
}

impl Vec2<f64> {
    #[inline]
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n <= 0.0 || !n.is_finite() {
            None
        } else {
            Some(self.scale(1.0 / n))
        }
    }
    #[inline]
    pub fn dist(self, o: Self) -> f64 {
        (self - o).norm()
    }
    #[inline]
    pub fn lerp(self, o: Self, t: f64) -> Self {
        self.scale(1.0 - t) + o.scale(t)
    }
}

impl<S: Scalar> Add for Vec2<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}
impl<S: Scalar> Sub for Vec2<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}
impl<S: Scalar> Neg for Vec2<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}
impl<S: Scalar> AddAssign for Vec2<S> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

/// 2x2 matrix over a generic scalar, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2<S = f64> {
    pub a: [[S; 2]; 2],
}

impl<S: Scalar> Mat2<S> {
    #[inline]
    pub fn new(a00: S, a01: S, a10: S, a11: S) -> Self {
        Self {
            a: [[a00, a01], [a10, a11]],
        }
    }
    #[inline]
    pub fn zero() -> Self {
        let z = S::from_f64(0.0);
        Self::new(z, z, z, z)
    }
    #[inline]
    pub fn identity() -> Self {
        let z = S::from_f64(0.0);
        let o = S::from_f64(1.0);
        Self::new(o, z, z, o)
    }
    #[inline]
    pub fn det(&self) -> S {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }
    #[inline]
    pub fn trace(&self) -> S {
        self.a[0][0] + self.a[1][1]
    }
    #[inline]
    pub fn transpose(&self) -> Self {
        Self::new(self.a[0][0], self.a[1][0], self.a[0][1], self.a[1][1])
    }
    /// Inverse; caller guarantees a nonzero determinant.
    #[inline]
    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self::new(
            self.a[1][1] / d,
            -self.a[0][1] / d,
            -self.a[1][0] / d,
            self.a[0][0] / d,
        )
    }
    #[inline]
    pub fn matmul(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                r.a[i][j] = self.a[i][0] * o.a[0][j] + self.a[i][1] * o.a[1][j];
            }
        }
        r
    }
    #[inline]
    pub fn mul_vec(&self, v: Vec2<S>) -> Vec2<S> {
        Vec2::new(
            self.a[0][0] * v.x + self.a[0][1] * v.y,
            self.a[1][0] * v.x + self.a[1][1] * v.y,
        )
    }
    #[inline]
    pub fn scale(&self, s: S) -> Self {
        Self::new(
            self.a[0][0] * s,
            self.a[0][1] * s,
            self.a[1][0] * s,
            self.a[1][1] * s,
        )
    }
    #[inline]
    pub fn add(&self, o: &Self) -> Self {
        Self::new(
            self.a[0][0] + o.a[0][0],
            self.a[0][1] + o.a[0][1],
            self.a[1][0] + o.a[1][0],
            self.a[1][1] + o.a[1][1],
        )
    }
    #[inline]
    pub fn sub(&self, o: &Self) -> Self {
        Self::new(
            self.a[0][0] - o.a[0][0],
            self.a[0][1] - o.a[0][1],
            self.a[1][0] - o.a[1][0],
            self.a[1][1] - o.a[1][1],
        )
    }
    /// Symmetric part (A + A^T)/2.
    #[inline]
    pub fn sym(&self) -> Self {
        self.add(&self.transpose()).scale(S::from_f64(0.5))
    }
    /// Double contraction A : B.
    #[inline]
    pub fn ddot(&self, o: &Self) -> S {
        self.a[0][0] * o.a[0][0]
            + self.a[0][1] * o.a[0][1]
            + self.a[1][0] * o.a[1][0]
            + self.a[1][1] * o.a[1][1]
    }
    /// Outer product column . row^T.
    #[inline]
    pub fn outer(u: Vec2<S>, v: Vec2<S>) -> Self {
        Self::new(u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y)
    }
}

/// 1D Gauss rules on [-1, 1]: (points, weights).
pub fn gauss_1d(n: usize) -> (&'static [f64], &'static [f64]) {
    const P1: [f64; 1] = [0.0];
    const W1: [f64; 1] = [2.0];
    const A2: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)
    const P2: [f64; 2] = [-A2, A2];
    const W2: [f64; 2] = [1.0, 1.0];
    const A3: f64 = 0.774_596_669_241_483_4; // sqrt(3/5)
    const P3: [f64; 3] = [-A3, 0.0, A3];
    const W3: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    match n {
        1 => (&P1, &W1),
        2 => (&P2, &W2),
        _ => (&P3, &W3),
    }
}

/// Tensor-product 2x2 Gauss rule on the reference square [-1,1]^2.
pub fn gauss_2x2() -> [(f64, f64, f64); 4] {
    let a = 0.577_350_269_189_625_8;
    [
        (-a, -a, 1.0),
        (a, -a, 1.0),
        (a, a, 1.0),
        (-a, a, 1.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mat2_inverse_roundtrip() {
        let m = Mat2::<f64>::new(2.0, 1.0, 0.5, 3.0);
        let id = m.matmul(&m.inverse());
        assert!((id.a[0][0] - 1.0).abs() < 1e-14);
        assert!(id.a[0][1].abs() < 1e-14);
        assert!((id.a[1][1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_integrates_cubics() {
        // 2-point Gauss is exact through degree 3.
        let (p, w) = gauss_1d(2);
        let integral: f64 = p
            .iter()
            .zip(w)
            .map(|(&x, &wi)| wi * (3.0 * x * x * x + x * x + 1.0))
            .sum();
        assert!((integral - (2.0 / 3.0 + 2.0)).abs() < 1e-14);
    }
}
