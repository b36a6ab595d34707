//! Derivative-carrying scalars.
//!
//! [`Scalar`] is the arithmetic every evaluator in this crate is written
//! against. `f64` is the plain case; [`Dual<S>`] carries one directional
//! derivative on top of any scalar `S`, so `Dual<f64>` gives first
//! derivatives and `Dual<Dual<f64>>` gives second derivatives.
//!
//! A dual number `a + a'·ε` with `ε² = 0` propagates the chain rule exactly:
//!
//! - `(a + a'ε)(b + b'ε) = ab + (a'b + ab')ε`
//! - `g(a + a'ε) = g(a) + g'(a)·a'ε`

use core::fmt::Debug;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Real arithmetic closed under forward-mode differentiation.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant (all derivative parts zero).
    fn cst(c: f64) -> Self;

    /// The innermost primal value.
    fn value(self) -> f64;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn recip(self) -> Self {
        Self::one() / self
    }

    /// `true` when every component (value and all nested tangents) is finite.
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn cst(c: f64) -> Self {
        c
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        libm::sin(self)
    }
    fn cos(self) -> Self {
        libm::cos(self)
    }
    fn tan(self) -> Self {
        libm::tan(self)
    }
    fn exp(self) -> Self {
        libm::exp(self)
    }
    fn ln(self) -> Self {
        libm::log(self)
    }
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    fn tanh(self) -> Self {
        libm::tanh(self)
    }
    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { 1.0 / self } else { self };
        let mut k = n.unsigned_abs();
        let mut acc = 1.0;
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            base *= base;
            k >>= 1;
        }
        acc
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// Forward-mode dual number `re + du·ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<S> {
    pub re: S,
    pub du: S,
}

impl<S: Scalar> Dual<S> {
    pub fn new(re: S, du: S) -> Self {
        Dual { re, du }
    }

    /// A variable seeded with tangent `du`.
    pub fn var(re: S, du: S) -> Self {
        Dual { re, du }
    }

    pub fn constant(re: S) -> Self {
        Dual { re, du: S::zero() }
    }

    #[inline]
    fn chain(self, f: S, df: S) -> Self {
        Dual { re: f, du: df * self.du }
    }
}

/// Seeds a point `x` with tangent `dir`, componentwise.
pub fn seed<S: Scalar>(x: &[S], dir: &[S]) -> alloc::vec::Vec<Dual<S>> {
    debug_assert_eq!(x.len(), dir.len());
    x.iter().zip(dir).map(|(&a, &b)| Dual::var(a, b)).collect()
}

/// Lifts plain values to constants one derivative level up.
pub fn lift<S: Scalar>(x: &[S]) -> alloc::vec::Vec<Dual<S>> {
    x.iter().map(|&a| Dual::constant(a)).collect()
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Dual { re: self.re + rhs.re, du: self.du + rhs.du }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Dual { re: self.re - rhs.re, du: self.du - rhs.du }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Dual { re: self.re * rhs.re, du: self.du * rhs.re + self.re * rhs.du }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = rhs.re.recip();
        let q = self.re * inv;
        Dual { re: q, du: (self.du - q * rhs.du) * inv }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual { re: -self.re, du: -self.du }
    }
}

impl<S: Scalar> AddAssign for Dual<S> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<S: Scalar> SubAssign for Dual<S> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<S: Scalar> MulAssign for Dual<S> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<S: Scalar> Add<f64> for Dual<S> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        Dual { re: self.re + rhs, du: self.du }
    }
}

impl<S: Scalar> Sub<f64> for Dual<S> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        Dual { re: self.re - rhs, du: self.du }
    }
}

impl<S: Scalar> Mul<f64> for Dual<S> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Dual { re: self.re * rhs, du: self.du * rhs }
    }
}

impl<S: Scalar> Div<f64> for Dual<S> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        Dual { re: self.re / rhs, du: self.du / rhs }
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn cst(c: f64) -> Self {
        Dual::constant(S::cst(c))
    }

    fn value(self) -> f64 {
        self.re.value()
    }

    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }

    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }

    fn tan(self) -> Self {
        let t = self.re.tan();
        self.chain(t, t * t + 1.0)
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }

    fn ln(self) -> Self {
        self.chain(self.re.ln(), self.re.recip())
    }

    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.chain(r, (r * 2.0).recip())
    }

    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.chain(t, -(t * t) + 1.0)
    }

    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        self.chain(self.re.powi(n), self.re.powi(n - 1) * (n as f64))
    }

    fn is_finite(self) -> bool {
        self.re.is_finite() && self.du.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(re: f64, du: f64) -> Dual<f64> {
        Dual::var(re, du)
    }

    #[test]
    fn product_rule() {
        let x = d(3.0, 1.0);
        let f = x * x + x * 2.0;
        assert_eq!(f.re, 15.0);
        assert_eq!(f.du, 8.0);
    }

    #[test]
    fn quotient_and_transcendentals_match_closed_forms() {
        let x0: f64 = 0.7;
        let x = d(x0, 1.0);
        let checks = [
            (x.sin().du, x0.cos()),
            (x.cos().du, -x0.sin()),
            (x.tan().du, 1.0 / (x0.cos() * x0.cos())),
            (x.exp().du, x0.exp()),
            (x.ln().du, 1.0 / x0),
            (x.sqrt().du, 0.5 / x0.sqrt()),
            (x.tanh().du, 1.0 - x0.tanh() * x0.tanh()),
            (x.powi(3).du, 3.0 * x0 * x0),
            (x.powi(-2).du, -2.0 / (x0 * x0 * x0)),
            ((Dual::constant(1.0) / x).du, -1.0 / (x0 * x0)),
        ];
        for (got, want) in checks {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn nested_dual_gives_second_derivative() {
        // f(x) = x^3 sin x, f'' = 6x sin x + 6x^2 cos x - x^3 sin x
        let x0: f64 = 1.3;
        let x = Dual::var(Dual::var(x0, 1.0), Dual::constant(1.0));
        let f = x.powi(3) * x.sin();
        let want = 6.0 * x0 * x0.sin() + 6.0 * x0 * x0 * x0.cos() - x0.powi(3) * x0.sin();
        assert!((f.du.du - want).abs() < 1e-12);
        assert_eq!(f.re.du, f.du.re);
    }

    #[test]
    fn powi_zero_and_negative_base() {
        assert_eq!(Scalar::powi(-2.0_f64, 3), -8.0);
        assert_eq!(Scalar::powi(2.0_f64, 0), 1.0);
        assert_eq!(d(2.0, 1.0).powi(0), Dual::cst(1.0));
    }

    #[test]
    fn finiteness_sees_tangent() {
        assert!(d(1.0, 2.0).is_finite());
        assert!(!d(1.0, f64::NAN).is_finite());
        assert!(!(d(0.0, 1.0).ln()).is_finite());
    }
}
