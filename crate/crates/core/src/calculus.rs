//! Evaluator traits, Jacobians and Lie brackets.
//!
//! Every map in the crate implements one of [`VectorMap`], [`ScalarMap`] or
//! [`CurveMap`] with an `eval` that is generic over [`Scalar`]. Feeding it
//! [`Dual`] inputs yields exact directional derivatives; nesting duals yields
//! second derivatives. In trivialized coordinates sections, base vector fields
//! and total-space vector fields are all plain vector maps; their role is
//! carried by the operation that consumes them.

use alloc::vec::Vec;

use crate::connection::{BoxDomain, Point};
use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, Matrix};
use crate::scalar::{seed, Dual, Scalar};

/// A smooth map `Rⁿ → Rᵏ`, closed under derivative-carrying scalars.
pub trait VectorMap {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S>;
}

/// A smooth function `Rⁿ → R`.
pub trait ScalarMap {
    fn eval<S: Scalar>(&self, x: &[S]) -> S;
}

/// A smooth one-parameter map `t ↦ Rᵏ` (curves, and vectors along curves).
pub trait CurveMap {
    fn eval<S: Scalar>(&self, t: S) -> Vec<S>;
}

impl<T: VectorMap> VectorMap for &T {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        (**self).eval(x)
    }
}

impl<T: ScalarMap> ScalarMap for &T {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        (**self).eval(x)
    }
}

impl<T: CurveMap> CurveMap for &T {
    fn eval<S: Scalar>(&self, t: S) -> Vec<S> {
        (**self).eval(t)
    }
}

/// Value and directional derivative `Df(x)·dir`, in one forward pass.
pub fn directional<S: Scalar, F: VectorMap + ?Sized>(f: &F, x: &[S], dir: &[S]) -> (Vec<S>, Vec<S>) {
    let out = f.eval(&seed(x, dir));
    out.into_iter().map(|d| (d.re, d.du)).unzip()
}

/// `Df(x)·dir` only.
pub fn derivative_along<S: Scalar, F: VectorMap + ?Sized>(f: &F, x: &[S], dir: &[S]) -> Vec<S> {
    directional(f, x, dir).1
}

/// Value and velocity of a curve at `t`.
pub fn curve_velocity<S: Scalar, C: CurveMap + ?Sized>(c: &C, t: S) -> (Vec<S>, Vec<S>) {
    c.eval(Dual::var(t, S::one())).into_iter().map(|d| (d.re, d.du)).unzip()
}

/// Gradient of a scalar function as one directional pass per coordinate.
pub fn gradient<F: ScalarMap + ?Sized>(f: &F, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let dir = unit(x.len(), j);
            f.eval(&seed(x, &dir)).du
        })
        .collect()
}

/// Hessian of a scalar function from nested duals.
pub fn hessian<F: ScalarMap + ?Sized>(f: &F, x: &[f64]) -> Matrix {
    let n = x.len();
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let ei = unit(n, i);
            let ej = unit(n, j);
            let inner: Vec<Dual<f64>> = seed(x, &ei);
            let outer: Vec<Dual<Dual<f64>>> =
                inner.iter().zip(&ej).map(|(&a, &b)| Dual::var(a, Dual::constant(b))).collect();
            h[(i, j)] = f.eval(&outer).du.du;
        }
    }
    h
}

pub(crate) fn unit(n: usize, j: usize) -> Vec<f64> {
    let mut e = alloc::vec![0.0; n];
    e[j] = 1.0;
    e
}

/// Evaluates at plain `f64` and rejects non-finite output.
pub fn eval_checked<F: VectorMap + ?Sized>(f: &F, x: &[f64], what: &'static str) -> Result<Vec<f64>> {
    let out = f.eval(x);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite { what })
    }
}

/// Exact forward-mode Jacobian of `f` at `x`: column `j` is `Df(x)·e_j`.
pub fn jacobian<F: VectorMap + ?Sized>(f: &F, domain: &BoxDomain, x: &[f64]) -> Result<Matrix> {
    domain.check(x)?;
    let columns: Vec<Vec<f64>> = (0..x.len()).map(|j| derivative_along(f, x, &unit(x.len(), j))).collect();
    let rows = columns.first().map_or_else(|| f.eval(x).len(), Vec::len);
    let jac = Matrix::from_columns(&columns, rows);
    if jac.is_finite() {
        Ok(jac)
    } else {
        Err(Error::NonFinite { what: "jacobian" })
    }
}

/// The Lie bracket `[X, Y](e) = DY(e)·X(e) − DX(e)·Y(e)` as a vector field.
#[derive(Debug, Clone, Copy)]
pub struct LieBracket<X, Y> {
    pub x: X,
    pub y: Y,
}

impl<X: VectorMap, Y: VectorMap> VectorMap for LieBracket<X, Y> {
    fn eval<S: Scalar>(&self, e: &[S]) -> Vec<S> {
        let xv = self.x.eval(e);
        let yv = self.y.eval(e);
        let dy_x = derivative_along(&self.y, e, &xv);
        let dx_y = derivative_along(&self.x, e, &yv);
        dy_x.into_iter().zip(dx_y).map(|(a, b)| a - b).collect()
    }
}

pub fn lie_bracket<X: VectorMap, Y: VectorMap>(x: X, y: Y) -> LieBracket<X, Y> {
    LieBracket { x, y }
}

/// Max over `samples` of `|Tp·X(e) − v(p(e))|`. In a trivialization `Tp`
/// keeps the first `m` components.
pub fn check_p_related<X: VectorMap, V: VectorMap>(x: &X, v: &V, samples: &[Point]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for e in samples {
        e.expect_total()?;
        let xe = eval_checked(x, e.coords(), "total vector field")?;
        let vx = eval_checked(v, e.base(), "base vector field")?;
        let m = vx.len();
        worst = worst.max(max_abs_diff(&xe[..m], &vx));
    }
    Ok(worst)
}

/// A constant vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField(pub Vec<f64>);

impl VectorMap for ConstantField {
    fn eval<S: Scalar>(&self, _x: &[S]) -> Vec<S> {
        self.0.iter().map(|&c| S::cst(c)).collect()
    }
}

/// A constant scalar function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantScalar(pub f64);

impl ScalarMap for ConstantScalar {
    fn eval<S: Scalar>(&self, _x: &[S]) -> S {
        S::cst(self.0)
    }
}

/// `x ↦ g(f(x))`.
#[derive(Debug, Clone, Copy)]
pub struct Composed<F, G> {
    pub inner: F,
    pub outer: G,
}

impl<F: VectorMap, G: VectorMap> VectorMap for Composed<F, G> {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.outer.eval(&self.inner.eval(x))
    }
}

/// `x ↦ φ(x)·F(x)` for a scalar function `φ`.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<P, F> {
    pub factor: P,
    pub field: F,
}

impl<P: ScalarMap, F: VectorMap> VectorMap for Scaled<P, F> {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let phi = self.factor.eval(x);
        self.field.eval(x).into_iter().map(|v| v * phi).collect()
    }
}

/// `x ↦ A(x) + B(x)`.
#[derive(Debug, Clone, Copy)]
pub struct Sum<A, B>(pub A, pub B);

impl<A: VectorMap, B: VectorMap> VectorMap for Sum<A, B> {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.0.eval(x).into_iter().zip(self.1.eval(x)).map(|(a, b)| a + b).collect()
    }
}

/// `x ↦ c·A(x)` for a real constant `c`.
#[derive(Debug, Clone, Copy)]
pub struct Times<A>(pub f64, pub A);

impl<A: VectorMap> VectorMap for Times<A> {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.1.eval(x).into_iter().map(|a| a * self.0).collect()
    }
}

/// Restriction of a vector map to points `(x, y)`: evaluates on `x` only.
/// Turns a base field into a field on the total space that ignores the fibre.
#[derive(Debug, Clone, Copy)]
pub struct OnBase<F> {
    pub base_dim: usize,
    pub field: F,
}

impl<F: VectorMap> VectorMap for OnBase<F> {
    fn eval<S: Scalar>(&self, e: &[S]) -> Vec<S> {
        self.field.eval(&e[..self.base_dim])
    }
}

/// Used to push an `f64` slice one derivative level up.
pub(crate) fn constants<S: Scalar>(x: &[f64]) -> Vec<S> {
    x.iter().map(|&c| S::cst(c)).collect()
}
