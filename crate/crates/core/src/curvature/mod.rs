//! Curvature and cocurvature of a connection.
//!
//! `R(X, Y) = −P_V [P_H X, P_H Y]` measures how far the horizontal distribution
//! is from integrable. Along a section `s` it is computed two ways:
//!
//! - from horizontal lifts: `CURV_s(u, v) = (H_{[u,v]} − [H_u, H_v]) ∘ s`,
//! - from covariant-derivative fields: `[∇_u, ∇_v](s) − ∇_{[u,v]} s`, with `∇_u`
//!   the vertical field extended off the graph of `s` by a foliation.
//!
//! The first agrees with the classical `R(u, v)s = ∇_u∇_v s − ∇_v∇_u s − ∇_{[u,v]} s`
//! for linear connections. The second is a bracket of vertical fields, which
//! only sees fibre derivatives of `Γ`; [`commutator_residuals`] reports how far
//! the two differ, together with the cross bracket `[H_v, ∇_u] + [∇_v, H_u]`.

pub mod linear;

use alloc::vec::Vec;

use crate::calculus::{eval_checked, lie_bracket, ConstantField, LieBracket, ScalarMap, Scaled, VectorMap};
use crate::connection::{
    covariant_derivative, extend_covariant_derivative, horizontal_lift, horizontal_lift_field, Connection, Foliation,
    Point, TotalTangent,
};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_abs_diff};
use crate::scalar::Scalar;

/// A vertical tangent vector at `anchor`, stored by its fibre part.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalValue {
    pub anchor: Point,
    pub fibre_part: Vec<f64>,
}

impl VerticalValue {
    pub fn to_tangent(&self) -> TotalTangent {
        let m = self.anchor.base().len();
        TotalTangent { anchor: self.anchor.clone(), base_part: alloc::vec![0.0; m], fibre_part: self.fibre_part.clone() }
    }
}

fn check_same_anchor(e: &Point, ts: &[&TotalTangent]) -> Result<()> {
    e.expect_total()?;
    for t in ts {
        if t.anchor != *e {
            return Err(Error::Invalid(alloc::string::String::from("tangent vector is anchored at a different point")));
        }
    }
    Ok(())
}

fn finite(v: Vec<f64>, what: &'static str) -> Result<Vec<f64>> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFinite { what })
    }
}

/// Fibre part of `−P_V(e)·t` for a stacked tangent `t`.
fn minus_vertical<C: Connection>(conn: &C, e: &Point, t: &[f64]) -> Vec<f64> {
    let m = e.base().len();
    let g = conn.gamma(e.base(), e.fibre(), &t[..m]);
    t[m..].iter().zip(g).map(|(b, g)| -(b + g)).collect()
}

/// `R(X, Y)` at `e`. `P_H X` and `P_H Y` are extended as horizontal lifts of
/// constant base fields, which is enough because `R` is tensorial.
pub fn curvature<C: Connection>(conn: &C, e: &Point, x: &TotalTangent, y: &TotalTangent) -> Result<VerticalValue> {
    check_same_anchor(e, &[x, y])?;
    conn.bundle().total_point(e.base(), e.fibre())?;
    let hx = horizontal_lift_field(conn, ConstantField(x.base_part.clone()));
    let hy = horizontal_lift_field(conn, ConstantField(y.base_part.clone()));
    let br = eval_checked(&lie_bracket(hx, hy), e.coords(), "curvature bracket")?;
    Ok(VerticalValue { anchor: e.clone(), fibre_part: finite(minus_vertical(conn, e, &br), "curvature")? })
}

/// `P_V` applied to a constant-coefficient extension of a tangent vector:
/// `(x, y) ↦ (0, b + Γ(x, y)·a)`.
struct VerticalExtension<'a, C> {
    conn: &'a C,
    base: &'a [f64],
    fibre: &'a [f64],
}

impl<C: Connection> VectorMap for VerticalExtension<'_, C> {
    fn eval<S: Scalar>(&self, e: &[S]) -> Vec<S> {
        let m = self.base.len();
        let (x, y) = e.split_at(m);
        let a: Vec<S> = self.base.iter().map(|&c| S::cst(c)).collect();
        let g = self.conn.gamma(x, y, &a);
        let mut out = alloc::vec![S::zero(); m];
        out.extend(self.fibre.iter().zip(g).map(|(&b, g)| g + b));
        out
    }
}

/// `−P_H [V_X, V_Y]` at `e`, with `V_X`, `V_Y` vertical extensions of
/// `P_V X`, `P_V Y`. Vanishes because the fibres integrate the vertical bundle.
pub fn cocurvature<C: Connection>(conn: &C, e: &Point, x: &TotalTangent, y: &TotalTangent) -> Result<TotalTangent> {
    check_same_anchor(e, &[x, y])?;
    conn.bundle().total_point(e.base(), e.fibre())?;
    let vx = VerticalExtension { conn, base: &x.base_part, fibre: &x.fibre_part };
    let vy = VerticalExtension { conn, base: &y.base_part, fibre: &y.fibre_part };
    let br = eval_checked(&lie_bracket(vx, vy), e.coords(), "cocurvature bracket")?;
    let m = e.base().len();
    // −P_H b = −(b_base, −Γ b_base).
    let g = conn.gamma(e.base(), e.fibre(), &br[..m]);
    let base_part = br[..m].iter().map(|c| -c).collect();
    let fibre_part = finite(g, "cocurvature")?;
    Ok(TotalTangent { anchor: e.clone(), base_part, fibre_part })
}

/// `H_{[u,v]} − [H_u, H_v]` at `(x, s(x))` as a full tangent vector.
/// Its base part vanishes because horizontal lifts are projectable.
pub fn lift_bracket_defect<C: Connection, Sec: VectorMap, U: VectorMap, V: VectorMap>(
    conn: &C,
    s: &Sec,
    u: &U,
    v: &V,
    x: &Point,
) -> Result<TotalTangent> {
    let e = conn.bundle().graph_point(s, x)?;
    let uv = eval_checked(&lie_bracket(u, v), x.coords(), "base bracket")?;
    let h_uv = horizontal_lift(conn, &e, &uv)?;
    let br = eval_checked(&lie_bracket(horizontal_lift_field(conn, u), horizontal_lift_field(conn, v)), e.coords(), "lift bracket")?;
    let diff: Vec<f64> = h_uv.stacked().iter().zip(&br).map(|(a, b)| a - b).collect();
    Ok(TotalTangent::from_stacked(e, diff))
}

/// `CURV_s(u, v)` from horizontal lifts.
pub fn curv_via_lifts<C: Connection, Sec: VectorMap, U: VectorMap, V: VectorMap>(
    conn: &C,
    s: &Sec,
    u: &U,
    v: &V,
    x: &Point,
) -> Result<VerticalValue> {
    let t = lift_bracket_defect(conn, s, u, v, x)?;
    Ok(VerticalValue { anchor: t.anchor, fibre_part: t.fibre_part })
}

/// `−P_V [H_u, H_v]` at `(x, s(x))`.
pub fn curv_via_vertical_projection<C: Connection, Sec: VectorMap, U: VectorMap, V: VectorMap>(
    conn: &C,
    s: &Sec,
    u: &U,
    v: &V,
    x: &Point,
) -> Result<VerticalValue> {
    let e = conn.bundle().graph_point(s, x)?;
    let br = eval_checked(&lie_bracket(horizontal_lift_field(conn, u), horizontal_lift_field(conn, v)), e.coords(), "lift bracket")?;
    Ok(VerticalValue { fibre_part: finite(minus_vertical(conn, &e, &br), "curvature")?, anchor: e })
}

/// `[∇_u, ∇_v](s) − ∇_{[u,v]} s` at `(x, s(x))`, with the covariant fields
/// extended by the translation foliation.
pub fn curv_via_covariant<C: Connection, Sec: VectorMap, U: VectorMap, V: VectorMap>(
    conn: &C,
    s: &Sec,
    u: &U,
    v: &V,
    x: &Point,
) -> Result<VerticalValue> {
    curv_via_covariant_with(conn, s, u, v, x, &Foliation::Translation)
}

/// [`curv_via_covariant`] with the covariant fields extended by `foliation`.
pub fn curv_via_covariant_with<C: Connection, Sec: VectorMap, U: VectorMap, V: VectorMap>(
    conn: &C,
    s: &Sec,
    u: &U,
    v: &V,
    x: &Point,
    foliation: &Foliation,
) -> Result<VerticalValue> {
    let e = conn.bundle().graph_point(s, x)?;
    let nu = extend_covariant_derivative(conn, s, u).with_foliation(foliation.clone());
    let nv = extend_covariant_derivative(conn, s, v).with_foliation(foliation.clone());
    let br = eval_checked(&lie_bracket(nu, nv), e.coords(), "covariant bracket")?;
    let d_uv = covariant_derivative(conn, s, &LieBracket { x: u, y: v }, x)?;
    let m = e.base().len();
    let fibre_part = br[m..].iter().zip(d_uv).map(|(a, b)| a - b).collect();
    Ok(VerticalValue { anchor: e, fibre_part: finite(fibre_part, "covariant curvature")? })
}

/// `[H_v, ∇_u] + [∇_v, H_u]` at `(x, s(x))`.
pub fn cross_bracket<C: Connection, Sec: VectorMap, U: VectorMap, V: VectorMap>(
    conn: &C,
    s: &Sec,
    u: &U,
    v: &V,
    x: &Point,
) -> Result<TotalTangent> {
    let e = conn.bundle().graph_point(s, x)?;
    let nu = extend_covariant_derivative(conn, s, u);
    let nv = extend_covariant_derivative(conn, s, v);
    let a = eval_checked(&lie_bracket(horizontal_lift_field(conn, v), &nu), e.coords(), "cross bracket")?;
    let b = eval_checked(&lie_bracket(&nv, horizontal_lift_field(conn, u)), e.coords(), "cross bracket")?;
    Ok(TotalTangent::from_stacked(e, a.iter().zip(&b).map(|(p, q)| p + q).collect()))
}

/// Both curvature computations at one base point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReportRow {
    pub point: Point,
    pub via_lifts: Vec<f64>,
    pub via_covariant: Vec<f64>,
    /// `|via_lifts − via_covariant|_∞`.
    pub residual: f64,
    /// `|[H_v, ∇_u] + [∇_v, H_u]|_∞` at the graph point.
    pub cross_residual: f64,
}

/// One [`CurvatureReportRow`] per base sample.
pub fn commutator_residuals<C: Connection, Sec: VectorMap, U: VectorMap, V: VectorMap>(
    conn: &C,
    s: &Sec,
    u: &U,
    v: &V,
    samples: &[Point],
) -> Result<Vec<CurvatureReportRow>> {
    samples
        .iter()
        .map(|x| {
            let lifts = curv_via_lifts(conn, s, u, v, x)?;
            let cov = curv_via_covariant(conn, s, u, v, x)?;
            let cross = cross_bracket(conn, s, u, v, x)?;
            Ok(CurvatureReportRow {
                point: x.clone(),
                residual: max_abs_diff(&lifts.fibre_part, &cov.fibre_part),
                cross_residual: max_abs(&cross.stacked()),
                via_lifts: lifts.fibre_part,
                via_covariant: cov.fibre_part,
            })
        })
        .collect()
}

/// Largest of `|R(fX, Y) − f(e)R(X, Y)|` and `|R(X, fY) − f(e)R(X, Y)|`, with
/// `fX` bracketed as the field `f·H_X` rather than by rescaling the result.
pub fn tensoriality_check_curvature<C: Connection, F: ScalarMap>(
    conn: &C,
    e: &Point,
    x: &TotalTangent,
    y: &TotalTangent,
    f: &F,
) -> Result<f64> {
    check_same_anchor(e, &[x, y])?;
    conn.bundle().total_point(e.base(), e.fibre())?;
    let hx = horizontal_lift_field(conn, ConstantField(x.base_part.clone()));
    let hy = horizontal_lift_field(conn, ConstantField(y.base_part.clone()));
    let fe = f.eval(e.coords());
    if !fe.is_finite() {
        return Err(Error::NonFinite { what: "scalar field" });
    }
    let plain = minus_vertical(conn, e, &eval_checked(&lie_bracket(&hx, &hy), e.coords(), "curvature bracket")?);
    let scaled_plain: Vec<f64> = plain.iter().map(|c| c * fe).collect();
    let left = Scaled { factor: f, field: &hx };
    let right = Scaled { factor: f, field: &hy };
    let r_fx = minus_vertical(conn, e, &eval_checked(&lie_bracket(&left, &hy), e.coords(), "curvature bracket")?);
    let r_fy = minus_vertical(conn, e, &eval_checked(&lie_bracket(&hx, &right), e.coords(), "curvature bracket")?);
    Ok(max_abs_diff(&r_fx, &scaled_plain).max(max_abs_diff(&r_fy, &scaled_plain)))
}
