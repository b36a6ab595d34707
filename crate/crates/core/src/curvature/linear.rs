//! Linear connections: Leibniz rule, second covariant derivatives and torsion.
//!
//! For a linear connection the vertical bundle is identified with `E` itself,
//! so `x ↦ ∇_v s(x)` is again a section and covariant derivatives compose.

use alloc::vec::Vec;

use crate::calculus::{derivative_along, eval_checked, lie_bracket, LieBracket, ScalarMap, Scaled, VectorMap};
use crate::connection::{Connection, ConnectionKind, CovariantSection, Point, TrivializedBundle};
use crate::error::{Error, Result};
use crate::linalg::max_abs_diff;
use crate::scalar::Scalar;

/// A connection known to be linear in the fibre.
#[derive(Debug, Clone, Copy)]
pub struct LinearConnection<C>(C);

impl<C: Connection> LinearConnection<C> {
    pub fn new(conn: C) -> Result<Self> {
        match conn.kind() {
            ConnectionKind::Linear => Ok(LinearConnection(conn)),
            ConnectionKind::Nonlinear => Err(Error::NotLinear),
        }
    }

    pub fn inner(&self) -> &C {
        &self.0
    }

    pub fn into_inner(self) -> C {
        self.0
    }

    /// Checks that the fibre is the tangent space of the base.
    pub fn require_tangent_bundle(&self) -> Result<()> {
        let b = self.0.bundle();
        if b.base_dim() == b.fibre_dim() {
            Ok(())
        } else {
            Err(Error::NotTangentBundle { base_dim: b.base_dim(), fibre_dim: b.fibre_dim() })
        }
    }
}

impl<C: Connection> Connection for LinearConnection<C> {
    fn bundle(&self) -> &TrivializedBundle {
        self.0.bundle()
    }

    fn kind(&self) -> ConnectionKind {
        ConnectionKind::Linear
    }

    fn gamma<S: Scalar>(&self, x: &[S], y: &[S], w: &[S]) -> Vec<S> {
        self.0.gamma(x, y, w)
    }
}

fn base_checked<C: Connection>(conn: &C, x: &Point) -> Result<()> {
    x.expect_base()?;
    conn.bundle().base_point(x.coords()).map(|_| ())
}

/// `∇_v s` as a section, evaluated at `x` without requiring `∇_v s(x)` to lie in the fibre box.
fn nabla<C: Connection, Sec: VectorMap, V: VectorMap>(conn: &C, s: Sec, v: V, x: &[f64]) -> Result<Vec<f64>> {
    eval_checked(&CovariantSection { conn, s, v }, x, "covariant derivative")
}

/// `x ↦ ∇_u v − ∇_v u − [u, v]` for a connection on `TM`.
#[derive(Debug, Clone, Copy)]
pub struct TorsionField<C, U, V> {
    pub conn: C,
    pub u: U,
    pub v: V,
}

impl<C: Connection, U: VectorMap, V: VectorMap> VectorMap for TorsionField<C, U, V> {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let a = CovariantSection { conn: &self.conn, s: &self.v, v: &self.u }.eval(x);
        let b = CovariantSection { conn: &self.conn, s: &self.u, v: &self.v }.eval(x);
        let c = lie_bracket(&self.u, &self.v).eval(x);
        a.into_iter().zip(b).zip(c).map(|((a, b), c)| a - b - c).collect()
    }
}

/// Torsion `∇_u v − ∇_v u − [u, v]` at `x`; `conn` must live on `TM`.
pub fn torsion<C: Connection, U: VectorMap, V: VectorMap>(
    conn: &LinearConnection<C>,
    u: &U,
    v: &V,
    x: &Point,
) -> Result<Vec<f64>> {
    conn.require_tangent_bundle()?;
    base_checked(conn, x)?;
    eval_checked(&TorsionField { conn, u, v }, x.coords(), "torsion")
}

/// `∇²_{uv} s = ∇_u(∇_v s) − ∇_{∇_u v} s`, with `∇_u v` taken in `base_conn` on `TM`.
pub fn second_covariant_derivative<C: Connection, B: Connection, Sec: VectorMap, U: VectorMap, V: VectorMap>(
    conn: &LinearConnection<C>,
    base_conn: &LinearConnection<B>,
    s: &Sec,
    u: &U,
    v: &V,
    x: &Point,
) -> Result<Vec<f64>> {
    base_conn.require_tangent_bundle()?;
    if base_conn.bundle().base_dim() != conn.bundle().base_dim() {
        return Err(Error::DimensionMismatch {
            what: "base connection",
            expected: conn.bundle().base_dim(),
            found: base_conn.bundle().base_dim(),
        });
    }
    base_checked(conn, x)?;
    let first = nabla(conn, CovariantSection { conn, s, v }, u, x.coords())?;
    let nabla_u_v = CovariantSection { conn: base_conn, s: v, v: u };
    let second = nabla(conn, s, nabla_u_v, x.coords())?;
    Ok(first.iter().zip(second).map(|(a, b)| a - b).collect())
}

/// `(∇_u∇_v − ∇_v∇_u − ∇_{[u,v]}) s` at `x`.
pub fn curv_via_composition<C: Connection, Sec: VectorMap, U: VectorMap, V: VectorMap>(
    conn: &LinearConnection<C>,
    s: &Sec,
    u: &U,
    v: &V,
    x: &Point,
) -> Result<Vec<f64>> {
    base_checked(conn, x)?;
    let uv = nabla(conn, CovariantSection { conn, s, v }, u, x.coords())?;
    let vu = nabla(conn, CovariantSection { conn, s, v: u }, v, x.coords())?;
    let br = nabla(conn, s, LieBracket { x: u, y: v }, x.coords())?;
    Ok(uv.iter().zip(vu).zip(br).map(|((a, b), c)| a - b - c).collect())
}

/// `(∇²_{uv} − ∇²_{vu} + ∇_{TORS(u,v)}) s` at `x`, for a connection on `TM`.
pub fn curv_via_second_derivative<C: Connection, Sec: VectorMap, U: VectorMap, V: VectorMap>(
    conn: &LinearConnection<C>,
    s: &Sec,
    u: &U,
    v: &V,
    x: &Point,
) -> Result<Vec<f64>> {
    conn.require_tangent_bundle()?;
    let a = second_covariant_derivative(conn, conn, s, u, v, x)?;
    let b = second_covariant_derivative(conn, conn, s, v, u, x)?;
    let t = nabla(conn, s, TorsionField { conn, u, v }, x.coords())?;
    Ok(a.iter().zip(b).zip(t).map(|((a, b), t)| a - b + t).collect())
}

/// Residual of `∇_v(f s) = (Df·v) s + f ∇_v s` at `x`.
pub fn leibniz_check<C: Connection, Sec: VectorMap, F: ScalarMap, V: VectorMap>(
    conn: &LinearConnection<C>,
    s: &Sec,
    f: &F,
    v: &V,
    x: &Point,
) -> Result<f64> {
    base_checked(conn, x)?;
    let xc = x.coords();
    let lhs = nabla(conn, Scaled { factor: f, field: s }, v, xc)?;
    let vx = eval_checked(v, xc, "base vector field")?;
    let df_v = derivative_along(&ScalarAsVector(f), xc, &vx)[0];
    let fx = f.eval(xc);
    let sx = eval_checked(s, xc, "section")?;
    let ds = nabla(conn, s, v, xc)?;
    let rhs: Vec<f64> = sx.iter().zip(&ds).map(|(si, di)| df_v * si + fx * di).collect();
    Ok(max_abs_diff(&lhs, &rhs))
}

struct ScalarAsVector<F>(F);

impl<F: ScalarMap> VectorMap for ScalarAsVector<F> {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        alloc::vec![self.0.eval(x)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{ConstantField, ConstantScalar};
    use crate::catalog::{ChristoffelConnection, FlatConnection, NonlinearDemo, SphereConnection};
    use crate::curvature::curv_via_lifts;
    use crate::linalg::max_abs;
    use alloc::vec;

    struct Wavy;
    impl VectorMap for Wavy {
        fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![x[0].sin() * 0.5 + x[1] * 0.2, (x[0] * x[1]).cos()]
        }
    }

    struct Rot;
    impl VectorMap for Rot {
        fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![-x[1] * 0.3 + 0.5, x[0] * 0.2 + 1.0]
        }
    }

    struct Swirl;
    impl VectorMap for Swirl {
        fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![(x[1] * 2.0).sin(), x[0] * x[0] * 0.3 - 0.1]
        }
    }

    struct SinX1;
    impl ScalarMap for SinX1 {
        fn eval<S: Scalar>(&self, x: &[S]) -> S {
            x[0].sin()
        }
    }

    fn sphere() -> LinearConnection<SphereConnection> {
        LinearConnection::new(SphereConnection::default()).unwrap()
    }

    #[test]
    fn nonlinear_connection_is_rejected() {
        assert!(matches!(LinearConnection::new(NonlinearDemo::default()), Err(Error::NotLinear)));
    }

    #[test]
    fn torsion_of_asymmetric_christoffels() {
        let mut c = ChristoffelConnection::zero(2).unwrap();
        c.set_constant(0, 0, 1, 1.0);
        let conn = LinearConnection::new(c).unwrap();
        let x = conn.bundle().base_point(&[0.3, -0.4]).unwrap();
        let t = torsion(&conn, &ConstantField(vec![1.0, 0.0]), &ConstantField(vec![0.0, 1.0]), &x).unwrap();
        // T^a_bc = Γ^a_bc − Γ^a_cb, so T(∂₁, ∂₂)¹ = 1.
        assert_eq!(t, vec![1.0, 0.0]);
        let t = torsion(&conn, &ConstantField(vec![0.0, 1.0]), &ConstantField(vec![1.0, 0.0]), &x).unwrap();
        assert_eq!(t, vec![-1.0, 0.0]);
    }

    #[test]
    fn sphere_torsion_vanishes() {
        let conn = sphere();
        let x = conn.bundle().base_point(&[1.3, 0.2]).unwrap();
        assert!(max_abs(&torsion(&conn, &Rot, &Swirl, &x).unwrap()) < 1e-12);
        assert!(max_abs(&torsion(&conn, &Rot, &Rot, &x).unwrap()) == 0.0);
    }

    #[test]
    fn torsion_requires_tangent_bundle() {
        let conn = LinearConnection::new(FlatConnection::new(2, 1).unwrap()).unwrap();
        let x = conn.bundle().base_point(&[0.0, 0.0]).unwrap();
        assert!(matches!(torsion(&conn, &Rot, &Swirl, &x), Err(Error::NotTangentBundle { .. })));
    }

    #[test]
    fn leibniz_rule_holds() {
        let conn = sphere();
        let x = conn.bundle().base_point(&[1.0, -0.5]).unwrap();
        assert!(leibniz_check(&conn, &Wavy, &SinX1, &Rot, &x).unwrap() < 1e-12);
        assert_eq!(leibniz_check(&conn, &Wavy, &ConstantScalar(1.0), &Rot, &x).unwrap(), 0.0);
        assert!(leibniz_check(&conn, &Wavy, &ConstantScalar(2.5), &Rot, &x).unwrap() < 1e-14);
    }

    #[test]
    fn composition_and_second_derivative_forms_match_lift_curvature() {
        let conn = sphere();
        let x = conn.bundle().base_point(&[1.1, 0.7]).unwrap();
        let lifts = curv_via_lifts(conn.inner(), &Wavy, &Rot, &Swirl, &x).unwrap();
        let comp = curv_via_composition(&conn, &Wavy, &Rot, &Swirl, &x).unwrap();
        let second = curv_via_second_derivative(&conn, &Wavy, &Rot, &Swirl, &x).unwrap();
        assert!(max_abs_diff(&lifts.fibre_part, &comp) < 1e-10);
        assert!(max_abs_diff(&comp, &second) < 1e-10);
    }

    #[test]
    fn flat_second_derivative_of_constant_section_is_zero() {
        let conn = LinearConnection::new(FlatConnection::default()).unwrap();
        let x = conn.bundle().base_point(&[0.5, 0.1]).unwrap();
        let d = second_covariant_derivative(&conn, &conn, &ConstantField(vec![1.0, 2.0]), &Rot, &Swirl, &x).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
    }

    #[test]
    fn second_derivative_symmetric_part_for_equal_fields() {
        let conn = sphere();
        let x = conn.bundle().base_point(&[0.8, 0.1]).unwrap();
        let c = curv_via_second_derivative(&conn, &Wavy, &Rot, &Rot, &x).unwrap();
        assert!(max_abs(&c) < 1e-13);
    }
}
