//! Trivialized bundles, connections, horizontal lifts and covariant derivatives.
//!
//! A bundle `p: E → M` is modelled in one chart as `base_box × fibre_box`, with
//! `p(x, y) = x`. Tangent vectors at `e = (x, y)` split into a base part (the
//! image under `Tp`) and a fibre part. A connection is given by its
//! coefficient map `Γ(x, y)`, linear in the base direction:
//!
//! ```text
//! P_V (a, b) = (0, b + Γ(x,y)·a)        P_H = I − P_V
//! H_e(a)     = (a, −Γ(x,y)·a)           horizontal lift
//! ```
//!
//! For linear connections `(Γ(x,y)·a)^i = Γ^i_{jk}(x) a^j y^k`, which gives the
//! classical covariant derivative `∇_v s = Ds·v + Γ(v, s)`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::calculus::{constants, derivative_along, eval_checked, unit, VectorMap};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Base,
    Total,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Base => "base",
            Space::Total => "total-space",
        })
    }
}

/// An open axis-aligned box `∏ (lo_i, hi_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Invalid(String::from("box bounds must be nonempty and of equal length")));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return Err(Error::Invalid(String::from("box bounds must be finite with lo < hi")));
        }
        Ok(BoxDomain { lo, hi })
    }

    /// The cube `(lo, hi)ⁿ`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(alloc::vec![lo; n], alloc::vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l < *v && v < h)
    }

    pub(crate) fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { what: "point", expected: self.dim(), found: x.len() });
        }
        if !self.contains(x) {
            return Err(Error::OutsideDomain { space: Space::Total, coords: x.to_vec() });
        }
        Ok(())
    }

    /// The product box `self × other`.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        BoxDomain { lo, hi }
    }

    /// The box shrunk by `fraction` of its width on each side.
    pub fn shrunk(&self, fraction: f64) -> BoxDomain {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let w = h - l;
                (l + fraction * w, h - fraction * w)
            })
            .unzip();
        BoxDomain { lo, hi }
    }
}

/// A point of `M` or of `E`, validated against the chart when constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
    base_dim: usize,
    space: Space,
}

impl Point {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn space(&self) -> Space {
        self.space
    }

    /// `p(e)` for a total-space point, the point itself for a base point.
    pub fn base(&self) -> &[f64] {
        &self.coords[..self.base_dim]
    }

    /// Fibre coordinates; empty for a base point.
    pub fn fibre(&self) -> &[f64] {
        &self.coords[self.base_dim..]
    }

    pub fn expect_total(&self) -> Result<()> {
        self.expect(Space::Total)
    }

    pub fn expect_base(&self) -> Result<()> {
        self.expect(Space::Base)
    }

    fn expect(&self, space: Space) -> Result<()> {
        if self.space == space {
            Ok(())
        } else {
            Err(Error::WrongSpace { expected: space, found: self.space })
        }
    }
}

/// An element of `T_e E`, split as `(Tp·X, fibre part)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalTangent {
    pub anchor: Point,
    pub base_part: Vec<f64>,
    pub fibre_part: Vec<f64>,
}

impl TotalTangent {
    pub fn new(anchor: Point, base_part: Vec<f64>, fibre_part: Vec<f64>) -> Result<Self> {
        anchor.expect_total()?;
        if base_part.len() != anchor.base().len() {
            return Err(Error::DimensionMismatch {
                what: "base part",
                expected: anchor.base().len(),
                found: base_part.len(),
            });
        }
        if fibre_part.len() != anchor.fibre().len() {
            return Err(Error::DimensionMismatch {
                what: "fibre part",
                expected: anchor.fibre().len(),
                found: fibre_part.len(),
            });
        }
        Ok(TotalTangent { anchor, base_part, fibre_part })
    }

    pub(crate) fn from_stacked(anchor: Point, v: Vec<f64>) -> Self {
        let m = anchor.base().len();
        let mut base_part = v;
        let fibre_part = base_part.split_off(m);
        TotalTangent { anchor, base_part, fibre_part }
    }

    /// `(base_part, fibre_part)` as one `(m+f)`-vector.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.base_part.clone();
        v.extend_from_slice(&self.fibre_part);
        v
    }

    pub fn is_vertical(&self) -> bool {
        self.base_part.iter().all(|&c| c == 0.0)
    }
}

/// Chart-local model of `p: E → M` as `base_box × fibre_box`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrivializedBundle {
    name: String,
    base_box: BoxDomain,
    fibre_box: BoxDomain,
    base_periods: Vec<Option<f64>>,
}

impl TrivializedBundle {
    pub fn new(name: impl Into<String>, base_box: BoxDomain, fibre_box: BoxDomain) -> Self {
        let base_periods = alloc::vec![None; base_box.dim()];
        TrivializedBundle { name: name.into(), base_box, fibre_box, base_periods }
    }

    /// Marks base coordinates as angles: `x` and `x + k·period` name the same
    /// point, and the trivialization is invariant under that shift.
    pub fn with_base_periods(mut self, periods: Vec<Option<f64>>) -> Self {
        assert_eq!(periods.len(), self.base_dim(), "one period slot per base coordinate");
        self.base_periods = periods;
        self
    }

    pub fn base_periods(&self) -> &[Option<f64>] {
        &self.base_periods
    }

    /// Whether base coordinates `a` and `b` name the same point, up to `tol`.
    pub fn same_base_point(&self, a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).zip(&self.base_periods).all(|((p, q), period)| {
                let mut d = q - p;
                if let Some(t) = period {
                    d -= t * libm::round(d / t);
                }
                libm::fabs(d) <= tol
            })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base_dim(&self) -> usize {
        self.base_box.dim()
    }

    pub fn fibre_dim(&self) -> usize {
        self.fibre_box.dim()
    }

    pub fn total_dim(&self) -> usize {
        self.base_dim() + self.fibre_dim()
    }

    pub fn base_box(&self) -> &BoxDomain {
        &self.base_box
    }

    pub fn fibre_box(&self) -> &BoxDomain {
        &self.fibre_box
    }

    pub fn total_box(&self) -> BoxDomain {
        self.base_box.product(&self.fibre_box)
    }

    pub fn base_point(&self, x: &[f64]) -> Result<Point> {
        if x.len() != self.base_dim() {
            return Err(Error::DimensionMismatch { what: "base point", expected: self.base_dim(), found: x.len() });
        }
        if !self.base_box.contains(x) {
            return Err(Error::OutsideDomain { space: Space::Base, coords: x.to_vec() });
        }
        Ok(Point { coords: x.to_vec(), base_dim: x.len(), space: Space::Base })
    }

    pub fn total_point(&self, x: &[f64], y: &[f64]) -> Result<Point> {
        if x.len() != self.base_dim() {
            return Err(Error::DimensionMismatch { what: "base coordinates", expected: self.base_dim(), found: x.len() });
        }
        if y.len() != self.fibre_dim() {
            return Err(Error::DimensionMismatch {
                what: "fibre coordinates",
                expected: self.fibre_dim(),
                found: y.len(),
            });
        }
        let mut coords = x.to_vec();
        coords.extend_from_slice(y);
        if !(self.base_box.contains(x) && self.fibre_box.contains(y)) {
            return Err(Error::OutsideDomain { space: Space::Total, coords });
        }
        Ok(Point { coords, base_dim: x.len(), space: Space::Total })
    }

    /// A total-space point from stacked `(x, y)` coordinates.
    pub fn total_point_stacked(&self, e: &[f64]) -> Result<Point> {
        if e.len() != self.total_dim() {
            return Err(Error::DimensionMismatch { what: "total-space point", expected: self.total_dim(), found: e.len() });
        }
        let (x, y) = e.split_at(self.base_dim());
        self.total_point(x, y)
    }

    /// `(x, s(x))`, checked against the chart.
    pub fn graph_point<Sec: VectorMap>(&self, s: &Sec, x: &Point) -> Result<Point> {
        x.expect_base()?;
        let y = eval_checked(s, x.coords(), "section")?;
        self.total_point(x.coords(), &y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionKind {
    Linear,
    Nonlinear,
}

/// A connection in coefficient form.
pub trait Connection {
    fn bundle(&self) -> &TrivializedBundle;

    fn kind(&self) -> ConnectionKind;

    /// `Γ(x, y)·w` for a base direction `w`. Must be linear in `w`.
    fn gamma<S: Scalar>(&self, x: &[S], y: &[S], w: &[S]) -> Vec<S>;

    /// `Γ(x, y)` as an `f × m` matrix.
    fn gamma_matrix(&self, x: &[f64], y: &[f64]) -> Matrix {
        let m = x.len();
        let columns: Vec<Vec<f64>> = (0..m).map(|j| self.gamma(x, y, &unit(m, j))).collect();
        Matrix::from_columns(&columns, y.len())
    }
}

impl<C: Connection> Connection for &C {
    fn bundle(&self) -> &TrivializedBundle {
        (**self).bundle()
    }

    fn kind(&self) -> ConnectionKind {
        (**self).kind()
    }

    fn gamma<S: Scalar>(&self, x: &[S], y: &[S], w: &[S]) -> Vec<S> {
        (**self).gamma(x, y, w)
    }
}

/// A pointwise projector on `T_e E`, as an `(m+f) × (m+f)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub anchor: Point,
    pub matrix: Matrix,
}

impl Projector {
    pub fn apply(&self, t: &TotalTangent) -> TotalTangent {
        TotalTangent::from_stacked(self.anchor.clone(), self.matrix.mul_vec(&t.stacked()))
    }
}

fn check_anchor<C: Connection>(conn: &C, e: &Point) -> Result<()> {
    e.expect_total()?;
    let b = conn.bundle();
    b.total_point(e.base(), e.fibre()).map(|_| ())
}

/// `P_V(e)` in block form `[[0, 0], [Γ, I]]`.
pub fn vertical_projector<C: Connection>(conn: &C, e: &Point) -> Result<Projector> {
    check_anchor(conn, e)?;
    let (m, f) = (e.base().len(), e.fibre().len());
    let g = conn.gamma_matrix(e.base(), e.fibre());
    if !g.is_finite() {
        return Err(Error::NonFinite { what: "connection coefficients" });
    }
    let mut p = Matrix::zeros(m + f, m + f);
    for i in 0..f {
        for j in 0..m {
            p[(m + i, j)] = g[(i, j)];
        }
        p[(m + i, m + i)] = 1.0;
    }
    Ok(Projector { anchor: e.clone(), matrix: p })
}

/// `P_H(e) = I − P_V(e)`.
pub fn horizontal_projector<C: Connection>(conn: &C, e: &Point) -> Result<Projector> {
    let pv = vertical_projector(conn, e)?;
    let n = pv.matrix.rows();
    Ok(Projector { matrix: &Matrix::identity(n) - &pv.matrix, anchor: pv.anchor })
}

/// The horizontal vector over `e` projecting to `v_x`: `(v_x, −Γ(x,y)·v_x)`.
pub fn horizontal_lift<C: Connection>(conn: &C, e: &Point, v_x: &[f64]) -> Result<TotalTangent> {
    check_anchor(conn, e)?;
    if v_x.len() != e.base().len() {
        return Err(Error::DimensionMismatch { what: "base vector", expected: e.base().len(), found: v_x.len() });
    }
    let fibre: Vec<f64> = conn.gamma(e.base(), e.fibre(), v_x).into_iter().map(|g| -g).collect();
    if fibre.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { what: "horizontal lift" });
    }
    Ok(TotalTangent { anchor: e.clone(), base_part: v_x.to_vec(), fibre_part: fibre })
}

/// The field `e ↦ H_e(v(p(e)))`, `p`-related to `v`.
#[derive(Debug, Clone, Copy)]
pub struct HorizontalLift<C, V> {
    pub conn: C,
    pub v: V,
}

impl<C: Connection, V: VectorMap> VectorMap for HorizontalLift<C, V> {
    fn eval<S: Scalar>(&self, e: &[S]) -> Vec<S> {
        let m = self.conn.bundle().base_dim();
        let (x, y) = e.split_at(m);
        let mut out = self.v.eval(x);
        let g = self.conn.gamma(x, y, &out);
        out.extend(g.into_iter().map(|c| -c));
        out
    }
}

pub fn horizontal_lift_field<C: Connection, V: VectorMap>(conn: C, v: V) -> HorizontalLift<C, V> {
    HorizontalLift { conn, v }
}

/// `Ts·v` at `x`: `(v(x), Ds(x)·v(x))` anchored at `(x, s(x))`.
pub fn natural_derivative<Sec: VectorMap, V: VectorMap>(
    bundle: &TrivializedBundle,
    s: &Sec,
    v: &V,
    x: &Point,
) -> Result<TotalTangent> {
    let e = bundle.graph_point(s, x)?;
    let vx = eval_checked(v, x.coords(), "base vector field")?;
    let ds_v = derivative_along(s, x.coords(), &vx);
    if ds_v.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { what: "section derivative" });
    }
    Ok(TotalTangent { anchor: e, base_part: vx, fibre_part: ds_v })
}

/// How section-bound derivatives are extended off the graph of `s`.
///
/// Both variants foliate `E` by leaves transversal to the fibres with the
/// graph of `s` as one leaf.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Foliation {
    /// Leaves `σ_e(x) = s(x) + (y₀ − s(x₀))`: the graph translated along the fibres.
    #[default]
    Translation,
    /// Leaves `σ_e(x) = s(x) + exp(⟨w, x − x₀⟩)·(y₀ − s(x₀))`: the offset from
    /// the graph is rescaled along the leaf. Reduces to `Translation` at `w = 0`.
    ExponentialOffset { weights: Vec<f64> },
}

impl Foliation {
    /// Extra fibre term of `Tσ_e·v` beyond `Ds·v`, at `(x, y)` with offset `y − s(x)`.
    fn offset_rate<S: Scalar>(&self, v: &[S], offset: &[S]) -> Option<Vec<S>> {
        match self {
            Foliation::Translation => None,
            Foliation::ExponentialOffset { weights } => {
                let rate = weights.iter().zip(v).fold(S::zero(), |acc, (&w, &vi)| acc + vi * w);
                Some(offset.iter().map(|&o| o * rate).collect())
            }
        }
    }
}

/// Extension of the natural derivative `T_v` to a field on `E` via a foliation.
#[derive(Debug, Clone)]
pub struct NaturalDerivativeExtension<Sec, V> {
    pub base_dim: usize,
    pub s: Sec,
    pub v: V,
    pub foliation: Foliation,
}

impl<Sec: VectorMap, V: VectorMap> NaturalDerivativeExtension<Sec, V> {
    pub fn with_foliation(mut self, foliation: Foliation) -> Self {
        self.foliation = foliation;
        self
    }

    fn parts<S: Scalar>(&self, e: &[S]) -> (Vec<S>, Vec<S>) {
        let (x, y) = e.split_at(self.base_dim);
        let vx = self.v.eval(x);
        let (sx, mut ds_v) = crate::calculus::directional(&self.s, x, &vx);
        let offset: Vec<S> = y.iter().zip(&sx).map(|(&a, &b)| a - b).collect();
        if let Some(extra) = self.foliation.offset_rate(&vx, &offset) {
            for (d, x) in ds_v.iter_mut().zip(extra) {
                *d += x;
            }
        }
        (vx, ds_v)
    }
}

impl<Sec: VectorMap, V: VectorMap> VectorMap for NaturalDerivativeExtension<Sec, V> {
    fn eval<S: Scalar>(&self, e: &[S]) -> Vec<S> {
        let (mut out, fibre) = self.parts(e);
        out.extend(fibre);
        out
    }
}

/// `T_v` extended off the graph with the translation foliation.
pub fn extend_natural_derivative<Sec: VectorMap, V: VectorMap>(
    bundle: &TrivializedBundle,
    s: Sec,
    v: V,
) -> NaturalDerivativeExtension<Sec, V> {
    NaturalDerivativeExtension { base_dim: bundle.base_dim(), s, v, foliation: Foliation::Translation }
}

/// `∇_v s(x) = Ds(x)·v(x) + Γ(x, s(x))·v(x)`, the fibre part of `P_V(Ts·v)`.
pub fn covariant_derivative<C: Connection, Sec: VectorMap, V: VectorMap>(
    conn: &C,
    s: &Sec,
    v: &V,
    x: &Point,
) -> Result<Vec<f64>> {
    let nat = natural_derivative(conn.bundle(), s, v, x)?;
    let g = conn.gamma(nat.anchor.base(), nat.anchor.fibre(), &nat.base_part);
    let out: Vec<f64> = nat.fibre_part.iter().zip(g).map(|(a, b)| a + b).collect();
    if out.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { what: "covariant derivative" });
    }
    Ok(out)
}

/// The vertical field `∇_v = P_V ∘ T_v` on `E`:
/// `(x, y) ↦ (0, Tσ·v + Γ(x, y)·v(x))`, with `Γ` taken at the roaming fibre point.
#[derive(Debug, Clone)]
pub struct CovariantExtension<C, Sec, V> {
    pub conn: C,
    pub natural: NaturalDerivativeExtension<Sec, V>,
}

impl<C: Connection, Sec: VectorMap, V: VectorMap> CovariantExtension<C, Sec, V> {
    pub fn with_foliation(mut self, foliation: Foliation) -> Self {
        self.natural.foliation = foliation;
        self
    }
}

impl<C: Connection, Sec: VectorMap, V: VectorMap> VectorMap for CovariantExtension<C, Sec, V> {
    fn eval<S: Scalar>(&self, e: &[S]) -> Vec<S> {
        let m = self.natural.base_dim;
        let (vx, fibre) = self.natural.parts(e);
        let (x, y) = e.split_at(m);
        let g = self.conn.gamma(x, y, &vx);
        let mut out = constants::<S>(&alloc::vec![0.0; m]);
        out.extend(fibre.into_iter().zip(g).map(|(a, b)| a + b));
        out
    }
}

pub fn extend_covariant_derivative<C: Connection, Sec: VectorMap, V: VectorMap>(
    conn: C,
    s: Sec,
    v: V,
) -> CovariantExtension<C, Sec, V> {
    let natural = extend_natural_derivative(conn.bundle(), s, v);
    CovariantExtension { conn, natural }
}

/// `x ↦ ∇_v s(x)` as a map `M → Rᶠ`. Under `VE ≅ E` this is again a section,
/// which is what makes iterated covariant derivatives meaningful.
#[derive(Debug, Clone, Copy)]
pub struct CovariantSection<C, Sec, V> {
    pub conn: C,
    pub s: Sec,
    pub v: V,
}

impl<C: Connection, Sec: VectorMap, V: VectorMap> VectorMap for CovariantSection<C, Sec, V> {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let vx = self.v.eval(x);
        let (sx, ds_v) = crate::calculus::directional(&self.s, x, &vx);
        let g = self.conn.gamma(x, &sx, &vx);
        ds_v.into_iter().zip(g).map(|(a, b)| a + b).collect()
    }
}

/// The `(m+f) × m` matrix with columns `H_{s(x)}(e_j)`.
pub fn lift_matrix<C: Connection, Sec: VectorMap>(conn: &C, s: &Sec, x: &Point) -> Result<Matrix> {
    let e = conn.bundle().graph_point(s, x)?;
    let m = e.base().len();
    let columns = (0..m)
        .map(|j| horizontal_lift(conn, &e, &unit(m, j)).map(|t| t.stacked()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_columns(&columns, e.coords().len()))
}

/// Relative singular-value cutoff used by [`lift_rank_check`].
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Numerical rank of the horizontal lift along `s` at `x`; equals `m` for any connection.
pub fn lift_rank_check<C: Connection, Sec: VectorMap>(conn: &C, s: &Sec, x: &Point) -> Result<usize> {
    Ok(lift_matrix(conn, s, x)?.rank(RANK_TOLERANCE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{check_p_related, ConstantField};
    use crate::catalog::{FlatConnection, SphereConnection};
    use crate::linalg::max_abs_diff;
    use alloc::vec;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    /// s(x) = x₁·x₂ with one fibre coordinate.
    struct Product;
    impl VectorMap for Product {
        fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![x[0] * x[1]]
        }
    }

    fn flat21() -> FlatConnection {
        FlatConnection::new(2, 1).unwrap()
    }

    #[test]
    fn flat_vertical_projector_is_fibre_identity() {
        let conn = FlatConnection::new(2, 2).unwrap();
        let e = conn.bundle().total_point(&[0.1, 0.2], &[0.3, 0.4]).unwrap();
        let p = vertical_projector(&conn, &e).unwrap();
        let mut want = Matrix::zeros(4, 4);
        want[(2, 2)] = 1.0;
        want[(3, 3)] = 1.0;
        assert_eq!(p.matrix, want);
    }

    #[test]
    fn sphere_projector_at_equator_has_vanishing_christoffels() {
        let conn = SphereConnection::default();
        let e = conn.bundle().total_point(&[FRAC_PI_2, 0.0], &[1.0, 0.0]).unwrap();
        let p = vertical_projector(&conn, &e).unwrap();
        let mut want = Matrix::zeros(4, 4);
        want[(2, 2)] = 1.0;
        want[(3, 3)] = 1.0;
        assert!((&p.matrix - &want).max_abs() < 1e-15);
    }

    #[test]
    fn vertical_vectors_are_fixed_by_the_vertical_projector() {
        let conn = SphereConnection::default();
        let e = conn.bundle().total_point(&[0.9, 0.3], &[0.4, -1.2]).unwrap();
        let w = TotalTangent::new(e.clone(), vec![0.0, 0.0], vec![0.7, -0.2]).unwrap();
        let pw = vertical_projector(&conn, &e).unwrap().apply(&w);
        assert!(max_abs_diff(&pw.stacked(), &w.stacked()) < 1e-15);
    }

    #[test]
    fn sphere_lift_fibre_part_at_quarter_pi() {
        let conn = SphereConnection::default();
        let e = conn.bundle().total_point(&[FRAC_PI_4, 0.0], &[1.0, 0.0]).unwrap();
        let h = horizontal_lift(&conn, &e, &[0.0, 1.0]).unwrap();
        assert_eq!(h.base_part, vec![0.0, 1.0]);
        assert!(max_abs_diff(&h.fibre_part, &[0.0, -1.0]) < 1e-15);
    }

    #[test]
    fn lift_of_zero_and_flat_lift() {
        let conn = SphereConnection::default();
        let e = conn.bundle().total_point(&[1.0, 0.5], &[2.0, 1.0]).unwrap();
        let h = horizontal_lift(&conn, &e, &[0.0, 0.0]).unwrap();
        assert!(h.base_part.iter().chain(&h.fibre_part).all(|&c| c == 0.0));

        let flat = flat21();
        let e = flat.bundle().total_point(&[0.2, 0.1], &[0.5]).unwrap();
        let h = horizontal_lift(&flat, &e, &[0.3, -0.7]).unwrap();
        assert_eq!((h.base_part, h.fibre_part), (vec![0.3, -0.7], vec![0.0]));
    }

    #[test]
    fn lift_rejects_bad_anchor_and_dimension() {
        let conn = SphereConnection::default();
        let x = conn.bundle().base_point(&[1.0, 0.0]).unwrap();
        assert!(matches!(horizontal_lift(&conn, &x, &[1.0, 0.0]), Err(Error::WrongSpace { .. })));
        let e = conn.bundle().total_point(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!(matches!(horizontal_lift(&conn, &e, &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(conn.bundle().total_point(&[0.1, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn natural_derivative_of_product_section() {
        let b = flat21();
        let x = b.bundle().base_point(&[0.5, 1.5]).unwrap();
        let t = natural_derivative(b.bundle(), &Product, &ConstantField(vec![1.0, 1.0]), &x).unwrap();
        assert_eq!(t.fibre_part, vec![2.0]);
        assert_eq!(t.anchor.fibre(), &[0.75]);
    }

    #[test]
    fn natural_derivative_hand_example_on_wider_chart() {
        // s(x) = x₁x₂, v = (1, 1) at x = (2, 3): fibre part 3 + 2 = 5.
        let bundle = TrivializedBundle::new(
            "wide",
            BoxDomain::cube(2, -5.0, 5.0).unwrap(),
            BoxDomain::cube(1, -10.0, 10.0).unwrap(),
        );
        let x = bundle.base_point(&[2.0, 3.0]).unwrap();
        let t = natural_derivative(&bundle, &Product, &ConstantField(vec![1.0, 1.0]), &x).unwrap();
        assert_eq!(t.fibre_part, vec![5.0]);
        // Graph point must be inside the chart.
        let x = bundle.base_point(&[4.0, 3.0]).unwrap();
        assert!(matches!(
            natural_derivative(&bundle, &Product, &ConstantField(vec![1.0, 1.0]), &x),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn constant_section_and_zero_field() {
        let b = flat21();
        let x = b.bundle().base_point(&[0.5, -0.5]).unwrap();
        let c = ConstantField(vec![0.3]);
        let t = natural_derivative(b.bundle(), &c, &ConstantField(vec![1.0, 2.0]), &x).unwrap();
        assert_eq!(t.fibre_part, vec![0.0]);
        let t = natural_derivative(b.bundle(), &Product, &ConstantField(vec![0.0, 0.0]), &x).unwrap();
        assert!(t.base_part.iter().chain(&t.fibre_part).all(|&c| c == 0.0));
        assert_eq!(covariant_derivative(&b, &c, &ConstantField(vec![1.0, 0.0]), &x).unwrap(), vec![0.0]);
    }

    #[test]
    fn sphere_covariant_derivative_of_constant_section() {
        let conn = SphereConnection::default();
        let x = conn.bundle().base_point(&[FRAC_PI_4, 0.0]).unwrap();
        let d = covariant_derivative(&conn, &ConstantField(vec![1.0, 0.0]), &ConstantField(vec![0.0, 1.0]), &x)
            .unwrap();
        assert!(max_abs_diff(&d, &[0.0, 1.0]) < 1e-15);
    }

    #[test]
    fn extension_restricts_to_natural_derivative_and_is_fibre_translation_invariant() {
        let b = flat21();
        let v = ConstantField(vec![0.4, -1.0]);
        let ext = extend_natural_derivative(b.bundle(), &Product, &v);
        let x = b.bundle().base_point(&[0.5, 0.8]).unwrap();
        let nat = natural_derivative(b.bundle(), &Product, &v, &x).unwrap();
        assert_eq!(ext.eval(nat.anchor.coords()), nat.stacked());
        assert_eq!(ext.eval(&[0.5, 0.8, -0.9]), ext.eval(&[0.5, 0.8, 0.9]));
        let samples: Vec<Point> = [[0.1, 0.2, 0.3], [-0.5, 0.9, -0.1], [0.7, -0.7, 0.0]]
            .iter()
            .map(|e| b.bundle().total_point_stacked(e).unwrap())
            .collect();
        assert!(check_p_related(&ext, &v, &samples).unwrap() <= 1e-12);
    }

    #[test]
    fn offset_foliation_agrees_on_the_graph() {
        let conn = SphereConnection::default();
        let s = ConstantField(vec![0.5, 1.0]);
        let v = ConstantField(vec![0.3, 0.7]);
        let plain = extend_covariant_derivative(&conn, &s, &v);
        let modulated = extend_covariant_derivative(&conn, &s, &v)
            .with_foliation(Foliation::ExponentialOffset { weights: vec![0.3, -0.2] });
        let on_graph = [1.0, 0.2, 0.5, 1.0];
        assert_eq!(plain.eval(&on_graph), modulated.eval(&on_graph));
        let off_graph = [1.0, 0.2, 0.9, -1.0];
        assert_ne!(plain.eval(&off_graph), modulated.eval(&off_graph));
    }

    #[test]
    fn covariant_extension_is_vertical_and_restricts_to_covariant_derivative() {
        let conn = SphereConnection::default();
        let v = ConstantField(vec![0.2, 1.0]);
        let s = Product2;
        let ext = extend_covariant_derivative(&conn, &s, &v);
        let x = conn.bundle().base_point(&[1.1, -0.4]).unwrap();
        let e = conn.bundle().graph_point(&s, &x).unwrap();
        let val = ext.eval(e.coords());
        assert_eq!(&val[..2], &[0.0, 0.0]);
        let cd = covariant_derivative(&conn, &s, &v, &x).unwrap();
        assert!(max_abs_diff(&val[2..], &cd) < 1e-15);
    }

    struct Product2;
    impl VectorMap for Product2 {
        fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![x[0] * x[1], x[0].sin()]
        }
    }

    #[test]
    fn lift_rank_is_base_dimension_and_depends_only_on_point_value() {
        let conn = SphereConnection::default();
        let x = conn.bundle().base_point(&[1.2, 0.3]).unwrap();
        assert_eq!(lift_rank_check(&conn, &Product2, &x).unwrap(), 2);
        let sx = Product2.eval(x.coords());
        let frozen = ConstantField(sx);
        assert_eq!(lift_matrix(&conn, &Product2, &x).unwrap(), lift_matrix(&conn, &frozen, &x).unwrap());
        let flat = FlatConnection::new(3, 2).unwrap();
        let x = flat.bundle().base_point(&[0.1, 0.2, 0.3]).unwrap();
        let lm = lift_matrix(&flat, &ConstantField(vec![0.0, 0.0]), &x).unwrap();
        let mut want = Matrix::zeros(5, 3);
        for j in 0..3 {
            want[(j, j)] = 1.0;
        }
        assert_eq!(lm, want);
    }
}
