//! Flows, parallel transport, geodesics, sprays and holonomy.
//!
//! Every trajectory is integrated with fixed-step classical RK4. The step is
//! adjusted down so that a whole number of steps lands exactly on the end time.
//! Integrators are generic over [`Scalar`], so a transported vector or a
//! geodesic can itself be differentiated in its end time.

use alloc::vec::Vec;

use crate::calculus::{curve_velocity, eval_checked, CurveMap, VectorMap};
use crate::connection::{horizontal_lift_field, BoxDomain, Connection, Point, TrivializedBundle};
use crate::curvature::linear::LinearConnection;
use crate::error::{Error, Result};
use crate::linalg::max_abs_diff;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { step: 1e-3, max_steps: 1_000_000 }
    }
}

impl IntegratorConfig {
    pub fn new(step: f64, max_steps: usize) -> Result<Self> {
        let cfg = IntegratorConfig { step, max_steps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::Invalid(alloc::format!("integrator step must be positive and finite, got {}", self.step)));
        }
        if self.max_steps == 0 {
            return Err(Error::Invalid(alloc::string::String::from("max_steps must be positive")));
        }
        Ok(())
    }

    /// Number of steps covering `span`.
    pub fn steps_for(&self, span: f64) -> Result<usize> {
        self.validate()?;
        if !span.is_finite() {
            return Err(Error::NonFinite { what: "integration interval" });
        }
        if span == 0.0 {
            return Ok(0);
        }
        let ratio = libm::fabs(span) / self.step;
        let n = (libm::ceil(ratio - 1e-9) as usize).max(1);
        if n > self.max_steps {
            return Err(Error::StepBudget { required: n, max_steps: self.max_steps });
        }
        Ok(n)
    }
}

fn axpy<S: Scalar>(y: &[S], h: S, k: &[S]) -> Vec<S> {
    y.iter().zip(k).map(|(&a, &b)| a + h * b).collect()
}

/// One classical RK4 step of `ẏ = f(t, y)`.
pub fn rk4_step<S: Scalar, F: Fn(S, &[S]) -> Vec<S>>(f: &F, t: S, y: &[S], h: S) -> Vec<S> {
    let half = h * 0.5;
    let k1 = f(t, y);
    let k2 = f(t + half, &axpy(y, half, &k1));
    let k3 = f(t + half, &axpy(y, half, &k2));
    let k4 = f(t + h, &axpy(y, h, &k3));
    y.iter()
        .enumerate()
        .map(|(i, &yi)| yi + h * (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) / 6.0)
        .collect()
}

/// `n` RK4 steps of size `(t1 − t0)/n`, calling `observe(t, y)` after each step.
fn integrate<S, F, O>(f: &F, t0: S, t1: S, y0: Vec<S>, n: usize, mut observe: O) -> Result<Vec<S>>
where
    S: Scalar,
    F: Fn(S, &[S]) -> Vec<S>,
    O: FnMut(S, &[S]) -> Result<()>,
{
    if n == 0 {
        return Ok(y0);
    }
    let h = (t1 - t0) / n as f64;
    let mut y = y0;
    for k in 0..n {
        let t = t0 + h * k as f64;
        y = rk4_step(f, t, &y, h);
        observe(if k + 1 == n { t1 } else { t0 + h * (k + 1) as f64 }, &y)?;
    }
    Ok(y)
}

fn stay_inside(domain: &BoxDomain, t: f64, y: &[f64]) -> Result<()> {
    if !y.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite { what: "trajectory" });
    }
    if domain.contains(y) {
        Ok(())
    } else {
        Err(Error::ChartExit { time: t })
    }
}

/// Integrates the autonomous field `field` for time `lambda` from `start`,
/// failing as soon as the trajectory leaves `domain`.
pub fn integrate_field<X: VectorMap>(
    field: &X,
    domain: &BoxDomain,
    start: &[f64],
    lambda: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    domain.check(start)?;
    let n = cfg.steps_for(lambda)?;
    let rhs = |_t: f64, y: &[f64]| field.eval(y);
    integrate(&rhs, 0.0, lambda, start.to_vec(), n, |t, y| stay_inside(domain, t, y))
}

/// `Fl^X_λ(e0)` for a vector field on the total space.
pub fn flow<X: VectorMap>(
    bundle: &TrivializedBundle,
    field: &X,
    e0: &Point,
    lambda: f64,
    cfg: &IntegratorConfig,
) -> Result<Point> {
    e0.expect_total()?;
    let end = integrate_field(field, &bundle.total_box(), e0.coords(), lambda, cfg)?;
    bundle.total_point_stacked(&end)
}

/// A parametrized curve `c: [t0, t1] → M`.
#[derive(Debug, Clone)]
pub struct CurveOnBase<P> {
    pub path: P,
    pub t0: f64,
    pub t1: f64,
}

impl<P: CurveMap> CurveOnBase<P> {
    pub fn new(path: P, t0: f64, t1: f64) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(Error::NonFinite { what: "curve interval" });
        }
        Ok(CurveOnBase { path, t0, t1 })
    }

    /// The same path traversed from `t1` back to `t0`.
    pub fn reversed(&self) -> CurveOnBase<&P> {
        CurveOnBase { path: &self.path, t0: self.t1, t1: self.t0 }
    }
}

/// `t ↦ from + t·(to − from)`, for `t ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSegment {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
}

impl CurveMap for LineSegment {
    fn eval<S: Scalar>(&self, t: S) -> Vec<S> {
        self.from.iter().zip(&self.to).map(|(&a, &b)| t * (b - a) + a).collect()
    }
}

/// `t ↦ center + radius·(cos t, sin t)` in the first two coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Circle {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl CurveMap for Circle {
    fn eval<S: Scalar>(&self, t: S) -> Vec<S> {
        self.center
            .iter()
            .enumerate()
            .map(|(i, &c)| match i {
                0 => t.cos() * self.radius + c,
                1 => t.sin() * self.radius + c,
                _ => S::cst(c),
            })
            .collect()
    }
}

/// Right-hand side of the transport equation `ẏ = −Γ(c(t), y)·ċ(t)`.
fn transport_rhs<'a, S: Scalar, C: Connection, P: CurveMap>(conn: &'a C, path: &'a P) -> impl Fn(S, &[S]) -> Vec<S> + 'a {
    move |t: S, y: &[S]| {
        let (c, dc) = curve_velocity(path, t);
        conn.gamma(&c, y, &dc).into_iter().map(|g| -g).collect()
    }
}

fn check_transport_state<C: Connection>(conn: &C, c: &[f64], y: &[f64], t: f64) -> Result<()> {
    let b = conn.bundle();
    if !(c.iter().chain(y).all(|v| v.is_finite())) {
        return Err(Error::NonFinite { what: "parallel transport" });
    }
    if b.base_box().contains(c) && b.fibre_box().contains(y) {
        Ok(())
    } else {
        Err(Error::ChartExit { time: t })
    }
}

/// `y(t1)` for the horizontal lift of `curve` through `(c(t0), y0)`.
pub fn parallel_transport_vector<C: Connection, P: CurveMap>(
    conn: &C,
    curve: &CurveOnBase<P>,
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let b = conn.bundle();
    let c0 = eval_checked(&CurveAsMap(&curve.path), &[curve.t0], "curve")?;
    if c0.len() != b.base_dim() {
        return Err(Error::DimensionMismatch { what: "curve", expected: b.base_dim(), found: c0.len() });
    }
    b.total_point(&c0, y0)?;
    let n = cfg.steps_for(curve.t1 - curve.t0)?;
    let rhs = transport_rhs::<f64, _, _>(conn, &curve.path);
    integrate(&rhs, curve.t0, curve.t1, y0.to_vec(), n, |t, y| {
        check_transport_state(conn, &curve.path.eval(t), y, t)
    })
}

/// Adapts a curve to the [`VectorMap`] interface on `R¹`.
struct CurveAsMap<P>(P);

impl<P: CurveMap> VectorMap for CurveAsMap<P> {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.0.eval(x[0])
    }
}

/// The transported vector `t ↦ y(t)` as a curve in the fibre coordinates.
///
/// Evaluation re-integrates from `t0` to `t` with the same step rule, in
/// whatever scalar type is supplied, so `∂_t y` is exact for the discrete solution.
#[derive(Debug, Clone)]
pub struct TransportedVector<C, P> {
    conn: C,
    curve: CurveOnBase<P>,
    y0: Vec<f64>,
    step: f64,
}

impl<C: Connection, P: CurveMap> TransportedVector<C, P> {
    /// Validates the whole trajectory once, then returns the evaluable curve.
    pub fn new(conn: C, curve: CurveOnBase<P>, y0: &[f64], cfg: &IntegratorConfig) -> Result<Self> {
        parallel_transport_vector(&conn, &curve, y0, cfg)?;
        Ok(TransportedVector { conn, curve, y0: y0.to_vec(), step: cfg.step })
    }

    pub fn curve(&self) -> &CurveOnBase<P> {
        &self.curve
    }
}

/// Steps for re-integration at a possibly derivative-carrying end time. At
/// zero span one step of size zero still carries `ẏ(t0)` in the tangent part.
fn step_count(span: f64, step: f64) -> usize {
    (libm::ceil(libm::fabs(span) / step - 1e-9) as usize).max(1)
}

impl<C: Connection, P: CurveMap> CurveMap for TransportedVector<C, P> {
    fn eval<S: Scalar>(&self, t: S) -> Vec<S> {
        let n = step_count(t.value() - self.curve.t0, self.step);
        let rhs = transport_rhs::<S, _, _>(&self.conn, &self.curve.path);
        let y0 = self.y0.iter().map(|&c| S::cst(c)).collect();
        integrate(&rhs, S::cst(self.curve.t0), t, y0, n, |_, _| Ok(())).expect("observer is infallible")
    }
}

/// `∇_t y = ẏ(t) + Γ(c(t), y(t))·ċ(t)`.
pub fn covariant_derivative_along_curve<C: Connection, P: CurveMap, Y: CurveMap>(
    conn: &C,
    curve: &CurveOnBase<P>,
    y_of_t: &Y,
    t: f64,
) -> Result<Vec<f64>> {
    let (c, dc) = curve_velocity(&curve.path, t);
    let (y, dy) = curve_velocity(y_of_t, t);
    check_transport_state(conn, &c, &y, t)?;
    let g = conn.gamma(&c, &y, &dc);
    let out: Vec<f64> = dy.iter().zip(g).map(|(a, b)| a + b).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite { what: "covariant derivative along curve" })
    }
}

/// Right-hand side `(ẋ, v̇) = (v, −Γ(x, v)·v)` on `TM`.
fn geodesic_rhs<'a, S: Scalar, C: Connection>(conn: &'a C) -> impl Fn(S, &[S]) -> Vec<S> + 'a {
    move |_t: S, state: &[S]| {
        let m = state.len() / 2;
        let (x, v) = state.split_at(m);
        let mut out = v.to_vec();
        out.extend(conn.gamma(x, v, v).into_iter().map(|g| -g));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

/// Samples `(t, x, v)` of the geodesic with `x(0) = x0`, `ẋ(0) = v0`, at every step.
pub fn geodesic<C: Connection>(
    conn: &LinearConnection<C>,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<GeodesicSample>> {
    conn.require_tangent_bundle()?;
    let b = conn.bundle();
    b.base_point(x0)?;
    if v0.len() != x0.len() {
        return Err(Error::DimensionMismatch { what: "initial velocity", expected: x0.len(), found: v0.len() });
    }
    let n = cfg.steps_for(t_end)?;
    let mut samples = alloc::vec![GeodesicSample { t: 0.0, x: x0.to_vec(), v: v0.to_vec() }];
    let mut state = x0.to_vec();
    state.extend_from_slice(v0);
    let m = x0.len();
    integrate(&geodesic_rhs::<f64, _>(conn), 0.0, t_end, state, n, |t, y| {
        if !y.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite { what: "geodesic" });
        }
        if !b.base_box().contains(&y[..m]) {
            return Err(Error::ChartExit { time: t });
        }
        samples.push(GeodesicSample { t, x: y[..m].to_vec(), v: y[m..].to_vec() });
        Ok(())
    })?;
    Ok(samples)
}

/// The geodesic state `t ↦ (x(t), v(t))`, re-integrated in any scalar type.
#[derive(Debug, Clone)]
pub struct GeodesicPath<C> {
    conn: C,
    x0: Vec<f64>,
    v0: Vec<f64>,
    step: f64,
}

impl<C: Connection> GeodesicPath<C> {
    /// Validates the trajectory on `[0, t_end]` before returning the curve.
    pub fn new(conn: LinearConnection<C>, x0: &[f64], v0: &[f64], t_end: f64, cfg: &IntegratorConfig) -> Result<Self> {
        geodesic(&conn, x0, v0, t_end, cfg)?;
        let step = cfg.step;
        let conn = conn.into_inner();
        Ok(GeodesicPath { conn, x0: x0.to_vec(), v0: v0.to_vec(), step })
    }

    /// The position part `t ↦ x(t)`.
    pub fn position(&self) -> Component<&Self> {
        Component { curve: self, start: 0, len: self.x0.len() }
    }

    /// The velocity part `t ↦ v(t)` of the integrated state.
    pub fn velocity(&self) -> Component<&Self> {
        Component { curve: self, start: self.x0.len(), len: self.x0.len() }
    }
}

impl<C: Connection> CurveMap for GeodesicPath<C> {
    fn eval<S: Scalar>(&self, t: S) -> Vec<S> {
        let n = step_count(t.value(), self.step);
        let mut state: Vec<S> = self.x0.iter().map(|&c| S::cst(c)).collect();
        state.extend(self.v0.iter().map(|&c| S::cst(c)));
        integrate(&geodesic_rhs::<S, _>(&self.conn), S::zero(), t, state, n, |_, _| Ok(())).expect("observer is infallible")
    }
}

/// Components `start..start+len` of a curve.
#[derive(Debug, Clone, Copy)]
pub struct Component<P> {
    pub curve: P,
    pub start: usize,
    pub len: usize,
}

impl<P: CurveMap> CurveMap for Component<P> {
    fn eval<S: Scalar>(&self, t: S) -> Vec<S> {
        self.curve.eval(t)[self.start..self.start + self.len].to_vec()
    }
}

/// The spray `S(x, v) = (v, −Γ(x, v)·v)` on `TM`.
#[derive(Debug, Clone, Copy)]
pub struct SprayField<C> {
    conn: C,
}

impl<C: Connection> VectorMap for SprayField<C> {
    fn eval<S: Scalar>(&self, e: &[S]) -> Vec<S> {
        geodesic_rhs::<S, _>(&self.conn)(S::zero(), e)
    }
}

impl<C: Connection> SprayField<C> {
    pub fn connection(&self) -> &C {
        &self.conn
    }

    /// `|H_{(x,v)}(v) − S(x, v)|_∞`; zero for a spray built from the connection.
    pub fn compatibility_residual(&self, e: &Point) -> Result<f64> {
        e.expect_total()?;
        let lift = crate::connection::horizontal_lift(&self.conn, e, e.fibre())?;
        Ok(max_abs_diff(&lift.stacked(), &self.eval(e.coords())))
    }
}

pub fn spray_from_connection<C: Connection>(conn: LinearConnection<C>) -> Result<SprayField<C>> {
    conn.require_tangent_bundle()?;
    Ok(SprayField { conn: conn.into_inner() })
}

/// Central difference in `λ = cfg.step` of `λ ↦ Fl^{H_v}_{−λ}(s(Fl^v_λ(x)))`,
/// each flow taken as a single RK4 step. Converges to `∇_v s(x)` as `λ → 0`.
pub fn lie_derivative_covariant<C: Connection, Sec: VectorMap, V: VectorMap>(
    conn: &C,
    s: &Sec,
    v: &V,
    x: &Point,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    x.expect_base()?;
    let b = conn.bundle();
    b.graph_point(s, x)?;
    let lambda = cfg.step;
    let one_step = IntegratorConfig { step: lambda, max_steps: 1 };
    let h_v = horizontal_lift_field(conn, v);
    let pulled = |l: f64| -> Result<Vec<f64>> {
        let moved = integrate_field(v, b.base_box(), x.coords(), l, &one_step)?;
        let e = b.graph_point(s, &b.base_point(&moved)?)?;
        let back = flow(b, &h_v, &e, -l, &one_step)?;
        Ok(back.fibre().to_vec())
    };
    let plus = pulled(lambda)?;
    let minus = pulled(-lambda)?;
    Ok(plus.iter().zip(minus).map(|(p, q)| (p - q) / (2.0 * lambda)).collect())
}

/// Result of transporting around a closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Holonomy {
    pub y_end: Vec<f64>,
    /// Euclidean norm of `y_end − y0` in fibre coordinates.
    pub displacement: f64,
}

/// Transports `y0` once around a closed loop. Endpoints may differ by a
/// period of an angular base coordinate.
pub fn holonomy_loop<C: Connection, P: CurveMap>(
    conn: &C,
    curve: &CurveOnBase<P>,
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Holonomy> {
    let a = curve.path.eval(curve.t0);
    let b = curve.path.eval(curve.t1);
    let scale = a.iter().fold(1.0_f64, |m, v| m.max(libm::fabs(*v)));
    if !conn.bundle().same_base_point(&a, &b, 1e-9 * scale) {
        return Err(Error::Invalid(alloc::string::String::from("holonomy loop is not closed")));
    }
    let y_end = parallel_transport_vector(conn, curve, y0, cfg)?;
    let displacement = libm::sqrt(y_end.iter().zip(y0).map(|(p, q)| (p - q) * (p - q)).sum());
    Ok(Holonomy { y_end, displacement })
}
