//! Scenario runner: turns a [`ScenarioConfig`] into a [`VerificationReport`].
//!
//! Numerical failures (chart exits, points outside the domain, non-finite
//! values) become failed rows carrying a reason. Only malformed scenario
//! parameters abort a run.

use std::f64::consts::PI;

use fibrum_core::calculus::{check_p_related, lie_bracket, ConstantField};
use fibrum_core::catalog::{BoundedMap, CatalogConnection, SmoothMap, SphereConnection};
use fibrum_core::connection::{
    covariant_derivative, extend_natural_derivative, horizontal_lift_field, horizontal_projector, lift_matrix,
    lift_rank_check, vertical_projector, Foliation,
};
use fibrum_core::curvature::linear::{
    curv_via_composition, curv_via_second_derivative, leibniz_check, torsion, LinearConnection,
};
use fibrum_core::curvature::{
    cocurvature, commutator_residuals, cross_bracket, curv_via_covariant, curv_via_covariant_with, curv_via_lifts,
    curv_via_vertical_projection, curvature, lift_bracket_defect, tensoriality_check_curvature,
};
use fibrum_core::linalg::{max_abs, max_abs_diff};
use fibrum_core::scalar::Scalar;
use fibrum_core::transport::{
    covariant_derivative_along_curve, geodesic, integrate_field, lie_derivative_covariant,
    parallel_transport_vector, spray_from_connection, Circle, CurveOnBase, GeodesicPath, IntegratorConfig,
    LineSegment, TransportedVector,
};
use fibrum_core::{
    Connection, ConnectionKind, CurveMap, Error, Matrix, Point, ScalarMap, TotalTangent, TrivializedBundle, VectorMap,
};

use crate::config::{ConfigError, Scenario, ScenarioConfig};
use crate::report::{CheckRow, CurvatureRow, TrajectoryRow, VerificationReport};
use crate::sampling::Sampler;

type CoreResult<T> = fibrum_core::Result<T>;

/// Default tolerances, by check name. A config entry of the same name overrides.
pub const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("projector_algebra", 1e-12),
    ("lift_rank", 0.0),
    ("lift_section_invariance", 0.0),
    ("lift_bracket_projectability", 1e-9),
    ("natural_derivative_p_related", 1e-12),
    ("cocurvature", 1e-10),
    ("curvature_vertical_argument", 1e-10),
    ("curvature_bilinearity", 1e-10),
    ("curvature_tensoriality", 1e-9),
    ("curvature_lifts_vs_projection", 1e-9),
    ("curvature_verticality", 1e-10),
    ("curvature_antisymmetry", 1e-10),
    ("covariant_commutator", 1e-8),
    ("lift_cross_bracket", 1e-8),
    ("extension_independence", 1e-9),
    ("flat_curvature_zero", 1e-12),
    ("leibniz", 1e-10),
    ("curvature_composition", 1e-8),
    ("curvature_second_derivative", 1e-8),
    ("torsion_antisymmetry", 1e-12),
    ("torsion_zero", 1e-12),
    ("lie_derivative_order", 0.0),
    ("transport_round_trip", 1e-8),
    ("transport_covariantly_constant", 1e-8),
    ("transport_linearity", 1e-10),
    ("spray_compatibility", 1e-12),
    ("spray_geodesic", 1e-8),
    ("geodesic_covariant_velocity", 1e-8),
    ("metric_conservation", 1e-8),
    ("holonomy_angle", 1e-4),
    ("flat_holonomy", 1e-10),
];

/// Smallest observed convergence order accepted by `lie_derivative_order`.
pub const MIN_LIE_DERIVATIVE_ORDER: f64 = 1.9;

/// Step sizes used to estimate the order of the flow-based covariant derivative.
pub const LIE_DERIVATIVE_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

pub fn default_tolerance(check: &str) -> f64 {
    DEFAULT_TOLERANCES.iter().find(|(n, _)| *n == check).map_or(0.0, |(_, t)| *t)
}

/// Runs the scenario named in `cfg`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<VerificationReport, ConfigError> {
    let conn = cfg.connection()?;
    let mut run = Runner { cfg, conn: &conn, report: VerificationReport::for_config(cfg), sampler: Sampler::new(cfg.seed) };
    match cfg.scenario {
        Scenario::VerifyAll => run.verify_all()?,
        Scenario::CurvatureComparison => run.curvature_comparison()?,
        Scenario::Transport => run.transport()?,
        Scenario::Geodesic => run.geodesic()?,
        Scenario::Holonomy => run.holonomy()?,
        Scenario::CurvatureTable => run.curvature_table()?,
    }
    Ok(run.report)
}

/// NaN-propagating maximum.
fn worse(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn max_over<T>(items: &[T], mut f: impl FnMut(&T) -> CoreResult<f64>) -> CoreResult<f64> {
    items.iter().try_fold(0.0, |acc, item| Ok(worse(acc, f(item)?)))
}

/// A random section, a pair of base fields and a base point.
struct Tuple {
    s: BoundedMap,
    u: SmoothMap,
    v: SmoothMap,
    x: Vec<f64>,
    weights: Vec<f64>,
}

/// A random total point with two tangent vectors there.
struct TangentPair {
    e: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

/// `z ↦ s(z) + A·(z − x₀)`: another section through the same point above `x₀`.
struct Tilted<'a> {
    s: &'a BoundedMap,
    x0: Vec<f64>,
    a: Vec<f64>,
}

impl VectorMap for Tilted<'_> {
    fn eval<S: Scalar>(&self, z: &[S]) -> Vec<S> {
        let m = self.x0.len();
        let mut out = self.s.eval(z);
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..m {
                *o += (z[j] - self.x0[j]) * self.a[i * m + j];
            }
        }
        out
    }
}

/// `x₁ + y₁²` on the total space.
struct CoordinatePlusSquare {
    base_dim: usize,
}

impl ScalarMap for CoordinatePlusSquare {
    fn eval<S: Scalar>(&self, e: &[S]) -> S {
        e[0] + e[self.base_dim] * e[self.base_dim]
    }
}

/// `2 + sin(e₁)·cos(e_last)`.
struct Wave;

impl ScalarMap for Wave {
    fn eval<S: Scalar>(&self, e: &[S]) -> S {
        e[0].sin() * e[e.len() - 1].cos() + 2.0
    }
}

/// `exp(0.3·Σ eᵢ)`.
struct Exponential;

impl ScalarMap for Exponential {
    fn eval<S: Scalar>(&self, e: &[S]) -> S {
        (e.iter().fold(S::zero(), |acc, &c| acc + c) * 0.3).exp()
    }
}

/// `sin x₁` on the base.
struct SinFirst;

impl ScalarMap for SinFirst {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        x[0].sin()
    }
}

/// A base curve given in a config.
#[derive(Debug, Clone)]
enum BaseCurve {
    Line(LineSegment),
    Circle(Circle),
}

impl CurveMap for BaseCurve {
    fn eval<S: Scalar>(&self, t: S) -> Vec<S> {
        match self {
            BaseCurve::Line(c) => c.eval(t),
            BaseCurve::Circle(c) => c.eval(t),
        }
    }
}

/// The latitude `θ = θ₀`, traversed once eastward as `φ` runs over `[−π, π]`.
pub fn latitude_loop(theta0: f64) -> CurveOnBase<LineSegment> {
    CurveOnBase { path: LineSegment { from: vec![theta0, -PI], to: vec![theta0, PI] }, t0: 0.0, t1: 1.0 }
}

/// Rotation angle in `[0, 2π)` of a transported tangent vector relative to `∂_θ`,
/// measured in an orthonormal frame `(∂_θ, ∂_φ / sin θ)`.
pub fn sphere_rotation_angle(theta: f64, y: &[f64]) -> f64 {
    (theta.sin() * y[1]).atan2(y[0]).rem_euclid(2.0 * PI)
}

/// Parallel-transport rotation angle of the latitude `θ₀` on the unit sphere.
pub fn latitude_holonomy_angle(theta0: f64) -> f64 {
    2.0 * PI * (1.0 - theta0.cos())
}

fn is_tangent_bundle(b: &TrivializedBundle) -> bool {
    b.base_dim() == b.fibre_dim()
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    conn: &'a CatalogConnection,
    report: VerificationReport,
    sampler: Sampler,
}

impl Runner<'_> {
    fn bundle(&self) -> &TrivializedBundle {
        self.conn.bundle()
    }

    fn row(&mut self, name: &str, samples: usize, residual: CoreResult<f64>) {
        let tol = self.cfg.tolerance(name, default_tolerance(name));
        let row = match residual {
            Ok(r) => {
                let mut row = CheckRow::measured(name, samples, r, tol);
                if r.is_nan() {
                    row.reason = Some("residual is not a number".into());
                }
                row
            }
            Err(e) => CheckRow::errored(name, samples, tol, e.to_string()),
        };
        self.report.push(row);
    }

    fn draw_tuples(&mut self, n: usize) -> Vec<Tuple> {
        let conn = self.conn;
        let b = conn.bundle();
        (0..n)
            .map(|_| Tuple {
                s: self.sampler.section(b),
                u: self.sampler.base_field(b),
                v: self.sampler.base_field(b),
                x: self.sampler.in_box(b.base_box()),
                weights: self.sampler.vector(b.base_dim(), 0.5),
            })
            .collect()
    }

    fn draw_tangent_pairs(&mut self, n: usize) -> Vec<TangentPair> {
        let b = self.conn.bundle();
        let total = b.total_box();
        (0..n)
            .map(|_| TangentPair {
                e: self.sampler.in_box(&total),
                a: self.sampler.vector(b.total_dim(), 1.0),
                b: self.sampler.vector(b.total_dim(), 1.0),
                c: self.sampler.vector(b.total_dim(), 1.0),
            })
            .collect()
    }

    fn tangent(&self, e: &Point, stacked: &[f64]) -> CoreResult<TotalTangent> {
        let m = self.bundle().base_dim();
        TotalTangent::new(e.clone(), stacked[..m].to_vec(), stacked[m..].to_vec())
    }

    // ----- verify-all -------------------------------------------------------

    fn verify_all(&mut self) -> Result<(), ConfigError> {
        let tuples_n = self.cfg.count("samples", 50)?;
        let points_n = self.cfg.count("point_samples", 200)?;
        let flows_n = self.cfg.count("flow_samples", 5)?;
        self.connection_suite(points_n);
        self.curvature_suite(tuples_n, points_n);
        if self.conn.kind() == ConnectionKind::Linear {
            self.linear_suite(tuples_n);
        }
        self.transport_suite(flows_n);
        Ok(())
    }

    fn connection_suite(&mut self, points_n: usize) {
        let conn = self.conn;
        let b = conn.bundle();
        let points: Vec<Vec<f64>> = (0..points_n).map(|_| self.sampler.in_box(&b.total_box())).collect();
        let r = max_over(&points, |e| {
            let e = b.total_point_stacked(e)?;
            let pv = vertical_projector(conn, &e)?.matrix;
            let ph = horizontal_projector(conn, &e)?.matrix;
            let id = Matrix::identity(pv.rows());
            Ok([
                (&(&pv * &pv) - &pv).max_abs(),
                (&(&ph * &ph) - &ph).max_abs(),
                (&pv * &ph).max_abs(),
                (&ph * &pv).max_abs(),
                (&(&pv + &ph) - &id).max_abs(),
            ]
            .into_iter()
            .fold(0.0, worse))
        });
        self.row("projector_algebra", points_n, r);

        let rank_n = 50;
        let tuples = self.draw_tuples(rank_n);
        let m = b.base_dim();
        let r = max_over(&tuples, |t| {
            let x = b.base_point(&t.x)?;
            Ok((lift_rank_check(conn, &t.s, &x)? as f64 - m as f64).abs())
        });
        self.row("lift_rank", rank_n, r);

        let tilts: Vec<Vec<f64>> = (0..rank_n).map(|_| self.sampler.vector(b.fibre_dim() * m, 0.05)).collect();
        let r = max_over(&tuples.iter().zip(tilts).collect::<Vec<_>>(), |(t, a)| {
            let x = b.base_point(&t.x)?;
            let other = Tilted { s: &t.s, x0: t.x.clone(), a: a.clone() };
            Ok((&lift_matrix(conn, &t.s, &x)? - &lift_matrix(conn, &other, &x)?).max_abs())
        });
        self.row("lift_section_invariance", rank_n, r);

        let fields = self.draw_tuples(5);
        let samples: Vec<Vec<f64>> = (0..10).map(|_| self.sampler.in_box(&b.total_box())).collect();
        let total_points = || samples.iter().map(|e| b.total_point_stacked(e)).collect::<CoreResult<Vec<Point>>>();
        let r = total_points().and_then(|pts| {
            max_over(&fields, |t| {
                let hb = lie_bracket(horizontal_lift_field(conn, &t.u), horizontal_lift_field(conn, &t.v));
                check_p_related(&hb, &lie_bracket(&t.u, &t.v), &pts)
            })
        });
        self.row("lift_bracket_projectability", fields.len() * samples.len(), r);

        let r = total_points().and_then(|pts| {
            max_over(&fields, |t| check_p_related(&extend_natural_derivative(b, &t.s, &t.v), &t.v, &pts))
        });
        self.row("natural_derivative_p_related", fields.len() * samples.len(), r);
    }

    fn curvature_suite(&mut self, tuples_n: usize, points_n: usize) {
        let conn = self.conn;
        let b = conn.bundle();
        let m = b.base_dim();

        let pairs = self.draw_tangent_pairs(points_n);
        let r = max_over(&pairs, |p| {
            let e = b.total_point_stacked(&p.e)?;
            let x = self.tangent(&e, &p.a)?;
            let y = self.tangent(&e, &p.b)?;
            Ok(max_abs(&cocurvature(conn, &e, &x, &y)?.stacked()))
        });
        self.row("cocurvature", points_n, r);

        let r = max_over(&pairs, |p| {
            let e = b.total_point_stacked(&p.e)?;
            let mut vert = p.a.clone();
            vert[..m].iter_mut().for_each(|c| *c = 0.0);
            let x = self.tangent(&e, &vert)?;
            let y = self.tangent(&e, &p.b)?;
            Ok(max_abs(&curvature(conn, &e, &x, &y)?.fibre_part))
        });
        self.row("curvature_vertical_argument", points_n, r);

        let r = max_over(&pairs, |p| {
            let e = b.total_point_stacked(&p.e)?;
            let k = p.c[0];
            let sum: Vec<f64> = p.a.iter().zip(&p.c).map(|(a, c)| a + k * c).collect();
            let y = self.tangent(&e, &p.b)?;
            let r_sum = curvature(conn, &e, &self.tangent(&e, &sum)?, &y)?.fibre_part;
            let r_a = curvature(conn, &e, &self.tangent(&e, &p.a)?, &y)?.fibre_part;
            let r_c = curvature(conn, &e, &self.tangent(&e, &p.c)?, &y)?.fibre_part;
            let want: Vec<f64> = r_a.iter().zip(&r_c).map(|(a, c)| a + k * c).collect();
            Ok(max_abs_diff(&r_sum, &want))
        });
        self.row("curvature_bilinearity", points_n, r);

        let tens_n = 20.min(points_n);
        let plus_square = CoordinatePlusSquare { base_dim: m };
        let r = max_over(&pairs[..tens_n], |p| {
            let e = b.total_point_stacked(&p.e)?;
            let x = self.tangent(&e, &p.a)?;
            let y = self.tangent(&e, &p.b)?;
            Ok(tensoriality_check_curvature(conn, &e, &x, &y, &plus_square)?
                .max(tensoriality_check_curvature(conn, &e, &x, &y, &Wave)?)
                .max(tensoriality_check_curvature(conn, &e, &x, &y, &Exponential)?))
        });
        self.row("curvature_tensoriality", 3 * tens_n, r);

        if matches!(conn, CatalogConnection::Flat(_)) {
            let r = max_over(&pairs, |p| {
                let e = b.total_point_stacked(&p.e)?;
                Ok(max_abs(&curvature(conn, &e, &self.tangent(&e, &p.a)?, &self.tangent(&e, &p.b)?)?.fibre_part))
            });
            let tuples = self.draw_tuples(tuples_n);
            let lifts = max_over(&tuples, |t| {
                Ok(max_abs(&curv_via_lifts(conn, &t.s, &t.u, &t.v, &b.base_point(&t.x)?)?.fibre_part))
            });
            self.row("flat_curvature_zero", points_n + tuples_n, r.and_then(|a| lifts.map(|l| worse(a, l))));
        }

        let tuples = self.draw_tuples(tuples_n);
        self.tuple_checks(&tuples);
    }

    /// Checks over random `(s, u, v, x)` shared by `verify-all` and `curvature-comparison`.
    fn tuple_checks(&mut self, tuples: &[Tuple]) {
        let conn = self.conn;
        let b = conn.bundle();
        let n = tuples.len();
        let r = max_over(tuples, |t| {
            let x = b.base_point(&t.x)?;
            let a = curv_via_lifts(conn, &t.s, &t.u, &t.v, &x)?.fibre_part;
            let c = curv_via_vertical_projection(conn, &t.s, &t.u, &t.v, &x)?.fibre_part;
            Ok(max_abs_diff(&a, &c))
        });
        self.row("curvature_lifts_vs_projection", n, r);

        let r = max_over(tuples, |t| {
            Ok(max_abs(&lift_bracket_defect(conn, &t.s, &t.u, &t.v, &b.base_point(&t.x)?)?.base_part))
        });
        self.row("curvature_verticality", n, r);

        let r = max_over(tuples, |t| {
            let x = b.base_point(&t.x)?;
            let uv = curv_via_lifts(conn, &t.s, &t.u, &t.v, &x)?.fibre_part;
            let vu = curv_via_lifts(conn, &t.s, &t.v, &t.u, &x)?.fibre_part;
            Ok(uv.iter().zip(&vu).map(|(p, q)| (p + q).abs()).fold(0.0, worse))
        });
        self.row("curvature_antisymmetry", n, r);

        let r = max_over(tuples, |t| {
            let x = b.base_point(&t.x)?;
            let a = curv_via_lifts(conn, &t.s, &t.u, &t.v, &x)?.fibre_part;
            let c = curv_via_covariant(conn, &t.s, &t.u, &t.v, &x)?.fibre_part;
            Ok(max_abs_diff(&a, &c))
        });
        self.row("covariant_commutator", n, r);

        let r = max_over(tuples, |t| {
            Ok(max_abs(&cross_bracket(conn, &t.s, &t.u, &t.v, &b.base_point(&t.x)?)?.stacked()))
        });
        self.row("lift_cross_bracket", n, r);

        let r = max_over(tuples, |t| {
            let x = b.base_point(&t.x)?;
            let plain = curv_via_covariant(conn, &t.s, &t.u, &t.v, &x)?.fibre_part;
            let foliation = Foliation::ExponentialOffset { weights: t.weights.clone() };
            let other = curv_via_covariant_with(conn, &t.s, &t.u, &t.v, &x, &foliation)?.fibre_part;
            Ok(max_abs_diff(&plain, &other))
        });
        self.row("extension_independence", n, r);
    }

    fn linear_suite(&mut self, tuples_n: usize) {
        let b = self.conn.bundle();
        let tm = is_tangent_bundle(b);
        let lin = match LinearConnection::new(self.conn) {
            Ok(l) => l,
            Err(e) => return self.row("leibniz", 0, Err(e)),
        };
        let tuples = self.draw_tuples(tuples_n);

        let r = max_over(&tuples, |t| leibniz_check(&lin, &t.s, &SinFirst, &t.v, &b.base_point(&t.x)?));
        self.row("leibniz", tuples_n, r);

        let r = max_over(&tuples, |t| {
            let x = b.base_point(&t.x)?;
            let a = curv_via_lifts(&lin, &t.s, &t.u, &t.v, &x)?.fibre_part;
            Ok(max_abs_diff(&a, &curv_via_composition(&lin, &t.s, &t.u, &t.v, &x)?))
        });
        self.row("curvature_composition", tuples_n, r);

        if !tm {
            return;
        }
        let r = max_over(&tuples, |t| {
            let x = b.base_point(&t.x)?;
            let a = curv_via_lifts(&lin, &t.s, &t.u, &t.v, &x)?.fibre_part;
            Ok(max_abs_diff(&a, &curv_via_second_derivative(&lin, &t.s, &t.u, &t.v, &x)?))
        });
        self.row("curvature_second_derivative", tuples_n, r);

        let r = max_over(&tuples, |t| {
            let x = b.base_point(&t.x)?;
            let uv = torsion(&lin, &t.u, &t.v, &x)?;
            let vu = torsion(&lin, &t.v, &t.u, &x)?;
            Ok(uv.iter().zip(&vu).map(|(p, q)| (p + q).abs()).fold(0.0, worse))
        });
        self.row("torsion_antisymmetry", tuples_n, r);

        if matches!(self.conn, CatalogConnection::Sphere(_)) {
            let r = max_over(&tuples, |t| Ok(max_abs(&torsion(&lin, &t.u, &t.v, &b.base_point(&t.x)?)?)));
            self.row("torsion_zero", tuples_n, r);
        }
    }

    /// A short random segment inside the base box with a fibre vector inside the fibre box.
    fn draw_segment(&mut self) -> (CurveOnBase<LineSegment>, Vec<f64>) {
        let b = self.conn.bundle();
        let from = self.sampler.in_box(b.base_box());
        let to: Vec<f64> = from.iter().zip(self.sampler.vector(b.base_dim(), 0.25)).map(|(a, d)| a + d).collect();
        let y0: Vec<f64> = self.sampler.in_box(b.fibre_box()).iter().map(|c| 0.5 * c).collect();
        (CurveOnBase { path: LineSegment { from, to }, t0: 0.0, t1: 1.0 }, y0)
    }

    fn transport_suite(&mut self, flows_n: usize) {
        let conn = self.conn;
        let b = conn.bundle();
        let cfg = self.cfg.integrator;
        let segments: Vec<_> = (0..flows_n).map(|_| self.draw_segment()).collect();

        let r = max_over(&segments, |(curve, y0)| {
            let y1 = parallel_transport_vector(conn, curve, y0, &cfg)?;
            let back = parallel_transport_vector(conn, &curve.reversed(), &y1, &cfg)?;
            Ok(max_abs_diff(&back, y0))
        });
        self.row("transport_round_trip", flows_n, r);

        let checkpoints = [0.0, 0.25, 0.5, 0.75, 1.0];
        let r = max_over(&segments, |(curve, y0)| {
            let tv = TransportedVector::new(conn, curve.clone(), y0, &cfg)?;
            max_over(&checkpoints, |&t| Ok(max_abs(&covariant_derivative_along_curve(conn, tv.curve(), &tv, t)?)))
        });
        self.row("transport_covariantly_constant", flows_n * checkpoints.len(), r);

        if conn.kind() == ConnectionKind::Linear {
            let others: Vec<(Vec<f64>, f64)> = (0..flows_n)
                .map(|_| {
                    let y: Vec<f64> = self.sampler.in_box(b.fibre_box()).iter().map(|c| 0.2 * c).collect();
                    (y, self.sampler.unit())
                })
                .collect();
            let r = max_over(&segments.iter().zip(&others).collect::<Vec<_>>(), |((curve, y1), (y2, k))| {
                let t1 = parallel_transport_vector(conn, curve, y1, &cfg)?;
                let t2 = parallel_transport_vector(conn, curve, y2, &cfg)?;
                let mix: Vec<f64> = y1.iter().zip(y2).map(|(p, q)| p + k * q).collect();
                let tm = parallel_transport_vector(conn, curve, &mix, &cfg)?;
                let want: Vec<f64> = t1.iter().zip(&t2).map(|(p, q)| p + k * q).collect();
                Ok(max_abs_diff(&tm, &want))
            });
            self.row("transport_linearity", flows_n, r);
        }

        let tuples = self.draw_tuples(flows_n);
        let mut min_order = f64::INFINITY;
        let r = max_over(&tuples, |t| {
            let order = lie_derivative_order(conn, &t.s, &t.v, &b.base_point(&t.x)?)?;
            min_order = min_order.min(order);
            Ok((MIN_LIE_DERIVATIVE_ORDER - order).max(0.0))
        });
        if r.is_ok() && min_order.is_finite() {
            self.report.results.insert("lie_derivative_min_order".into(), min_order);
        }
        self.row("lie_derivative_order", flows_n, r);

        if conn.kind() == ConnectionKind::Linear && is_tangent_bundle(b) {
            let starts: Vec<(Vec<f64>, Vec<f64>)> = (0..flows_n)
                .map(|_| (self.sampler.in_box(b.base_box()), self.sampler.vector(b.base_dim(), 0.3)))
                .collect();
            self.geodesic_checks(&starts, 1.0);
        }

        if matches!(conn, CatalogConnection::Sphere(_)) {
            let r = max_over(&segments, |(curve, y0)| {
                let y1 = parallel_transport_vector(conn, curve, y0, &cfg)?;
                let g0 = SphereConnection::metric_norm_sq(&curve.path.from, y0);
                let g1 = SphereConnection::metric_norm_sq(&curve.path.to, &y1);
                Ok((g1 - g0).abs())
            });
            self.row("metric_conservation", flows_n, r);
            self.latitude_holonomy(PI / 3.0, &[1.0, 0.0]);
        }

        if matches!(conn, CatalogConnection::Flat(_)) {
            let loops: Vec<(Vec<f64>, Vec<f64>)> =
                (0..flows_n).map(|_| (self.sampler.in_box(b.base_box()), self.sampler.in_box(b.fibre_box()))).collect();
            let radius = flat_loop_radius(b);
            let r = max_over(&loops, |(center, y0)| {
                let curve = CurveOnBase::new(Circle { center: center.clone(), radius }, 0.0, 2.0 * PI)?;
                let start = curve.path.eval(0.0);
                b.base_point(&start)?;
                Ok(fibrum_core::transport::holonomy_loop(conn, &curve, y0, &cfg)?.displacement)
            });
            self.row("flat_holonomy", flows_n, r);
        }
    }

    fn geodesic_checks(&mut self, starts: &[(Vec<f64>, Vec<f64>)], t_end: f64) {
        let conn = self.conn;
        let b = conn.bundle();
        let cfg = self.cfg.integrator;
        let n = starts.len();
        let lin = match LinearConnection::new(conn) {
            Ok(l) => l,
            Err(e) => return self.row("spray_geodesic", n, Err(e)),
        };

        let r = max_over(starts, |(x0, v0)| {
            let spray = spray_from_connection(lin)?;
            let e = b.total_point(x0, v0)?;
            let mid = geodesic(&lin, x0, v0, t_end / 2.0, &cfg)?;
            let last = mid.last().expect("geodesic has a first sample");
            let e_mid = b.total_point(&last.x, &last.v)?;
            Ok(worse(spray.compatibility_residual(&e)?, spray.compatibility_residual(&e_mid)?))
        });
        self.row("spray_compatibility", 2 * n, r);

        let r = max_over(starts, |(x0, v0)| {
            let spray = spray_from_connection(lin)?;
            let mut state = x0.clone();
            state.extend_from_slice(v0);
            let by_spray = integrate_field(&spray, &b.total_box(), &state, t_end, &cfg)?;
            let samples = geodesic(&lin, x0, v0, t_end, &cfg)?;
            let last = samples.last().expect("geodesic has a first sample");
            let mut by_geodesic = last.x.clone();
            by_geodesic.extend_from_slice(&last.v);
            Ok(max_abs_diff(&by_spray, &by_geodesic))
        });
        self.row("spray_geodesic", n, r);

        let checkpoints: Vec<f64> = (0..=4).map(|k| t_end * k as f64 / 4.0).collect();
        let r = max_over(starts, |(x0, v0)| {
            let path = GeodesicPath::new(lin, x0, v0, t_end, &cfg)?;
            let curve = CurveOnBase::new(path.position(), 0.0, t_end)?;
            max_over(&checkpoints, |&t| {
                Ok(max_abs(&covariant_derivative_along_curve(conn, &curve, &path.velocity(), t)?))
            })
        });
        self.row("geodesic_covariant_velocity", n * checkpoints.len(), r);
    }

    fn latitude_holonomy(&mut self, theta0: f64, y0: &[f64]) {
        let conn = self.conn;
        let cfg = self.cfg.integrator;
        let expected = latitude_holonomy_angle(theta0);
        let curve = latitude_loop(theta0);
        let r = fibrum_core::transport::holonomy_loop(conn, &curve, y0, &cfg).map(|h| {
            let angle = sphere_rotation_angle(theta0, &h.y_end) - sphere_rotation_angle(theta0, y0);
            let angle = angle.rem_euclid(2.0 * PI);
            self.report.results.insert("holonomy_angle".into(), angle);
            self.report.results.insert("holonomy_expected_angle".into(), expected);
            self.report.results.insert("holonomy_displacement".into(), h.displacement);
            (angle - expected).abs()
        });
        self.row("holonomy_angle", 1, r);
    }

    // ----- single scenarios -------------------------------------------------

    fn curvature_comparison(&mut self) -> Result<(), ConfigError> {
        let n = self.cfg.count("samples", 100)?;
        let tuples = self.draw_tuples(n);
        self.tuple_checks(&tuples);
        let conn = self.conn;
        let b = conn.bundle();
        for t in &tuples {
            let row = b.base_point(&t.x).and_then(|x| {
                let rows = commutator_residuals(conn, &t.s, &t.u, &t.v, std::slice::from_ref(&x))?;
                Ok(curvature_row(&rows[0], &t.s))
            });
            if let Ok(row) = row {
                self.report.curvature_rows.push(row);
            }
        }
        Ok(())
    }

    fn curvature_table(&mut self) -> Result<(), ConfigError> {
        let n = self.cfg.count("samples", 10)?;
        let fields = self.cfg.text("fields")?.unwrap_or("coordinate").to_string();
        if !matches!(fields.as_str(), "coordinate" | "random") {
            return Err(ConfigError::Invalid {
                field: "scenario_params.fields".into(),
                message: "expected \"coordinate\" or \"random\"".into(),
            });
        }
        let conn = self.conn;
        let b = conn.bundle();
        let m = b.base_dim();
        let tuples = self.draw_tuples(n);
        let unit = |j: usize| {
            let mut e = vec![0.0; m];
            e[j.min(m - 1)] = 1.0;
            ConstantField(e)
        };
        let mut rows = Vec::new();
        let mut worst = Ok((0.0, 0.0));
        for t in &tuples {
            let got = b.base_point(&t.x).and_then(|x| {
                let rows = match fields.as_str() {
                    "coordinate" => commutator_residuals(conn, &t.s, &unit(0), &unit(1), std::slice::from_ref(&x))?,
                    _ => commutator_residuals(conn, &t.s, &t.u, &t.v, std::slice::from_ref(&x))?,
                };
                Ok(rows.into_iter().next().expect("one sample in, one row out"))
            });
            match got {
                Ok(row) => {
                    if let Ok((r, c)) = worst.as_mut() {
                        *r = worse(*r, row.residual);
                        *c = worse(*c, row.cross_residual);
                    }
                    rows.push(curvature_row(&row, &t.s));
                }
                Err(e) => worst = Err(e),
            }
        }
        self.report.curvature_rows = rows;
        self.row("covariant_commutator", n, worst.clone().map(|w| w.0));
        self.row("lift_cross_bracket", n, worst.map(|w| w.1));
        Ok(())
    }

    fn fibre_vector(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.cfg.vector(key, self.bundle().fibre_dim())
    }

    fn base_vector(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.cfg.vector(key, self.bundle().base_dim())
    }

    fn transport(&mut self) -> Result<(), ConfigError> {
        let y0 = self.fibre_vector("y0")?.expect("required parameter checked at load");
        let rows_n = self.cfg.count("trajectory_rows", 11)?;
        let curve = match (self.base_vector("center")?, self.cfg.number("radius")?) {
            (Some(center), Some(radius)) => {
                CurveOnBase { path: BaseCurve::Circle(Circle { center, radius }), t0: 0.0, t1: 2.0 * PI }
            }
            _ => {
                let from = self.base_vector("from")?.expect("required parameter checked at load");
                let to = self.base_vector("to")?.expect("required parameter checked at load");
                CurveOnBase { path: BaseCurve::Line(LineSegment { from, to }), t0: 0.0, t1: 1.0 }
            }
        };
        let conn = self.conn;
        let cfg = self.cfg.integrator;

        let end = parallel_transport_vector(conn, &curve, &y0, &cfg);
        if let Ok(y1) = &end {
            for (i, c) in y1.iter().enumerate() {
                self.report.results.insert(format!("y_end_{}", i + 1), *c);
            }
            let r = parallel_transport_vector(conn, &curve.reversed(), y1, &cfg).map(|back| max_abs_diff(&back, &y0));
            self.row("transport_round_trip", 1, r);
        } else {
            self.row("transport_round_trip", 1, end.clone().map(|_| 0.0));
        }

        let times: Vec<f64> = (0..rows_n)
            .map(|k| curve.t0 + (curve.t1 - curve.t0) * k as f64 / (rows_n.max(2) - 1) as f64)
            .take(rows_n)
            .collect();
        let r = TransportedVector::new(conn, curve.clone(), &y0, &cfg).and_then(|tv| {
            let mut worst: f64 = 0.0;
            for &t in &times {
                let y: Vec<f64> = tv.eval(t);
                self.report.trajectory.push(TrajectoryRow { t, base: curve.path.eval(t), fibre: y });
                worst = worse(worst, max_abs(&covariant_derivative_along_curve(conn, tv.curve(), &tv, t)?));
            }
            Ok(worst)
        });
        self.row("transport_covariantly_constant", times.len(), r);

        if matches!(conn, CatalogConnection::Flat(_)) {
            self.row("flat_holonomy", 1, end.map(|y1| max_abs_diff(&y1, &y0)));
        }
        Ok(())
    }

    fn geodesic(&mut self) -> Result<(), ConfigError> {
        let x0 = self.base_vector("x0")?.expect("required parameter checked at load");
        let v0 = self.base_vector("v0")?.expect("required parameter checked at load");
        let t_end = self.cfg.number("t_end")?.unwrap_or(1.0);
        let rows_n = self.cfg.count("trajectory_rows", 101)?;
        let conn = self.conn;
        let cfg = self.cfg.integrator;
        let samples = LinearConnection::new(conn).and_then(|lin| geodesic(&lin, &x0, &v0, t_end, &cfg));
        match &samples {
            Ok(samples) => {
                let stride = samples.len().div_ceil(rows_n.max(1)).max(1);
                for (k, s) in samples.iter().enumerate() {
                    if k % stride == 0 || k + 1 == samples.len() {
                        self.report.trajectory.push(TrajectoryRow { t: s.t, base: s.x.clone(), fibre: s.v.clone() });
                    }
                }
                let last = samples.last().expect("geodesic has a first sample");
                for (i, c) in last.x.iter().enumerate() {
                    self.report.results.insert(format!("x_end_{}", i + 1), *c);
                }
                for (i, c) in last.v.iter().enumerate() {
                    self.report.results.insert(format!("v_end_{}", i + 1), *c);
                }
                if matches!(conn, CatalogConnection::Sphere(_)) {
                    let g0 = SphereConnection::metric_norm_sq(&x0, &v0);
                    let drift = samples
                        .iter()
                        .map(|s| (SphereConnection::metric_norm_sq(&s.x, &s.v) - g0).abs())
                        .fold(0.0, worse);
                    self.row("metric_conservation", samples.len(), Ok(drift));
                }
                self.geodesic_checks(&[(x0, v0)], t_end);
            }
            Err(e) => self.row("geodesic", 1, Err(e.clone())),
        }
        Ok(())
    }

    fn holonomy(&mut self) -> Result<(), ConfigError> {
        let f = self.bundle().fibre_dim();
        let y0 = match self.fibre_vector("y0")? {
            Some(y) => y,
            None => {
                let mut e1 = vec![0.0; f];
                e1[0] = 1.0;
                e1
            }
        };
        let conn = self.conn;
        let cfg = self.cfg.integrator;
        if let Some(theta0) = self.cfg.number("theta0")? {
            if !matches!(conn, CatalogConnection::Sphere(_)) {
                self.row(
                    "holonomy_angle",
                    1,
                    Err(Error::Invalid("theta0 names a latitude loop, which needs the sphere bundle".into())),
                );
                return Ok(());
            }
            self.latitude_holonomy(theta0, &y0);
            let curve = latitude_loop(theta0);
            self.loop_trajectory(&curve, &y0, 37);
            return Ok(());
        }
        let center = self.base_vector("center")?.expect("required parameter checked at load");
        let radius = self.cfg.number("radius")?.expect("required parameter checked at load");
        let curve = CurveOnBase { path: Circle { center, radius }, t0: 0.0, t1: 2.0 * PI };
        let h = fibrum_core::transport::holonomy_loop(conn, &curve, &y0, &cfg);
        if let Ok(h) = &h {
            self.report.results.insert("holonomy_displacement".into(), h.displacement);
            for (i, c) in h.y_end.iter().enumerate() {
                self.report.results.insert(format!("y_end_{}", i + 1), *c);
            }
        }
        if matches!(conn, CatalogConnection::Flat(_)) {
            self.row("flat_holonomy", 1, h.map(|h| h.displacement));
        } else if let Err(e) = h {
            self.row("holonomy", 1, Err(e));
        }
        self.loop_trajectory(&curve, &y0, 37);
        Ok(())
    }

    fn loop_trajectory<P: CurveMap + Clone>(&mut self, curve: &CurveOnBase<P>, y0: &[f64], rows_n: usize) {
        let Ok(tv) = TransportedVector::new(self.conn, curve.clone(), y0, &self.cfg.integrator) else {
            return;
        };
        for k in 0..rows_n {
            let t = curve.t0 + (curve.t1 - curve.t0) * k as f64 / (rows_n - 1) as f64;
            self.report.trajectory.push(TrajectoryRow { t, base: curve.path.eval(t), fibre: tv.eval(t) });
        }
    }
}

fn curvature_row(row: &fibrum_core::curvature::CurvatureReportRow, s: &BoundedMap) -> CurvatureRow {
    CurvatureRow {
        point: row.point.coords().to_vec(),
        section_value: s.eval(row.point.coords()),
        via_lifts: row.via_lifts.clone(),
        via_covariant: row.via_covariant.clone(),
        residual: row.residual,
        cross_residual: row.cross_residual,
    }
}

/// A loop radius that keeps circles around shrunk-box centers inside the base box.
fn flat_loop_radius(b: &TrivializedBundle) -> f64 {
    let widths = b.base_box().lo().iter().zip(b.base_box().hi()).map(|(l, h)| h - l);
    0.09 * widths.fold(f64::INFINITY, f64::min)
}

/// Observed convergence order of the flow-based covariant derivative towards
/// the algebraic one over [`LIE_DERIVATIVE_STEPS`]; the smaller of the two
/// successive estimates. Infinite when the flow formula is already exact.
pub fn lie_derivative_order<C: Connection, Sec: VectorMap, V: VectorMap>(
    conn: &C,
    s: &Sec,
    v: &V,
    x: &Point,
) -> CoreResult<f64> {
    let exact = covariant_derivative(conn, s, v, x)?;
    let scale = 1.0 + max_abs(&exact);
    let errors = LIE_DERIVATIVE_STEPS
        .iter()
        .map(|&lambda| {
            let cfg = IntegratorConfig::new(lambda, 1)?;
            Ok(max_abs_diff(&lie_derivative_covariant(conn, s, v, x, &cfg)?, &exact))
        })
        .collect::<CoreResult<Vec<f64>>>()?;
    let mut order = f64::INFINITY;
    for k in 0..errors.len() - 1 {
        let (coarse, fine) = (errors[k], errors[k + 1]);
        if coarse <= 1e-13 * scale {
            continue;
        }
        let ratio = LIE_DERIVATIVE_STEPS[k] / LIE_DERIVATIVE_STEPS[k + 1];
        order = order.min((coarse / fine).ln() / ratio.ln());
    }
    Ok(order)
}
