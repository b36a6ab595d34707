//! Acceptance criteria, one test each. Every test prints a single
//! `PASS`/`FAIL` line; run with `--nocapture` to see them all.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use fibrum::sampling::Sampler;
use fibrum_core::calculus::{check_p_related, lie_bracket};
use fibrum_core::catalog::{BoundedMap, CatalogConnection, Params, SmoothMap, SphereConnection, CATALOG_NAMES};
use fibrum_core::connection::{
    covariant_derivative, extend_natural_derivative, horizontal_lift_field, horizontal_projector, lift_matrix,
    lift_rank_check, vertical_projector, Foliation,
};
use fibrum_core::curvature::linear::{
    curv_via_composition, curv_via_second_derivative, leibniz_check, torsion, LinearConnection,
};
use fibrum_core::curvature::{
    cocurvature, curv_via_covariant, curv_via_covariant_with, curv_via_lifts, curv_via_vertical_projection,
    lift_bracket_defect, tensoriality_check_curvature,
};
use fibrum_core::linalg::{max_abs, max_abs_diff};
use fibrum_core::scalar::Scalar;
use fibrum_core::transport::{
    covariant_derivative_along_curve, geodesic, holonomy_loop, lie_derivative_covariant,
    rk4_step, spray_from_connection, Circle, CurveOnBase, GeodesicPath, IntegratorConfig, LineSegment, SprayField,
};
use fibrum_core::{Connection, CurveMap, Matrix, ScalarMap, TotalTangent, VectorMap};

const SEED: u64 = 20_240_601;

fn verdict(criterion: u32, what: &str, measured: f64, bound: &str, pass: bool) -> bool {
    println!(
        "{} criterion {criterion:>2}: {what}: measured {measured:.3e}, required {bound}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn worse(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn catalog(name: &str) -> CatalogConnection {
    let mut p = Params::new();
    if name == "tm-custom-christoffel" {
        p.insert("G_1_12".into(), 0.7);
        p.insert("G_2_11_x2".into(), -0.4);
        p.insert("G_2_21".into(), 0.3);
    }
    CatalogConnection::from_name(name, &p).unwrap()
}

fn all_connections() -> Vec<CatalogConnection> {
    CATALOG_NAMES.iter().map(|n| catalog(n)).collect()
}

struct Tuple {
    conn: CatalogConnection,
    s: BoundedMap,
    u: SmoothMap,
    v: SmoothMap,
    x: Vec<f64>,
}

/// 100 tuples cycling through flat, sphere and nonlinear-demo.
fn commutator_tuples(sampler: &mut Sampler) -> Vec<Tuple> {
    let conns = [catalog("flat"), catalog("sphere"), catalog("nonlinear-demo")];
    (0..100)
        .map(|k| {
            let conn = conns[k % 3].clone();
            let b = conn.bundle().clone();
            Tuple {
                s: sampler.section(&b),
                u: sampler.base_field(&b),
                v: sampler.base_field(&b),
                x: sampler.in_box(b.base_box()),
                conn,
            }
        })
        .collect()
}

#[test]
fn criterion_01_curvature_equals_covariant_commutator() {
    let start = Instant::now();
    let tuples = commutator_tuples(&mut Sampler::new(SEED));
    let mut worst: f64 = 0.0;
    for t in &tuples {
        let x = t.conn.bundle().base_point(&t.x).unwrap();
        let a = curv_via_lifts(&t.conn, &t.s, &t.u, &t.v, &x).unwrap().fibre_part;
        let c = curv_via_covariant(&t.conn, &t.s, &t.u, &t.v, &x).unwrap().fibre_part;
        worst = worse(worst, max_abs_diff(&a, &c));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = verdict(1, "max |curv_via_lifts - curv_via_covariant| over 100 tuples", worst, "<= 1e-8", worst <= 1e-8);
    println!("              runtime {secs:.2} s (limit 30 s)");
    assert!(secs < 30.0, "runtime {secs} s");
    assert!(pass, "curvature via lifts and via covariant commutators differ by {worst:e}");
}

#[test]
fn criterion_02_lift_defect_is_vertical_projection_of_bracket() {
    let tuples = commutator_tuples(&mut Sampler::new(SEED));
    let (mut agree, mut base): (f64, f64) = (0.0, 0.0);
    for t in &tuples {
        let x = t.conn.bundle().base_point(&t.x).unwrap();
        let a = curv_via_lifts(&t.conn, &t.s, &t.u, &t.v, &x).unwrap().fibre_part;
        let p = curv_via_vertical_projection(&t.conn, &t.s, &t.u, &t.v, &x).unwrap().fibre_part;
        agree = worse(agree, max_abs_diff(&a, &p));
        base = worse(base, max_abs(&lift_bracket_defect(&t.conn, &t.s, &t.u, &t.v, &x).unwrap().base_part));
    }
    let pass = verdict(2, "lift defect vs -P_V[H_u,H_v]", agree, "<= 1e-9", agree <= 1e-9)
        & verdict(2, "base part of the lift defect", base, "<= 1e-10", base <= 1e-10);
    assert!(pass);
}

fn tangent(b: &fibrum_core::TrivializedBundle, e: &fibrum_core::Point, stacked: &[f64]) -> TotalTangent {
    let m = b.base_dim();
    TotalTangent::new(e.clone(), stacked[..m].to_vec(), stacked[m..].to_vec()).unwrap()
}

#[test]
fn criterion_03_cocurvature_vanishes() {
    let mut sampler = Sampler::new(SEED + 3);
    let mut worst: f64 = 0.0;
    let mut evaluations = 0;
    for conn in all_connections() {
        let b = conn.bundle();
        for _ in 0..200 {
            let e = sampler.total_point(b).unwrap();
            let x = tangent(b, &e, &sampler.vector(b.total_dim(), 1.0));
            let y = tangent(b, &e, &sampler.vector(b.total_dim(), 1.0));
            worst = worse(worst, max_abs(&cocurvature(&conn, &e, &x, &y).unwrap().stacked()));
            evaluations += 1;
        }
    }
    assert_eq!(evaluations, 800);
    assert!(verdict(3, "cocurvature over 200 points per connection", worst, "<= 1e-10", worst <= 1e-10));
}

struct ShiftedSquare(usize);

impl ScalarMap for ShiftedSquare {
    fn eval<S: Scalar>(&self, e: &[S]) -> S {
        e[0] + e[self.0] * e[self.0]
    }
}

struct Trig;

impl ScalarMap for Trig {
    fn eval<S: Scalar>(&self, e: &[S]) -> S {
        (e[0] * 0.7).cos() * e[e.len() - 1].sin() - 1.5
    }
}

struct Gaussian;

impl ScalarMap for Gaussian {
    fn eval<S: Scalar>(&self, e: &[S]) -> S {
        let r2 = e.iter().fold(S::zero(), |acc, &c| acc + c * c);
        (r2 * -0.1).exp()
    }
}

#[test]
fn criterion_04_curvature_is_tensorial() {
    let mut sampler = Sampler::new(SEED + 4);
    let mut worst: f64 = 0.0;
    for conn in all_connections() {
        let b = conn.bundle();
        let square = ShiftedSquare(b.base_dim());
        for _ in 0..20 {
            let e = sampler.total_point(b).unwrap();
            let x = tangent(b, &e, &sampler.vector(b.total_dim(), 1.0));
            let y = tangent(b, &e, &sampler.vector(b.total_dim(), 1.0));
            worst = worse(worst, tensoriality_check_curvature(&conn, &e, &x, &y, &square).unwrap());
            worst = worse(worst, tensoriality_check_curvature(&conn, &e, &x, &y, &Trig).unwrap());
            worst = worse(worst, tensoriality_check_curvature(&conn, &e, &x, &y, &Gaussian).unwrap());
        }
    }
    assert!(verdict(4, "R(fX,Y) - f R(X,Y), 3 scalar fields per connection", worst, "<= 1e-9", worst <= 1e-9));
}

#[test]
fn criterion_05_projector_algebra() {
    let mut sampler = Sampler::new(SEED + 5);
    let mut worst: f64 = 0.0;
    for conn in all_connections() {
        let b = conn.bundle();
        for _ in 0..200 {
            let e = sampler.total_point(b).unwrap();
            let pv = vertical_projector(&conn, &e).unwrap().matrix;
            let ph = horizontal_projector(&conn, &e).unwrap().matrix;
            let id = Matrix::identity(pv.rows());
            for r in [
                (&(&pv * &pv) - &pv).max_abs(),
                (&(&ph * &ph) - &ph).max_abs(),
                (&pv * &ph).max_abs(),
                (&ph * &pv).max_abs(),
                (&(&pv + &ph) - &id).max_abs(),
            ] {
                worst = worse(worst, r);
            }
        }
    }
    assert!(verdict(5, "P^2 = P, P_V + P_H = I, P_V P_H = 0", worst, "<= 1e-12", worst <= 1e-12));
}

#[test]
fn criterion_06_lift_brackets_project_and_extensions_are_related() {
    let mut sampler = Sampler::new(SEED + 6);
    let (mut bracket, mut related): (f64, f64) = (0.0, 0.0);
    for conn in all_connections() {
        let b = conn.bundle();
        for _ in 0..10 {
            let u = sampler.base_field(b);
            let v = sampler.base_field(b);
            let s = sampler.section(b);
            let points: Vec<_> = (0..10).map(|_| sampler.total_point(b).unwrap()).collect();
            let hb = lie_bracket(horizontal_lift_field(&conn, &u), horizontal_lift_field(&conn, &v));
            bracket = worse(bracket, check_p_related(&hb, &lie_bracket(&u, &v), &points).unwrap());
            related = worse(related, check_p_related(&extend_natural_derivative(b, &s, &v), &v, &points).unwrap());
        }
    }
    let pass = verdict(6, "base part of [H_u,H_v] vs [u,v]", bracket, "<= 1e-9", bracket <= 1e-9)
        & verdict(6, "extended natural derivative is p-related to v", related, "<= 1e-12", related <= 1e-12);
    assert!(pass);
}

/// `s(x₀) + B·(z − x₀)`: an affine section agreeing with another one at `x₀`.
struct AffineThrough {
    value: Vec<f64>,
    x0: Vec<f64>,
    slope: Vec<f64>,
}

impl VectorMap for AffineThrough {
    fn eval<S: Scalar>(&self, z: &[S]) -> Vec<S> {
        let m = self.x0.len();
        (0..self.value.len())
            .map(|i| {
                (0..m).fold(S::cst(self.value[i]), |acc, j| acc + (z[j] - self.x0[j]) * self.slope[i * m + j])
            })
            .collect()
    }
}

#[test]
fn criterion_07_lift_has_full_rank_and_depends_on_the_point_only() {
    let mut sampler = Sampler::new(SEED + 7);
    let mut deficient = 0;
    let mut changed: f64 = 0.0;
    for conn in all_connections() {
        let b = conn.bundle();
        for _ in 0..50 {
            let s = sampler.section(b);
            let x = sampler.base_point(b).unwrap();
            if lift_rank_check(&conn, &s, &x).unwrap() != b.base_dim() {
                deficient += 1;
            }
            let other =
                AffineThrough { value: s.eval(x.coords()), x0: x.coords().to_vec(), slope: sampler.vector(b.fibre_dim() * b.base_dim(), 2.0) };
            let a = lift_matrix(&conn, &s, &x).unwrap();
            let c = lift_matrix(&conn, &other, &x).unwrap();
            changed = worse(changed, (&a - &c).max_abs());
        }
    }
    let pass = verdict(7, "points with lift rank != m", deficient as f64, "= 0", deficient == 0)
        & verdict(7, "lift change under a section with the same value", changed, "= 0 exactly", changed == 0.0);
    assert!(pass);
}

#[test]
fn criterion_08_flow_definition_converges_at_second_order() {
    let mut sampler = Sampler::new(SEED + 8);
    let steps = [1e-2, 1e-3, 1e-4];
    let mut min_order = f64::INFINITY;
    for name in ["sphere", "nonlinear-demo", "tm-custom-christoffel"] {
        let conn = catalog(name);
        let b = conn.bundle();
        for _ in 0..4 {
            let s = sampler.section(b);
            let v = sampler.base_field(b);
            let x = sampler.base_point(b).unwrap();
            let exact = covariant_derivative(&conn, &s, &v, &x).unwrap();
            let errors: Vec<f64> = steps
                .iter()
                .map(|&l| {
                    let cfg = IntegratorConfig::new(l, 1).unwrap();
                    max_abs_diff(&lie_derivative_covariant(&conn, &s, &v, &x, &cfg).unwrap(), &exact)
                })
                .collect();
            for k in 0..2 {
                min_order = min_order.min((errors[k] / errors[k + 1]).log10());
            }
        }
    }
    assert!(verdict(8, "observed order of the flow-based derivative", min_order, ">= 1.9", min_order >= 1.9));
}

/// The spray flow `t ↦ (x(t), v(t))`, re-integrated in any scalar type.
struct SprayPath<'a, C> {
    spray: &'a SprayField<C>,
    start: Vec<f64>,
    step: f64,
}

impl<C: Connection> CurveMap for SprayPath<'_, C> {
    fn eval<S: Scalar>(&self, t: S) -> Vec<S> {
        let n = ((t.value() / self.step - 1e-9).ceil() as usize).max(1);
        let h = t / n as f64;
        let rhs = |_: S, y: &[S]| self.spray.eval(y);
        let mut y: Vec<S> = self.start.iter().map(|&c| S::cst(c)).collect();
        for k in 0..n {
            y = rk4_step(&rhs, h * k as f64, &y, h);
        }
        y
    }
}

struct Part<P> {
    curve: P,
    range: std::ops::Range<usize>,
}

impl<P: CurveMap> CurveMap for Part<P> {
    fn eval<S: Scalar>(&self, t: S) -> Vec<S> {
        self.curve.eval(t)[self.range.clone()].to_vec()
    }
}

#[test]
fn criterion_09_spray_flow_traces_geodesics() {
    let sphere = SphereConnection::default();
    let lin = LinearConnection::new(&sphere).unwrap();
    let spray = spray_from_connection(lin).unwrap();
    let cfg = IntegratorConfig::default();
    let mut sampler = Sampler::new(SEED + 9);
    let mut starts = vec![(vec![1.0, 0.3], vec![0.2, 0.5]), (vec![std::f64::consts::FRAC_PI_2, 0.0], vec![0.0, 1.0])];
    for _ in 0..3 {
        starts.push((sampler.in_box(sphere.bundle().base_box()), sampler.vector(2, 0.3)));
    }
    let (mut agree, mut along): (f64, f64) = (0.0, 0.0);
    for (x0, v0) in &starts {
        let mut state = x0.clone();
        state.extend_from_slice(v0);
        let by_spray = SprayPath { spray: &spray, start: state, step: cfg.step };
        let samples = geodesic(&lin, x0, v0, 1.0, &cfg).unwrap();
        let path = GeodesicPath::new(lin, x0, v0, 1.0, &cfg).unwrap();
        for s in samples.iter().step_by(50) {
            let y: Vec<f64> = by_spray.eval(s.t);
            agree = worse(agree, max_abs_diff(&y[..2], &s.x));
            agree = worse(agree, max_abs_diff(&y[2..], &s.v));
        }
        let spray_curve = CurveOnBase::new(Part { curve: &by_spray, range: 0..2 }, 0.0, 1.0).unwrap();
        let spray_velocity = Part { curve: &by_spray, range: 2..4 };
        let geo_curve = CurveOnBase::new(path.position(), 0.0, 1.0).unwrap();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            along = worse(along, max_abs(&covariant_derivative_along_curve(&lin, &spray_curve, &spray_velocity, t).unwrap()));
            along = worse(along, max_abs(&covariant_derivative_along_curve(&lin, &geo_curve, &path.velocity(), t).unwrap()));
        }
    }
    let pass = verdict(9, "spray base curve vs geodesic over T = 1", agree, "<= 1e-8", agree <= 1e-8)
        & verdict(9, "nabla_t v along both trajectories", along, "<= 1e-8", along <= 1e-8);
    assert!(pass);
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + inner + f(b)) * h / 3.0
}

fn latitude_angle(theta0: f64, step: f64) -> f64 {
    let sphere = SphereConnection::default();
    let curve = CurveOnBase::new(LineSegment { from: vec![theta0, -PI], to: vec![theta0, PI] }, 0.0, 1.0).unwrap();
    let cfg = IntegratorConfig::new(step, 10_000_000).unwrap();
    let h = holonomy_loop(&sphere, &curve, &[1.0, 0.0], &cfg).unwrap();
    (theta0.sin() * h.y_end[1]).atan2(h.y_end[0]).rem_euclid(2.0 * PI)
}

#[test]
fn criterion_10_latitude_holonomy_and_flat_loops() {
    let theta0 = PI / 3.0;
    let angle = latitude_angle(theta0, 1e-3);
    let fine = latitude_angle(theta0, 1e-3 / 16.0);
    // Gauss–Bonnet: curvature 1 integrated over the polar cap bounded by the latitude.
    let area = 2.0 * PI * simpson(f64::sin, 0.0, theta0, 2000);
    let oracle_gap = (fine - area).abs();
    let err = (angle - PI).abs();

    let flat = catalog("flat");
    let cfg = IntegratorConfig::default();
    let mut sampler = Sampler::new(SEED + 10);
    let mut displacement: f64 = 0.0;
    for _ in 0..10 {
        let center: Vec<f64> = sampler.vector(2, 1.0);
        let radius = 0.2 + 0.5 * (sampler.unit() + 1.0) * 0.5;
        let loop_ = CurveOnBase::new(Circle { center, radius }, 0.0, 2.0 * PI).unwrap();
        let y0 = sampler.vector(2, 4.0);
        displacement = worse(displacement, holonomy_loop(&flat, &loop_, &y0, &cfg).unwrap().displacement);
    }
    let pass = verdict(10, "fine-step oracle vs enclosed-area quadrature", oracle_gap, "<= 1e-6", oracle_gap <= 1e-6)
        & verdict(10, "latitude pi/3 rotation angle vs pi at step 1e-3", err, "<= 1e-4", err <= 1e-4)
        & verdict(10, "flat connection loop displacement", displacement, "<= 1e-10", displacement <= 1e-10);
    assert!(pass);
}

struct SinFirst;

impl ScalarMap for SinFirst {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        x[0].sin()
    }
}

#[test]
fn criterion_11_linear_specialization() {
    let mut sampler = Sampler::new(SEED + 11);
    let (mut leibniz, mut composition, mut second): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for name in ["sphere", "tm-custom-christoffel", "flat"] {
        let conn = catalog(name);
        let lin = LinearConnection::new(&conn).unwrap();
        let b = conn.bundle();
        for _ in 0..20 {
            let s = sampler.section(b);
            let u = sampler.base_field(b);
            let v = sampler.base_field(b);
            let x = sampler.base_point(b).unwrap();
            leibniz = worse(leibniz, leibniz_check(&lin, &s, &SinFirst, &v, &x).unwrap());
            let lifts = curv_via_lifts(&lin, &s, &u, &v, &x).unwrap().fibre_part;
            composition = worse(composition, max_abs_diff(&lifts, &curv_via_composition(&lin, &s, &u, &v, &x).unwrap()));
            second = worse(second, max_abs_diff(&lifts, &curv_via_second_derivative(&lin, &s, &u, &v, &x).unwrap()));
        }
    }
    let sphere = catalog("sphere");
    let lin = LinearConnection::new(&sphere).unwrap();
    let mut tors: f64 = 0.0;
    for _ in 0..50 {
        let u = sampler.base_field(sphere.bundle());
        let v = sampler.base_field(sphere.bundle());
        let x = sampler.base_point(sphere.bundle()).unwrap();
        tors = worse(tors, max_abs(&torsion(&lin, &u, &v, &x).unwrap()));
    }
    let pass = verdict(11, "Leibniz rule", leibniz, "<= 1e-10", leibniz <= 1e-10)
        & verdict(11, "CURV_s vs (nabla_u nabla_v - nabla_v nabla_u - nabla_[u,v]) s", composition, "<= 1e-8", composition <= 1e-8)
        & verdict(11, "CURV_s vs second-derivative and torsion form", second, "<= 1e-8", second <= 1e-8)
        & verdict(11, "sphere torsion", tors, "<= 1e-12", tors <= 1e-12);
    assert!(pass);
}

#[test]
fn criterion_12_covariant_formula_ignores_the_extension() {
    let mut sampler = Sampler::new(SEED + 12);
    let tuples = commutator_tuples(&mut sampler);
    let mut worst: f64 = 0.0;
    for t in tuples.iter().take(30) {
        let x = t.conn.bundle().base_point(&t.x).unwrap();
        let weights = sampler.vector(t.conn.bundle().base_dim(), 0.5);
        let plain = curv_via_covariant(&t.conn, &t.s, &t.u, &t.v, &x).unwrap().fibre_part;
        let other = curv_via_covariant_with(&t.conn, &t.s, &t.u, &t.v, &x, &Foliation::ExponentialOffset { weights })
            .unwrap()
            .fibre_part;
        worst = worse(worst, max_abs_diff(&plain, &other));
    }
    assert!(
        verdict(12, "change of curv_via_covariant under a perturbed foliation", worst, "<= 1e-9", worst <= 1e-9),
        "covariant-commutator curvature depends on the extension by {worst:e}"
    );
}

fn fibrum() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fibrum"));
    cmd.env_remove("FIBRUM_SEED");
    cmd
}

#[test]
fn criterion_13_cli_contract() {
    let dir = tempfile::tempdir().unwrap();
    let mut exits = Vec::new();
    for bundle in ["flat", "sphere", "nonlinear-demo"] {
        let out = dir.path().join(format!("{bundle}.toml"));
        let status = fibrum().args(["verify", bundle, "--quiet", "--out"]).arg(&out).status().unwrap();
        exits.push((bundle, status.code()));
    }
    let all_zero = exits.iter().all(|(_, c)| *c == Some(0));
    let nonzero = exits.iter().filter(|(_, c)| *c != Some(0)).count();

    let a = dir.path().join("a.toml");
    let b = dir.path().join("b.toml");
    fibrum().args(["verify", "sphere", "--quiet", "--seed", "7", "--out"]).arg(&a).status().unwrap();
    fibrum().args(["verify", "sphere", "--quiet", "--seed", "7", "--out"]).arg(&b).status().unwrap();
    let identical = std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();

    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "bundle_name = \"sphere\"\nscenario = \"holonomy\"\n[scenario_params]\ntheta0 = 1.0471975511965976\n\
         [tolerances]\nholonomy_angle = 1e-300\n",
    )
    .unwrap();
    let report_path = dir.path().join("bad_report.toml");
    let status = fibrum().args(["run", "--quiet", "--out"]).arg(&report_path).arg(&cfg).status().unwrap();
    let report: toml::Table = toml::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let named = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["check_name"].as_str() == Some("holonomy_angle") && c["pass"].as_bool() == Some(false));
    let bad_tolerance = status.code() == Some(1) && named;

    println!("              verify exit codes: {exits:?}");
    let pass = verdict(13, "verify flat/sphere/nonlinear-demo runs exiting non-zero", nonzero as f64, "= 0", all_zero)
        & verdict(13, "byte-identical reports under a fixed seed", if identical { 0.0 } else { 1.0 }, "identical", identical)
        & verdict(13, "injected bad tolerance exits 1 naming holonomy_angle", if bad_tolerance { 0.0 } else { 1.0 }, "exit 1 + named row", bad_tolerance);
    assert!(pass, "verify exit codes {exits:?}");
}
