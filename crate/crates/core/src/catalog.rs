//! Built-in bundles and connections, plus a family of smooth test maps.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::calculus::VectorMap;
use crate::connection::{BoxDomain, Connection, ConnectionKind, TrivializedBundle};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parameter map used to configure catalog entries.
pub type Params = BTreeMap<String, f64>;

/// The trivial connection `Γ ≡ 0` on `(−b, b)^m × (−c, c)^f`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatConnection {
    bundle: TrivializedBundle,
}

impl FlatConnection {
    pub const BASE_BOUND: f64 = 2.0;
    pub const FIBRE_BOUND: f64 = 5.0;

    pub fn new(m: usize, f: usize) -> Result<Self> {
        Self::with_bounds(m, f, Self::BASE_BOUND, Self::FIBRE_BOUND)
    }

    pub fn with_bounds(m: usize, f: usize, base_bound: f64, fibre_bound: f64) -> Result<Self> {
        if m == 0 || f == 0 {
            return Err(Error::Invalid(String::from("flat bundle needs m ≥ 1 and f ≥ 1")));
        }
        let bundle = TrivializedBundle::new(
            "flat",
            BoxDomain::cube(m, -base_bound, base_bound)?,
            BoxDomain::cube(f, -fibre_bound, fibre_bound)?,
        );
        Ok(FlatConnection { bundle })
    }
}

impl Default for FlatConnection {
    fn default() -> Self {
        Self::new(2, 2).expect("default flat bundle")
    }
}

impl Connection for FlatConnection {
    fn bundle(&self) -> &TrivializedBundle {
        &self.bundle
    }

    fn kind(&self) -> ConnectionKind {
        ConnectionKind::Linear
    }

    fn gamma<S: Scalar>(&self, _x: &[S], y: &[S], _w: &[S]) -> Vec<S> {
        vec![S::zero(); y.len()]
    }
}

/// Levi-Civita connection of the round unit sphere on `TS²` in `(θ, φ)` coordinates:
/// `Γ^θ_φφ = −sin θ cos θ`, `Γ^φ_θφ = Γ^φ_φθ = cot θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereConnection {
    bundle: TrivializedBundle,
}

impl SphereConnection {
    pub const THETA_MIN: f64 = 0.2;
    pub const THETA_MAX: f64 = PI - 0.2;
    pub const PHI_MIN: f64 = -4.0;
    pub const PHI_MAX: f64 = 4.0;
    pub const FIBRE_BOUND: f64 = 5.0;

    pub fn new(theta: (f64, f64), phi: (f64, f64), fibre_bound: f64) -> Result<Self> {
        if !(theta.0 > 0.0 && theta.1 < PI) {
            return Err(Error::Invalid(String::from("sphere chart must avoid the poles: need 0 < theta_min, theta_max < π")));
        }
        let bundle = TrivializedBundle::new(
            "sphere",
            BoxDomain::new(vec![theta.0, phi.0], vec![theta.1, phi.1])?,
            BoxDomain::cube(2, -fibre_bound, fibre_bound)?,
        )
        .with_base_periods(vec![None, Some(2.0 * PI)]);
        Ok(SphereConnection { bundle })
    }

    /// Round metric `g = dθ² + sin²θ dφ²` applied to `(y, y)`.
    pub fn metric_norm_sq(x: &[f64], y: &[f64]) -> f64 {
        let s = libm::sin(x[0]);
        y[0] * y[0] + s * s * y[1] * y[1]
    }
}

impl Default for SphereConnection {
    fn default() -> Self {
        Self::new((Self::THETA_MIN, Self::THETA_MAX), (Self::PHI_MIN, Self::PHI_MAX), Self::FIBRE_BOUND)
            .expect("default sphere chart")
    }
}

impl Connection for SphereConnection {
    fn bundle(&self) -> &TrivializedBundle {
        &self.bundle
    }

    fn kind(&self) -> ConnectionKind {
        ConnectionKind::Linear
    }

    fn gamma<S: Scalar>(&self, x: &[S], y: &[S], w: &[S]) -> Vec<S> {
        let (s, c) = (x[0].sin(), x[0].cos());
        let cot = c / s;
        vec![-(s * c * w[1] * y[1]), cot * (w[0] * y[1] + w[1] * y[0])]
    }
}

/// A connection on `(−1.5, 1.5)² × (−1.5, 1.5)` that is not linear in the fibre:
/// `Γ(x, y)·w = (y + y³)·w₁ + x₁·y·w₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearDemo {
    bundle: TrivializedBundle,
}

impl NonlinearDemo {
    pub const BASE_BOUND: f64 = 1.5;
    pub const FIBRE_BOUND: f64 = 1.5;

    pub fn with_bounds(base_bound: f64, fibre_bound: f64) -> Result<Self> {
        let bundle = TrivializedBundle::new(
            "nonlinear-demo",
            BoxDomain::cube(2, -base_bound, base_bound)?,
            BoxDomain::cube(1, -fibre_bound, fibre_bound)?,
        );
        Ok(NonlinearDemo { bundle })
    }
}

impl Default for NonlinearDemo {
    fn default() -> Self {
        Self::with_bounds(Self::BASE_BOUND, Self::FIBRE_BOUND).expect("default nonlinear chart")
    }
}

impl Connection for NonlinearDemo {
    fn bundle(&self) -> &TrivializedBundle {
        &self.bundle
    }

    fn kind(&self) -> ConnectionKind {
        ConnectionKind::Nonlinear
    }

    fn gamma<S: Scalar>(&self, x: &[S], y: &[S], w: &[S]) -> Vec<S> {
        let y0 = y[0];
        vec![(y0 + y0 * y0 * y0) * w[0] + x[0] * y0 * w[1]]
    }
}

/// A linear connection on `TM` with affine Christoffel symbols
/// `Γ^a_bc(x) = G^a_bc + Σ_k G^a_bck x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelConnection {
    bundle: TrivializedBundle,
    m: usize,
    constant: Vec<f64>,
    linear: Vec<f64>,
}

impl ChristoffelConnection {
    pub const BASE_BOUND: f64 = 2.0;
    pub const FIBRE_BOUND: f64 = 5.0;

    /// All-zero symbols on an `m`-dimensional chart.
    pub fn zero(m: usize) -> Result<Self> {
        if m == 0 || m > 9 {
            return Err(Error::Invalid(String::from("tm-custom-christoffel needs 1 ≤ m ≤ 9")));
        }
        let bundle = TrivializedBundle::new(
            "tm-custom-christoffel",
            BoxDomain::cube(m, -Self::BASE_BOUND, Self::BASE_BOUND)?,
            BoxDomain::cube(m, -Self::FIBRE_BOUND, Self::FIBRE_BOUND)?,
        );
        Ok(ChristoffelConnection { bundle, m, constant: vec![0.0; m * m * m], linear: vec![0.0; m * m * m * m] })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    fn idx(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.m + b) * self.m + c
    }

    /// Sets `G^a_bc` (zero-based indices).
    pub fn set_constant(&mut self, a: usize, b: usize, c: usize, value: f64) {
        let i = self.idx(a, b, c);
        self.constant[i] = value;
    }

    /// Sets the coefficient of `x_k` in `Γ^a_bc` (zero-based indices).
    pub fn set_linear(&mut self, a: usize, b: usize, c: usize, k: usize, value: f64) {
        let i = self.idx(a, b, c) * self.m + k;
        self.linear[i] = value;
    }

    /// `Γ^a_bc` at `x`.
    pub fn symbol(&self, x: &[f64], a: usize, b: usize, c: usize) -> f64 {
        let i = self.idx(a, b, c);
        self.constant[i] + (0..self.m).map(|k| self.linear[i * self.m + k] * x[k]).sum::<f64>()
    }

    /// Builds from `m`, `G_a_bc` and `G_a_bc_xk` entries (one-based indices).
    pub fn from_params(params: &Params) -> Result<Self> {
        let m = match params.get("m") {
            None => 2,
            Some(&v) if libm::trunc(v) == v && (1.0..=9.0).contains(&v) => v as usize,
            Some(v) => return Err(Error::Invalid(format!("tm-custom-christoffel: m must be an integer in 1..=9, got {v}"))),
        };
        let mut conn = Self::zero(m)?;
        for (key, &value) in params {
            if key == "m" {
                continue;
            }
            let digits = parse_symbol_key(key, m)
                .ok_or_else(|| Error::Invalid(format!("tm-custom-christoffel: unknown parameter `{key}`")))?;
            match digits.as_slice() {
                [a, b, c] => conn.set_constant(*a, *b, *c, value),
                [a, b, c, k] => conn.set_linear(*a, *b, *c, *k, value),
                _ => unreachable!(),
            }
        }
        Ok(conn)
    }

    /// The nonzero coefficients and `m`, in the form accepted by [`Self::from_params`].
    pub fn params(&self) -> Params {
        let mut out = Params::new();
        out.insert("m".to_string(), self.m as f64);
        let m = self.m;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let i = self.idx(a, b, c);
                    if self.constant[i] != 0.0 {
                        out.insert(format!("G_{}_{}{}", a + 1, b + 1, c + 1), self.constant[i]);
                    }
                    for k in 0..m {
                        let v = self.linear[i * m + k];
                        if v != 0.0 {
                            out.insert(format!("G_{}_{}{}_x{}", a + 1, b + 1, c + 1, k + 1), v);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Parses `G_a_bc` or `G_a_bc_xk` into zero-based indices below `m`.
fn parse_symbol_key(key: &str, m: usize) -> Option<Vec<usize>> {
    let rest = key.strip_prefix("G_")?;
    let mut parts = rest.split('_');
    let a = parts.next()?;
    let bc = parts.next()?;
    let xk = parts.next();
    if parts.next().is_some() || a.len() != 1 || bc.len() != 2 {
        return None;
    }
    let mut digits: Vec<char> = a.chars().chain(bc.chars()).collect();
    if let Some(xk) = xk {
        let k = xk.strip_prefix('x')?;
        if k.len() != 1 {
            return None;
        }
        digits.extend(k.chars());
    }
    digits
        .into_iter()
        .map(|ch| ch.to_digit(10).map(|d| d as usize).filter(|&d| d >= 1 && d <= m).map(|d| d - 1))
        .collect()
}

impl Connection for ChristoffelConnection {
    fn bundle(&self) -> &TrivializedBundle {
        &self.bundle
    }

    fn kind(&self) -> ConnectionKind {
        ConnectionKind::Linear
    }

    fn gamma<S: Scalar>(&self, x: &[S], y: &[S], w: &[S]) -> Vec<S> {
        let m = self.m;
        (0..m)
            .map(|a| {
                let mut acc = S::zero();
                for b in 0..m {
                    for c in 0..m {
                        let i = self.idx(a, b, c);
                        let mut g = S::cst(self.constant[i]);
                        for k in 0..m {
                            let l = self.linear[i * m + k];
                            if l != 0.0 {
                                g += x[k] * l;
                            }
                        }
                        acc += g * w[b] * y[c];
                    }
                }
                acc
            })
            .collect()
    }
}

/// Names accepted by [`CatalogConnection::from_name`].
pub const CATALOG_NAMES: [&str; 4] = ["flat", "sphere", "nonlinear-demo", "tm-custom-christoffel"];

/// Any catalog connection, dispatched statically per variant.
#[derive(Debug, Clone, PartialEq)]
pub enum CatalogConnection {
    Flat(FlatConnection),
    Sphere(SphereConnection),
    Nonlinear(NonlinearDemo),
    Christoffel(ChristoffelConnection),
}

/// Description of a catalog entry for listings.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub base_dim: &'static str,
    pub fibre_dim: &'static str,
    pub kind: ConnectionKind,
    pub params: &'static [&'static str],
    pub summary: &'static str,
}

pub fn catalog_entries() -> [CatalogEntry; 4] {
    [
        CatalogEntry {
            name: "flat",
            base_dim: "m (default 2)",
            fibre_dim: "f (default 2)",
            kind: ConnectionKind::Linear,
            params: &["m", "f", "base_bound", "fibre_bound"],
            summary: "trivial connection, gamma = 0",
        },
        CatalogEntry {
            name: "sphere",
            base_dim: "2",
            fibre_dim: "2",
            kind: ConnectionKind::Linear,
            params: &["theta_min", "theta_max", "phi_min", "phi_max", "fibre_bound"],
            summary: "Levi-Civita connection of the round sphere on TS^2, (theta, phi) chart",
        },
        CatalogEntry {
            name: "nonlinear-demo",
            base_dim: "2",
            fibre_dim: "1",
            kind: ConnectionKind::Nonlinear,
            params: &["base_bound", "fibre_bound"],
            summary: "gamma(x,y)w = (y + y^3) w1 + x1 y w2",
        },
        CatalogEntry {
            name: "tm-custom-christoffel",
            base_dim: "m (default 2)",
            fibre_dim: "m",
            kind: ConnectionKind::Linear,
            params: &["m", "G_a_bc", "G_a_bc_xk"],
            summary: "linear connection on TM with affine Christoffel symbols",
        },
    ]
}

fn take(params: &Params, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn take_dim(params: &Params, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(&v) if libm::trunc(v) == v && (1.0..=64.0).contains(&v) => Ok(v as usize),
        Some(v) => Err(Error::Invalid(format!("`{key}` must be a positive integer, got {v}"))),
    }
}

fn reject_unknown(name: &str, params: &Params, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Invalid(format!("{name}: unknown parameter `{k}`"))),
        None => Ok(()),
    }
}

impl CatalogConnection {
    pub fn from_name(name: &str, params: &Params) -> Result<Self> {
        match name {
            "flat" => {
                reject_unknown(name, params, &["m", "f", "base_bound", "fibre_bound"])?;
                Ok(Self::Flat(FlatConnection::with_bounds(
                    take_dim(params, "m", 2)?,
                    take_dim(params, "f", 2)?,
                    take(params, "base_bound", FlatConnection::BASE_BOUND),
                    take(params, "fibre_bound", FlatConnection::FIBRE_BOUND),
                )?))
            }
            "sphere" => {
                reject_unknown(name, params, &["theta_min", "theta_max", "phi_min", "phi_max", "fibre_bound"])?;
                Ok(Self::Sphere(SphereConnection::new(
                    (
                        take(params, "theta_min", SphereConnection::THETA_MIN),
                        take(params, "theta_max", SphereConnection::THETA_MAX),
                    ),
                    (take(params, "phi_min", SphereConnection::PHI_MIN), take(params, "phi_max", SphereConnection::PHI_MAX)),
                    take(params, "fibre_bound", SphereConnection::FIBRE_BOUND),
                )?))
            }
            "nonlinear-demo" => {
                reject_unknown(name, params, &["base_bound", "fibre_bound"])?;
                Ok(Self::Nonlinear(NonlinearDemo::with_bounds(
                    take(params, "base_bound", NonlinearDemo::BASE_BOUND),
                    take(params, "fibre_bound", NonlinearDemo::FIBRE_BOUND),
                )?))
            }
            "tm-custom-christoffel" => Ok(Self::Christoffel(ChristoffelConnection::from_params(params)?)),
            other => Err(Error::Invalid(format!("unknown bundle `{other}`; expected one of {}", CATALOG_NAMES.join(", ")))),
        }
    }

    pub fn name(&self) -> &str {
        self.bundle().name()
    }
}

impl Connection for CatalogConnection {
    fn bundle(&self) -> &TrivializedBundle {
        match self {
            Self::Flat(c) => c.bundle(),
            Self::Sphere(c) => c.bundle(),
            Self::Nonlinear(c) => c.bundle(),
            Self::Christoffel(c) => c.bundle(),
        }
    }

    fn kind(&self) -> ConnectionKind {
        match self {
            Self::Flat(c) => c.kind(),
            Self::Sphere(c) => c.kind(),
            Self::Nonlinear(c) => c.kind(),
            Self::Christoffel(c) => c.kind(),
        }
    }

    fn gamma<S: Scalar>(&self, x: &[S], y: &[S], w: &[S]) -> Vec<S> {
        match self {
            Self::Flat(c) => c.gamma(x, y, w),
            Self::Sphere(c) => c.gamma(x, y, w),
            Self::Nonlinear(c) => c.gamma(x, y, w),
            Self::Christoffel(c) => c.gamma(x, y, w),
        }
    }
}

/// A smooth map `Rⁿ → Rᵏ` with coefficients drawn once from a caller-supplied source:
///
/// `g_i(x) = a_i + Σ_j B_ij x_j + Σ_{j≤l} Q_ijl x_j x_l + c_i sin(⟨ω_i, x⟩ + ψ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothMap {
    n_in: usize,
    n_out: usize,
    offset: Vec<f64>,
    linear: Vec<f64>,
    quadratic: Vec<f64>,
    amplitude: Vec<f64>,
    frequency: Vec<f64>,
    phase: Vec<f64>,
}

impl SmoothMap {
    /// Draws every coefficient from `draw`, expected to return values in `[−1, 1]`.
    pub fn from_draws(n_in: usize, n_out: usize, mut draw: impl FnMut() -> f64) -> Self {
        let mut take = |n: usize, scale: f64| -> Vec<f64> { (0..n).map(|_| scale * draw()).collect() };
        SmoothMap {
            n_in,
            n_out,
            offset: take(n_out, 1.0),
            linear: take(n_out * n_in, 0.5),
            quadratic: take(n_out * n_in * n_in, 0.25),
            amplitude: take(n_out, 0.5),
            frequency: take(n_out * n_in, 1.5),
            phase: take(n_out, PI),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_in, self.n_out)
    }
}

impl VectorMap for SmoothMap {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.n_in;
        (0..self.n_out)
            .map(|i| {
                let mut g = S::cst(self.offset[i]);
                let mut arg = S::cst(self.phase[i]);
                for j in 0..n {
                    g += x[j] * self.linear[i * n + j];
                    arg += x[j] * self.frequency[i * n + j];
                    for l in j..n {
                        g += x[j] * x[l] * self.quadratic[(i * n + j) * n + l];
                    }
                }
                g + arg.sin() * self.amplitude[i]
            })
            .collect()
    }
}

/// A smooth map confined to a box: `center + half_width ∘ (0.3·u + 0.4·tanh(g(x)))`,
/// where `u ∈ [−1, 1]` is fixed. Values stay within 70% of each half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedMap {
    center: Vec<f64>,
    half_width: Vec<f64>,
    shift: Vec<f64>,
    inner: SmoothMap,
}

impl BoundedMap {
    pub fn new(target: &BoxDomain, n_in: usize, mut draw: impl FnMut() -> f64) -> Self {
        let center = target.lo().iter().zip(target.hi()).map(|(l, h)| 0.5 * (l + h)).collect();
        let half_width = target.lo().iter().zip(target.hi()).map(|(l, h)| 0.5 * (h - l)).collect();
        let shift = (0..target.dim()).map(|_| draw()).collect();
        let inner = SmoothMap::from_draws(n_in, target.dim(), draw);
        BoundedMap { center, half_width, shift, inner }
    }
}

impl VectorMap for BoundedMap {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.inner
            .eval(x)
            .into_iter()
            .enumerate()
            .map(|(i, g)| (g.tanh() * 0.4 + 0.3 * self.shift[i]) * self.half_width[i] + self.center[i])
            .collect()
    }
}
