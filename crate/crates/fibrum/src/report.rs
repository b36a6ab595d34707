//! Verification reports and their TOML rendering.
//!
//! The emitter writes TOML by hand so that key order and number formatting
//! are fixed: every real is printed with 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::config::{ParamValue, ScenarioConfig};

pub const SIGN_CONVENTION: &str = "CURV_s(u,v) = (H_[u,v] - [H_u,H_v]) o s; R(X,Y) = -P_V [P_H X, P_H Y]; \
horizontal lift H_e(v) = (v, -gamma(x,y) v); classical R(u,v)s = nabla_u nabla_v s - nabla_v nabla_u s - nabla_[u,v] s";

/// A value echoed from the configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum EchoValue {
    Real(f64),
    Integer(u64),
    Reals(Vec<f64>),
    Text(String),
}

impl From<&ParamValue> for EchoValue {
    fn from(v: &ParamValue) -> Self {
        match v {
            ParamValue::Number(x) => EchoValue::Real(*x),
            ParamValue::Vector(xs) => EchoValue::Reals(xs.clone()),
            ParamValue::Text(t) => EchoValue::Text(t.clone()),
        }
    }
}

/// One verification row.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check_name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Why the check failed to produce a residual, or what made it fail.
    pub reason: Option<String>,
}

impl CheckRow {
    /// A row whose verdict is `max_residual ≤ tolerance`; NaN never passes.
    pub fn measured(name: impl Into<String>, samples: usize, max_residual: f64, tolerance: f64) -> Self {
        CheckRow {
            check_name: name.into(),
            samples,
            max_residual,
            tolerance,
            pass: max_residual <= tolerance,
            reason: None,
        }
    }

    /// A row for a check that could not be evaluated.
    pub fn errored(name: impl Into<String>, samples: usize, tolerance: f64, reason: impl Into<String>) -> Self {
        CheckRow {
            check_name: name.into(),
            samples,
            max_residual: f64::NAN,
            tolerance,
            pass: false,
            reason: Some(reason.into()),
        }
    }
}

/// Both curvature values at one base point, as tabulated in reports.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureRow {
    pub point: Vec<f64>,
    pub section_value: Vec<f64>,
    pub via_lifts: Vec<f64>,
    pub via_covariant: Vec<f64>,
    pub residual: f64,
    pub cross_residual: f64,
}

/// A trajectory sample: base coordinates and fibre coordinates at parameter `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub base: Vec<f64>,
    pub fibre: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationReport {
    pub scenario: String,
    pub bundle: String,
    pub seed: u64,
    pub step: f64,
    /// Echo of the configuration that produced the report.
    pub config: BTreeMap<String, BTreeMap<String, EchoValue>>,
    pub checks: Vec<CheckRow>,
    pub results: BTreeMap<String, f64>,
    pub curvature_rows: Vec<CurvatureRow>,
    pub trajectory: Vec<TrajectoryRow>,
}

impl VerificationReport {
    pub fn new(scenario: impl Into<String>, bundle: impl Into<String>, seed: u64, step: f64) -> Self {
        VerificationReport { scenario: scenario.into(), bundle: bundle.into(), seed, step, ..Default::default() }
    }

    /// A report for `cfg`, with its parameters echoed.
    pub fn for_config(cfg: &ScenarioConfig) -> Self {
        let mut report = Self::new(cfg.scenario.as_str(), cfg.bundle_name.as_str(), cfg.seed, cfg.integrator.step);
        let reals = |m: &BTreeMap<String, f64>| m.iter().map(|(k, v)| (k.clone(), EchoValue::Real(*v))).collect();
        report.config.insert("bundle_params".into(), reals(&cfg.bundle_params));
        let params = cfg.scenario_params.iter().map(|(k, v)| (k.clone(), EchoValue::from(v))).collect();
        report.config.insert("scenario_params".into(), params);
        report.config.insert("tolerances".into(), reals(&cfg.tolerances));
        let mut integrator = BTreeMap::new();
        integrator.insert("step".into(), EchoValue::Real(cfg.integrator.step));
        integrator.insert("max_steps".into(), EchoValue::Integer(cfg.integrator.max_steps as u64));
        report.config.insert("integrator".into(), integrator);
        report
    }

    pub fn overall_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckRow> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn push(&mut self, row: CheckRow) {
        self.checks.push(row);
    }
}

/// Formats a real with 17 significant digits in a TOML-compatible form.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn format_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&c| format_real(c)).collect();
    format!("[{}]", parts.join(", "))
}

fn format_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn format_key(k: &str) -> String {
    if !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        k.to_string()
    } else {
        format_string(k)
    }
}

fn format_echo(v: &EchoValue) -> String {
    match v {
        EchoValue::Real(x) => format_real(*x),
        EchoValue::Integer(n) => n.to_string(),
        EchoValue::Reals(xs) => format_vec(xs),
        EchoValue::Text(s) => format_string(s),
    }
}

/// Renders `report` as TOML in a fixed key order.
pub fn render_report(report: &VerificationReport) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "scenario = {}", format_string(&report.scenario));
    let _ = writeln!(w, "bundle = {}", format_string(&report.bundle));
    let _ = writeln!(w, "sign_convention = {}", format_string(SIGN_CONVENTION));
    let _ = writeln!(w, "overall_pass = {}", report.overall_pass());
    let _ = writeln!(w, "check_count = {}", report.checks.len());
    let _ = writeln!(w, "failed_count = {}", report.failed_checks().count());

    let _ = writeln!(w, "\n[environment]");
    let _ = writeln!(w, "seed = {}", report.seed);
    let _ = writeln!(w, "step = {}", format_real(report.step));

    for (section, entries) in &report.config {
        let _ = writeln!(w, "\n[config.{}]", format_key(section));
        for (k, v) in entries {
            let _ = writeln!(w, "{} = {}", format_key(k), format_echo(v));
        }
    }

    if !report.results.is_empty() {
        let _ = writeln!(w, "\n[results]");
        for (k, v) in &report.results {
            let _ = writeln!(w, "{} = {}", format_key(k), format_real(*v));
        }
    }

    for c in &report.checks {
        let _ = writeln!(w, "\n[[checks]]");
        let _ = writeln!(w, "check_name = {}", format_string(&c.check_name));
        let _ = writeln!(w, "samples = {}", c.samples);
        let _ = writeln!(w, "max_residual = {}", format_real(c.max_residual));
        let _ = writeln!(w, "tolerance = {}", format_real(c.tolerance));
        let _ = writeln!(w, "pass = {}", c.pass);
        if let Some(reason) = &c.reason {
            let _ = writeln!(w, "reason = {}", format_string(reason));
        }
    }

    for r in &report.curvature_rows {
        let _ = writeln!(w, "\n[[curvature_rows]]");
        let _ = writeln!(w, "point = {}", format_vec(&r.point));
        let _ = writeln!(w, "section_value = {}", format_vec(&r.section_value));
        let _ = writeln!(w, "via_lifts = {}", format_vec(&r.via_lifts));
        let _ = writeln!(w, "via_covariant = {}", format_vec(&r.via_covariant));
        let _ = writeln!(w, "residual = {}", format_real(r.residual));
        let _ = writeln!(w, "cross_residual = {}", format_real(r.cross_residual));
    }

    for r in &report.trajectory {
        let _ = writeln!(w, "\n[[trajectory]]");
        let _ = writeln!(w, "t = {}", format_real(r.t));
        let _ = writeln!(w, "base = {}", format_vec(&r.base));
        let _ = writeln!(w, "fibre = {}", format_vec(&r.fibre));
    }
    out
}

/// Writes the rendered report to `path`.
pub fn emit_report(report: &VerificationReport, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_report(report))
}
