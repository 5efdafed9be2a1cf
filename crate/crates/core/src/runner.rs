//! Dispatch of a [`RunConfig`] to the numerical checks, with named pass/fail
//! checks and a deterministic JSON report.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::charges::{charge_report, invariance_test, positive_mass_margin, ChargeReport};
use crate::clifford::{build_rep, clifford_suite, theta_grid};
use crate::config::{to_json, Command, RunConfig};
use crate::constraints::{
    boundary_samples, check_capillary_dec, check_interior_dec, check_tilted_boundary_dec, interior_samples,
    AngleProfile, DecReport,
};
use crate::dirac::{boundary_lemma_report, eigen_projected, sl_report, witten_flux, AnalyticSpinor};
use crate::error::{Error, Result};
use crate::extrapolate::OrderFit;
use crate::families::{build_family, capillary_config, family_catalog, CAPILLARY_CONFIGS};
use crate::jet::Jet;
use crate::mots::{
    boundary_trace_identity, boundary_z_term, edge_point, stability_functional, stability_sweep,
    trace_identity_sweep, Hypersurface, ParamFn,
};

/// Residuals at or below this level count as exact in convergence checks.
pub const EXACT_LEVEL: f64 = 1e-12;

/// Exit status for usage errors (unknown family, bad flags, bad config).
pub const EXIT_USAGE: i32 = 2;
/// Exit status when a named check fails or a computation errors out.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), passed: value <= tolerance, value, tolerance }
    }

    /// Passes when `value ≥ −tolerance`.
    fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), passed: value >= -tolerance, value, tolerance }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub config: RunConfig,
    #[serde(flatten)]
    pub result: Map<String, Value>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub json: String,
    pub csv: Option<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            0
        } else {
            EXIT_FAILURE
        }
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// Exit status for an error raised while running.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::UnknownFamily(_)
        | Error::InvalidParameter(_)
        | Error::Config(_)
        | Error::AngleOutOfRange { .. }
        | Error::UnsupportedDimension { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Caps the global thread pool from `HALFMASS_THREADS` when set.
pub fn init_threads_from_env() -> Result<()> {
    if let Ok(v) = std::env::var("HALFMASS_THREADS") {
        let k: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("HALFMASS_THREADS must be a positive integer, got '{v}'")))?;
        if k == 0 {
            return Err(Error::Config("HALFMASS_THREADS must be positive".into()));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    Ok(())
}

type Sections = (Map<String, Value>, Vec<Check>, Option<String>);

/// Runs the configured command and writes the requested artifacts.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let outcome = evaluate(config)?;
    if let Some(path) = &config.output.json {
        std::fs::write(path, &outcome.json)?;
    }
    if let (Some(path), Some(csv)) = (&config.output.csv, &outcome.csv) {
        std::fs::write(path, csv)?;
    }
    Ok(outcome)
}

/// Runs the configured command without touching the filesystem.
pub fn evaluate(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let (result, checks, csv) = match config.command {
        Command::CheckDec => check_dec(config)?,
        Command::Adm => adm(config)?,
        Command::Invariance => invariance(config)?,
        Command::VerifyClifford => verify_clifford(config)?,
        Command::VerifySl => verify_sl(config)?,
        Command::WittenFlux => witten(config)?,
        Command::Mots => mots(config)?,
        Command::Families => families()?,
    };
    let report = RunReport {
        command: config.command.name(),
        passed: checks.iter().all(|c| c.passed),
        checks,
        config: config.clone(),
        result,
    };
    let json = to_json(&report)?;
    Ok(RunOutcome { report, json, csv })
}

fn value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Internal(e.to_string()))
}

fn section(entries: Vec<(&str, Value)>) -> Map<String, Value> {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Parses a contact angle: degrees, or `linear:<deg>:<s₀>,<s₁>,…`.
pub fn parse_gamma(spec: &str, n: usize) -> Result<AngleProfile> {
    let bad = || Error::InvalidParameter(format!("cannot parse contact angle '{spec}'"));
    if let Some(rest) = spec.strip_prefix("linear:") {
        let (base, slopes) = rest.split_once(':').ok_or_else(bad)?;
        let base: f64 = base.trim().parse().map_err(|_| bad())?;
        let mut s = parse_list(slopes).map_err(|_| bad())?;
        if s.len() > n {
            return Err(bad());
        }
        s.resize(n, 0.0);
        return Ok(AngleProfile::linear(base.to_radians(), s));
    }
    let deg: f64 = spec.trim().parse().map_err(|_| bad())?;
    if !(deg > 0.0 && deg < 180.0) {
        return Err(Error::AngleOutOfRange { value: deg, range: "(0, 180) degrees" });
    }
    Ok(AngleProfile::constant(deg.to_radians()))
}

/// Parses `plane:<offset>,<slope>` or `cap:<c₀>,…,<c_{n−1}>,<radius>` over the given box.
pub fn parse_surface(spec: &str, n: usize, lo: Vec<f64>, hi: Vec<f64>) -> Result<Hypersurface> {
    let bad = || Error::InvalidParameter(format!("cannot parse surface '{spec}'"));
    let (kind, args) = spec.split_once(':').ok_or_else(bad)?;
    let v = parse_list(args).map_err(|_| bad())?;
    match kind {
        "plane" if v.len() == 2 => Hypersurface::plane(n, v[0], v[1], lo, hi),
        "cap" if v.len() == n + 1 => Hypersurface::sphere_cap(n, v[..n].to_vec(), v[n], lo, hi),
        _ => Err(bad()),
    }
}

pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| t.trim().parse()).collect()
}

fn check_dec(cfg: &RunConfig) -> Result<Sections> {
    let data = build_family(&cfg.family)?;
    let n = data.n();
    let tol = cfg.tolerances.dec;
    let interior = check_interior_dec(&data, &interior_samples(n, cfg.samples, cfg.r_max), tol)?;
    let bs = boundary_samples(n, cfg.samples, cfg.r_max);
    let tilted = check_tilted_boundary_dec(&data, cfg.theta_radians(), cfg.sign, &bs, tol)?;
    let capillary = match &cfg.gamma {
        Some(g) => Some(check_capillary_dec(&data, &parse_gamma(g, n)?, &bs, tol)?),
        None => None,
    };
    let reports: Vec<(&str, &DecReport)> = [("interior-dec", &interior), ("tilted-dec", &tilted)]
        .into_iter()
        .chain(capillary.as_ref().map(|c| ("capillary-dec", c)))
        .collect();
    let mut worst = reports[0].1;
    for (_, r) in &reports {
        if r.worst_margin < worst.worst_margin {
            worst = r;
        }
    }
    let mut violations = Vec::new();
    let mut checks = Vec::new();
    for (name, r) in &reports {
        for &k in &r.violations {
            let e = &r.entries[k];
            violations.push(serde_json::json!({"check": name, "point": e.point, "margin": e.margin}));
        }
        checks.push(Check::at_least(*name, r.worst_margin, r.tolerance));
    }
    let result = section(vec![
        ("family", Value::String(data.name.clone())),
        ("theta", value(&cfg.theta)?),
        ("sign", Value::String(if cfg.sign > 0 { "+" } else { "-" }.into())),
        ("worst_margin", value(&worst.worst_margin)?),
        ("worst_point", value(&worst.worst_point)?),
        ("violations", Value::Array(violations)),
        ("interior", value(&interior)?),
        ("tilted", value(&tilted)?),
        ("capillary", value(&capillary)?),
    ]);
    Ok((result, checks, None))
}

fn charges_for(cfg: &RunConfig) -> Result<(ChargeReport, usize)> {
    let data = build_family(&cfg.family)?;
    let theta = (cfg.theta != 0.0).then(|| cfg.theta_radians().abs());
    let mut report = charge_report(&data, &cfg.radii, theta, cfg.quadrature_order)?;
    if let Some(c) = cfg.normalize {
        if !(c.is_finite() && c != 0.0) {
            return Err(Error::InvalidParameter("normalization constant must be finite and nonzero".into()));
        }
        report = report.normalized(c);
    }
    Ok((report, data.n()))
}

fn charge_csv(report: &ChargeReport) -> String {
    let mut out = String::from("r,E");
    for i in 1..=report.n {
        let _ = write!(out, ",P{i}");
    }
    out.push('\n');
    for (k, r) in report.radii.iter().enumerate() {
        let _ = write!(out, "{r:.16e},{:.16e}", report.energy_flux[k]);
        for p in &report.momentum_flux[k] {
            let _ = write!(out, ",{p:.16e}");
        }
        out.push('\n');
    }
    out
}

fn adm(cfg: &RunConfig) -> Result<Sections> {
    let (report, _) = charges_for(cfg)?;
    let theta = cfg.theta_radians();
    let margins: Vec<Value> = [1.0, -1.0]
        .iter()
        .map(|&s| {
            serde_json::json!({
                "sign": if s > 0.0 { "+" } else { "-" },
                "margin": positive_mass_margin(report.energy, &report.momentum, theta, s),
            })
        })
        .collect();
    let worst_fit = std::iter::once(&report.energy_fit)
        .chain(&report.momentum_fits)
        .map(|f| f.residual)
        .fold(0.0, f64::max);
    let checks = vec![Check {
        name: "extrapolation".into(),
        passed: report.converged,
        value: worst_fit,
        tolerance: crate::charges::DIVERGENCE_THRESHOLD,
    }];
    let csv = charge_csv(&report);
    let result = section(vec![("charges", value(&report)?), ("positive_mass_margins", Value::Array(margins))]);
    Ok((result, checks, Some(csv)))
}

/// Seeded rotations in `SO(k)` from the QR factorization of Gaussian-like matrices.
pub fn random_rotations(k: usize, count: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
            let qr = a.qr();
            let (mut q, r) = (qr.q(), qr.r());
            for j in 0..k {
                if r[(j, j)] < 0.0 {
                    q.column_mut(j).neg_mut();
                }
            }
            if q.determinant() < 0.0 {
                q.column_mut(0).neg_mut();
            }
            q
        })
        .collect()
}

fn invariance(cfg: &RunConfig) -> Result<Sections> {
    let data = build_family(&cfg.family)?;
    let n = data.n();
    let rotations = random_rotations(n - 1, cfg.rotations, cfg.seed);
    let zero = vec![0.0; n];
    let reports = rotations
        .iter()
        .map(|r| invariance_test(&data, r, &zero, &cfg.radii, cfg.quadrature_order))
        .collect::<Result<Vec<_>>>()?;
    let de = reports.iter().map(|r| r.energy_change).fold(0.0, f64::max);
    let dp = reports.iter().map(|r| r.momentum_defect).fold(0.0, f64::max);
    let tol = cfg.tolerances.invariance;
    let checks = vec![Check::at_most("energy-invariance", de, tol), Check::at_most("momentum-covariance", dp, tol)];
    Ok((section(vec![("family", Value::String(data.name.clone())), ("trials", value(&reports)?)]), checks, None))
}

fn verify_clifford(cfg: &RunConfig) -> Result<Sections> {
    let thetas = theta_grid(cfg.theta_grid);
    let suite = clifford_suite(cfg.family.n, &thetas, cfg.seed)?;
    let tol = cfg.tolerances.identity;
    let mut checks = vec![Check::at_most("clifford-relations", suite.clifford, tol)];
    for row in &suite.lemma.rows {
        checks.push(Check::at_most(format!("lemma-{}", row.item), row.max_residual, tol));
    }
    checks.push(Check::at_most("projectors", suite.projector, tol));
    checks.push(Check::at_most("boundary-identities", suite.boundary, tol));
    checks.push(Check::at_most("a-operator", suite.a_operator, tol));
    let passed = suite.lemma.rows.iter().filter(|r| r.max_residual <= tol).count();
    let result = section(vec![
        ("identities_passed", value(&format!("{passed}/{}", suite.lemma.rows.len()))?),
        ("suite", value(&suite)?),
    ]);
    Ok((result, checks, None))
}

/// Convergence check: passes when the residuals are exact at every spacing,
/// or when the observed order is within `tol` of 2.
pub fn order_check(name: &str, errors: &[f64], fit: Option<&OrderFit>, tol: f64) -> Check {
    let worst = errors.iter().copied().fold(0.0, f64::max);
    if worst <= EXACT_LEVEL {
        return Check { name: name.into(), passed: true, value: worst, tolerance: EXACT_LEVEL };
    }
    match fit {
        Some(f) => Check { name: name.into(), passed: (f.order - 2.0).abs() <= tol, value: f.order, tolerance: tol },
        None => Check { name: name.into(), passed: false, value: f64::NAN, tolerance: tol },
    }
}

/// Default interior center for the Schrödinger–Lichnerowicz patches.
pub fn sl_center(n: usize) -> Vec<f64> {
    let mut c = vec![1.0; n];
    c[0] = 1.6;
    c[n - 1] = 1.2;
    c
}

/// Default boundary point for the boundary-identity patches.
pub fn boundary_point(n: usize) -> Vec<f64> {
    let mut x = vec![0.7; n];
    x[0] = 1.5;
    x[n - 1] = 0.0;
    x
}

fn verify_sl(cfg: &RunConfig) -> Result<Sections> {
    let data = build_family(&cfg.family)?;
    let n = data.n();
    let rep = build_rep(n)?;
    let f = AnalyticSpinor::test_field(n, rep.dim(), cfg.seed);
    let sl = sl_report(&data, &rep, &f, &sl_center(n), &cfg.spacings, 0.4)?;
    let fe = eigen_projected(&rep, &f, cfg.theta_radians(), cfg.sign)?;
    let bl = boundary_lemma_report(&data, &rep, cfg.theta_radians(), cfg.sign, &fe, &boundary_point(n), &cfg.spacings)?;
    let tol = cfg.tolerances.order;
    let defects: Vec<f64> = sl.integral.iter().map(|t| t.defect.abs()).collect();
    let boundary: Vec<f64> = bl.samples.iter().map(|s| s.residual).collect();
    let checks = vec![
        order_check("sl-pointwise", &sl.pointwise, sl.pointwise_order.as_ref(), tol),
        order_check("sl-integral", &defects, sl.integral_order.as_ref(), tol),
        order_check("boundary-lemma", &boundary, bl.order.as_ref(), tol),
        Check::at_most("dirac-witten-forms", sl.dirac_form_defect, cfg.tolerances.frame),
    ];
    Ok((section(vec![("sl", value(&sl)?), ("boundary_lemma", value(&bl)?)]), checks, None))
}

fn witten(cfg: &RunConfig) -> Result<Sections> {
    let data = build_family(&cfg.family)?;
    let rep = build_rep(data.n())?;
    let report = witten_flux(&data, &rep, cfg.theta_radians(), cfg.sign, &cfg.radii, cfg.quadrature_order)?;
    let checks = vec![Check::at_most("witten-flux", report.mismatch, cfg.tolerances.flux)];
    Ok((section(vec![("witten_flux", value(&report)?)]), checks, None))
}

/// Edge diagnostics of a capillary surface at evenly spaced edge points.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeSummary {
    pub points: Vec<Vec<f64>>,
    pub cos_gamma: Vec<f64>,
    pub z_mots_form: Vec<f64>,
    pub z_general_form: Vec<f64>,
    pub z_direct: Vec<f64>,
    pub max_frame_defect: f64,
    pub max_contact_defect: f64,
    pub max_trace_residual: f64,
    /// `max |general − direct|`.
    pub max_z_mismatch: f64,
    /// Whether every edge point meets `∂M` orthogonally.
    pub free_boundary: bool,
    /// `max |mots form − direct|` at free-boundary points.
    pub max_free_boundary_mismatch: f64,
}

pub fn edge_summary(
    data: &crate::geometry::InitialDataSet,
    surface: &Hypersurface,
    gamma: &AngleProfile,
    count: usize,
) -> Result<EdgeSummary> {
    let n = data.n();
    let mut s = EdgeSummary {
        points: Vec::new(),
        cos_gamma: Vec::new(),
        z_mots_form: Vec::new(),
        z_general_form: Vec::new(),
        z_direct: Vec::new(),
        max_frame_defect: 0.0,
        max_contact_defect: 0.0,
        max_trace_residual: 0.0,
        max_z_mismatch: 0.0,
        free_boundary: true,
        max_free_boundary_mismatch: 0.0,
    };
    for k in 0..count {
        let t = (k as f64 + 0.5) / count as f64;
        let mut y: Vec<f64> = surface.lo.iter().zip(&surface.hi).map(|(a, b)| 0.5 * (a + b)).collect();
        y[0] = surface.lo[0] + t * (surface.hi[0] - surface.lo[0]);
        y[n - 2] = 0.0;
        let e = edge_point(data, surface, &y)?;
        let z = boundary_z_term(data, surface, gamma, &y)?;
        let tr = boundary_trace_identity(data, surface, &y)?;
        s.max_frame_defect = s.max_frame_defect.max(e.frame_defect);
        s.max_contact_defect = s.max_contact_defect.max(z.contact_defect.abs());
        s.max_trace_residual = s.max_trace_residual.max(tr.residual);
        s.max_z_mismatch = s.max_z_mismatch.max((z.general_form - z.direct).abs());
        if e.cos_gamma.abs() <= EXACT_LEVEL {
            s.max_free_boundary_mismatch = s.max_free_boundary_mismatch.max((z.mots_form - z.direct).abs());
        } else {
            s.free_boundary = false;
        }
        s.points.push(e.surface.x.clone());
        s.cos_gamma.push(e.cos_gamma);
        s.z_mots_form.push(z.mots_form);
        s.z_general_form.push(z.general_form);
        s.z_direct.push(z.direct);
    }
    Ok(s)
}

fn mots(cfg: &RunConfig) -> Result<Sections> {
    let n = cfg.family.n;
    let base = capillary_config(&cfg.family.name, n)?;
    let surface = match &cfg.surface {
        Some(spec) => parse_surface(spec, n, base.surface.lo.clone(), base.surface.hi.clone())?,
        None => base.surface.clone(),
    };
    let gamma = match &cfg.gamma {
        Some(spec) => parse_gamma(spec, n)?,
        None => base.gamma.clone(),
    };
    let phi = base.weight();
    let one: ParamFn = Arc::new(|_: &[Jet]| Jet::constant(1.0));
    let sweep = stability_sweep(&base.data, &surface, &gamma, &phi, cfg.basis, cfg.quadrature_order)?;
    let constant = stability_functional(&base.data, &surface, &gamma, &one, &phi, cfg.quadrature_order)?;
    let edges = edge_summary(&base.data, &surface, &gamma, 5)?;
    let trace_sweep = trace_identity_sweep(n, cfg.trace_samples, cfg.seed)?;
    let tol = &cfg.tolerances;
    let mut checks = vec![
        Check::at_most("trace-identity-sweep", trace_sweep, tol.frame),
        Check::at_most("trace-identity-edge", edges.max_trace_residual, tol.frame),
        Check::at_most("z-forms", edges.max_z_mismatch, tol.frame),
        Check::at_most("contact-angle", edges.max_contact_defect, tol.frame),
    ];
    if edges.free_boundary {
        checks.push(Check::at_most("free-boundary", edges.max_free_boundary_mismatch, tol.frame));
    }
    if base.dec {
        // the constant function does not vanish on the artificial sides of
        // the patch, so only the basis and its span are admissible
        checks.push(Check::at_least("stability", sweep.min_value, tol.stability));
        checks.push(Check::at_least("stability-ritz", sweep.ritz_min, tol.stability));
    }
    let result = section(vec![
        ("configuration", Value::String(base.name.into())),
        ("surface", Value::String(surface.label().into())),
        ("gamma", Value::String(gamma.label().into())),
        ("dec", Value::Bool(base.dec)),
        ("trace_identity_sweep", value(&trace_sweep)?),
        ("edge", value(&edges)?),
        ("constant_test_function", value(&constant)?),
        ("stability", value(&sweep)?),
    ]);
    Ok((result, checks, None))
}

fn families() -> Result<Sections> {
    let result = section(vec![
        ("families", value(&family_catalog())?),
        ("capillary_configurations", value(&CAPILLARY_CONFIGS)?),
        ("tilt_grid_degrees", value(&tilt_grid().iter().map(|t| t.to_degrees()).collect::<Vec<_>>())?),
    ]);
    Ok((result, Vec::new(), None))
}

/// `θ` grid (radians) used for the positive-mass instantiation.
pub fn tilt_grid() -> Vec<f64> {
    (0..=6).map(|k| k as f64 * PI / 12.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilyParams;

    #[test]
    fn rotations_are_special_orthogonal() {
        for k in [2, 3, 4] {
            for r in random_rotations(k, 5, 3) {
                assert!((r.transpose() * &r - DMatrix::identity(k, k)).amax() < 1e-14);
                assert!((r.determinant() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn angle_and_surface_specs() {
        let g = parse_gamma("linear:80:0.1", 3).unwrap();
        let (v, d) = g.eval(&[1.0, 2.0, 0.0]);
        assert!((v - 80f64.to_radians() - 0.1).abs() < 1e-15 && d == vec![0.1, 0.0, 0.0]);
        assert!(parse_gamma("0", 3).is_err());
        assert!(parse_gamma("abc", 3).is_err());
        let (lo, hi) = (vec![0.0, 0.0], vec![1.0, 1.0]);
        assert!(parse_surface("plane:1,0.5", 3, lo.clone(), hi.clone()).is_ok());
        assert!(parse_surface("cap:0,0,0,3", 3, lo.clone(), hi.clone()).is_ok());
        assert!(parse_surface("cap:0,3", 3, lo, hi).is_err());
    }

    #[test]
    fn usage_errors_map_to_two() {
        let cfg = RunConfig::new(Command::Adm, FamilyParams::named("nope"));
        assert_eq!(exit_code_for(&evaluate(&cfg).unwrap_err()), EXIT_USAGE);
    }

    #[test]
    fn flat_check_dec_is_trivial() {
        let mut cfg = RunConfig::new(Command::CheckDec, FamilyParams::named("flat"));
        cfg.theta = 30.0;
        cfg.samples = 16;
        let out = evaluate(&cfg).unwrap();
        assert_eq!(out.exit_code(), 0);
        assert_eq!(out.report.result["worst_margin"].as_f64(), Some(0.0));
    }

    #[test]
    fn order_check_accepts_exact_residuals() {
        assert!(order_check("x", &[1e-15, 2e-16], None, 0.25).passed);
        let fit = OrderFit { order: 1.5, residual: 0.0 };
        assert!(!order_check("x", &[1e-3, 2e-4], Some(&fit), 0.25).passed);
    }
}
