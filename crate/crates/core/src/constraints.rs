//! Constraint quantities, dominant energy checks and Hamiltonian densities.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryGeometry, InitialDataSet, LocalGeometry, Sampling, MIN_SAMPLE_RADIUS};
use crate::jet::Jet;

pub const ANALYTIC_DEC_TOL: f64 = 1e-9;

/// `μ = ½(R + (tr p)² − |p|²)`.
pub fn energy_density_local(local: &LocalGeometry) -> f64 {
    let tr = local.trace_p();
    0.5 * (local.scalar_curvature + tr * tr - local.p_norm_sq())
}

/// Covariant components `J_i = ∇ʲp_ji − ∂_i tr_g p`.
pub fn current_density_local(local: &LocalGeometry) -> DVector<f64> {
    let n = local.n();
    let ginv = &local.ginv;
    let p = &local.p;
    let gam = &local.christoffel;
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let mut div = 0.0;
        for j in 0..n {
            for k in 0..n {
                if ginv[(j, k)] == 0.0 {
                    continue;
                }
                // ∇_k p_ji
                let mut cov = local.dp[k][(j, i)];
                for l in 0..n {
                    cov -= gam.get(l, k, j) * p[(l, i)] + gam.get(l, k, i) * p[(j, l)];
                }
                div += ginv[(j, k)] * cov;
            }
        }
        let dginv = -(ginv * &local.dg[i] * ginv);
        let dtr = dginv.component_mul(p).sum() + ginv.component_mul(&local.dp[i]).sum();
        out[i] = div - dtr;
    }
    out
}

/// `|ω|_g` for a covector `ω`.
pub fn covector_norm(local: &LocalGeometry, w: &DVector<f64>) -> f64 {
    (w.transpose() * &local.ginv * w)[(0, 0)].max(0.0).sqrt()
}

pub fn energy_density(data: &InitialDataSet, x: &[f64]) -> Result<f64> {
    Ok(energy_density_local(&LocalGeometry::at(data, x)?))
}

pub fn current_density(data: &InitialDataSet, x: &[f64]) -> Result<DVector<f64>> {
    Ok(current_density_local(&LocalGeometry::at(data, x)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecKind {
    Interior,
    Tilted,
    Capillary,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecEntry {
    pub point: Vec<f64>,
    pub margin: f64,
    /// `μ` for interior checks, `H_∂M` for boundary checks.
    pub primary: f64,
    /// `|J|_g` for interior checks, the tangential norm term for boundary checks.
    pub secondary: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecReport {
    pub kind: DecKind,
    /// Tilt angle θ (radians) for tilted checks.
    pub theta: Option<f64>,
    pub sign: Option<i8>,
    /// Label of the angle profile for capillary checks.
    pub gamma: Option<String>,
    pub tolerance: f64,
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    /// Indices into `entries` with `margin < −tolerance`.
    pub violations: Vec<usize>,
    pub entries: Vec<DecEntry>,
}

impl DecReport {
    fn assemble(
        kind: DecKind,
        theta: Option<f64>,
        sign: Option<i8>,
        gamma: Option<String>,
        tolerance: f64,
        entries: Vec<DecEntry>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut worst = 0;
        for (k, e) in entries.iter().enumerate() {
            if e.margin < entries[worst].margin {
                worst = k;
            }
        }
        let violations = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.margin < -tolerance)
            .map(|(k, _)| k)
            .collect();
        Ok(DecReport {
            kind,
            theta,
            sign,
            gamma,
            tolerance,
            worst_margin: entries[worst].margin,
            worst_point: entries[worst].point.clone(),
            violations,
            entries,
        })
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Default tolerance: `1e-9` for analytic data, `10 h²` on a grid.
pub fn default_tolerance(data: &InitialDataSet) -> f64 {
    match &data.chart.sampling {
        Sampling::Analytic => ANALYTIC_DEC_TOL,
        Sampling::Grid(patch) => 10.0 * patch.h * patch.h,
    }
}

fn sign_value(sign: i8) -> Result<f64> {
    match sign {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => Err(Error::InvalidParameter(format!("sign must be +1 or -1, got {sign}"))),
    }
}

pub fn check_interior_dec(
    data: &InitialDataSet,
    samples: &[Vec<f64>],
    tolerance: Option<f64>,
) -> Result<DecReport> {
    let entries = samples
        .par_iter()
        .map(|x| {
            let loc = LocalGeometry::at(data, x)?;
            let mu = energy_density_local(&loc);
            let j = covector_norm(&loc, &current_density_local(&loc));
            Ok(DecEntry { point: x.clone(), margin: mu - j, primary: mu, secondary: j })
        })
        .collect::<Result<Vec<_>>>()?;
    let tol = tolerance.unwrap_or_else(|| default_tolerance(data));
    DecReport::assemble(DecKind::Interior, None, None, None, tol, entries)
}

/// `H ± cosθ tr_∂M p − sinθ |p(η,·)^⊤|`.
pub fn tilted_margin(b: &BoundaryGeometry, theta: f64, sign: f64) -> f64 {
    b.mean_curvature + sign * theta.cos() * b.trace_p - theta.sin() * b.p_normal_tangential_norm
}

pub fn check_tilted_boundary_dec(
    data: &InitialDataSet,
    theta: f64,
    sign: i8,
    samples: &[Vec<f64>],
    tolerance: Option<f64>,
) -> Result<DecReport> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(Error::AngleOutOfRange { value: theta, range: "[0, pi/2]" });
    }
    let s = sign_value(sign)?;
    let entries = samples
        .par_iter()
        .map(|x| {
            let b = crate::geometry::boundary_geometry(data, x)?;
            Ok(DecEntry {
                point: x.clone(),
                margin: tilted_margin(&b, theta, s),
                primary: b.mean_curvature,
                secondary: b.p_normal_tangential_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tol = tolerance.unwrap_or_else(|| default_tolerance(data));
    DecReport::assemble(DecKind::Tilted, Some(theta), Some(sign), None, tol, entries)
}

/// A contact-angle function `γ` on `∂M`, with values in `(0, π)`.
#[derive(Clone)]
pub struct AngleProfile {
    label: String,
    f: Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>,
}

impl std::fmt::Debug for AngleProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AngleProfile({})", self.label)
    }
}

impl AngleProfile {
    pub fn new(label: impl Into<String>, f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> Self {
        AngleProfile { label: label.into(), f: Arc::new(f) }
    }

    pub fn constant(gamma: f64) -> Self {
        AngleProfile::new(format!("const({gamma})"), move |_| Jet::constant(gamma))
    }

    /// `γ(x) = base + slope·x` (slope over the tangential coordinates).
    pub fn linear(base: f64, slope: Vec<f64>) -> Self {
        let label = format!("linear({base};{slope:?})");
        AngleProfile::new(label, move |x| {
            slope.iter().zip(x).fold(Jet::constant(base), |acc, (s, xi)| acc + *xi * *s)
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Value and coordinate gradient.
    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let j = (self.f)(&Jet::point(x));
        (j.v, j.d[..x.len()].to_vec())
    }
}

/// `H + cosγ tr_∂M p − sinγ |p(X,·) − (1/sinγ) dγ|` over tangential slots.
pub fn capillary_margin(b: &BoundaryGeometry, gamma: f64, dgamma: &[f64], x: &[f64]) -> Result<f64> {
    let s = gamma.sin();
    if s <= 1e-12 {
        return Err(Error::DegenerateAngle { sin: s, point: x.to_vec() });
    }
    let mut sq = 0.0;
    for (a, e) in b.tangent_frame.iter().enumerate() {
        let dg: f64 = e.iter().zip(dgamma).map(|(u, d)| u * d).sum();
        let w = b.p_normal_tangential[a] - dg / s;
        sq += w * w;
    }
    Ok(b.mean_curvature + gamma.cos() * b.trace_p - s * sq.sqrt())
}

pub fn check_capillary_dec(
    data: &InitialDataSet,
    gamma: &AngleProfile,
    samples: &[Vec<f64>],
    tolerance: Option<f64>,
) -> Result<DecReport> {
    let entries = samples
        .par_iter()
        .map(|x| {
            let b = crate::geometry::boundary_geometry(data, x)?;
            let (g, dg) = gamma.eval(x);
            if !(g > 0.0 && g < std::f64::consts::PI) {
                return Err(Error::AngleOutOfRange { value: g, range: "(0, pi)" });
            }
            let margin = capillary_margin(&b, g, &dg, x)?;
            Ok(DecEntry {
                point: x.clone(),
                margin,
                primary: b.mean_curvature,
                secondary: b.mean_curvature + g.cos() * b.trace_p - margin,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tol = tolerance.unwrap_or_else(|| default_tolerance(data));
    DecReport::assemble(
        DecKind::Capillary,
        None,
        None,
        Some(gamma.label().to_string()),
        tol,
        entries,
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct HamiltonianDensities {
    /// `Nμ + 2J(X)`.
    pub interior: f64,
    /// `2[NH − p(X,η) + tr_g p ⟨X,η⟩]`, present at boundary points.
    pub boundary: Option<f64>,
}

/// Both integrands of the Hamiltonian for lapse `lapse` and shift `shift`
/// (coordinate components, length `n`).
pub fn hamiltonian_densities(
    data: &InitialDataSet,
    lapse: f64,
    shift: &[f64],
    x: &[f64],
) -> Result<HamiltonianDensities> {
    let n = data.n();
    if shift.len() != n {
        if shift.len() == n + 1 && shift[0] != 0.0 {
            return Err(Error::NotTangent { point: x.to_vec() });
        }
        if shift.len() != n + 1 {
            return Err(Error::DimensionMismatch { expected: n, got: shift.len() });
        }
    }
    let xv = DVector::from_column_slice(&shift[shift.len() - n..]);
    let loc = LocalGeometry::at(data, x)?;
    let mu = energy_density_local(&loc);
    let j = current_density_local(&loc);
    let interior = lapse * mu + 2.0 * j.dot(&xv);
    let boundary = if data.chart.is_boundary_point(x) {
        let b = BoundaryGeometry::from_local(&loc)?;
        let eta = DVector::from_vec(b.normal.clone());
        let p_xe = (xv.transpose() * &loc.p * &eta)[(0, 0)];
        let x_eta = loc.inner(&xv, &eta);
        Some(2.0 * (lapse * b.mean_curvature - p_xe + loc.trace_p() * x_eta))
    } else {
        None
    };
    Ok(HamiltonianDensities { interior, boundary })
}

/// Shift `X = cosθ η + sinθ τ` at a boundary point, `τ = e_a` the `a`-th
/// tangential frame vector.
pub fn tilted_shift(b: &BoundaryGeometry, theta: f64, tangent: usize) -> Result<Vec<f64>> {
    let t = b
        .tangent_frame
        .get(tangent)
        .ok_or_else(|| Error::InvalidParameter(format!("no tangent frame vector {tangent}")))?;
    Ok(b.normal.iter().zip(t).map(|(e, t)| theta.cos() * e + theta.sin() * t).collect())
}

/// Deterministic low-discrepancy interior samples with `1.25 ≤ r ≤ r_max`.
pub fn interior_samples(n: usize, count: usize, r_max: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let u: Vec<f64> = (0..n).map(|a| halton(k + 1, PRIMES[a])).collect();
            let r = MIN_SAMPLE_RADIUS + (r_max - MIN_SAMPLE_RADIUS) * u[0];
            let dir = hemisphere_direction(&u[1..], n, false);
            dir.iter().map(|d| d * r).collect()
        })
        .collect()
}

/// Deterministic samples on `{x_n = 0}` with `1.25 ≤ r ≤ r_max`.
pub fn boundary_samples(n: usize, count: usize, r_max: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let u: Vec<f64> = (0..n).map(|a| halton(k + 1, PRIMES[a])).collect();
            let r = MIN_SAMPLE_RADIUS + (r_max - MIN_SAMPLE_RADIUS) * u[0];
            let dir = hemisphere_direction(&u[1..], n, true);
            dir.iter().map(|d| d * r).collect()
        })
        .collect()
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn halton(mut k: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

/// Maps `n-1` uniforms to a unit vector with `x_n ≥ 0` (or `x_n = 0`).
fn hemisphere_direction(u: &[f64], n: usize, on_boundary: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|a| 2.0 * u.get(a).copied().unwrap_or(0.5) - 1.0 + 0.05 * (a as f64 + 1.0)).collect();
    if on_boundary {
        v[n - 1] = 0.0;
    } else {
        v[n - 1] = v[n - 1].abs();
    }
    let s = crate::geometry::euclidean_norm(&v);
    if s < 1e-9 {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        return e;
    }
    v.iter().map(|c| c / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use crate::jet::norm_sq;
    use nalgebra::DMatrix;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn data(
        n: usize,
        g: AnalyticField,
        p: AnalyticField,
    ) -> InitialDataSet {
        InitialDataSet::new("t", n, Arc::new(g), Arc::new(p), 1.0).unwrap()
    }

    fn schwarzschild() -> InitialDataSet {
        data(
            3,
            AnalyticField::conformal(3, "schw", |x| (1.0 + 0.5 * norm_sq(x).sqrt().recip()).powi(4)),
            AnalyticField::zero(3),
        )
    }

    fn p_const(n: usize, c: f64) -> InitialDataSet {
        data(n, AnalyticField::euclidean(n), AnalyticField::constant(DMatrix::identity(n, n) * c))
    }

    #[test]
    fn flat_constraints_vanish() {
        let d = data(3, AnalyticField::euclidean(3), AnalyticField::zero(3));
        let s = interior_samples(3, 20, 5.0);
        let r = check_interior_dec(&d, &s, None).unwrap();
        assert_eq!(r.worst_margin, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn constant_p_algebra() {
        for n in 3..=5 {
            let c = 0.3;
            let d = p_const(n, c);
            let x: Vec<f64> = (0..n).map(|a| 1.0 + a as f64 * 0.2).collect();
            let nf = n as f64;
            let mu = energy_density(&d, &x).unwrap();
            assert!((mu - 0.5 * ((nf * c).powi(2) - nf * c * c)).abs() < 1e-14);
            assert!(current_density(&d, &x).unwrap().amax() < 1e-15);
        }
        let r = check_interior_dec(&p_const(3, 0.7), &interior_samples(3, 5, 4.0), None).unwrap();
        assert!((r.worst_margin - 3.0 * 0.49).abs() < 1e-13);
    }

    #[test]
    fn current_matches_hand_divergence() {
        // g = δ, p_00 = x1², p_01 = p_10 = x0 x2: J_i = ∂_j p_ji − ∂_i p_00
        let d = data(
            3,
            AnalyticField::euclidean(3),
            AnalyticField::new(3, "p", |x| {
                let z = crate::jet::Jet::constant(0.0);
                vec![x[1] * x[1], x[0] * x[2], z, x[0] * x[2], z, z, z, z, z]
            }),
        );
        let x = [1.2, 0.7, 0.4];
        let j = current_density(&d, &x).unwrap();
        // div: i=0 → ∂_0 p_00 + ∂_1 p_10 = 0 + 0; i=1 → ∂_0 p_01 = x2; i=2 → 0
        // d tr: tr = x1² → (0, 2 x1, 0)
        let expect = [0.0, x[2] - 2.0 * x[1], 0.0];
        for i in 0..3 {
            assert!((j[i] - expect[i]).abs() < 1e-14, "{j}");
        }
    }

    #[test]
    fn schwarzschild_is_vacuum() {
        let d = schwarzschild();
        let s = interior_samples(3, 40, 8.0);
        let r = check_interior_dec(&d, &s, None).unwrap();
        assert!(r.worst_margin.abs() < 1e-10);
        for e in &r.entries {
            assert!(e.primary.abs() < 1e-10 && e.secondary == 0.0);
        }
        let b = check_tilted_boundary_dec(&d, 0.4, 1, &boundary_samples(3, 20, 8.0), None).unwrap();
        assert!(b.worst_margin.abs() < 1e-12 && b.passed());
    }

    #[test]
    fn time_symmetric_margin_is_half_scalar_curvature() {
        let d = data(
            3,
            AnalyticField::conformal(3, "bump", |x| (1.0 + 0.3 * (-norm_sq(x) * 0.2).exp()).powi(4)),
            AnalyticField::zero(3),
        );
        let x = vec![1.1, 0.5, 0.8];
        let r = check_interior_dec(&d, &[x.clone()], None).unwrap();
        let scal = crate::geometry::scalar_curvature(&d, &x).unwrap();
        assert!((r.worst_margin - 0.5 * scal).abs() < 1e-13);
    }

    #[test]
    fn tilted_theta_range_and_reduction() {
        let d = p_const(3, 0.2);
        let s = boundary_samples(3, 6, 4.0);
        assert!(check_tilted_boundary_dec(&d, -0.1, 1, &s, None).is_err());
        assert!(check_tilted_boundary_dec(&d, 1.7, 1, &s, None).is_err());
        let plus = check_tilted_boundary_dec(&d, FRAC_PI_2, 1, &s, None).unwrap();
        // θ = π/2: margin = H + 0·tr − |p(η,·)ᵀ| = 0
        assert!(plus.worst_margin.abs() < 1e-15);
        let zero = check_tilted_boundary_dec(&d, 0.0, -1, &s, None).unwrap();
        assert!((zero.worst_margin + 0.4).abs() < 1e-14);
        assert!(!zero.passed());
    }

    #[test]
    fn capillary_constant_matches_tilted_plus() {
        let d = data(
            3,
            AnalyticField::conformal(3, "off", |x| {
                let r = (x[0] * x[0] + x[1] * x[1] + (x[2] + 0.5) * (x[2] + 0.5)).sqrt();
                (1.0 + 0.5 * r.recip()).powi(4)
            }),
            AnalyticField::new(3, "p", |x| {
                let a = 0.1 * (x[0] * 0.3).sin();
                let b = 0.05 * x[1];
                let c = Jet::constant(0.02);
                vec![a, b, c, b, a * 0.5, b, c, b, c]
            }),
        );
        let s = boundary_samples(3, 12, 5.0);
        for theta in [0.3, 0.9, 1.4] {
            let t = check_tilted_boundary_dec(&d, theta, 1, &s, None).unwrap();
            let c = check_capillary_dec(&d, &AngleProfile::constant(theta), &s, None).unwrap();
            for (a, b) in t.entries.iter().zip(&c.entries) {
                assert_eq!(a.margin, b.margin);
            }
        }
    }

    #[test]
    fn capillary_gradient_only_violates() {
        let d = data(3, AnalyticField::euclidean(3), AnalyticField::zero(3));
        let slope = vec![0.1, -0.2];
        let g = AngleProfile::linear(1.0, slope.clone());
        let s = boundary_samples(3, 5, 3.0);
        let r = check_capillary_dec(&d, &g, &s, None).unwrap();
        let grad = (0.01f64 + 0.04).sqrt();
        for e in &r.entries {
            assert!((e.margin + grad).abs() < 1e-14);
        }
        assert_eq!(r.violations.len(), 5);
        let flat = check_capillary_dec(&d, &AngleProfile::constant(1.0), &s, None).unwrap();
        assert_eq!(flat.worst_margin, 0.0);
        let bad = AngleProfile::constant(PI);
        assert!(check_capillary_dec(&d, &bad, &s, None).is_err());
    }

    #[test]
    fn hamiltonian_sign_chain() {
        let d = data(
            3,
            AnalyticField::new(3, "g", |x| {
                let a = 1.0 + 0.1 * (x[0] * 0.4).sin();
                let b = 0.05 * (x[1] * 0.3).cos();
                let c = Jet::constant(0.03);
                vec![a, b, c, b, a * a, Jet::constant(0.0), c, Jet::constant(0.0), 1.0 + x[2] * 0.1]
            }),
            AnalyticField::new(3, "p", |x| {
                let a = 0.2 * x[0].cos();
                let b = 0.1 * x[1];
                let c = Jet::constant(-0.05);
                vec![a, b, c, b, a * 0.3, b * 0.5, c, b * 0.5, b + 0.1]
            }),
        );
        let x = [1.7, -0.8, 0.0];
        let loc = LocalGeometry::at(&d, &x).unwrap();
        let b = BoundaryGeometry::from_local(&loc).unwrap();
        for theta in [0.0, 0.3, 1.1, FRAC_PI_2] {
            for tan in 0..2 {
                let shift = tilted_shift(&b, theta, tan).unwrap();
                let h = hamiltonian_densities(&d, 1.0, &shift, &x).unwrap();
                let tau = DVector::from_vec(b.tangent_frame[tan].clone());
                let eta = DVector::from_vec(b.normal.clone());
                let p_te = (tau.transpose() * &loc.p * &eta)[(0, 0)];
                let expect = 2.0 * (b.mean_curvature + theta.cos() * b.trace_p - theta.sin() * p_te);
                assert!((h.boundary.unwrap() - expect).abs() < 1e-12);
            }
        }
        let h0 = hamiltonian_densities(&d, 1.0, &[0.0; 3], &x).unwrap();
        assert!((h0.interior - energy_density_local(&loc)).abs() < 1e-15);
        assert!(hamiltonian_densities(&d, 1.0, &[1.0, 0.0, 0.0, 0.0], &x).is_err());
    }

    #[test]
    fn samples_respect_domain() {
        for n in 3..=5 {
            for x in interior_samples(n, 50, 6.0) {
                let r = crate::geometry::euclidean_norm(&x);
                assert!(r >= MIN_SAMPLE_RADIUS - 1e-12 && x[n - 1] >= 0.0);
            }
            for x in boundary_samples(n, 50, 6.0) {
                assert_eq!(x[n - 1], 0.0);
            }
        }
    }
}
