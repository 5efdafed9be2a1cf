//! Charges at infinity: half-sphere flux integrals, extrapolation in the
//! radius, the energy-momentum functional and its tilted/boosted forms.
//!
//! All integrals are the raw coordinate expressions, with Euclidean normals
//! and area elements, and no normalising constant.

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extrapolate::{power_fit, series_fit, PowerFit, SeriesFit};
use crate::field::TensorJet;
use crate::geometry::{InitialDataSet, MIN_SAMPLE_RADIUS};
use crate::quadrature::FluxRules;

pub const DEFAULT_ORDER: usize = 16;
/// Relative fit residual above which a ladder is flagged as not converged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e-3;

fn check_radius(r: f64) -> Result<()> {
    if !(r > MIN_SAMPLE_RADIUS) {
        return Err(Error::RadiusTooSmall { r, min: MIN_SAMPLE_RADIUS });
    }
    Ok(())
}

/// `(∂_j g_ij − ∂_i g_jj) ν^i`.
fn energy_integrand(gj: &TensorJet, nu: &[f64]) -> f64 {
    let n = nu.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut c = 0.0;
        for j in 0..n {
            c += gj.d1[j][(i, j)] - gj.d1[i][(j, j)];
        }
        acc += c * nu[i];
    }
    acc
}

/// `(g − δ)_{αn} ϑ^α` at a corner point.
fn corner_integrand(g: &DMatrix<f64>, theta: &[f64]) -> f64 {
    let n = theta.len();
    (0..n - 1).map(|a| g[(a, n - 1)] * theta[a]).sum()
}

/// `E(r)`: bulk half-sphere flux minus the corner term.
pub fn adm_energy_flux_with(data: &InitialDataSet, r: f64, rules: &FluxRules) -> Result<f64> {
    check_radius(r)?;
    let mut err = None;
    let bulk = rules.hemisphere.integrate(r, |x, nu| match data.g.jet(x) {
        Ok(j) => energy_integrand(&j, nu),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    });
    let corner = rules.corner.integrate(r, |x, th| match data.g.value(x) {
        Ok(g) => corner_integrand(&g, th),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(bulk - corner)
}

pub fn adm_energy_flux(data: &InitialDataSet, r: f64) -> Result<f64> {
    adm_energy_flux_with(data, r, &FluxRules::new(data.n(), DEFAULT_ORDER)?)
}

/// All components `P_i(r) = 2∫ π_ij ν^j`, `π = p − g tr_g p`.
pub fn adm_momentum_flux_with(data: &InitialDataSet, r: f64, rules: &FluxRules) -> Result<Vec<f64>> {
    check_radius(r)?;
    let n = data.n();
    let mut out = vec![0.0; n];
    let mut err = None;
    for (i, oi) in out.iter_mut().enumerate() {
        *oi = 2.0
            * rules.hemisphere.integrate(r, |x, nu| {
                let eval = || -> Result<f64> {
                    let g = data.g.value(x)?;
                    let p = data.p.value(x)?;
                    let ginv = g
                        .clone()
                        .try_inverse()
                        .ok_or_else(|| Error::DegenerateMetric { point: x.to_vec() })?;
                    let tr = ginv.component_mul(&p).sum();
                    Ok((0..n).map(|j| (p[(i, j)] - g[(i, j)] * tr) * nu[j]).sum())
                };
                eval().unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    0.0
                })
            });
    }
    if let Some(e) = err {
        return Err(e);
    }
    Ok(out)
}

pub fn adm_momentum_flux(data: &InitialDataSet, r: f64, i: usize) -> Result<f64> {
    if i >= data.n() {
        return Err(Error::InvalidParameter(format!("momentum index {i} out of range")));
    }
    Ok(adm_momentum_flux_with(data, r, &FluxRules::new(data.n(), DEFAULT_ORDER)?)?[i])
}

/// A translational Killing field `T = N ∂₀ + Xⁱ ∂ᵢ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KillingField {
    pub lapse: f64,
    pub shift: Vec<f64>,
}

impl KillingField {
    pub fn time(n: usize) -> Self {
        KillingField { lapse: 1.0, shift: vec![0.0; n] }
    }

    pub fn space(n: usize, i: usize) -> Self {
        let mut shift = vec![0.0; n];
        shift[i] = 1.0;
        KillingField { lapse: 0.0, shift }
    }

    pub fn combine(a: f64, t1: &KillingField, b: f64, t2: &KillingField) -> Self {
        KillingField {
            lapse: a * t1.lapse + b * t2.lapse,
            shift: t1.shift.iter().zip(&t2.shift).map(|(x, y)| a * x + b * y).collect(),
        }
    }
}

/// The charge-density 1-form at `x` for constant `(N, X)`:
/// `N(div_δ g − d tr_δ g) + 2(p(X,·) − tr_δ p ⟨·,X⟩_δ)`.
pub fn charge_density(data: &InitialDataSet, t: &KillingField, x: &[f64]) -> Result<Vec<f64>> {
    let n = data.n();
    if t.shift.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: t.shift.len() });
    }
    let gj = data.g.jet(x)?;
    let p = data.p.value(x)?;
    let trp = p.trace();
    Ok((0..n)
        .map(|k| {
            let mut v = 0.0;
            for j in 0..n {
                v += t.lapse * (gj.d1[j][(j, k)] - gj.d1[k][(j, j)]);
                v += 2.0 * t.shift[j] * p[(j, k)];
            }
            v - 2.0 * trp * t.shift[k]
        })
        .collect())
}

/// Bracketed flux of the energy-momentum functional at radius `r`:
/// `∫_{S₊} 𝕌·ν + ∫_{S^{n−2}} N g(η̄, ϑ̄)` with `η̄ = −∂_n`.
pub fn functional_flux(data: &InitialDataSet, t: &KillingField, r: f64, rules: &FluxRules) -> Result<f64> {
    check_radius(r)?;
    let mut err = None;
    let bulk = rules.hemisphere.integrate(r, |x, nu| match charge_density(data, t, x) {
        Ok(u) => u.iter().zip(nu).map(|(a, b)| a * b).sum(),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    });
    let n = data.n();
    let corner = if t.lapse != 0.0 {
        rules.corner.integrate(r, |x, th| match data.g.value(x) {
            Ok(g) => -t.lapse * (0..n).map(|a| g[(n - 1, a)] * th[a]).sum::<f64>(),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        })
    } else {
        0.0
    };
    if let Some(e) = err {
        return Err(e);
    }
    Ok(bulk + corner)
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionalValue {
    pub radii: Vec<f64>,
    pub fluxes: Vec<f64>,
    pub fit: SeriesFit,
    pub value: f64,
    pub converged: bool,
}

/// `𝓜(T)`, extrapolated with a fixed-power fit so that it is linear in `T`.
pub fn energy_momentum_functional(
    data: &InitialDataSet,
    t: &KillingField,
    radii: &[f64],
    order: usize,
) -> Result<FunctionalValue> {
    let rules = FluxRules::new(data.n(), order)?;
    let fluxes = radii
        .par_iter()
        .map(|&r| functional_flux(data, t, r, &rules))
        .collect::<Result<Vec<_>>>()?;
    let fit = series_fit(radii, &fluxes, 2)?;
    let scale = fluxes.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let converged = fit.residual <= DIVERGENCE_THRESHOLD * scale + 1e-12;
    Ok(FunctionalValue { radii: radii.to_vec(), value: fit.limit(), fluxes, fit, converged })
}

/// `(E^θ, P^θ)` and its Minkowski norm.
#[derive(Clone, Debug, Serialize)]
pub struct TiltedVector {
    pub theta: f64,
    pub energy: f64,
    /// Components `i ≠ n`.
    pub momentum: Vec<f64>,
    pub minkowski_norm: f64,
}

pub fn tilted_vector(energy: f64, momentum: &[f64], theta: f64) -> Result<TiltedVector> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::AngleOutOfRange { value: theta, range: "(0, pi/2]" });
    }
    let n = momentum.len();
    let e = energy / theta.sin() + theta.cos() / theta.sin() * momentum[n - 1];
    let p: Vec<f64> = momentum[..n - 1].to_vec();
    let norm = -e * e + p.iter().map(|v| v * v).sum::<f64>();
    Ok(TiltedVector { theta, energy: e, momentum: p, minkowski_norm: norm })
}

/// Boost on `span{∂₀, ∂_n}` with `cosh ρ = 1/sinθ`.
pub fn boost_frame(theta: f64) -> Result<Matrix2<f64>> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::AngleOutOfRange { value: theta, range: "(0, pi/2]" });
    }
    let ch = 1.0 / theta.sin();
    let sh = theta.cos() / theta.sin();
    Ok(Matrix2::new(ch, sh, sh, ch))
}

/// `E ± cosθ P_n − sin|θ| |P̂|`.
pub fn positive_mass_margin(energy: f64, momentum: &[f64], theta: f64, sign: f64) -> f64 {
    let n = momentum.len();
    let phat = momentum[..n - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
    energy + sign * theta.cos() * momentum[n - 1] - theta.abs().sin() * phat
}

#[derive(Clone, Debug, Serialize)]
pub struct ChargeReport {
    pub family: String,
    pub n: usize,
    pub radii: Vec<f64>,
    pub energy_flux: Vec<f64>,
    /// `momentum_flux[k][i] = P_i(radii[k])`.
    pub momentum_flux: Vec<Vec<f64>>,
    pub energy: f64,
    pub momentum: Vec<f64>,
    pub energy_fit: PowerFit,
    pub momentum_fits: Vec<PowerFit>,
    /// Limits from the fixed-power fit `1, r⁻¹, r⁻²`, as a cross-check.
    pub energy_series_limit: f64,
    pub momentum_series_limits: Vec<f64>,
    pub converged: bool,
    pub quadrature_order: usize,
    pub hemisphere_nodes: usize,
    pub corner_nodes: usize,
    pub tilted: Option<TiltedVector>,
}

impl ChargeReport {
    pub fn p_hat(&self) -> &[f64] {
        &self.momentum[..self.n - 1]
    }

    pub fn p_hat_norm(&self) -> f64 {
        self.p_hat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn p_n(&self) -> f64 {
        self.momentum[self.n - 1]
    }

    /// Divides every charge by `c`.
    pub fn normalized(&self, c: f64) -> ChargeReport {
        let mut out = self.clone();
        let s = |v: &mut f64| *v /= c;
        out.energy_flux.iter_mut().for_each(s);
        out.momentum_flux.iter_mut().flatten().for_each(s);
        out.energy /= c;
        out.momentum.iter_mut().for_each(s);
        out.energy_series_limit /= c;
        out.momentum_series_limits.iter_mut().for_each(s);
        out.energy_fit.limit /= c;
        out.energy_fit.amplitude /= c;
        for f in &mut out.momentum_fits {
            f.limit /= c;
            f.amplitude /= c;
        }
        if let Some(t) = &mut out.tilted {
            t.energy /= c;
            t.momentum.iter_mut().for_each(s);
            t.minkowski_norm /= c * c;
        }
        out
    }
}

pub fn charge_report(
    data: &InitialDataSet,
    radii: &[f64],
    theta: Option<f64>,
    order: usize,
) -> Result<ChargeReport> {
    if radii.len() < 2 {
        return Err(Error::InvalidParameter("the radius ladder needs at least two radii".into()));
    }
    let n = data.n();
    let rules = FluxRules::new(n, order)?;
    let rows = radii
        .par_iter()
        .map(|&r| {
            let e = adm_energy_flux_with(data, r, &rules)?;
            let p = adm_momentum_flux_with(data, r, &rules)?;
            Ok((e, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let energy_flux: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let momentum_flux: Vec<Vec<f64>> = rows.into_iter().map(|r| r.1).collect();
    let energy_fit = power_fit(radii, &energy_flux)?;
    let mut momentum_fits = Vec::with_capacity(n);
    let mut series = Vec::with_capacity(n);
    for i in 0..n {
        let col: Vec<f64> = momentum_flux.iter().map(|row| row[i]).collect();
        momentum_fits.push(power_fit(radii, &col)?);
        series.push(series_fit(radii, &col, 2)?.limit());
    }
    let energy_series_limit = series_fit(radii, &energy_flux, 2)?.limit();
    let scale = energy_flux
        .iter()
        .chain(momentum_flux.iter().flatten())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let converged = std::iter::once(&energy_fit)
        .chain(&momentum_fits)
        .all(|f| f.residual <= DIVERGENCE_THRESHOLD * scale + 1e-12);
    let energy = energy_fit.limit;
    let momentum: Vec<f64> = momentum_fits.iter().map(|f| f.limit).collect();
    let tilted = match theta {
        Some(t) => Some(tilted_vector(energy, &momentum, t)?),
        None => None,
    };
    Ok(ChargeReport {
        family: data.name.clone(),
        n,
        radii: radii.to_vec(),
        energy_flux,
        momentum_flux,
        energy,
        momentum,
        energy_fit,
        momentum_fits,
        energy_series_limit,
        momentum_series_limits: series,
        converged,
        quadrature_order: order,
        hemisphere_nodes: rules.hemisphere.len(),
        corner_nodes: rules.corner.len(),
        tilted,
    })
}

/// Result of moving the data by a boundary-plane isometry.
#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub rotation: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
    pub before: ChargeReport,
    pub after: ChargeReport,
    /// `max(|ΔE|, |ΔP_n|) / max(|E|, |P|, tiny)`.
    pub energy_change: f64,
    /// `|P̂_after − R P̂_before| / max(|E|, |P|, tiny)`.
    pub momentum_defect: f64,
}

pub fn invariance_test(
    data: &InitialDataSet,
    rotation: &DMatrix<f64>,
    translation: &[f64],
    radii: &[f64],
    order: usize,
) -> Result<InvarianceReport> {
    let moved = data.moved(rotation, translation)?;
    let before = charge_report(data, radii, None, order)?;
    let after = charge_report(&moved, radii, None, order)?;
    let n = data.n();
    let scale = before
        .momentum
        .iter()
        .chain(std::iter::once(&before.energy))
        .fold(1e-300f64, |m, v| m.max(v.abs()));
    let de = (after.energy - before.energy)
        .abs()
        .max((after.p_n() - before.p_n()).abs());
    let rotated = rotation * nalgebra::DVector::from_column_slice(before.p_hat());
    let defect = (0..n - 1)
        .map(|a| (after.momentum[a] - rotated[a]).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(InvarianceReport {
        rotation: (0..n - 1).map(|i| rotation.row(i).iter().copied().collect()).collect(),
        translation: translation.to_vec(),
        before,
        after,
        energy_change: de / scale,
        momentum_defect: defect / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use crate::jet::norm_sq;
    use std::f64::consts::{FRAC_PI_2, PI};
    use std::sync::Arc;

    fn flat(n: usize) -> InitialDataSet {
        InitialDataSet::new("flat", n, Arc::new(AnalyticField::euclidean(n)), Arc::new(AnalyticField::zero(n)), 1.0)
            .unwrap()
    }

    fn schwarzschild(m: f64) -> InitialDataSet {
        InitialDataSet::new(
            "schwarzschild",
            3,
            Arc::new(AnalyticField::conformal(3, "s", move |x| (1.0 + 0.5 * m * norm_sq(x).sqrt().recip()).powi(4))),
            Arc::new(AnalyticField::zero(3)),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn schwarzschild_flux_closed_form() {
        // E(r) = 8πm (1 + m/2r)³ on the coordinate half-sphere
        let d = schwarzschild(1.0);
        for r in [2.0, 16.0] {
            let e = adm_energy_flux(&d, r).unwrap();
            let exact = 8.0 * PI * (1.0 + 0.5 / r).powi(3);
            assert!((e - exact).abs() < 1e-11 * exact, "{e} {exact}");
        }
    }

    #[test]
    fn flat_charges_vanish() {
        for n in 3..=5 {
            let rep = charge_report(&flat(n), &[16.0, 32.0, 64.0], Some(0.5), 6).unwrap();
            assert!(rep.energy.abs() < 1e-12);
            assert!(rep.momentum.iter().all(|p| p.abs() < 1e-12));
        }
    }

    #[test]
    fn radius_inside_excision_rejected() {
        assert!(matches!(adm_energy_flux(&flat(3), 1.1), Err(Error::RadiusTooSmall { .. })));
    }

    #[test]
    fn boost_properties() {
        assert!((boost_frame(FRAC_PI_2).unwrap() - Matrix2::identity()).amax() < 1e-15);
        let b = boost_frame(PI / 6.0).unwrap();
        assert!((b[(0, 0)] - 2.0).abs() < 1e-14);
        let eta = Matrix2::new(-1.0, 0.0, 0.0, 1.0);
        assert!((b.transpose() * eta * b - eta).amax() < 1e-14);
        assert!((b.determinant() - 1.0).abs() < 1e-14);
        assert!(boost_frame(0.0).is_err());
    }

    #[test]
    fn tilted_vector_recombination() {
        let t = tilted_vector(3.0, &[0.1, -0.2, 0.4], 0.7).unwrap();
        assert!((t.energy * 0.7f64.sin() - 0.7f64.cos() * 0.4 - 3.0).abs() < 1e-14);
        assert_eq!(t.momentum, vec![0.1, -0.2]);
        assert!(tilted_vector(3.0, &[0.0; 3], 0.0).is_err());
        let half = tilted_vector(3.0, &[0.0; 3], FRAC_PI_2).unwrap();
        assert!((half.energy - 3.0).abs() < 1e-15);
    }

    #[test]
    fn charge_density_reduces_to_flux_integrands() {
        let d = schwarzschild(1.0);
        let x = [3.0, 1.0, 2.0];
        let r = crate::geometry::euclidean_norm(&x);
        let nu: Vec<f64> = x.iter().map(|c| c / r).collect();
        let u = charge_density(&d, &KillingField::time(3), &x).unwrap();
        let lhs: f64 = u.iter().zip(&nu).map(|(a, b)| a * b).sum();
        let rhs = energy_integrand(&d.g.jet(&x).unwrap(), &nu);
        assert!((lhs - rhs).abs() < 1e-15);
    }
}
