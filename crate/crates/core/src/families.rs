//! Bundled initial data families and capillary surface configurations.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constraints::AngleProfile;
use crate::error::{Error, Result};
use crate::field::AnalyticField;
use crate::geometry::InitialDataSet;
use crate::jet::{norm_sq, Jet};
use crate::mots::{Hypersurface, ParamFn};

/// Parameters shared by the bundled families. Unused fields are ignored by a
/// family; `amplitude`, `width` and `decay` default per family when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    pub name: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
}

fn default_n() -> usize {
    3
}

fn default_m() -> f64 {
    1.0
}

impl FamilyParams {
    pub fn named(name: impl Into<String>) -> Self {
        FamilyParams { name: name.into(), n: 3, m: 1.0, amplitude: None, width: None, decay: None }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub dimensions: &'static str,
}

/// Names and short descriptions of every bundled data family.
pub fn family_catalog() -> Vec<FamilyInfo> {
    vec![
        FamilyInfo { name: "flat", description: "(δ, 0)", dimensions: "3..=6" },
        FamilyInfo {
            name: "schwarzschild",
            description: "((1 + m/2r^(n-2))^(4/(n-2)) δ, 0)",
            dimensions: "3..=6",
        },
        FamilyInfo {
            name: "conformal",
            description: "(u^(4/(n-2)) δ, 0), u = 1 + amplitude (r² + width²)^(-decay/2)",
            dimensions: "3..=6",
        },
        FamilyInfo {
            name: "synthetic-momentum",
            description: "(δ, amplitude a/r^(n-1)) with a fixed constant symmetric a",
            dimensions: "3..=6",
        },
        FamilyInfo {
            name: "bowen-york",
            description: "(ψ⁴δ, ψ⁻²K) with ψ = 1 + m/2r and the boosted Bowen-York K, |P| = amplitude",
            dimensions: "3",
        },
    ]
}

pub fn build_family(params: &FamilyParams) -> Result<InitialDataSet> {
    let n = params.n;
    if !(3..=crate::jet::MAX_DIM).contains(&n) {
        return Err(Error::UnsupportedDimension { n, supported: "3..=6" });
    }
    match params.name.as_str() {
        "flat" => flat(n),
        "schwarzschild" => schwarzschild(n, params.m),
        "conformal" => conformal(
            n,
            params.amplitude.unwrap_or(0.5),
            params.width.unwrap_or(1.0),
            params.decay.unwrap_or((n - 2) as f64),
        ),
        "synthetic-momentum" => synthetic_momentum(n, params.amplitude.unwrap_or(1.0)),
        "bowen-york" => {
            if n != 3 {
                return Err(Error::UnsupportedDimension { n, supported: "3" });
            }
            bowen_york(params.m, params.amplitude.unwrap_or(0.2))
        }
        other => Err(Error::UnknownFamily(other.to_string())),
    }
}

pub fn flat(n: usize) -> Result<InitialDataSet> {
    InitialDataSet::new("flat", n, Arc::new(AnalyticField::euclidean(n)), Arc::new(AnalyticField::zero(n)), 1.0)
}

/// Isotropic Schwarzschild half-space of mass parameter `m`.
pub fn schwarzschild(n: usize, m: f64) -> Result<InitialDataSet> {
    schwarzschild_at(n, m, vec![0.0; n])
}

/// Schwarzschild factor centered at `center`. Off the boundary plane the
/// boundary is no longer totally geodesic.
pub fn schwarzschild_at(n: usize, m: f64, center: Vec<f64>) -> Result<InitialDataSet> {
    if center.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: center.len() });
    }
    let k = (n - 2) as f64;
    let g = AnalyticField::conformal(n, "schwarzschild", move |x: &[Jet]| {
        let d: Vec<Jet> = x.iter().zip(&center).map(|(&a, &c)| a - c).collect();
        let r = norm_sq(&d).sqrt();
        (r.powf(-k) * (0.5 * m) + 1.0).powf(4.0 / k)
    });
    InitialDataSet::new("schwarzschild", n, Arc::new(g), Arc::new(AnalyticField::zero(n)), k)
}

/// Conformally flat metric with a positive superharmonic factor centered at
/// the origin, so `R ≥ 0` and the boundary is totally geodesic.
pub fn conformal(n: usize, amplitude: f64, width: f64, decay: f64) -> Result<InitialDataSet> {
    if !(amplitude >= 0.0) || !(width > 0.0) || !(decay > 0.0 && decay <= (n - 2) as f64) {
        return Err(Error::InvalidParameter(format!(
            "conformal family needs amplitude ≥ 0, width > 0 and 0 < decay ≤ {}",
            n - 2
        )));
    }
    let k = (n - 2) as f64;
    let g = AnalyticField::conformal(n, "conformal", move |x: &[Jet]| {
        let s = norm_sq(x) + width * width;
        (s.powf(-0.5 * decay) * amplitude + 1.0).powf(4.0 / k)
    });
    InitialDataSet::new("conformal", n, Arc::new(g), Arc::new(AnalyticField::zero(n)), decay)
}

/// The constant coefficient matrix of the synthetic-momentum family.
pub fn synthetic_momentum_matrix(n: usize, amplitude: f64) -> DMatrix<f64> {
    let l = n - 1;
    let mut a = DMatrix::zeros(n, n);
    a[(0, 0)] = 0.2;
    a[(1, 1)] = -0.15;
    a[(0, l)] = 0.3;
    a[(l, 0)] = 0.3;
    a[(1, l)] = -0.2;
    a[(l, 1)] = -0.2;
    a[(l, l)] = 0.1;
    a[(0, 1)] = 0.05;
    a[(1, 0)] = 0.05;
    a * amplitude
}

/// `(δ, a/r^(n−1))`: the momentum flux through every half-sphere is independent of `r`.
pub fn synthetic_momentum(n: usize, amplitude: f64) -> Result<InitialDataSet> {
    let a = synthetic_momentum_matrix(n, amplitude);
    let e = -0.5 * (n as f64 - 1.0);
    let p = AnalyticField::new(n, "synthetic-momentum", move |x: &[Jet]| {
        let w = norm_sq(x).powf(e);
        (0..n * n).map(|k| w * a[(k / n, k % n)]).collect()
    });
    InitialDataSet::new("synthetic-momentum", n, Arc::new(AnalyticField::euclidean(n)), Arc::new(p), 1.0)
}

/// In-plane momentum direction of the Bowen–York family.
pub const BOWEN_YORK_DIRECTION: [f64; 3] = [0.8660254037844386, 0.5, 0.0];

/// Conformally flat `ψ⁴δ` with `p = ψ⁻² K̂`, where `K̂` is the flat Bowen–York
/// tensor of momentum `amplitude · BOWEN_YORK_DIRECTION`. Not a constraint
/// solution; used for flux cross-checks with both `E` and `P̂` nonzero.
pub fn bowen_york(m: f64, amplitude: f64) -> Result<InitialDataSet> {
    let pv: Vec<f64> = BOWEN_YORK_DIRECTION.iter().map(|v| v * amplitude).collect();
    let g = AnalyticField::conformal(3, "bowen-york", move |x: &[Jet]| {
        (norm_sq(x).sqrt().recip() * (0.5 * m) + 1.0).powi(4)
    });
    let p = AnalyticField::new(3, "bowen-york", move |x: &[Jet]| {
        let r = norm_sq(x).sqrt();
        let u: Vec<Jet> = x.iter().map(|&v| v / r).collect();
        let pu = u[0] * pv[0] + u[1] * pv[1] + u[2] * pv[2];
        let psi = r.recip() * (0.5 * m) + 1.0;
        let scale = (r * r * psi * psi).recip() * 1.5;
        let mut out = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                let k = u[j] * pv[i] + u[i] * pv[j] - (Jet::constant(delta) - u[i] * u[j]) * pu;
                out.push(k * scale);
            }
        }
        out
    });
    InitialDataSet::new("bowen-york", 3, Arc::new(g), Arc::new(p), 1.0)
}

/// Data, surface, contact angle and weight for a stability evaluation.
#[derive(Clone, Debug)]
pub struct CapillaryConfig {
    pub name: &'static str,
    pub data: InitialDataSet,
    pub surface: Hypersurface,
    pub gamma: AngleProfile,
    /// Whether the data satisfy the interior and capillary dominant energy conditions.
    pub dec: bool,
}

impl CapillaryConfig {
    pub fn weight(&self) -> ParamFn {
        Arc::new(|_: &[Jet]| Jet::constant(1.0))
    }
}

pub const CAPILLARY_CONFIGS: [&str; 7] = [
    "schwarzschild-plane",
    "schwarzschild-offset",
    "shifted-free",
    "schwarzschild-tilted",
    "flat-tilted",
    "flat-cap",
    "flat-isotropic",
];

fn boxes(n: usize, first: (f64, f64), last: f64) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![-1.0; n - 1];
    let mut hi = vec![1.0; n - 1];
    lo[0] = first.0;
    hi[0] = first.1;
    lo[n - 2] = 0.0;
    hi[n - 2] = last;
    (lo, hi)
}

/// Builds a named capillary configuration in dimension `n`.
pub fn capillary_config(name: &str, n: usize) -> Result<CapillaryConfig> {
    if !(3..=crate::jet::MAX_DIM).contains(&n) {
        return Err(Error::UnsupportedDimension { n, supported: "3..=6" });
    }
    let free = AngleProfile::constant(FRAC_PI_2);
    let tilt_angle = |k: f64| (k / (1.0 + k * k).sqrt()).acos();
    let cfg = match name {
        "schwarzschild-plane" => {
            let (lo, hi) = boxes(n, (1.5, 4.5), 3.0);
            CapillaryConfig {
                name: "schwarzschild-plane",
                data: schwarzschild(n, 1.0)?,
                surface: Hypersurface::plane(n, 0.0, 0.0, lo, hi)?,
                gamma: free.clone(),
                dec: true,
            }
        }
        "schwarzschild-offset" => {
            let (lo, hi) = boxes(n, (-2.0, 2.0), 2.0);
            CapillaryConfig {
                name: "schwarzschild-offset",
                data: schwarzschild(n, 1.0)?,
                surface: Hypersurface::plane(n, 1.5, 0.0, lo, hi)?,
                gamma: free.clone(),
                dec: true,
            }
        }
        "shifted-free" => {
            let (lo, hi) = boxes(n, (-2.0, 2.0), 2.0);
            let mut center = vec![0.0; n];
            center[n - 1] = -0.5;
            CapillaryConfig {
                name: "shifted-free",
                data: schwarzschild_at(n, 1.0, center)?,
                surface: Hypersurface::plane(n, 1.5, 0.0, lo, hi)?,
                gamma: free.clone(),
                dec: false,
            }
        }
        "schwarzschild-tilted" => {
            let (lo, hi) = boxes(n, (-2.0, 2.0), 2.0);
            CapillaryConfig {
                name: "schwarzschild-tilted",
                data: schwarzschild(n, 1.0)?,
                surface: Hypersurface::plane(n, 2.0, 0.5, lo, hi)?,
                gamma: AngleProfile::constant(tilt_angle(0.5)),
                dec: true,
            }
        }
        "flat-tilted" => {
            let (lo, hi) = boxes(n, (-1.0, 1.0), 1.0);
            CapillaryConfig {
                name: "flat-tilted",
                data: flat(n)?,
                surface: Hypersurface::plane(n, 2.0, -0.6, lo, hi)?,
                gamma: AngleProfile::constant(tilt_angle(-0.6)),
                dec: true,
            }
        }
        "flat-cap" => {
            let (lo, hi) = boxes(n, (-1.0, 1.0), 1.0);
            CapillaryConfig {
                name: "flat-cap",
                data: flat(n)?,
                surface: Hypersurface::sphere_cap(n, vec![0.0; n], 3.0, lo, hi)?,
                gamma: AngleProfile::constant(FRAC_PI_2),
                dec: true,
            }
        }
        "flat-isotropic" => {
            let (lo, hi) = boxes(n, (-1.0, 1.0), 1.0);
            let p = AnalyticField::constant(DMatrix::identity(n, n) * 0.3);
            CapillaryConfig {
                name: "flat-isotropic",
                data: InitialDataSet::new("flat-isotropic", n, Arc::new(AnalyticField::euclidean(n)), Arc::new(p), 1.0)?,
                surface: Hypersurface::plane(n, 2.0, 0.0, lo, hi)?,
                gamma: free,
                dec: true,
            }
        }
        other => return Err(Error::UnknownFamily(other.to_string())),
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{check_interior_dec, check_tilted_boundary_dec, interior_samples, boundary_samples};
    use crate::geometry::scalar_curvature;

    #[test]
    fn unknown_family_rejected() {
        assert!(matches!(build_family(&FamilyParams::named("nope")), Err(Error::UnknownFamily(_))));
        assert!(matches!(capillary_config("nope", 3), Err(Error::UnknownFamily(_))));
    }

    #[test]
    fn catalog_is_total() {
        for info in family_catalog() {
            assert!(build_family(&FamilyParams::named(info.name)).is_ok(), "{}", info.name);
        }
        for name in CAPILLARY_CONFIGS {
            assert!(capillary_config(name, 3).is_ok(), "{name}");
        }
    }

    #[test]
    fn schwarzschild_scalar_flat() {
        for n in 3..=5 {
            let d = schwarzschild(n, 1.0).unwrap();
            for x in [vec![1.3; n], vec![0.5; n]] {
                let mut x = x;
                x[0] = 2.0;
                assert!(scalar_curvature(&d, &x).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn conformal_satisfies_dec() {
        for n in [3, 4] {
            let d = conformal(n, 0.5, 1.0, (n - 2) as f64).unwrap();
            let xs = interior_samples(n, 64, 20.0);
            assert!(check_interior_dec(&d, &xs, None).unwrap().passed());
            let bs = boundary_samples(n, 32, 20.0);
            for s in [1, -1] {
                assert!(check_tilted_boundary_dec(&d, 0.7, s, &bs, None).unwrap().passed());
            }
        }
        assert!(conformal(3, 0.5, 1.0, 1.5).is_err());
    }
}
