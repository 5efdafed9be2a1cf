//! Capillary marginally outer trapped surfaces: null expansion, contact
//! angle, the symmetrized stability functional and the boundary identities.
//!
//! Surfaces are graphs `x₀ = u(y)` over a box of `y = (x₁, …, x_{n−1})` whose
//! last side `y_{n−2} = 0` lies on `∂M = {x_{n−1} = 0}`. The unit normal `N`
//! has positive `dx₀` component and `A(V, W) = g(∇_V N, W)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constraints::{current_density_local, energy_density_local, AngleProfile};
use crate::dirac::ScalarFn;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryGeometry, InitialDataSet, LocalGeometry};
use crate::jet::Jet;
use crate::quadrature::gauss_legendre;

/// Tolerance for the frame relations between `X`, `N`, `ν` and `η`.
pub const FRAME_TOL: f64 = 1e-10;

/// A graph surface `x₀ = u(y)` over the box `[lo, hi]`, with `lo` of the last
/// parameter equal to zero.
#[derive(Clone)]
pub struct Hypersurface {
    n: usize,
    label: String,
    u: ScalarFn,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl fmt::Debug for Hypersurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hypersurface({}, {:?}..{:?})", self.label, self.lo, self.hi)
    }
}

impl Hypersurface {
    pub fn new(n: usize, label: impl Into<String>, u: ScalarFn, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if !(3..=crate::jet::MAX_DIM).contains(&n) {
            return Err(Error::UnsupportedDimension { n, supported: "3..=6" });
        }
        for v in [&lo, &hi] {
            if v.len() != n - 1 {
                return Err(Error::DimensionMismatch { expected: n - 1, got: v.len() });
            }
        }
        if lo[n - 2] != 0.0 {
            return Err(Error::InvalidParameter("the last parameter must start on the boundary (lo = 0)".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(Error::InvalidParameter("parameter box must have positive extent".into()));
        }
        Ok(Self { n, label: label.into(), u, lo, hi })
    }

    /// `x₀ = offset + slope·x_{n−1}`.
    pub fn plane(n: usize, offset: f64, slope: f64, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let last = n - 2;
        let u: ScalarFn = Arc::new(move |y: &[Jet]| y[last] * slope + offset);
        Self::new(n, format!("plane({offset},{slope})"), u, lo, hi)
    }

    /// Upper cap `x₀ = c₀ + √(ρ² − |y − c|²)` of a round sphere.
    pub fn sphere_cap(n: usize, center: Vec<f64>, radius: f64, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if center.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: center.len() });
        }
        let c = center.clone();
        let u: ScalarFn = Arc::new(move |y: &[Jet]| {
            let mut s = Jet::constant(radius * radius);
            for (a, ya) in y.iter().enumerate() {
                let d = *ya - c[a + 1];
                s = s - d * d;
            }
            s.sqrt() + c[0]
        });
        Self::new(n, format!("sphere-cap({center:?},{radius})"), u, lo, hi)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn embed(&self, y: &[f64]) -> Vec<f64> {
        let yj: Vec<Jet> = y.iter().map(|&v| Jet::constant(v)).collect();
        let mut x = vec![(self.u)(&yj).value()];
        x.extend_from_slice(y);
        x
    }
}

/// Geometry of `Σ` at one parameter point.
#[derive(Clone, Debug)]
pub struct SurfacePoint {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    /// Columns `F_a = ∂_a F`.
    pub tangents: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    /// Derivatives `∂_c h_ab`.
    pub metric_deriv: Vec<DMatrix<f64>>,
    pub normal: DVector<f64>,
    pub second_fundamental_form: DMatrix<f64>,
    pub mean_curvature: f64,
    /// `tr_Σ p`.
    pub trace_p: f64,
    /// `R_Σ` from the Gauss equation.
    pub scalar_curvature: f64,
    /// `|χ|²` with `χ = A + p|_Σ`.
    pub chi_norm_sq: f64,
    /// Parameter components of `W`, the tangential dual of `p(N, ·)`.
    pub w: DVector<f64>,
    pub mu: f64,
    /// `J(N)`.
    pub j_normal: f64,
    pub area_density: f64,
    pub local: LocalGeometry,
}

impl SurfacePoint {
    /// `θ⁺ = H + tr_Σ p`.
    pub fn null_expansion(&self) -> f64 {
        self.mean_curvature + self.trace_p
    }

    /// `Q = ½R_Σ − (μ + J(N)) − ½|χ|²`.
    pub fn potential(&self) -> f64 {
        0.5 * self.scalar_curvature - (self.mu + self.j_normal) - 0.5 * self.chi_norm_sq
    }

    /// `g(u, v)` for coordinate vectors.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.local.inner(u, v)
    }

    /// `p(u, v)` for coordinate vectors.
    pub fn p(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.local.p * v)[(0, 0)]
    }
}

pub fn surface_point(data: &InitialDataSet, surface: &Hypersurface, y: &[f64]) -> Result<SurfacePoint> {
    let n = data.n();
    if surface.n != n {
        return Err(Error::DimensionMismatch { expected: n, got: surface.n });
    }
    if y.len() != n - 1 {
        return Err(Error::DimensionMismatch { expected: n - 1, got: y.len() });
    }
    let k = n - 1;
    let uj = (surface.u)(&Jet::point(y));
    let mut x = vec![uj.v];
    x.extend_from_slice(y);
    let local = LocalGeometry::at(data, &x)?;
    let g = &local.g;

    let mut f = DMatrix::zeros(n, k);
    for a in 0..k {
        f[(0, a)] = uj.d[a];
        f[(a + 1, a)] = 1.0;
    }
    let metric = f.transpose() * g * &f;
    let metric_inv = metric
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateMetric { point: x.clone() })?
        .inverse();

    // ∂_c F_a has only a x₀ component, ∂_c∂_a u.
    let df: Vec<DMatrix<f64>> = (0..k)
        .map(|cc| {
            let mut m = DMatrix::zeros(n, k);
            for a in 0..k {
                m[(0, a)] = uj.h[cc][a];
            }
            m
        })
        .collect();
    let mut metric_deriv = Vec::with_capacity(k);
    for (cc, dfc) in df.iter().enumerate() {
        let mut dg = DMatrix::zeros(n, n);
        for lam in 0..n {
            dg += &local.dg[lam] * f[(lam, cc)];
        }
        metric_deriv.push(f.transpose() * dg * &f + dfc.transpose() * g * &f + f.transpose() * g * dfc);
    }

    let mut omega = DVector::zeros(n);
    omega[0] = 1.0;
    for a in 0..k {
        omega[a + 1] = -uj.d[a];
    }
    let len = (omega.transpose() * &local.ginv * &omega)[(0, 0)].sqrt();
    let normal_cov = &omega / len;
    let normal = &local.ginv * &normal_cov;

    let mut a_form = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let mut v = -normal_cov[0] * uj.h[a][b];
            for mu in 0..n {
                let mut acc = 0.0;
                for lam in 0..n {
                    for kap in 0..n {
                        acc += local.christoffel.get(mu, lam, kap) * f[(lam, a)] * f[(kap, b)];
                    }
                }
                v -= normal_cov[mu] * acc;
            }
            a_form[(a, b)] = v;
        }
    }
    let mean_curvature = metric_inv.component_mul(&a_form).sum();
    let a_up = &metric_inv * &a_form * &metric_inv;
    let a_norm_sq = a_up.component_mul(&a_form).sum();
    let p_sigma = f.transpose() * &local.p * &f;
    let trace_p = metric_inv.component_mul(&p_sigma).sum();
    let chi = &a_form + &p_sigma;
    let chi_norm_sq = (&metric_inv * &chi * &metric_inv).component_mul(&chi).sum();
    let ric_nn = (normal.transpose() * &local.ricci * &normal)[(0, 0)];
    let scalar_curvature = local.scalar_curvature - 2.0 * ric_nn + mean_curvature * mean_curvature - a_norm_sq;
    let p_nf = f.transpose() * (&local.p * &normal);
    let w = &metric_inv * p_nf;
    let mu = energy_density_local(&local);
    let j_normal = current_density_local(&local).dot(&normal);
    let area_density = metric.determinant().sqrt();
    Ok(SurfacePoint {
        y: y.to_vec(),
        x,
        tangents: f,
        metric,
        metric_inv,
        metric_deriv,
        normal,
        second_fundamental_form: a_form,
        mean_curvature,
        trace_p,
        scalar_curvature,
        chi_norm_sq,
        w,
        mu,
        j_normal,
        area_density,
        local,
    })
}

/// `θ⁺ = H + tr_Σ p` at a parameter point.
pub fn null_expansion(data: &InitialDataSet, surface: &Hypersurface, y: &[f64]) -> Result<f64> {
    Ok(surface_point(data, surface, y)?.null_expansion())
}

/// Geometry along the edge `∂Σ ⊂ ∂M`.
#[derive(Clone, Debug)]
pub struct EdgePoint {
    pub surface: SurfacePoint,
    pub boundary: BoundaryGeometry,
    /// Parameter components of the outward conormal `ν`.
    pub conormal_param: DVector<f64>,
    pub conormal: DVector<f64>,
    /// Outward normal `X` of `∂M`.
    pub boundary_normal: DVector<f64>,
    /// Unit normal of `∂Σ` in `∂M`.
    pub eta: DVector<f64>,
    /// `⟨X, N⟩` and `⟨X, ν⟩`.
    pub cos_gamma: f64,
    pub sin_gamma: f64,
    /// `H_∂Σ`, mean curvature of the edge in `Σ` along `ν`.
    pub edge_mean_curvature: f64,
    /// Length/area density of the edge in its parameters.
    pub edge_density: f64,
    pub frame_defect: f64,
}

impl EdgePoint {
    /// `A_∂M(v, v)` for a vector tangent to `∂M`.
    pub fn boundary_form(&self, v: &DVector<f64>) -> f64 {
        let s = &self.surface;
        let comps: Vec<f64> = self
            .boundary
            .tangent_frame
            .iter()
            .map(|e| s.inner(v, &DVector::from_column_slice(e)))
            .collect();
        let h = &self.boundary.second_fundamental_form;
        let mut acc = 0.0;
        for a in 0..comps.len() {
            for b in 0..comps.len() {
                acc += h[(a, b)] * comps[a] * comps[b];
            }
        }
        acc
    }
}

pub fn edge_point(data: &InitialDataSet, surface: &Hypersurface, y: &[f64]) -> Result<EdgePoint> {
    let n = data.n();
    let m = n - 2;
    if y.len() != n - 1 || y[m] != 0.0 {
        return Err(Error::NotOnBoundary { point: y.to_vec() });
    }
    let sp = surface_point(data, surface, y)?;
    let boundary = BoundaryGeometry::from_local(&sp.local)?;
    let hinv = &sp.metric_inv;
    let s = hinv[(m, m)].sqrt();
    let conormal_param = DVector::from_fn(n - 1, |a, _| -hinv[(a, m)] / s);
    let conormal = &sp.tangents * &conormal_param;
    let x_normal = DVector::from_column_slice(&boundary.normal);
    let cos_gamma = sp.inner(&x_normal, &sp.normal);
    let sin_gamma = sp.inner(&x_normal, &conormal);
    let w = &sp.normal - &x_normal * cos_gamma;
    let wl = sp.inner(&w, &w).sqrt();
    if wl <= 1e-14 {
        return Err(Error::DegenerateAngle { sin: wl, point: sp.x.clone() });
    }
    let eta = -w / wl;

    let d1 = &x_normal - (&sp.normal * cos_gamma + &conormal * sin_gamma);
    let d2 = &eta - (&conormal * cos_gamma - &sp.normal * sin_gamma);
    let frame_defect = sp
        .inner(&d1, &d1)
        .sqrt()
        .max(sp.inner(&d2, &d2).sqrt())
        .max((cos_gamma * cos_gamma + sin_gamma * sin_gamma - 1.0).abs());
    if frame_defect > FRAME_TOL {
        return Err(Error::FrameDefect { defect: frame_defect });
    }

    // H_∂Σ = div_Σ ν with ν extended as the unit conormal of the level sets of y_m.
    let mut div = 0.0;
    for c in 0..n - 1 {
        let dh = &sp.metric_deriv[c];
        let dhinv = -(hinv * dh * hinv);
        let dnu = -dhinv[(c, m)] / s + hinv[(c, m)] * dhinv[(m, m)] / (2.0 * s * s * s);
        let dlog = 0.5 * hinv.component_mul(dh).sum();
        div += dnu + conormal_param[c] * dlog;
    }
    let edge_density = sp.metric.view((0, 0), (m, m)).into_owned().determinant().sqrt();
    Ok(EdgePoint {
        surface: sp,
        boundary,
        conormal_param,
        conormal,
        boundary_normal: x_normal,
        eta,
        cos_gamma,
        sin_gamma,
        edge_mean_curvature: div,
        edge_density,
        frame_defect,
    })
}

/// Both sides of `tr_Σ p cosγ − sinγ p(N,ν) = cosγ tr_∂M p + sinγ p(η,X)`.
#[derive(Clone, Debug, Serialize)]
pub struct TraceIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Evaluates the trace identity from an orthonormal set of edge tangents and
/// the four unit vectors at an edge point. `tr_Σ p` is summed over the edge
/// tangents and `ν`; `tr_∂M p` is `tr_g p − p(X, X)`.
pub fn trace_identity(
    g: &DMatrix<f64>,
    p: &DMatrix<f64>,
    edge: &[DVector<f64>],
    normal: &DVector<f64>,
    conormal: &DVector<f64>,
    boundary_normal: &DVector<f64>,
    eta: &DVector<f64>,
    gamma: f64,
) -> Result<TraceIdentity> {
    let ip = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * g * v)[(0, 0)];
    let pf = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * p * v)[(0, 0)];
    let (c, s) = (gamma.cos(), gamma.sin());
    let d1 = boundary_normal - (normal * c + conormal * s);
    let d2 = eta - (conormal * c - normal * s);
    let defect = ip(&d1, &d1).sqrt().max(ip(&d2, &d2).sqrt());
    if defect > FRAME_TOL {
        return Err(Error::FrameDefect { defect });
    }
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateMetric { point: Vec::new() })?;
    let tr_sigma = edge.iter().map(|e| pf(e, e)).sum::<f64>() + pf(conormal, conormal);
    let tr_dm = ginv.component_mul(p).sum() - pf(boundary_normal, boundary_normal);
    let lhs = tr_sigma * c - s * pf(normal, conormal);
    let rhs = c * tr_dm + s * pf(eta, boundary_normal);
    Ok(TraceIdentity { lhs, rhs, residual: (lhs - rhs).abs() })
}

/// The trace identity at an edge point of a surface, with the measured angle.
pub fn boundary_trace_identity(data: &InitialDataSet, surface: &Hypersurface, y: &[f64]) -> Result<TraceIdentity> {
    let e = edge_point(data, surface, y)?;
    let sp = &e.surface;
    let m = data.n() - 2;
    let edge = orthonormal_edge(sp, m);
    let gamma = e.sin_gamma.atan2(e.cos_gamma);
    trace_identity(&sp.local.g, &sp.local.p, &edge, &sp.normal, &e.conormal, &e.boundary_normal, &e.eta, gamma)
}

fn orthonormal_edge(sp: &SurfacePoint, m: usize) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(m);
    for a in 0..m {
        let mut v = sp.tangents.column(a).into_owned();
        for e in &out {
            v -= e * sp.inner(&v, e);
        }
        let l = sp.inner(&v, &v).sqrt();
        out.push(v / l);
    }
    out
}

/// Maximum trace-identity residual over seeded random metrics, symmetric
/// tensors, angles `γ ∈ (0, π)` and orthonormal frames.
pub fn trace_identity_sweep(n: usize, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let mut g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.3..0.3));
        g = &g * g.transpose() + DMatrix::identity(n, n);
        let mut p = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        p = (&p + p.transpose()) * 0.5;
        let gamma = rng.random_range(0.05..std::f64::consts::PI - 0.05);
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
        while basis.len() < n {
            let mut v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            for e in &basis {
                v -= e * (e.transpose() * &g * &v)[(0, 0)];
            }
            let l = (v.transpose() * &g * &v)[(0, 0)].sqrt();
            if l > 1e-3 {
                basis.push(v / l);
            }
        }
        let x_n = basis[n - 1].clone();
        let eta = basis[n - 2].clone();
        let (c, s) = (gamma.cos(), gamma.sin());
        let normal = &x_n * c - &eta * s;
        let conormal = &x_n * s + &eta * c;
        let r = trace_identity(&g, &p, &basis[..n - 2], &normal, &conormal, &x_n, &eta, gamma)?;
        worst = worst.max(r.residual / (1.0 + p.amax()));
    }
    Ok(worst)
}

/// The boundary term `⟨Z, ν⟩` in three forms.
#[derive(Clone, Debug, Serialize)]
pub struct ZTerm {
    /// `H_∂Σ − (1/sinγ)(H_∂M + tr_Σ p cosγ − sinγ p(N,ν) − ∂_ηγ)`, valid on a MOTS.
    pub mots_form: f64,
    /// `H_∂Σ − (1/sinγ)(H_∂M − H cosγ − sinγ p(N,ν) − ∂_ηγ)`.
    pub general_form: f64,
    /// `p(N,ν) − A_∂M(η,η)/sinγ + cotγ A(ν,ν) + ∂_ηγ/sinγ`.
    pub direct: f64,
    pub null_expansion: f64,
    /// `⟨X, N⟩ − cos γ` for the prescribed angle.
    pub contact_defect: f64,
}

/// Evaluates `⟨Z, ν⟩` at an edge point using the measured contact angle and
/// the derivative of the prescribed angle profile along `η`.
pub fn boundary_z_term(data: &InitialDataSet, surface: &Hypersurface, gamma: &AngleProfile, y: &[f64]) -> Result<ZTerm> {
    let e = edge_point(data, surface, y)?;
    z_term_at(&e, gamma)
}

fn z_term_at(e: &EdgePoint, gamma: &AngleProfile) -> Result<ZTerm> {
    let sp = &e.surface;
    let (gv, dg) = gamma.eval(&sp.x);
    let (c, s) = (e.cos_gamma, e.sin_gamma);
    if s <= 1e-12 {
        return Err(Error::DegenerateAngle { sin: s, point: sp.x.clone() });
    }
    let d_eta: f64 = dg.iter().zip(e.eta.iter()).map(|(a, b)| a * b).sum();
    let p_nnu = sp.p(&sp.normal, &e.conormal);
    let h_dm = e.boundary.mean_curvature;
    let a_nunu = (e.conormal_param.transpose() * &sp.second_fundamental_form * &e.conormal_param)[(0, 0)];
    let direct = p_nnu - e.boundary_form(&e.eta) / s + c / s * a_nunu + d_eta / s;
    let general_form = e.edge_mean_curvature - (h_dm - sp.mean_curvature * c - s * p_nnu - d_eta) / s;
    let mots_form = e.edge_mean_curvature - (h_dm + sp.trace_p * c - s * p_nnu - d_eta) / s;
    Ok(ZTerm {
        mots_form,
        general_form,
        direct,
        null_expansion: sp.null_expansion(),
        contact_defect: c - gv.cos(),
    })
}

/// Tensor-product Gauss–Legendre nodes and weights on a box.
fn box_rule(lo: &[f64], hi: &[f64], order: usize) -> Vec<(Vec<f64>, f64)> {
    let g = gauss_legendre(order);
    let mut out = vec![(Vec::new(), 1.0)];
    for (a, b) in lo.iter().zip(hi) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut next = Vec::with_capacity(out.len() * order);
        for (pt, w) in &out {
            for (t, wt) in g.nodes.iter().zip(&g.weights) {
                let mut q = pt.clone();
                q.push(mid + half * t);
                next.push((q, w * wt * half));
            }
        }
        out = next;
    }
    out
}

/// A test function or weight on the parameter box.
pub type ParamFn = Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>;

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub surface: String,
    pub gamma: String,
    /// `max |θ⁺|` over the quadrature nodes.
    pub null_expansion: f64,
    /// `max |⟨X,N⟩ − cos γ|` over the edge nodes.
    pub contact_defect: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// `max |W|`.
    pub w_max: f64,
    /// `∫_∂Σ ψ²⟨Z,ν⟩` with `Z = W − ∇log φ`.
    pub boundary: f64,
    /// The same integral with `⟨Z,ν⟩` from the MOTS formula.
    pub boundary_formula: f64,
    pub gradient: f64,
    pub potential: f64,
    pub value: f64,
}

/// Precomputed quadrature data on a surface.
#[derive(Clone, Debug)]
pub struct StabilityData {
    interior: Vec<(SurfacePoint, f64)>,
    edge: Vec<(EdgePoint, f64, ZTerm)>,
    surface: String,
    gamma: String,
}

impl StabilityData {
    pub fn new(
        data: &InitialDataSet,
        surface: &Hypersurface,
        gamma: &AngleProfile,
        order: usize,
    ) -> Result<Self> {
        let n = data.n();
        let interior = box_rule(&surface.lo, &surface.hi, order)
            .into_iter()
            .map(|(y, w)| {
                let sp = surface_point(data, surface, &y)?;
                let wt = w * sp.area_density;
                Ok((sp, wt))
            })
            .collect::<Result<Vec<_>>>()?;
        let edge = box_rule(&surface.lo[..n - 2], &surface.hi[..n - 2], order)
            .into_iter()
            .map(|(mut y, w)| {
                y.push(0.0);
                let e = edge_point(data, surface, &y)?;
                let z = z_term_at(&e, gamma)?;
                let wt = w * e.edge_density;
                Ok((e, wt, z))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { interior, edge, surface: surface.label().to_string(), gamma: gamma.label().to_string() })
    }

    /// Evaluates the functional for `ψ` with weight `φ > 0`.
    pub fn evaluate(&self, psi: &ParamFn, phi: &ParamFn) -> Result<StabilityReport> {
        let (mut gradient, mut potential, mut boundary, mut boundary_formula) = (0.0, 0.0, 0.0, 0.0);
        let (mut null_exp, mut contact, mut wmax) = (0.0f64, 0.0f64, 0.0f64);
        let (mut q_min, mut q_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for (sp, w) in &self.interior {
            let pj = psi(&Jet::point(&sp.y));
            let k = sp.y.len();
            let dpsi = DVector::from_fn(k, |a, _| pj.d[a]);
            gradient += w * (dpsi.transpose() * &sp.metric_inv * &dpsi)[(0, 0)];
            let q = sp.potential();
            potential += w * q * pj.v * pj.v;
            q_min = q_min.min(q);
            q_max = q_max.max(q);
            null_exp = null_exp.max(sp.null_expansion().abs());
            wmax = wmax.max((sp.w.transpose() * &sp.metric * &sp.w)[(0, 0)].sqrt());
        }
        for (e, w, z) in &self.edge {
            let y = &e.surface.y;
            let pj = psi(&Jet::point(y));
            let fj = phi(&Jet::point(y));
            if !(fj.v > 0.0) {
                return Err(Error::NonPositiveWeight { value: fj.v, point: e.surface.x.clone() });
            }
            let nu_log: f64 = (0..y.len()).map(|a| e.conormal_param[a] * fj.d[a]).sum::<f64>() / fj.v;
            let zn = e.surface.p(&e.surface.normal, &e.conormal) - nu_log;
            boundary += w * pj.v * pj.v * zn;
            boundary_formula += w * pj.v * pj.v * z.mots_form;
            contact = contact.max(z.contact_defect.abs());
        }
        for (sp, _) in &self.interior {
            let v = phi(&Jet::point(&sp.y)).v;
            if !(v > 0.0) {
                return Err(Error::NonPositiveWeight { value: v, point: sp.x.clone() });
            }
        }
        Ok(StabilityReport {
            surface: self.surface.clone(),
            gamma: self.gamma.clone(),
            null_expansion: null_exp,
            contact_defect: contact,
            q_min,
            q_max,
            w_max: wmax,
            boundary,
            boundary_formula,
            gradient,
            potential,
            value: boundary + gradient + potential,
        })
    }

    /// Smallest Ritz value of the functional over `span(basis)` relative to
    /// the `L²(Σ)` inner product.
    pub fn ritz_min(&self, basis: &[ParamFn], phi: &ParamFn) -> Result<f64> {
        let k = basis.len();
        if k == 0 {
            return Err(Error::EmptySamples);
        }
        let mut form = DMatrix::<f64>::zeros(k, k);
        let mut mass = DMatrix::<f64>::zeros(k, k);
        for (sp, w) in &self.interior {
            let jets: Vec<Jet> = basis.iter().map(|f| f(&Jet::point(&sp.y))).collect();
            let m = sp.y.len();
            let q = sp.potential();
            for i in 0..k {
                for j in 0..k {
                    let mut g = 0.0;
                    for a in 0..m {
                        for b in 0..m {
                            g += sp.metric_inv[(a, b)] * jets[i].d[a] * jets[j].d[b];
                        }
                    }
                    form[(i, j)] += w * (g + q * jets[i].v * jets[j].v);
                    mass[(i, j)] += w * jets[i].v * jets[j].v;
                }
            }
        }
        for (e, w, _) in &self.edge {
            let y = &e.surface.y;
            let fj = phi(&Jet::point(y));
            let nu_log: f64 = (0..y.len()).map(|a| e.conormal_param[a] * fj.d[a]).sum::<f64>() / fj.v;
            let zn = e.surface.p(&e.surface.normal, &e.conormal) - nu_log;
            let vals: Vec<f64> = basis.iter().map(|f| f(&Jet::point(y)).v).collect();
            for i in 0..k {
                for j in 0..k {
                    form[(i, j)] += w * zn * vals[i] * vals[j];
                }
            }
        }
        let chol = mass
            .cholesky()
            .ok_or_else(|| Error::Internal("test basis is linearly dependent".into()))?;
        let linv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Internal("test basis is linearly dependent".into()))?;
        let reduced: DMatrix<f64> = &linv * form * linv.transpose();
        let sym = (&reduced + reduced.transpose()) * 0.5;
        Ok(SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

pub fn stability_functional(
    data: &InitialDataSet,
    surface: &Hypersurface,
    gamma: &AngleProfile,
    psi: &ParamFn,
    phi: &ParamFn,
    order: usize,
) -> Result<StabilityReport> {
    StabilityData::new(data, surface, gamma, order)?.evaluate(psi, phi)
}

/// `count` test functions that vanish on every side of the box except the
/// boundary edge: `sin(aπs)·cos((2b−1)πt/2)` times `sin(πs_k)` in any
/// intermediate parameters.
pub fn test_basis(lo: &[f64], hi: &[f64], count: usize) -> Vec<ParamFn> {
    let k = lo.len();
    let per = count.div_ceil(2).max(1);
    let mut out: Vec<ParamFn> = Vec::with_capacity(count);
    'outer: for a in 1..=per {
        for b in 1..=2 {
            if out.len() == count {
                break 'outer;
            }
            let (lo, hi) = (lo.to_vec(), hi.to_vec());
            out.push(Arc::new(move |y: &[Jet]| {
                let pi = std::f64::consts::PI;
                let s0 = (y[0] - lo[0]) * (1.0 / (hi[0] - lo[0]));
                let t = (y[k - 1] - lo[k - 1]) * (1.0 / (hi[k - 1] - lo[k - 1]));
                let mut v = (s0 * (a as f64 * pi)).sin() * (t * ((2 * b - 1) as f64 * pi / 2.0)).cos();
                for i in 1..k - 1 {
                    let s = (y[i] - lo[i]) * (1.0 / (hi[i] - lo[i]));
                    v = v * (s * pi).sin();
                }
                v
            }));
        }
    }
    out
}

/// Values of the functional on every test function plus the Ritz diagnostic.
#[derive(Clone, Debug, Serialize)]
pub struct StabilitySweep {
    pub reports: Vec<StabilityReport>,
    pub min_value: f64,
    pub ritz_min: f64,
}

pub fn stability_sweep(
    data: &InitialDataSet,
    surface: &Hypersurface,
    gamma: &AngleProfile,
    phi: &ParamFn,
    basis_size: usize,
    order: usize,
) -> Result<StabilitySweep> {
    let sd = StabilityData::new(data, surface, gamma, order)?;
    let basis = test_basis(&surface.lo, &surface.hi, basis_size);
    let reports = basis.iter().map(|psi| sd.evaluate(psi, phi)).collect::<Result<Vec<_>>>()?;
    let min_value = reports.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    let ritz_min = sd.ritz_min(&basis, phi)?;
    Ok(StabilitySweep { reports, min_value, ritz_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use crate::jet::norm_sq;

    fn flat(n: usize) -> InitialDataSet {
        InitialDataSet::new("flat", n, Arc::new(AnalyticField::euclidean(n)), Arc::new(AnalyticField::zero(n)), 1.0)
            .unwrap()
    }

    fn schwarzschild(m: f64) -> InitialDataSet {
        let g = AnalyticField::conformal(3, "schwarzschild", move |x: &[Jet]| {
            (norm_sq(x).sqrt().recip() * (0.5 * m) + 1.0).powi(4)
        });
        InitialDataSet::new("schwarzschild", 3, Arc::new(g), Arc::new(AnalyticField::zero(3)), 1.0).unwrap()
    }

    fn one() -> ParamFn {
        Arc::new(|_: &[Jet]| Jet::constant(1.0))
    }

    #[test]
    fn flat_plane_has_zero_expansion() {
        let s = Hypersurface::plane(3, 2.0, 0.0, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(null_expansion(&flat(3), &s, &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn isotropic_p_gives_trace() {
        let c = 0.7;
        for n in [3, 4] {
            let data = InitialDataSet::new(
                "p",
                n,
                Arc::new(AnalyticField::euclidean(n)),
                Arc::new(AnalyticField::constant(DMatrix::identity(n, n) * c)),
                1.0,
            )
            .unwrap();
            let s = Hypersurface::plane(n, 2.0, 0.0, vec![0.0; n - 1], vec![1.0; n - 1]).unwrap();
            let th = null_expansion(&data, &s, &vec![0.5; n - 1]).unwrap();
            assert!((th - (n as f64 - 1.0) * c).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_cap_mean_curvature() {
        let rho = 3.0;
        for n in [3, 4] {
            let s = Hypersurface::sphere_cap(n, vec![0.0; n], rho, vec![0.0; n - 1], vec![1.0; n - 1]).unwrap();
            let sp = surface_point(&flat(n), &s, &vec![0.4; n - 1]).unwrap();
            assert!((sp.mean_curvature - (n as f64 - 1.0) / rho).abs() < 1e-13);
            // round sphere: R_Σ = (n−1)(n−2)/ρ²
            assert!((sp.scalar_curvature - (n as f64 - 1.0) * (n as f64 - 2.0) / (rho * rho)).abs() < 1e-13);
        }
    }

    #[test]
    fn tilted_plane_contact_angle() {
        let k = 0.6;
        let s = Hypersurface::plane(3, 2.0, k, vec![-1.0, 0.0], vec![1.0, 1.0]).unwrap();
        let e = edge_point(&flat(3), &s, &[0.3, 0.0]).unwrap();
        assert!((e.cos_gamma - k / (1.0 + k * k).sqrt()).abs() < 1e-14);
        assert!(e.frame_defect < 1e-14);
        let z = boundary_z_term(&flat(3), &s, &AngleProfile::constant(e.sin_gamma.atan2(e.cos_gamma)), &[0.3, 0.0])
            .unwrap();
        assert!(z.direct.abs() < 1e-14 && z.general_form.abs() < 1e-14 && z.contact_defect.abs() < 1e-14);
    }

    #[test]
    fn z_forms_agree_on_curved_data() {
        let data = schwarzschild(1.0);
        for (k, y0) in [(0.0, 0.5), (0.4, -0.3), (-0.7, 0.9)] {
            let s = Hypersurface::plane(3, 1.7, k, vec![-2.0, 0.0], vec![2.0, 2.0]).unwrap();
            let z = boundary_z_term(&data, &s, &AngleProfile::constant(1.0), &[y0, 0.0]).unwrap();
            assert!((z.direct - z.general_form).abs() < 1e-10, "{z:?}");
        }
        let cap = Hypersurface::sphere_cap(3, vec![0.5, 0.2, -0.4], 2.5, vec![-1.0, 0.0], vec![1.0, 1.0]).unwrap();
        let z = boundary_z_term(&data, &cap, &AngleProfile::linear(1.2, vec![0.1, 0.2, 0.0]), &[0.3, 0.0]).unwrap();
        assert!((z.direct - z.general_form).abs() < 1e-10, "{z:?}");
    }

    #[test]
    fn trace_identity_random_sweep() {
        for n in 3..=5 {
            assert!(trace_identity_sweep(n, 200, n as u64).unwrap() < 1e-12);
        }
    }

    #[test]
    fn trace_identity_on_surface() {
        let data = schwarzschild(1.0);
        let s = Hypersurface::plane(3, 1.7, 0.4, vec![-2.0, 0.0], vec![2.0, 2.0]).unwrap();
        assert!(boundary_trace_identity(&data, &s, &[0.2, 0.0]).unwrap().residual < 1e-12);
    }

    #[test]
    fn flat_functional_pieces() {
        let s = Hypersurface::plane(3, 2.0, 0.0, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let g = AngleProfile::constant(std::f64::consts::FRAC_PI_2);
        let r = stability_functional(&flat(3), &s, &g, &one(), &one(), 6).unwrap();
        assert_eq!(r.value, 0.0);
        let psi: ParamFn = Arc::new(|y: &[Jet]| y[0] * 2.0);
        let r = stability_functional(&flat(3), &s, &g, &psi, &one(), 6).unwrap();
        assert!((r.gradient - 4.0).abs() < 1e-12 && r.potential == 0.0 && r.boundary == 0.0);
        assert_eq!(r.value, r.boundary + r.gradient + r.potential);
    }

    #[test]
    fn non_positive_weight_rejected() {
        let s = Hypersurface::plane(3, 2.0, 0.0, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let phi: ParamFn = Arc::new(|y: &[Jet]| y[0] - 0.5);
        let r = stability_functional(&flat(3), &s, &AngleProfile::constant(1.5), &one(), &phi, 4);
        assert!(matches!(r, Err(Error::NonPositiveWeight { .. })));
    }

    #[test]
    fn basis_vanishes_on_artificial_sides() {
        let (lo, hi) = (vec![1.5, 0.0], vec![4.5, 3.0]);
        let basis = test_basis(&lo, &hi, 10);
        assert_eq!(basis.len(), 10);
        for f in &basis {
            for y in [[1.5, 1.0], [4.5, 2.0], [2.0, 3.0]] {
                assert!(f(&Jet::point(&y)).v.abs() < 1e-14);
            }
        }
    }
}
