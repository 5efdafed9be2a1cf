//! Spinor fields on grid patches, the hypersurface connection
//! `∇̃ᵢ = ∇ᵢ − ½ pᵢⱼ eʲ·e⁰·`, the Dirac–Witten operator and the identities
//! built from them.
//!
//! Spinor components are taken in the frame `E_a` obtained from the Cholesky
//! frame of [`crate::geometry`] by flipping its last vector. On `{xₙ = 0}`
//! that vector is exactly the outward unit normal, so the generator `γⁿ` of
//! the representation acts as Clifford multiplication by the outward normal.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::charges::charge_report;
use crate::clifford::{choose_phi0, inner, max_abs, CMatrix, ChiralityOp, Spinor, SpinorRep};
use crate::constraints::{current_density_local, energy_density_local};
use crate::error::{Error, Result};
use crate::extrapolate::{observed_order, power_fit, OrderFit, PowerFit};
use crate::geometry::{BoundaryGeometry, InitialDataSet, LocalGeometry};
use crate::grid::{simpson_weights, GridPatch};
use crate::jet::Jet;
use crate::quadrature::FluxRules;

/// Sign applied to the last Cholesky frame vector.
pub const NORMAL_SIGN: f64 = -1.0;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub type ScalarFn = Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>;

/// A spinor field `Σ_k f_k(x) v_k` with smooth scalar coefficients, so that
/// values and first derivatives are available exactly.
#[derive(Clone)]
pub struct AnalyticSpinor {
    n: usize,
    dim: usize,
    terms: Vec<(ScalarFn, Spinor)>,
}

impl fmt::Debug for AnalyticSpinor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnalyticSpinor(n = {}, dim = {}, {} terms)", self.n, self.dim, self.terms.len())
    }
}

impl AnalyticSpinor {
    pub fn new(n: usize, dim: usize) -> Self {
        Self { n, dim, terms: Vec::new() }
    }

    pub fn constant(n: usize, v: Spinor) -> Self {
        let dim = v.len();
        Self::new(n, dim).term(Arc::new(|_| Jet::constant(1.0)), v)
    }

    pub fn term(mut self, f: ScalarFn, v: Spinor) -> Self {
        assert_eq!(v.len(), self.dim, "spinor coefficient has the wrong length");
        self.terms.push((f, v));
        self
    }

    /// A smooth nonpolynomial test field with seeded random coefficients.
    pub fn test_field(n: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeff = || {
            Spinor::from_fn(dim, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let last = n - 1;
        Self::new(n, dim)
            .term(Arc::new(|_| Jet::constant(1.0)), coeff())
            .term(Arc::new(|x: &[Jet]| (x[0] * 0.7 + x[1] * 0.4).sin()), coeff())
            .term(Arc::new(move |x: &[Jet]| (x[last] * -0.3).exp() * (x[1] * 0.5).cos()), coeff())
            .term(Arc::new(move |x: &[Jet]| x[0] * x[last] * 0.1), coeff())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Applies a constant matrix to every coefficient.
    pub fn transformed(&self, m: &CMatrix) -> Self {
        Self {
            n: self.n,
            dim: self.dim,
            terms: self.terms.iter().map(|(f, v)| (f.clone(), m * v)).collect(),
        }
    }

    pub fn value(&self, x: &[f64]) -> Spinor {
        let xj: Vec<Jet> = x.iter().map(|&v| Jet::constant(v)).collect();
        let mut out = Spinor::zeros(self.dim);
        for (f, v) in &self.terms {
            out += v * c(f(&xj).value());
        }
        out
    }

    /// Value and coordinate derivatives `∂ᵢφ`.
    pub fn gradient(&self, x: &[f64]) -> (Spinor, Vec<Spinor>) {
        let xj = Jet::point(x);
        let mut val = Spinor::zeros(self.dim);
        let mut grad = vec![Spinor::zeros(self.dim); self.n];
        for (f, v) in &self.terms {
            let j = f(&xj);
            val += v * c(j.v);
            for (i, g) in grad.iter_mut().enumerate() {
                *g += v * c(j.d[i]);
            }
        }
        (val, grad)
    }
}

/// Clifford data of the spinor frame at one point.
#[derive(Clone, Debug)]
pub struct SpinFrame {
    /// Frame vectors `E_a` as columns.
    pub frame: DMatrix<f64>,
    /// `c(dxᵏ) = Σ_b dxᵏ(E_b) γᵇ`.
    pub clifford: Vec<CMatrix>,
    /// `¼ Σ ω_{iab} γᵃγᵇ` for each coordinate direction `i`.
    pub connection: Vec<CMatrix>,
    /// `pᵢₖ c(dxᵏ) γ⁰`.
    pub p_gamma: Vec<CMatrix>,
    pub trace_p: f64,
    pub local: LocalGeometry,
}

impl SpinFrame {
    pub fn new(rep: &SpinorRep, local: LocalGeometry) -> Result<Self> {
        let n = local.n();
        if rep.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rep.n() });
        }
        let sigma = |a: usize| if a + 1 == n { NORMAL_SIGN } else { 1.0 };
        let mut frame = local.frame.frame.clone();
        for mu in 0..n {
            frame[(mu, n - 1)] *= NORMAL_SIGN;
        }
        let dim = rep.dim();
        let clifford: Vec<CMatrix> = (0..n)
            .map(|k| {
                let mut m = CMatrix::zeros(dim, dim);
                for b in 0..n {
                    m += rep.gamma(b + 1) * c(frame[(k, b)]);
                }
                m
            })
            .collect();
        let pairs: Vec<Vec<CMatrix>> =
            (0..n).map(|a| (0..n).map(|b| rep.product(&[a + 1, b + 1])).collect()).collect();
        let connection = (0..n)
            .map(|i| {
                let mut m = CMatrix::zeros(dim, dim);
                for a in 0..n {
                    for b in 0..n {
                        let w = sigma(a) * sigma(b) * local.frame.spin_coeffs.get(i, a, b);
                        if w != 0.0 {
                            m += &pairs[a][b] * c(0.25 * w);
                        }
                    }
                }
                m
            })
            .collect();
        let p_gamma = (0..n)
            .map(|j| {
                let mut m = CMatrix::zeros(dim, dim);
                for k in 0..n {
                    if local.p[(j, k)] != 0.0 {
                        m += &clifford[k] * c(local.p[(j, k)]);
                    }
                }
                m * rep.gamma(0)
            })
            .collect();
        let trace_p = local.trace_p();
        Ok(Self { frame, clifford, connection, p_gamma, trace_p, local })
    }

    /// `∇ᵢφ` from the value and coordinate derivatives.
    pub fn covariant(&self, phi: &Spinor, dphi: &[Spinor]) -> Vec<Spinor> {
        dphi.iter().zip(&self.connection).map(|(d, w)| d + w * phi).collect()
    }

    /// `∇̃ᵢφ = ∇ᵢφ − ½ pᵢⱼ eʲ·e⁰·φ`.
    pub fn hypersurface(&self, phi: &Spinor, dphi: &[Spinor]) -> Vec<Spinor> {
        self.covariant(phi, dphi)
            .into_iter()
            .zip(&self.p_gamma)
            .map(|(v, pg)| v - pg * phi * c(0.5))
            .collect()
    }

    /// `Σᵢ c(dxⁱ) vᵢ`.
    pub fn contract(&self, v: &[Spinor]) -> Spinor {
        let mut out = Spinor::zeros(v[0].len());
        for (ci, vi) in self.clifford.iter().zip(v) {
            out += ci * vi;
        }
        out
    }
}

/// Spin frames at every node of a patch.
#[derive(Clone, Debug)]
pub struct PatchGeometry {
    pub patch: GridPatch,
    pub frames: Vec<SpinFrame>,
}

impl PatchGeometry {
    pub fn new(data: &InitialDataSet, rep: &SpinorRep, patch: GridPatch) -> Result<Self> {
        if patch.dim() != data.n() {
            return Err(Error::DimensionMismatch { expected: data.n(), got: patch.dim() });
        }
        let frames = (0..patch.len())
            .into_par_iter()
            .map(|k| SpinFrame::new(rep, LocalGeometry::at(data, &patch.point(&patch.unlinear(k)))?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { patch, frames })
    }

    pub fn frame(&self, idx: &[usize]) -> &SpinFrame {
        &self.frames[self.patch.linear(idx)]
    }
}

/// Spinor values on the nodes of a grid patch.
#[derive(Clone, Debug)]
pub struct SpinorField {
    pub patch: GridPatch,
    pub dim: usize,
    pub values: Vec<Spinor>,
}

impl SpinorField {
    pub fn from_values(patch: GridPatch, values: Vec<Spinor>) -> Result<Self> {
        if values.len() != patch.len() {
            return Err(Error::DimensionMismatch { expected: patch.len(), got: values.len() });
        }
        let dim = values.first().map(|v| v.len()).ok_or(Error::EmptySamples)?;
        if values.iter().any(|v| v.len() != dim || v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(Error::InvalidParameter("spinor values must be finite and of equal length".into()));
        }
        Ok(Self { patch, dim, values })
    }

    pub fn sample(patch: GridPatch, f: &AnalyticSpinor) -> Result<Self> {
        let values = (0..patch.len())
            .into_par_iter()
            .map(|k| f.value(&patch.point(&patch.unlinear(k))))
            .collect();
        Self::from_values(patch, values)
    }

    pub fn at(&self, idx: &[usize]) -> &Spinor {
        &self.values[self.patch.linear(idx)]
    }

    /// Second-order finite-difference `∂ᵢφ`, one-sided on faces.
    pub fn partial(&self, idx: &[usize], i: usize) -> Result<Spinor> {
        let mut out = Spinor::zeros(self.dim);
        for (off, w) in self.patch.first_stencil(i, idx[i]) {
            let node = self.patch.offset(idx, i, off)?;
            out += self.at(&node) * c(w);
        }
        Ok(out)
    }

    pub fn gradient(&self, idx: &[usize]) -> Result<Vec<Spinor>> {
        (0..self.patch.dim()).map(|i| self.partial(idx, i)).collect()
    }
}

/// `∇ᵢφ` at a node.
pub fn spin_covariant_derivative(geo: &PatchGeometry, field: &SpinorField, idx: &[usize], i: usize) -> Result<Spinor> {
    let f = geo.frame(idx);
    Ok(f.covariant(field.at(idx), &field.gradient(idx)?).swap_remove(i))
}

/// `∇̃ᵢφ` at a node.
pub fn hypersurface_connection(geo: &PatchGeometry, field: &SpinorField, idx: &[usize], i: usize) -> Result<Spinor> {
    let f = geo.frame(idx);
    Ok(f.hypersurface(field.at(idx), &field.gradient(idx)?).swap_remove(i))
}

/// Both forms of the Dirac–Witten operator at one point.
#[derive(Clone, Debug)]
pub struct DiracWitten {
    /// `eⁱ·∇̃ᵢφ`.
    pub frame_form: Spinor,
    /// `Dφ + ½ tr_g p e⁰·φ`.
    pub trace_form: Spinor,
}

impl DiracWitten {
    pub fn defect(&self) -> f64 {
        (&self.frame_form - &self.trace_form).norm()
    }
}

pub fn dirac_witten_local(rep: &SpinorRep, frame: &SpinFrame, phi: &Spinor, dphi: &[Spinor]) -> DiracWitten {
    let frame_form = frame.contract(&frame.hypersurface(phi, dphi));
    let trace_form = frame.contract(&frame.covariant(phi, dphi)) + rep.gamma(0) * phi * c(0.5 * frame.trace_p);
    DiracWitten { frame_form, trace_form }
}

pub fn dirac_witten(rep: &SpinorRep, geo: &PatchGeometry, field: &SpinorField, idx: &[usize]) -> Result<DiracWitten> {
    Ok(dirac_witten_local(rep, geo.frame(idx), field.at(idx), &field.gradient(idx)?))
}

/// `∇̃ᵢφ` for every node and direction, as one field per direction.
fn connection_fields(geo: &PatchGeometry, field: &SpinorField) -> Result<Vec<SpinorField>> {
    let n = field.patch.dim();
    let per_node = (0..field.patch.len())
        .into_par_iter()
        .map(|k| {
            let idx = field.patch.unlinear(k);
            let f = &geo.frames[k];
            Ok(f.hypersurface(&field.values[k], &field.gradient(&idx)?))
        })
        .collect::<Result<Vec<_>>>()?;
    (0..n)
        .map(|i| SpinorField::from_values(field.patch.clone(), per_node.iter().map(|v| v[i].clone()).collect()))
        .collect()
}

fn dirac_field(geo: &PatchGeometry, psi: &[SpinorField]) -> Result<SpinorField> {
    let n = psi.len();
    let values = (0..geo.patch.len())
        .map(|k| geo.frames[k].contract(&(0..n).map(|i| psi[i].values[k].clone()).collect::<Vec<_>>()))
        .collect();
    SpinorField::from_values(geo.patch.clone(), values)
}

fn check_interior(patch: &GridPatch, idx: &[usize], depth: usize) -> Result<()> {
    if idx.iter().zip(&patch.shape).any(|(&i, &s)| i < depth || i + depth >= s) {
        return Err(Error::StencilOutOfPatch { node: idx.iter().map(|&i| i as isize).collect() });
    }
    Ok(())
}

/// `½(μ − J·e⁰·)φ`.
fn constraint_term(rep: &SpinorRep, frame: &SpinFrame, phi: &Spinor) -> Spinor {
    let mu = energy_density_local(&frame.local);
    let j = current_density_local(&frame.local);
    let mut cj = CMatrix::zeros(rep.dim(), rep.dim());
    for (k, jk) in j.iter().enumerate() {
        cj += &frame.clifford[k] * c(*jk);
    }
    (phi * c(mu) - cj * rep.gamma(0) * phi) * c(0.5)
}

/// `D̃²φ − ∇̃*∇̃φ − ½(μ − J·e⁰·)φ` at a node at least two nodes inside the
/// patch, with `∇̃*∇̃φ = −gⁱʲ(∂ᵢψⱼ + ¼ωᵢψⱼ − Γᵏᵢⱼψₖ) − ½gⁱʲ pⱼₖc(dxᵏ)e⁰ψᵢ`
/// and `ψ = ∇̃φ`.
pub fn sl_pointwise_residual(
    rep: &SpinorRep,
    geo: &PatchGeometry,
    field: &SpinorField,
    idx: &[usize],
) -> Result<Spinor> {
    check_interior(&field.patch, idx, 2)?;
    let n = field.patch.dim();
    let psi = connection_fields(geo, field)?;
    let chi = dirac_field(geo, &psi)?;
    let f = geo.frame(idx);
    let dirac_sq = dirac_witten_local(rep, f, chi.at(idx), &chi.gradient(idx)?).frame_form;

    let ginv = &f.local.ginv;
    let gam = &f.local.christoffel;
    let psi_here: Vec<Spinor> = psi.iter().map(|p| p.at(idx).clone()).collect();
    let mut rough = Spinor::zeros(rep.dim());
    for i in 0..n {
        for j in 0..n {
            let gij = ginv[(i, j)];
            if gij == 0.0 {
                continue;
            }
            let mut cov = psi[j].partial(idx, i)? + &f.connection[i] * &psi_here[j];
            for (k, pk) in psi_here.iter().enumerate() {
                cov -= pk * c(gam.get(k, i, j));
            }
            rough -= cov * c(gij);
            rough -= &f.p_gamma[j] * &psi_here[i] * c(0.5 * gij);
        }
    }
    Ok(dirac_sq - rough - constraint_term(rep, f, field.at(idx)))
}

/// Terms of the integrated identity over the whole patch box.
#[derive(Clone, Debug, Serialize)]
pub struct IntegralTerms {
    pub dirac_sq: f64,
    pub connection_sq: f64,
    pub flux: f64,
    pub constraint: f64,
    /// `∫|D̃φ|² − ∫|∇̃φ|² + ∮⟨eⁱ·D̃φ + ∇̃ⁱφ, φ⟩νᵢ − ½∫⟨(μ − J·e⁰·)φ, φ⟩`.
    pub defect: f64,
}

/// Evaluates the integrated identity on the box spanned by the patch with
/// composite Simpson quadrature (the patch must have an odd number of nodes
/// per axis for fourth-order weights).
pub fn integral_sl_check(rep: &SpinorRep, geo: &PatchGeometry, field: &SpinorField) -> Result<IntegralTerms> {
    let patch = &field.patch;
    let n = patch.dim();
    let psi = connection_fields(geo, field)?;
    let chi = dirac_field(geo, &psi)?;
    let w1: Vec<Vec<f64>> = (0..n).map(|a| simpson_weights(patch.shape[a], patch.h)).collect();

    let rows: Vec<[f64; 4]> = (0..patch.len())
        .into_par_iter()
        .map(|k| {
            let idx = patch.unlinear(k);
            let f = &geo.frames[k];
            let sq = f.local.sqrt_det();
            let phi = &field.values[k];
            let vol: f64 = (0..n).map(|a| w1[a][idx[a]]).product::<f64>() * sq;
            let d2 = chi.values[k].norm_squared();
            let mut c2 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    c2 += f.local.ginv[(i, j)] * inner(&psi[i].values[k], &psi[j].values[k]).re;
                }
            }
            let pot = inner(&constraint_term(rep, f, phi), phi).re;
            let mut flux = 0.0;
            for a in 0..n {
                let side = if idx[a] == 0 {
                    -1.0
                } else if idx[a] + 1 == patch.shape[a] {
                    1.0
                } else {
                    continue;
                };
                let area: f64 = (0..n).filter(|&b| b != a).map(|b| w1[b][idx[b]]).product();
                let mut y = inner(&(&f.clifford[a] * &chi.values[k]), phi).re;
                for j in 0..n {
                    y += f.local.ginv[(a, j)] * inner(&psi[j].values[k], phi).re;
                }
                flux += side * y * area * sq;
            }
            [vol * d2, vol * c2, flux, vol * pot]
        })
        .collect();
    let mut t = [0.0; 4];
    for r in &rows {
        for (acc, v) in t.iter_mut().zip(r) {
            *acc += v;
        }
    }
    Ok(IntegralTerms {
        dirac_sq: t[0],
        connection_sq: t[1],
        flux: t[2],
        constraint: t[3],
        defect: t[0] - t[1] + t[2] - t[3],
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SLReport {
    pub family: String,
    pub center: Vec<f64>,
    pub spacings: Vec<f64>,
    /// Norm of the pointwise residual at `center`.
    pub pointwise: Vec<f64>,
    pub integral: Vec<IntegralTerms>,
    pub pointwise_order: Option<OrderFit>,
    pub integral_order: Option<OrderFit>,
    /// Largest mismatch of the two Dirac–Witten forms on the coarsest patch.
    pub dirac_form_defect: f64,
}

fn order_or_none(h: &[f64], e: &[f64]) -> Option<OrderFit> {
    if h.len() < 2 || e.iter().any(|v| v.abs() < 1e-300) {
        return None;
    }
    observed_order(h, e).ok()
}

/// Runs the pointwise and integrated identity along a ladder of spacings. The
/// integration box is the cube of half-width `half_width` around `center`.
pub fn sl_report(
    data: &InitialDataSet,
    rep: &SpinorRep,
    f: &AnalyticSpinor,
    center: &[f64],
    spacings: &[f64],
    half_width: f64,
) -> Result<SLReport> {
    let n = data.n();
    let mut pointwise = Vec::new();
    let mut integral = Vec::new();
    let mut dirac_form_defect = 0.0f64;
    for (k, &h) in spacings.iter().enumerate() {
        let patch = GridPatch::centered(center, 2.0 * h, h)?;
        let geo = PatchGeometry::new(data, rep, patch.clone())?;
        let field = SpinorField::sample(patch, f)?;
        pointwise.push(sl_pointwise_residual(rep, &geo, &field, &vec![2; n])?.norm());
        let patch = GridPatch::centered(center, half_width, h)?;
        let geo = PatchGeometry::new(data, rep, patch.clone())?;
        let field = SpinorField::sample(patch.clone(), f)?;
        if k == 0 {
            for idx in patch.nodes() {
                dirac_form_defect = dirac_form_defect.max(dirac_witten(rep, &geo, &field, &idx)?.defect());
            }
        }
        integral.push(integral_sl_check(rep, &geo, &field)?);
    }
    let defects: Vec<f64> = integral.iter().map(|t| t.defect).collect();
    Ok(SLReport {
        family: data.name.clone(),
        center: center.to_vec(),
        spacings: spacings.to_vec(),
        pointwise_order: order_or_none(spacings, &pointwise),
        integral_order: order_or_none(spacings, &defects),
        pointwise,
        integral,
        dirac_form_defect,
    })
}

/// Sides of the boundary identity at one boundary point.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryTermSample {
    /// `⟨∇̃_{eⁿ}φ + eⁿ·D̃φ, φ⟩` from finite differences, as `[re, im]`.
    pub lhs: [f64; 2],
    /// The boundary-operator expression from exact derivatives, as `[re, im]`.
    pub rhs: [f64; 2],
    pub residual: f64,
    pub eigen_defect: f64,
}

/// Projects a field pointwise onto the `s`-eigenspace of `Q(θ)`.
pub fn eigen_projected(rep: &SpinorRep, f: &AnalyticSpinor, theta: f64, sign: i8) -> Result<AnalyticSpinor> {
    Ok(f.transformed(&ChiralityOp::new(rep, theta)?.projector(sign)))
}

/// Compares the finite-difference left side of the boundary identity with
/// `⟨D^∂Mφ,φ⟩ − ½H|φ|² − s½cosθ tr_∂M p|φ|² + s½sinθ p_{nγ}⟨iγ^γγⁿγ⁰φ,φ⟩`
/// evaluated with exact derivatives, at the boundary point `x` with spacing `h`.
pub fn boundary_term_check(
    data: &InitialDataSet,
    rep: &SpinorRep,
    theta: f64,
    sign: i8,
    f: &AnalyticSpinor,
    x: &[f64],
    h: f64,
) -> Result<BoundaryTermSample> {
    let n = data.n();
    if !data.chart.is_boundary_point(x) {
        return Err(Error::NotOnBoundary { point: x.to_vec() });
    }
    let q = ChiralityOp::new(rep, theta)?;
    let mut lo: Vec<f64> = x.iter().map(|v| v - 2.0 * h).collect();
    lo[n - 1] = 0.0;
    let mut shape = vec![5; n];
    shape[n - 1] = 4;
    let patch = GridPatch::new(lo, h, shape)?;
    let field = SpinorField::sample(patch.clone(), f)?;
    let mut eigen_defect = 0.0f64;
    for (v, node) in field.values.iter().zip(patch.nodes()) {
        if node[n - 1] == 0 {
            eigen_defect = eigen_defect.max(q.eigen_defect(v, sign) / v.norm().max(1e-300));
        }
    }
    if eigen_defect > 1e-10 {
        return Err(Error::NotEigenspinor { defect: eigen_defect });
    }
    let mut idx = vec![2; n];
    idx[n - 1] = 0;
    let frame = SpinFrame::new(rep, LocalGeometry::at(data, x)?)?;
    let phi = field.at(&idx).clone();
    let psi = frame.hypersurface(&phi, &field.gradient(&idx)?);
    let dirac = frame.contract(&psi);
    let gn = rep.gamma(n);
    let mut lhs_vec = gn * dirac;
    for (i, p) in psi.iter().enumerate() {
        lhs_vec += p * c(frame.frame[(i, n - 1)]);
    }
    let lhs = inner(&lhs_vec, &phi);

    let b = BoundaryGeometry::from_local(&frame.local)?;
    let (phi_x, dphi) = f.gradient(x);
    let cov = frame.covariant(&phi_x, &dphi);
    let mut boundary_dirac = Spinor::zeros(rep.dim());
    for a in 0..n - 1 {
        let mut along = Spinor::zeros(rep.dim());
        for (i, v) in cov.iter().enumerate() {
            along += v * c(frame.frame[(i, a)]);
        }
        for bb in 0..n - 1 {
            along -= gn * rep.gamma(bb + 1) * &phi_x * c(0.5 * b.second_fundamental_form[(a, bb)]);
        }
        boundary_dirac += gn * rep.gamma(a + 1) * along;
    }
    let s = sign as f64;
    let norm2 = phi_x.norm_squared();
    let mut rhs = inner(&boundary_dirac, &phi_x)
        - c(0.5 * b.mean_curvature * norm2)
        - c(0.5 * s * theta.cos() * b.trace_p * norm2);
    for (g, p) in b.p_normal_tangential.iter().enumerate() {
        let v = rep.product(&[g + 1, n, 0]) * &phi_x * I;
        rhs += inner(&v, &phi_x) * c(0.5 * s * theta.sin() * p);
    }
    Ok(BoundaryTermSample {
        lhs: [lhs.re, lhs.im],
        rhs: [rhs.re, rhs.im],
        residual: (lhs - rhs).norm(),
        eigen_defect,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryLemmaReport {
    pub family: String,
    pub point: Vec<f64>,
    pub theta: f64,
    pub sign: i8,
    pub spacings: Vec<f64>,
    pub samples: Vec<BoundaryTermSample>,
    pub order: Option<OrderFit>,
}

pub fn boundary_lemma_report(
    data: &InitialDataSet,
    rep: &SpinorRep,
    theta: f64,
    sign: i8,
    f: &AnalyticSpinor,
    x: &[f64],
    spacings: &[f64],
) -> Result<BoundaryLemmaReport> {
    let samples = spacings
        .iter()
        .map(|&h| boundary_term_check(data, rep, theta, sign, f, x, h))
        .collect::<Result<Vec<_>>>()?;
    let res: Vec<f64> = samples.iter().map(|s| s.residual).collect();
    Ok(BoundaryLemmaReport {
        family: data.name.clone(),
        point: x.to_vec(),
        theta,
        sign,
        spacings: spacings.to_vec(),
        order: order_or_none(spacings, &res),
        samples,
    })
}

/// `∮_{S₊ʳ} [⟨eⁱ·D̃φ,φ⟩ + ⟨φ,∇̃ⁱφ⟩] νᵢ` for the constant spinor `φ ≡ φ₀`.
pub fn witten_flux_at(data: &InitialDataSet, rep: &SpinorRep, phi0: &Spinor, r: f64, rules: &FluxRules) -> Result<f64> {
    let n = data.n();
    let zeros = vec![Spinor::zeros(rep.dim()); n];
    let mut err = None;
    let total = rules.hemisphere.integrate(r, |x, unit| {
        let value = LocalGeometry::at(data, x).and_then(|l| SpinFrame::new(rep, l)).map(|frame| {
            let psi = frame.hypersurface(phi0, &zeros);
            let chi = frame.contract(&psi);
            let mut acc = 0.0;
            for i in 0..n {
                let mut y = inner(&(&frame.clifford[i] * &chi), phi0).re;
                for (j, pj) in psi.iter().enumerate() {
                    y += frame.local.ginv[(i, j)] * inner(phi0, pj).re;
                }
                acc += y * unit[i];
            }
            acc * frame.local.sqrt_det()
        });
        value.unwrap_or_else(|e| {
            err.get_or_insert(e);
            0.0
        })
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WittenFluxReport {
    pub family: String,
    pub theta: f64,
    /// Signed angle used in the boundary operator.
    pub theta_used: f64,
    pub sign: i8,
    pub phi0: Vec<Complex64>,
    pub radii: Vec<f64>,
    pub fluxes: Vec<f64>,
    pub fit: PowerFit,
    pub energy: f64,
    pub p_n: f64,
    pub p_hat_norm: f64,
    /// `¼(E − s cosθ Pₙ − sin|θ| |P̂|)|φ₀|²` in the `{xₙ ≥ 0}` chart.
    pub expected: f64,
    pub mismatch: f64,
    /// Whether `mismatch` is relative to `|expected|` (otherwise absolute).
    pub relative: bool,
}

/// Surface integral of the constant spinor chosen for `(θ, s)` and the
/// momentum of the data, extrapolated in `r` and compared with the charges.
pub fn witten_flux(
    data: &InitialDataSet,
    rep: &SpinorRep,
    theta: f64,
    sign: i8,
    radii: &[f64],
    order: usize,
) -> Result<WittenFluxReport> {
    let charges = charge_report(data, radii, None, order)?;
    let choice = choose_phi0(rep, theta, charges.p_hat(), sign)?;
    let phi0 = choice.vector();
    let rules = FluxRules::new(data.n(), order)?;
    let fluxes = radii
        .par_iter()
        .map(|&r| witten_flux_at(data, rep, &phi0, r, &rules))
        .collect::<Result<Vec<_>>>()?;
    let fit = power_fit(radii, &fluxes)?;
    let s = sign as f64;
    let expected = 0.25
        * (charges.energy - s * theta.cos() * charges.p_n() - theta.abs().sin() * charges.p_hat_norm())
        * phi0.norm_squared();
    let relative = expected.abs() > 1e-9;
    let mismatch = if relative {
        (fit.limit - expected).abs() / expected.abs()
    } else {
        (fit.limit - expected).abs()
    };
    Ok(WittenFluxReport {
        family: data.name.clone(),
        theta,
        theta_used: choice.theta,
        sign,
        phi0: choice.spinor,
        radii: radii.to_vec(),
        fluxes,
        fit,
        energy: charges.energy,
        p_n: charges.p_n(),
        p_hat_norm: charges.p_hat_norm(),
        expected,
        mismatch,
        relative,
    })
}

/// `N = ⟨φ,φ⟩` and frame components `Xʲ = (eʲ·φ, φ)`.
#[derive(Clone, Debug, Serialize)]
pub struct LapseShift {
    pub lapse: f64,
    pub shift: Vec<f64>,
    /// Largest imaginary part discarded from `N` and `Xʲ`.
    pub max_imaginary: f64,
}

pub fn lapse_shift(rep: &SpinorRep, phi: &Spinor) -> LapseShift {
    let nn = inner(phi, phi);
    let mut max_imaginary = nn.im.abs();
    let shift = (1..=rep.n())
        .map(|j| {
            let v = inner(&(rep.product(&[0, j]) * phi), phi);
            max_imaginary = max_imaginary.max(v.im.abs());
            v.re
        })
        .collect();
    LapseShift { lapse: nn.re, shift, max_imaginary }
}

/// Residuals of the interior consequences of a parallel spinor.
#[derive(Clone, Debug, Serialize)]
pub struct InteriorConsequence {
    /// `max |∇̃φ|`; the identities below require it to vanish.
    pub parallel_defect: f64,
    /// `max |(L_X g + 2Np)_{ij}|`.
    pub killing: f64,
    /// `|d(N² − |X|²)|`.
    pub norm_gradient: f64,
    /// `μN + ⟨J, X⟩`.
    pub energy: f64,
    /// `max_k |μXᵏ + NJᵏ|`.
    pub momentum: f64,
}

pub fn interior_consequence(
    data: &InitialDataSet,
    rep: &SpinorRep,
    f: &AnalyticSpinor,
    x: &[f64],
) -> Result<InteriorConsequence> {
    let n = data.n();
    let frame = SpinFrame::new(rep, LocalGeometry::at(data, x)?)?;
    let local = &frame.local;
    let (phi, dphi) = f.gradient(x);
    let parallel_defect = frame.hypersurface(&phi, &dphi).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let ls = lapse_shift(rep, &phi);
    let (lapse, xf) = (ls.lapse, DVector::from_vec(ls.shift));
    let xc = &frame.frame * &xf;
    // derivatives of N and of the frame components of X
    let mut dn = DVector::zeros(n);
    let mut dxf = DMatrix::zeros(n, n);
    for k in 0..n {
        dn[k] = 2.0 * inner(&dphi[k], &phi).re;
        for j in 0..n {
            let m = rep.product(&[0, j + 1]);
            dxf[(j, k)] = (inner(&(&m * &dphi[k]), &phi) + inner(&(&m * &phi), &dphi[k])).re;
        }
    }
    // ∂_k X^μ = ∂_k E^μ_j X^j + E^μ_j ∂_k X^j
    let mut dxc = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut de = local.d_frame[k].clone();
        for mu in 0..n {
            de[(mu, n - 1)] *= NORMAL_SIGN;
        }
        let col = de * &xf + &frame.frame * dxf.column(k);
        dxc.set_column(k, &col);
    }
    let mut killing = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut v = 2.0 * lapse * local.p[(i, j)];
            for k in 0..n {
                v += xc[k] * local.dg[k][(i, j)] + local.g[(k, j)] * dxc[(k, i)] + local.g[(i, k)] * dxc[(k, j)];
            }
            killing = killing.max(v.abs());
        }
    }
    let grad = &dn * (2.0 * lapse) - dxf.transpose() * &xf * 2.0;
    let mu = energy_density_local(local);
    let j = current_density_local(local);
    // frame components of J
    let jf = frame.frame.transpose() * &j;
    let energy = mu * lapse + jf.dot(&xf);
    let momentum = (0..n).map(|k| (mu * xf[k] + lapse * jf[k]).abs()).fold(0.0, f64::max);
    Ok(InteriorConsequence { parallel_defect, killing, norm_gradient: grad.norm(), energy, momentum })
}

/// Residuals of the boundary consequences of a parallel eigenspinor.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryConsequence {
    /// `max_α |p_{αn}N sin²θ − (s p_{αβ}Xᵝ cosθ + h_{αβ}Xᵝ)|`.
    pub first: f64,
    /// `max_α |s p_{αβ}Xᵝ cosθ + h_{αβ}Xᵝ − (H + s cosθ tr_∂M p)X_α|`.
    pub second: f64,
    /// `max_{α,γ} |p_{αn}X^γ − s cosθ p_{αγ}N − h_{αγ}N|`.
    pub third: f64,
    /// `max_α |⟨eᵅ·φ,φ⟩ − i cotθ Xᵅ|`, which holds for every eigenspinor.
    pub tangential_shift: f64,
}

pub fn boundary_consequence(
    data: &InitialDataSet,
    rep: &SpinorRep,
    theta: f64,
    sign: i8,
    phi: &Spinor,
    x: &[f64],
) -> Result<BoundaryConsequence> {
    if !data.chart.is_boundary_point(x) {
        return Err(Error::NotOnBoundary { point: x.to_vec() });
    }
    if theta == 0.0 {
        return Err(Error::AngleOutOfRange { value: theta, range: "[-pi/2, 0) or (0, pi/2]" });
    }
    let q = ChiralityOp::new(rep, theta)?;
    let defect = q.eigen_defect(phi, sign) / phi.norm().max(1e-300);
    if defect > 1e-10 {
        return Err(Error::NotEigenspinor { defect });
    }
    let n = data.n();
    let frame = SpinFrame::new(rep, LocalGeometry::at(data, x)?)?;
    let b = BoundaryGeometry::from_local(&frame.local)?;
    let pf = frame.frame.transpose() * &frame.local.p * &frame.frame;
    let ls = lapse_shift(rep, phi);
    let (nn, xs) = (ls.lapse, ls.shift);
    let s = sign as f64;
    let (ct, st) = (theta.cos(), theta.sin());
    let h = &b.second_fundamental_form;
    let (mut first, mut second, mut third, mut tangential_shift) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for a in 0..n - 1 {
        let pan = pf[(a, n - 1)];
        let left = pan * nn * st * st;
        let mid: f64 = (0..n - 1).map(|bb| s * pf[(a, bb)] * xs[bb] * ct + h[(a, bb)] * xs[bb]).sum();
        let right = (b.mean_curvature + s * ct * b.trace_p) * xs[a];
        first = first.max((left - mid).abs());
        second = second.max((mid - right).abs());
        for g in 0..n - 1 {
            third = third.max((pan * xs[g] - s * ct * pf[(a, g)] * nn - h[(a, g)] * nn).abs());
        }
        let lhs = inner(&(rep.gamma(a + 1) * phi), phi);
        tangential_shift = tangential_shift.max((lhs - I * (xs[a] * ct / st)).norm());
    }
    Ok(BoundaryConsequence { first, second, third, tangential_shift })
}

/// Largest entry of `c(dxⁱ)c(dxʲ) + c(dxʲ)c(dxⁱ) + 2gⁱʲ` at a point.
pub fn clifford_metric_residual(frame: &SpinFrame) -> f64 {
    let n = frame.clifford.len();
    let dim = frame.clifford[0].nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let m = &frame.clifford[i] * &frame.clifford[j]
                + &frame.clifford[j] * &frame.clifford[i]
                + CMatrix::identity(dim, dim) * c(2.0 * frame.local.ginv[(i, j)]);
            worst = worst.max(max_abs(&m));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{build_rep, random_spinor};
    use crate::field::AnalyticField;

    fn flat(n: usize) -> InitialDataSet {
        InitialDataSet::new("flat", n, Arc::new(AnalyticField::euclidean(n)), Arc::new(AnalyticField::zero(n)), 1.0)
            .unwrap()
    }

    fn flat_with_p(n: usize, p: f64) -> InitialDataSet {
        let m = DMatrix::identity(n, n) * p;
        InitialDataSet::new("flat-p", n, Arc::new(AnalyticField::euclidean(n)), Arc::new(AnalyticField::constant(m)), 1.0)
            .unwrap()
    }

    fn schwarzschild(m: f64) -> InitialDataSet {
        let g = AnalyticField::conformal(3, "schwarzschild", move |x: &[Jet]| {
            let r = crate::jet::norm_sq(x).sqrt();
            (r.recip() * (0.5 * m) + 1.0).powi(4)
        });
        InitialDataSet::new("schwarzschild", 3, Arc::new(g), Arc::new(AnalyticField::zero(3)), 1.0).unwrap()
    }

    #[test]
    fn flipped_frame_is_outward_on_boundary() {
        let data = schwarzschild(1.0);
        let rep = build_rep(3).unwrap();
        let x = [2.0, 1.0, 0.0];
        let f = SpinFrame::new(&rep, LocalGeometry::at(&data, &x).unwrap()).unwrap();
        let b = BoundaryGeometry::from_local(&f.local).unwrap();
        for mu in 0..3 {
            assert!((f.frame[(mu, 2)] - b.normal[mu]).abs() < 1e-14);
        }
        assert!(clifford_metric_residual(&f) < 1e-13);
    }

    #[test]
    fn flat_constant_spinor_is_parallel() {
        let rep = build_rep(3).unwrap();
        let data = flat(3);
        let patch = GridPatch::centered(&[2.0, 2.0, 2.0], 0.2, 0.1).unwrap();
        let geo = PatchGeometry::new(&data, &rep, patch.clone()).unwrap();
        let field = SpinorField::sample(patch, &AnalyticSpinor::constant(3, random_spinor(4, 1))).unwrap();
        for i in 0..3 {
            assert!(hypersurface_connection(&geo, &field, &[0, 1, 4], i).unwrap().norm() < 1e-14);
        }
        assert!(dirac_witten(&rep, &geo, &field, &[2, 2, 2]).unwrap().frame_form.norm() < 1e-14);
    }

    #[test]
    fn isotropic_p_is_algebraic() {
        let rep = build_rep(3).unwrap();
        let cst = 0.3;
        let data = flat_with_p(3, cst);
        let phi = random_spinor(4, 2);
        let patch = GridPatch::centered(&[2.0, 2.0, 2.0], 0.2, 0.1).unwrap();
        let geo = PatchGeometry::new(&data, &rep, patch.clone()).unwrap();
        let field = SpinorField::sample(patch, &AnalyticSpinor::constant(3, phi.clone())).unwrap();
        let idx = [2, 2, 2];
        for i in 0..3 {
            let got = hypersurface_connection(&geo, &field, &idx, i).unwrap();
            let want = rep.product(&[i + 1, 0]) * &phi * c(-cst / 2.0);
            // the last frame vector is flipped
            let want = if i == 2 { -want } else { want };
            assert!((got - want).norm() < 1e-14);
        }
        let d = dirac_witten(&rep, &geo, &field, &idx).unwrap();
        assert!((&d.frame_form - rep.gamma(0) * &phi * c(1.5 * cst)).norm() < 1e-14);
        assert!(d.defect() < 1e-14);
    }

    #[test]
    fn connection_is_metric_compatible() {
        let rep = build_rep(3).unwrap();
        let data = schwarzschild(1.0);
        let f1 = AnalyticSpinor::test_field(3, 4, 5);
        let f2 = AnalyticSpinor::test_field(3, 4, 6);
        let x = [1.6, 1.1, 0.9];
        let frame = SpinFrame::new(&rep, LocalGeometry::at(&data, &x).unwrap()).unwrap();
        let (a, da) = f1.gradient(&x);
        let (b, db) = f2.gradient(&x);
        let na = frame.covariant(&a, &da);
        let nb = frame.covariant(&b, &db);
        // the frame components are orthonormal, so ∂⟨a,b⟩ is the coordinate derivative
        for i in 0..3 {
            let lhs = inner(&da[i], &b) + inner(&a, &db[i]);
            let rhs = inner(&na[i], &b) + inner(&a, &nb[i]);
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn sl_exact_on_flat_quadratic_field() {
        let rep = build_rep(3).unwrap();
        let data = flat(3);
        let f = AnalyticSpinor::new(3, 4)
            .term(Arc::new(|x: &[Jet]| x[0] * x[1] + x[2] * x[2]), random_spinor(4, 7))
            .term(Arc::new(|x: &[Jet]| x[1] * 3.0), random_spinor(4, 8));
        let patch = GridPatch::centered(&[2.0, 2.0, 2.0], 0.4, 0.1).unwrap();
        let geo = PatchGeometry::new(&data, &rep, patch.clone()).unwrap();
        let field = SpinorField::sample(patch, &f).unwrap();
        assert!(sl_pointwise_residual(&rep, &geo, &field, &[4, 4, 4]).unwrap().norm() < 1e-10);
        assert!(integral_sl_check(&rep, &geo, &field).unwrap().defect.abs() < 1e-10);
        assert!(matches!(
            sl_pointwise_residual(&rep, &geo, &field, &[1, 4, 4]),
            Err(Error::StencilOutOfPatch { .. })
        ));
    }

    #[test]
    fn boundary_identity_on_flat_and_isotropic_data() {
        let rep = build_rep(3).unwrap();
        for (data, tol) in [(flat(3), 1e-12), (flat_with_p(3, 0.4), 1e-10)] {
            for s in [1, -1] {
                let f = eigen_projected(&rep, &AnalyticSpinor::constant(3, random_spinor(4, 9)), 0.6, s).unwrap();
                let r = boundary_term_check(&data, &rep, 0.6, s, &f, &[2.0, 1.0, 0.0], 0.1).unwrap();
                assert!(r.residual < tol, "{r:?}");
            }
        }
    }

    #[test]
    fn boundary_check_rejects_non_eigenspinors() {
        let rep = build_rep(3).unwrap();
        let f = AnalyticSpinor::constant(3, random_spinor(4, 9));
        let r = boundary_term_check(&flat(3), &rep, 0.6, 1, &f, &[2.0, 1.0, 0.0], 0.1);
        assert!(matches!(r, Err(Error::NotEigenspinor { .. })));
    }

    #[test]
    fn flat_parallel_spinor_consequences() {
        let rep = build_rep(3).unwrap();
        let data = flat(3);
        let phi = ChiralityOp::new(&rep, 0.5).unwrap().projector(1) * random_spinor(4, 11);
        let f = AnalyticSpinor::constant(3, phi.clone());
        let ic = interior_consequence(&data, &rep, &f, &[2.0, 1.0, 1.0]).unwrap();
        assert!(ic.parallel_defect == 0.0 && ic.killing == 0.0 && ic.norm_gradient == 0.0);
        assert!(ic.energy == 0.0 && ic.momentum == 0.0);
        let bc = boundary_consequence(&data, &rep, 0.5, 1, &phi, &[2.0, 1.0, 0.0]).unwrap();
        assert!(bc.first.max(bc.second).max(bc.third) < 1e-12, "{bc:?}");
        assert!(bc.tangential_shift < 1e-12, "{bc:?}");
    }

    #[test]
    fn lapse_of_unit_spinor() {
        let rep = build_rep(4).unwrap();
        let v = random_spinor(8, 4);
        let ls = lapse_shift(&rep, &(&v / c(v.norm())));
        assert!((ls.lapse - 1.0).abs() < 1e-14);
        assert!(ls.max_imaginary < 1e-14);
        // timelike or null: N ≥ |X|
        assert!(ls.shift.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + 1e-12);
    }
}
