//! Tensor calculus on the half-space chart `{x_n >= 0} \ B_1`.
//!
//! Everything here is a pure function of `(data, point)`. [`LocalGeometry`]
//! bundles the metric jet, Christoffel symbols and their derivatives, Ricci
//! and scalar curvature, the Cholesky orthonormal frame and its spin
//! coefficients, and the second fundamental form `p` with its first partials.
//!
//! Index conventions: coordinates are `0..n` in code (`x¹..xⁿ` in the usual
//! notation); the boundary is `x[n-1] = 0`; "tangential" indices range over
//! `0..n-1`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridField, MovedField, TensorField, TensorJet};
use crate::grid::GridPatch;

/// Radius of the excised coordinate ball.
pub const EXCISION_RADIUS: f64 = 1.0;
/// Samples and integrals stay outside this radius.
pub const MIN_SAMPLE_RADIUS: f64 = 1.25;
const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Sampling {
    Analytic,
    Grid(GridPatch),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub n: usize,
    pub sampling: Sampling,
}

impl Chart {
    pub fn analytic(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::UnsupportedDimension { n, supported: "n >= 3" });
        }
        Ok(Chart { n, sampling: Sampling::Analytic })
    }

    pub fn contains(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        if x[self.n - 1] < -BOUNDARY_TOL {
            return Err(Error::OutsideDomain {
                point: x.to_vec(),
                reason: "x_n < 0".into(),
            });
        }
        if euclidean_norm(x) <= EXCISION_RADIUS {
            return Err(Error::OutsideDomain {
                point: x.to_vec(),
                reason: "inside the excised unit ball".into(),
            });
        }
        Ok(())
    }

    pub fn is_boundary_point(&self, x: &[f64]) -> bool {
        x.len() == self.n && x[self.n - 1].abs() <= BOUNDARY_TOL
    }
}

/// `(g, p)` on the half-space chart.
#[derive(Clone, Debug)]
pub struct InitialDataSet {
    pub name: String,
    pub chart: Chart,
    pub g: Arc<dyn TensorField>,
    pub p: Arc<dyn TensorField>,
    /// Decay exponent `q` with `q > (n-2)/2`; metadata only.
    pub decay_order: f64,
}

impl InitialDataSet {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        g: Arc<dyn TensorField>,
        p: Arc<dyn TensorField>,
        decay_order: f64,
    ) -> Result<Self> {
        let chart = Chart::analytic(n)?;
        for f in [&g, &p] {
            if f.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: f.dim() });
            }
        }
        Ok(InitialDataSet { name: name.into(), chart, g, p, decay_order })
    }

    pub fn n(&self) -> usize {
        self.chart.n
    }

    /// Samples both fields on `patch`; derivatives become finite differences.
    pub fn to_grid(&self, patch: GridPatch) -> Result<Self> {
        let g = GridField::sample(self.g.as_ref(), patch.clone())?;
        let p = GridField::sample(self.p.as_ref(), patch.clone())?;
        Ok(InitialDataSet {
            name: self.name.clone(),
            chart: Chart { n: self.n(), sampling: Sampling::Grid(patch) },
            g: Arc::new(g),
            p: Arc::new(p),
            decay_order: self.decay_order,
        })
    }

    /// Moves the data by the boundary-plane isometry `x ↦ R̂x + t`, where `R̂`
    /// acts as `rotation` on the first `n-1` coordinates and fixes `x_n`.
    pub fn moved(&self, rotation: &DMatrix<f64>, translation: &[f64]) -> Result<Self> {
        let n = self.n();
        if rotation.nrows() != n - 1 || rotation.ncols() != n - 1 || translation.len() != n {
            return Err(Error::NotChartPreserving("shape mismatch".into()));
        }
        let orth = (rotation.transpose() * rotation - DMatrix::identity(n - 1, n - 1)).amax();
        if orth > 1e-10 || rotation.determinant() < 0.0 {
            return Err(Error::NotChartPreserving("rotation is not in SO(n-1)".into()));
        }
        if translation[n - 1].abs() > 0.0 {
            return Err(Error::NotChartPreserving("translation moves the boundary plane".into()));
        }
        let mut full = DMatrix::identity(n, n);
        full.view_mut((0, 0), (n - 1, n - 1)).copy_from(rotation);
        let g = MovedField::new(self.g.clone(), full.clone(), translation.to_vec());
        let p = MovedField::new(self.p.clone(), full, translation.to_vec());
        Ok(InitialDataSet {
            name: format!("{}(moved)", self.name),
            chart: self.chart.clone(),
            g: Arc::new(g),
            p: Arc::new(p),
            decay_order: self.decay_order,
        })
    }
}

/// Dense rank-3 array `T[a][b][c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 { n, data: vec![0.0; n * n * n] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.n + b) * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.n + b) * self.n + c] = v;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Orthonormal frame `e_a` (columns) and spin coefficients
/// `ω(i, a, b) = g(∇_i e_a, e_b)` with `i` a coordinate index.
#[derive(Clone, Debug)]
pub struct FramePacket {
    pub frame: DMatrix<f64>,
    pub spin_coeffs: Tensor3,
}

impl FramePacket {
    pub fn orthonormality_residual(&self, g: &DMatrix<f64>) -> f64 {
        let n = g.nrows();
        (self.frame.transpose() * g * &self.frame - DMatrix::identity(n, n)).amax()
    }

    /// `max |ω_{iab} + ω_{iba}|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.spin_coeffs.dim();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for a in 0..n {
                for b in 0..n {
                    m = m.max((self.spin_coeffs.get(i, a, b) + self.spin_coeffs.get(i, b, a)).abs());
                }
            }
        }
        m
    }
}

/// Everything the constraint, charge and Dirac modules need at one point.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    pub x: Vec<f64>,
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub d2g: Vec<Vec<DMatrix<f64>>>,
    /// `Γ(k, i, j) = Γᵏᵢⱼ`.
    pub christoffel: Tensor3,
    /// `dchristoffel[m]` holds `∂_m Γᵏᵢⱼ`.
    pub dchristoffel: Vec<Tensor3>,
    pub ricci: DMatrix<f64>,
    pub scalar_curvature: f64,
    pub frame: FramePacket,
    /// `d_frame[k]` holds `∂_k e` (columns are frame vectors).
    pub d_frame: Vec<DMatrix<f64>>,
    pub p: DMatrix<f64>,
    pub dp: Vec<DMatrix<f64>>,
}

impl LocalGeometry {
    pub fn at(data: &InitialDataSet, x: &[f64]) -> Result<Self> {
        data.chart.contains(x)?;
        let gj = data.g.jet(x)?;
        let pj = data.p.jet(x)?;
        Self::from_jets(x, gj, pj)
    }

    pub fn from_jets(x: &[f64], gj: TensorJet, pj: TensorJet) -> Result<Self> {
        let n = gj.value.nrows();
        let g = gj.value;
        let chol = nalgebra::Cholesky::new(g.clone())
            .ok_or_else(|| Error::NotPositiveDefinite { point: x.to_vec() })?;
        let ginv = chol.inverse();
        if !ginv.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateMetric { point: x.to_vec() });
        }
        let dg = gj.d1;
        let d2g = gj.d2;

        // Γᵏᵢⱼ = ½ gᵏˡ (∂ᵢ g_jl + ∂ⱼ g_il − ∂ₗ g_ij)
        let mut lowered = Tensor3::zeros(n); // Γ_{l i j}
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    lowered.set(l, i, j, 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]));
                }
            }
        }
        let mut christoffel = Tensor3::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v: f64 = (0..n).map(|l| ginv[(k, l)] * lowered.get(l, i, j)).sum();
                    christoffel.set(k, i, j, v);
                    christoffel.set(k, j, i, v);
                }
            }
        }

        // ∂_m Γᵏᵢⱼ = ∂_m gᵏˡ Γ_lij + gᵏˡ ∂_m Γ_lij, ∂_m g⁻¹ = −g⁻¹ ∂_m g g⁻¹
        let mut dchristoffel = Vec::with_capacity(n);
        for m in 0..n {
            let dginv = -(&ginv * &dg[m] * &ginv);
            let mut t = Tensor3::zeros(n);
            for k in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let mut v = 0.0;
                        for l in 0..n {
                            let dlow = 0.5
                                * (d2g[m][i][(j, l)] + d2g[m][j][(i, l)] - d2g[m][l][(i, j)]);
                            v += dginv[(k, l)] * lowered.get(l, i, j) + ginv[(k, l)] * dlow;
                        }
                        t.set(k, i, j, v);
                        t.set(k, j, i, v);
                    }
                }
            }
            dchristoffel.push(t);
        }

        // R_ij = ∂_k Γᵏᵢⱼ − ∂ᵢ Γᵏₖⱼ + Γᵏₖₗ Γˡᵢⱼ − Γᵏᵢₗ Γˡₖⱼ
        let mut ricci = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += dchristoffel[k].get(k, i, j) - dchristoffel[i].get(k, k, j);
                    for l in 0..n {
                        v += christoffel.get(k, k, l) * christoffel.get(l, i, j)
                            - christoffel.get(k, i, l) * christoffel.get(l, k, j);
                    }
                }
                ricci[(i, j)] = v;
                ricci[(j, i)] = v;
            }
        }
        let scalar_curvature = (ginv.component_mul(&ricci)).sum();

        // Frame e = L⁻ᵀ with g = L Lᵀ; ∂L = L Φ(L⁻¹ ∂g L⁻ᵀ).
        let l = chol.l();
        let linv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateMetric { point: x.to_vec() })?;
        let e = linv.transpose();
        let mut d_frame = Vec::with_capacity(n);
        for dgk in dg.iter() {
            let m = &linv * dgk * &e;
            let mut phi = m.lower_triangle();
            for a in 0..n {
                phi[(a, a)] *= 0.5;
            }
            let dl = &l * phi;
            d_frame.push(-(&e * dl.transpose() * &e));
        }
        let mut spin = Tensor3::zeros(n);
        for i in 0..n {
            // ∇_i e_a = ∂_i e_a + Γ^μ_{iλ} e_a^λ ∂_μ
            let mut cov = d_frame[i].clone();
            for a in 0..n {
                for mu in 0..n {
                    let s: f64 = (0..n).map(|lam| christoffel.get(mu, i, lam) * e[(lam, a)]).sum();
                    cov[(mu, a)] += s;
                }
            }
            let w = cov.transpose() * &g * &e;
            for a in 0..n {
                for b in 0..n {
                    spin.set(i, a, b, w[(a, b)]);
                }
            }
        }

        Ok(LocalGeometry {
            x: x.to_vec(),
            g,
            ginv,
            dg,
            d2g,
            christoffel,
            dchristoffel,
            ricci,
            scalar_curvature,
            frame: FramePacket { frame: e, spin_coeffs: spin },
            d_frame,
            p: pj.value,
            dp: pj.d1,
        })
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn sqrt_det(&self) -> f64 {
        self.g.determinant().sqrt()
    }

    pub fn trace_p(&self) -> f64 {
        self.ginv.component_mul(&self.p).sum()
    }

    /// `|p|²_g = gⁱᵃ gʲᵇ p_ij p_ab`.
    pub fn p_norm_sq(&self) -> f64 {
        let raised = &self.ginv * &self.p * &self.ginv;
        raised.component_mul(&self.p).sum()
    }

    /// Frame components `p(e_a, e_b)`.
    pub fn p_frame(&self) -> DMatrix<f64> {
        let e = &self.frame.frame;
        e.transpose() * &self.p * e
    }

    /// `g(u, v)` for coordinate vectors.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.g * v)[(0, 0)]
    }
}

pub fn christoffel(data: &InitialDataSet, x: &[f64]) -> Result<Tensor3> {
    Ok(LocalGeometry::at(data, x)?.christoffel)
}

pub fn scalar_curvature(data: &InitialDataSet, x: &[f64]) -> Result<f64> {
    Ok(LocalGeometry::at(data, x)?.scalar_curvature)
}

pub fn ricci(data: &InitialDataSet, x: &[f64]) -> Result<DMatrix<f64>> {
    Ok(LocalGeometry::at(data, x)?.ricci)
}

pub fn orthonormal_frame(data: &InitialDataSet, x: &[f64]) -> Result<FramePacket> {
    Ok(LocalGeometry::at(data, x)?.frame)
}

/// Geometry of `∂M = {x_n = 0}` at a boundary point.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryGeometry {
    /// Outward `g`-unit normal `η` (coordinate components; points towards `−∂_n`).
    pub normal: Vec<f64>,
    /// Tangential orthonormal frame `e_α`, `α < n−1` (coordinate components).
    pub tangent_frame: Vec<Vec<f64>>,
    /// `h_αβ = g(∇_{e_α} η, e_β)` in the tangential frame.
    pub second_fundamental_form: DMatrix<f64>,
    pub mean_curvature: f64,
    /// `tr_∂M p = tr_g p − p(η, η)`.
    pub trace_p: f64,
    /// Frame components `p(η, e_α)` of the tangential part of `p(η, ·)`.
    pub p_normal_tangential: Vec<f64>,
    /// Norm of `p(η, ·)^⊤` in the induced metric.
    pub p_normal_tangential_norm: f64,
    pub p_normal_normal: f64,
}

impl BoundaryGeometry {
    pub fn from_local(local: &LocalGeometry) -> Result<Self> {
        let n = local.n();
        let x = &local.x;
        if x[n - 1].abs() > BOUNDARY_TOL {
            return Err(Error::NotOnBoundary { point: x.clone() });
        }
        let ginv = &local.ginv;
        let gnn = ginv[(n - 1, n - 1)];
        let s = gnn.sqrt();
        let eta = DVector::from_fn(n, |mu, _| -ginv[(mu, n - 1)] / s);

        // ∂_k η^μ = −∂_k g^{μn}/√g^{nn} + ½ g^{μn} (g^{nn})^{-3/2} ∂_k g^{nn}
        let mut deta = Vec::with_capacity(n);
        for k in 0..n {
            let dginv = -(ginv * &local.dg[k] * ginv);
            let dgnn = dginv[(n - 1, n - 1)];
            deta.push(DVector::from_fn(n, |mu, _| {
                -dginv[(mu, n - 1)] / s + 0.5 * ginv[(mu, n - 1)] * dgnn / (gnn * s)
            }));
        }
        let e = &local.frame.frame;
        let tangents: Vec<DVector<f64>> = (0..n - 1).map(|a| e.column(a).into_owned()).collect();
        let cov_deriv = |v: &DVector<f64>| -> DVector<f64> {
            let mut out = DVector::zeros(n);
            for k in 0..n {
                out += &deta[k] * v[k];
            }
            for mu in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    for lam in 0..n {
                        acc += local.christoffel.get(mu, k, lam) * v[k] * eta[lam];
                    }
                }
                out[mu] += acc;
            }
            out
        };
        let mut h = DMatrix::zeros(n - 1, n - 1);
        for a in 0..n - 1 {
            let d = cov_deriv(&tangents[a]);
            for b in 0..n - 1 {
                h[(a, b)] = local.inner(&d, &tangents[b]);
            }
        }
        let mean = h.trace();
        let p = &local.p;
        let p_eta = p * &eta;
        let p_nn = eta.dot(&p_eta);
        let tang: Vec<f64> = tangents.iter().map(|t| t.dot(&p_eta)).collect();
        let tang_norm = tang.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(BoundaryGeometry {
            normal: eta.iter().copied().collect(),
            tangent_frame: tangents.iter().map(|t| t.iter().copied().collect()).collect(),
            second_fundamental_form: h,
            mean_curvature: mean,
            trace_p: local.trace_p() - p_nn,
            p_normal_tangential: tang,
            p_normal_tangential_norm: tang_norm,
            p_normal_normal: p_nn,
        })
    }
}

pub fn boundary_geometry(data: &InitialDataSet, x: &[f64]) -> Result<BoundaryGeometry> {
    if !data.chart.is_boundary_point(x) {
        return Err(Error::NotOnBoundary { point: x.to_vec() });
    }
    BoundaryGeometry::from_local(&LocalGeometry::at(data, x)?)
}

pub fn euclidean_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One rung of the asymptotic-decay ladder.
#[derive(Clone, Debug, Serialize)]
pub struct DecaySample {
    pub r: f64,
    /// `sup (|g−δ| + r|∂g| + r²|∂²g| + r|p| + r²|∂p|)` over the probe directions.
    pub weighted_sup: f64,
    /// `weighted_sup · r^{(n−2)/2}`, which must decrease for asymptotic flatness.
    pub scaled: f64,
}

/// Spot-checks the fall-off on a logarithmic radius ladder. Returns the
/// ladder and whether the scaled quantity decreases monotonically.
pub fn decay_ladder(data: &InitialDataSet, radii: &[f64]) -> Result<(Vec<DecaySample>, bool)> {
    let n = data.n();
    let dirs = probe_directions(n);
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut sup: f64 = 0.0;
        for d in &dirs {
            let x: Vec<f64> = d.iter().map(|c| c * r).collect();
            let gj = data.g.jet(&x)?;
            let pj = data.p.jet(&x)?;
            let dev = (&gj.value - DMatrix::<f64>::identity(n, n)).amax();
            let dgm = gj.d1.iter().map(|m| m.amax()).fold(0.0, f64::max);
            let d2gm = gj.d2.iter().flatten().map(|m| m.amax()).fold(0.0, f64::max);
            let pm = pj.value.amax();
            let dpm = pj.d1.iter().map(|m| m.amax()).fold(0.0, f64::max);
            sup = sup.max(dev + r * dgm + r * r * d2gm + r * pm + r * r * dpm);
        }
        out.push(DecaySample { r, weighted_sup: sup, scaled: sup * r.powf((n as f64 - 2.0) / 2.0) });
    }
    let monotone = out.windows(2).all(|w| w[1].scaled <= w[0].scaled * (1.0 + 1e-12));
    Ok((out, monotone))
}

/// Unit probe directions in the closed upper half-space, deterministic.
pub fn probe_directions(n: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for a in 0..n {
        let mut v = vec![0.0; n];
        v[a] = 1.0;
        dirs.push(v);
    }
    let mut diag = vec![1.0; n];
    diag[0] = -1.0;
    let s = euclidean_norm(&diag);
    dirs.push(diag.iter().map(|v| v / s).collect());
    let mut tilt: Vec<f64> = (0..n).map(|a| 0.3 + 0.1 * a as f64).collect();
    tilt[n - 1] = 0.0;
    let s = euclidean_norm(&tilt);
    dirs.push(tilt.iter().map(|v| v / s).collect());
    dirs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use crate::jet::{norm_sq, Jet};

    fn flat(n: usize) -> InitialDataSet {
        InitialDataSet::new(
            "flat",
            n,
            Arc::new(AnalyticField::euclidean(n)),
            Arc::new(AnalyticField::zero(n)),
            1.0,
        )
        .unwrap()
    }

    fn conformal(u: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> InitialDataSet {
        InitialDataSet::new(
            "conf",
            3,
            Arc::new(AnalyticField::conformal(3, "u4", move |x| u(x).powi(4))),
            Arc::new(AnalyticField::zero(3)),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn flat_data_is_flat() {
        let d = flat(4);
        let x = [1.5, -0.3, 0.2, 0.7];
        let loc = LocalGeometry::at(&d, &x).unwrap();
        assert_eq!(loc.christoffel.max_abs(), 0.0);
        assert_eq!(loc.scalar_curvature, 0.0);
        assert!((&loc.frame.frame - DMatrix::<f64>::identity(4, 4)).amax() == 0.0);
        assert_eq!(loc.frame.spin_coeffs.max_abs(), 0.0);
    }

    #[test]
    fn conformal_christoffel_matches_closed_form() {
        // g = u⁴δ = e^{2f}δ with f = 2 ln u: Γᵏᵢⱼ = δ_ik f_j + δ_jk f_i − δ_ij f_k
        let u = |x: &[Jet]| 1.0 + 0.5 * norm_sq(x).sqrt().recip() + x[0] * 0.01;
        let d = conformal(u);
        let x = [1.3, 0.7, 0.4];
        let gam = christoffel(&d, &x).unwrap();
        let r = euclidean_norm(&x);
        let uval = 1.0 + 0.5 / r + 0.01 * x[0];
        let du: Vec<f64> = (0..3)
            .map(|i| -0.5 * x[i] / r.powi(3) + if i == 0 { 0.01 } else { 0.0 })
            .collect();
        let f: Vec<f64> = du.iter().map(|v| 2.0 * v / uval).collect();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let dl = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                    let expect = dl(i, k) * f[j] + dl(j, k) * f[i] - dl(i, j) * f[k];
                    assert!((gam.get(k, i, j) - expect).abs() < 1e-13);
                    assert_eq!(gam.get(k, i, j), gam.get(k, j, i));
                }
            }
        }
    }

    #[test]
    fn schwarzschild_slice_is_scalar_flat() {
        let d = conformal(|x| 1.0 + 0.5 * norm_sq(x).sqrt().recip());
        for x in [[1.3, 0.7, 0.4], [3.0, -2.0, 0.0], [0.2, 0.1, 5.0]] {
            assert!(scalar_curvature(&d, &x).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn conformal_scalar_curvature_closed_form() {
        // R(u⁴δ) = −8 u⁻⁵ Δu for n = 3; u = 1 + a/(1+r²)^{1/2}: Δu = −3a(1+r²)^{-5/2}
        let a = 0.7;
        let d = conformal(move |x| 1.0 + a * (1.0 + norm_sq(x)).powf(-0.5));
        let x = [1.1, -0.4, 0.9];
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let u = 1.0 + a * (1.0 + r2).powf(-0.5);
        let lap = -3.0 * a * (1.0 + r2).powf(-2.5);
        let expect = -8.0 * u.powi(-5) * lap;
        assert!((scalar_curvature(&d, &x).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn round_sphere_patch_scalar_curvature() {
        // stereographic metric of the radius-ρ sphere: 4ρ⁴/(ρ²+r²)² δ has R = 6/ρ² in n = 3
        let rho: f64 = 2.0;
        let d = InitialDataSet::new(
            "sphere",
            3,
            Arc::new(AnalyticField::conformal(3, "sphere", move |x| {
                (norm_sq(x) + rho * rho).powi(-2) * (4.0 * rho.powi(4))
            })),
            Arc::new(AnalyticField::zero(3)),
            1.0,
        )
        .unwrap();
        let r = scalar_curvature(&d, &[1.2, 0.3, 0.5]).unwrap();
        assert!((r - 6.0 / (rho * rho)).abs() < 1e-12, "{r}");
    }

    #[test]
    fn conformal_frame_is_scaled_identity() {
        let d = conformal(|x| 1.0 + 0.5 * norm_sq(x).sqrt().recip());
        let x = [1.5, 0.5, 0.5];
        let fp = orthonormal_frame(&d, &x).unwrap();
        let r = euclidean_norm(&x);
        let u = 1.0 + 0.5 / r;
        assert!((&fp.frame - DMatrix::<f64>::identity(3, 3) / (u * u)).amax() < 1e-14);
        let g = DMatrix::<f64>::identity(3, 3) * u.powi(4);
        assert!(fp.orthonormality_residual(&g) < 1e-12);
        assert!(fp.antisymmetry_residual() < 1e-14);
    }

    #[test]
    fn frame_orthonormal_for_generic_metric() {
        let d = InitialDataSet::new(
            "generic",
            3,
            Arc::new(AnalyticField::new(3, "g", |x| {
                let s = (x[0] * 0.3).sin() * 0.1;
                let c = (x[1] * x[2] * 0.2).cos() * 0.05;
                vec![
                    1.0 + s + x[2] * 0.02,
                    c,
                    x[0] * 0.01,
                    c,
                    1.2 + c,
                    s * 0.3,
                    x[0] * 0.01,
                    s * 0.3,
                    0.9 + x[1] * x[1] * 0.01,
                ]
            })),
            Arc::new(AnalyticField::zero(3)),
            1.0,
        )
        .unwrap();
        let x = [1.4, -0.6, 0.8];
        let loc = LocalGeometry::at(&d, &x).unwrap();
        assert!(loc.frame.orthonormality_residual(&loc.g) < 1e-12);
        assert!(loc.frame.antisymmetry_residual() < 1e-13);
        // lower-triangular convention: e_α has no x_n component for α < n−1
        assert!(loc.frame.frame[(2, 0)].abs() < 1e-15 && loc.frame.frame[(2, 1)].abs() < 1e-15);
    }

    #[test]
    fn boundary_geometry_flat_and_diagonal_p() {
        let n = 3;
        let c = 0.4;
        let d = InitialDataSet::new(
            "p=c delta",
            n,
            Arc::new(AnalyticField::euclidean(n)),
            Arc::new(AnalyticField::constant(DMatrix::identity(n, n) * c)),
            1.0,
        )
        .unwrap();
        let b = boundary_geometry(&d, &[2.0, 1.0, 0.0]).unwrap();
        assert_eq!(b.mean_curvature, 0.0);
        assert_eq!(b.normal, vec![0.0, 0.0, -1.0]);
        assert!((b.trace_p - (n as f64 - 1.0) * c).abs() < 1e-15);
        assert_eq!(b.p_normal_tangential_norm, 0.0);
        assert!(matches!(boundary_geometry(&d, &[2.0, 1.0, 0.1]), Err(Error::NotOnBoundary { .. })));
    }

    #[test]
    fn offset_conformal_boundary_mean_curvature() {
        // g = u⁴δ, u centred below the boundary: H = u⁻² · 4 ∂_{−z} ln u
        let zc = -0.5;
        let u = move |x: &[Jet]| {
            let r = (x[0] * x[0] + x[1] * x[1] + (x[2] - zc) * (x[2] - zc)).sqrt();
            1.0 + 0.5 * r.recip()
        };
        let d = conformal(u);
        let x = [1.5, 0.5, 0.0];
        let b = boundary_geometry(&d, &x).unwrap();
        let r = (x[0] * x[0] + x[1] * x[1] + zc * zc).sqrt();
        let uv = 1.0 + 0.5 / r;
        let dz = -0.5 * (x[2] - zc) / r.powi(3);
        let expect = uv.powi(-2) * 4.0 * (-dz) / uv;
        assert!((b.mean_curvature - expect).abs() < 1e-13, "{} vs {expect}", b.mean_curvature);
        assert!(b.mean_curvature > 0.0);
        // h is symmetric
        let h = &b.second_fundamental_form;
        assert!((h - h.transpose()).amax() < 1e-14);
    }

    #[test]
    fn grid_christoffel_converges_at_second_order() {
        let d = conformal(|x| 1.0 + 0.5 * norm_sq(x).sqrt().recip());
        let x = vec![2.0, 0.5, 0.0];
        let exact = christoffel(&d, &x).unwrap();
        let mut errs = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let patch = GridPatch::new(vec![2.0 - 4.0 * h, 0.5 - 4.0 * h, 0.0], h, vec![9, 9, 9]).unwrap();
            let gd = d.to_grid(patch).unwrap();
            let approx = christoffel(&gd, &x).unwrap();
            let mut m: f64 = 0.0;
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        m = m.max((approx.get(k, i, j) - exact.get(k, i, j)).abs());
                    }
                }
            }
            errs.push(m);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} errs {errs:?}");
        }
    }

    #[test]
    fn decay_ladder_detects_schwarzschild_falloff() {
        let d = conformal(|x| 1.0 + 0.5 * norm_sq(x).sqrt().recip());
        let (ladder, ok) = decay_ladder(&d, &[4.0, 8.0, 16.0, 32.0, 64.0]).unwrap();
        assert!(ok, "{ladder:?}");
    }

    #[test]
    fn excised_ball_and_lower_half_rejected() {
        let d = flat(3);
        assert!(LocalGeometry::at(&d, &[0.5, 0.2, 0.1]).is_err());
        assert!(LocalGeometry::at(&d, &[2.0, 0.2, -0.1]).is_err());
    }
}
