//! Symmetric 2-tensor fields on the half-space chart.
//!
//! Two backends share the [`TensorField`] interface: [`AnalyticField`]
//! evaluates closed-form components with exact partials through [`Jet`]
//! arithmetic, and [`GridField`] stores node samples and differentiates them
//! with second-order stencils (one-sided on the faces of the box).

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::GridPatch;
use crate::jet::Jet;

/// Value, first and second coordinate partials of a tensor at a point.
/// `d1[k] = ∂_k T`, `d2[k][l] = ∂_k ∂_l T`.
#[derive(Clone, Debug)]
pub struct TensorJet {
    pub value: DMatrix<f64>,
    pub d1: Vec<DMatrix<f64>>,
    pub d2: Vec<Vec<DMatrix<f64>>>,
}

impl TensorJet {
    pub fn zeros(n: usize) -> Self {
        TensorJet {
            value: DMatrix::zeros(n, n),
            d1: vec![DMatrix::zeros(n, n); n],
            d2: vec![vec![DMatrix::zeros(n, n); n]; n],
        }
    }
}

pub trait TensorField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn jet(&self, x: &[f64]) -> Result<TensorJet>;

    fn value(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.jet(x)?.value)
    }
}

pub type ComponentFn = dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync;

/// Closed-form field: the closure returns the `n*n` components (row-major)
/// as jets of the seeded point.
#[derive(Clone)]
pub struct AnalyticField {
    n: usize,
    label: String,
    components: Arc<ComponentFn>,
}

impl AnalyticField {
    pub fn new(
        n: usize,
        label: impl Into<String>,
        components: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    ) -> Self {
        AnalyticField { n, label: label.into(), components: Arc::new(components) }
    }

    /// `scale(x) * δ`.
    pub fn conformal(
        n: usize,
        label: impl Into<String>,
        scale: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static,
    ) -> Self {
        AnalyticField::new(n, label, move |x| {
            let s = scale(x);
            let mut out = vec![Jet::constant(0.0); n * n];
            for i in 0..n {
                out[i * n + i] = s;
            }
            out
        })
    }

    pub fn euclidean(n: usize) -> Self {
        AnalyticField::conformal(n, "delta", |_| Jet::constant(1.0))
    }

    pub fn zero(n: usize) -> Self {
        AnalyticField::new(n, "zero", move |_| vec![Jet::constant(0.0); n * n])
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        AnalyticField::new(n, "constant", move |_| {
            (0..n * n).map(|k| Jet::constant(m[(k / n, k % n)])).collect()
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Evaluates the raw component jets.
    pub fn components(&self, x: &[Jet]) -> Vec<Jet> {
        (self.components)(x)
    }
}

impl fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnalyticField({}, n={})", self.label, self.n)
    }
}

impl TensorField for AnalyticField {
    fn dim(&self) -> usize {
        self.n
    }

    fn jet(&self, x: &[f64]) -> Result<TensorJet> {
        let n = self.n;
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        let c = (self.components)(&Jet::point(x));
        let mut out = TensorJet::zeros(n);
        for i in 0..n {
            for j in 0..n {
                // symmetrize so round-off in the closure cannot break symmetry
                let a = &c[i * n + j];
                let b = &c[j * n + i];
                out.value[(i, j)] = 0.5 * (a.v + b.v);
                for k in 0..n {
                    out.d1[k][(i, j)] = 0.5 * (a.d[k] + b.d[k]);
                    for l in 0..n {
                        out.d2[k][l][(i, j)] = 0.5 * (a.h[k][l] + b.h[k][l]);
                    }
                }
            }
        }
        Ok(out)
    }

    fn value(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n;
        let pt: Vec<Jet> = x.iter().map(|&v| Jet::constant(v)).collect();
        let c = (self.components)(&pt);
        Ok(DMatrix::from_fn(n, n, |i, j| 0.5 * (c[i * n + j].v + c[j * n + i].v)))
    }
}

/// Node samples of a tensor field with finite-difference partials.
#[derive(Clone, Debug)]
pub struct GridField {
    patch: GridPatch,
    values: Vec<DMatrix<f64>>,
}

impl GridField {
    pub fn sample(source: &dyn TensorField, patch: GridPatch) -> Result<Self> {
        if source.dim() != patch.dim() {
            return Err(Error::DimensionMismatch { expected: source.dim(), got: patch.dim() });
        }
        let values = patch
            .nodes()
            .map(|idx| source.value(&patch.point(&idx)))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridField { patch, values })
    }

    pub fn patch(&self) -> &GridPatch {
        &self.patch
    }

    fn at(&self, idx: &[usize]) -> &DMatrix<f64> {
        &self.values[self.patch.linear(idx)]
    }

    fn first(&self, idx: &[usize], axis: usize) -> Result<DMatrix<f64>> {
        let n = self.patch.dim();
        let mut acc = DMatrix::zeros(n, n);
        for (o, w) in self.patch.first_stencil(axis, idx[axis]) {
            let j = self.patch.offset(idx, axis, o)?;
            acc += self.at(&j) * w;
        }
        Ok(acc)
    }
}

impl TensorField for GridField {
    fn dim(&self) -> usize {
        self.patch.dim()
    }

    fn jet(&self, x: &[f64]) -> Result<TensorJet> {
        let idx = self
            .patch
            .node_of(x)
            .ok_or_else(|| Error::NotAGridNode { point: x.to_vec() })?;
        let n = self.dim();
        let mut out = TensorJet::zeros(n);
        out.value = self.at(&idx).clone();
        for k in 0..n {
            out.d1[k] = self.first(&idx, k)?;
        }
        for k in 0..n {
            for l in k..n {
                let m = if k == l {
                    let mut acc = DMatrix::zeros(n, n);
                    for (o, w) in self.patch.second_stencil(k, idx[k]) {
                        let j = self.patch.offset(&idx, k, o)?;
                        acc += self.at(&j) * w;
                    }
                    acc
                } else {
                    let mut acc = DMatrix::zeros(n, n);
                    for (o, w) in self.patch.first_stencil(k, idx[k]) {
                        let j = self.patch.offset(&idx, k, o)?;
                        acc += self.first(&j, l)? * w;
                    }
                    acc
                };
                out.d2[l][k] = m.clone();
                out.d2[k][l] = m;
            }
        }
        Ok(out)
    }

    fn value(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let idx = self
            .patch
            .node_of(x)
            .ok_or_else(|| Error::NotAGridNode { point: x.to_vec() })?;
        Ok(self.at(&idx).clone())
    }
}

/// Push-forward of a field through the Euclidean isometry `x ↦ R x + t`:
/// `T'(x) = R T(Rᵀ(x − t)) Rᵀ`.
#[derive(Clone, Debug)]
pub struct MovedField {
    base: Arc<dyn TensorField>,
    rotation: DMatrix<f64>,
    translation: Vec<f64>,
}

impl MovedField {
    pub fn new(base: Arc<dyn TensorField>, rotation: DMatrix<f64>, translation: Vec<f64>) -> Self {
        MovedField { base, rotation, translation }
    }

    fn source_point(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.rotation[(j, i)] * (x[j] - self.translation[j])).sum())
            .collect()
    }
}

impl TensorField for MovedField {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn jet(&self, x: &[f64]) -> Result<TensorJet> {
        let r = &self.rotation;
        let rt = r.transpose();
        let src = self.base.jet(&self.source_point(x))?;
        let n = self.dim();
        let conj = |m: &DMatrix<f64>| r * m * &rt;
        // ∂_k T'(x) = R (Σ_a R_{ka} ∂_a T) Rᵀ since ∂y_a/∂x_k = R_{ka}
        let d1_src: Vec<DMatrix<f64>> = src.d1.iter().map(conj).collect();
        let d1 = (0..n)
            .map(|k| {
                (0..n).fold(DMatrix::zeros(n, n), |acc, a| acc + &d1_src[a] * r[(k, a)])
            })
            .collect();
        let d2_src: Vec<Vec<DMatrix<f64>>> =
            src.d2.iter().map(|row| row.iter().map(conj).collect()).collect();
        let d2 = (0..n)
            .map(|k| {
                (0..n)
                    .map(|l| {
                        let mut acc = DMatrix::zeros(n, n);
                        for a in 0..n {
                            for b in 0..n {
                                acc += &d2_src[a][b] * (r[(k, a)] * r[(l, b)]);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(TensorJet { value: conj(&src.value), d1, d2 })
    }
}
