//! Product quadrature on coordinate spheres and half-spheres.
//!
//! Each level of the recursion integrates in `t = x_{k+1}` against the
//! Gegenbauer weight `(1 − t²)^{(k−2)/2}` with a Gauss rule and places a
//! scaled copy of the `S^{k−1}` rule on each slice. `S¹` uses the uniform
//! trapezoid rule. The half-sphere uses the same construction with `t ∈ [0, 1]`,
//! so its equator nodes coincide with the corner sphere rule.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Nodes and weights of a one-dimensional Gauss rule.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Golub–Welsch from a Jacobi matrix with diagonal `a`, off-diagonal `b`
/// and total mass `mu0`. Nodes are returned in ascending order.
fn golub_welsch(a: &[f64], b: &[f64], mu0: f64) -> GaussRule {
    let m = a.len();
    let mut t = DMatrix::zeros(m, m);
    for k in 0..m {
        t[(k, k)] = a[k];
        if k + 1 < m {
            t[(k, k + 1)] = b[k];
            t[(k + 1, k)] = b[k];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|k| (eig.eigenvalues[k], mu0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss–Jacobi rule on `[−1, 1]` for the weight `(1 − x)^α (1 + x)^β`.
pub fn gauss_jacobi(m: usize, alpha: f64, beta: f64) -> GaussRule {
    let ab = alpha + beta;
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m.saturating_sub(1)];
    for (k, ak) in a.iter_mut().enumerate() {
        let kf = k as f64;
        *ak = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
    }
    for (k1, bk) in b.iter_mut().enumerate() {
        let k = (k1 + 1) as f64;
        let s = 2.0 * k + ab;
        let num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
        let den = s * s * (s + 1.0) * (s - 1.0);
        *bk = (num / den).sqrt();
    }
    let mu0 = 2f64.powf(ab + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(ab + 2.0);
    golub_welsch(&a, &b, mu0)
}

pub fn gauss_legendre(m: usize) -> GaussRule {
    gauss_jacobi(m, 0.0, 0.0)
}

/// Gauss rule for a discrete measure, via the Stieltjes procedure.
fn gauss_from_discrete(x: &[f64], w: &[f64], m: usize) -> GaussRule {
    let mu0: f64 = w.iter().sum();
    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut prev = vec![0.0; x.len()];
    let mut cur: Vec<f64> = vec![1.0 / mu0.sqrt(); x.len()];
    let mut beta_prev = 0.0;
    for k in 0..m {
        let ak: f64 = (0..x.len()).map(|j| w[j] * x[j] * cur[j] * cur[j]).sum();
        a.push(ak);
        if k + 1 == m {
            break;
        }
        let mut next: Vec<f64> = (0..x.len())
            .map(|j| (x[j] - ak) * cur[j] - beta_prev * prev[j])
            .collect();
        let norm: f64 = (0..x.len()).map(|j| w[j] * next[j] * next[j]).sum::<f64>().sqrt();
        next.iter_mut().for_each(|v| *v /= norm);
        b.push(norm);
        beta_prev = norm;
        prev = std::mem::replace(&mut cur, next);
    }
    golub_welsch(&a, &b, mu0)
}

/// Gauss rule on `[0, 1]` for the weight `(1 − t²)^a`, `a ≥ 0`.
pub fn half_gegenbauer(m: usize, a: f64) -> GaussRule {
    if a == 0.0 {
        let g = gauss_legendre(m);
        return GaussRule {
            nodes: g.nodes.iter().map(|s| 0.5 * (s + 1.0)).collect(),
            weights: g.weights.iter().map(|w| 0.5 * w).collect(),
        };
    }
    // (1 − t)^a is handled exactly by Gauss–Jacobi; (1 + t)^a is analytic on [0, 1].
    let fine = gauss_jacobi(4 * m + 64, a, 0.0);
    let scale = 0.5f64.powf(a + 1.0);
    let (x, w): (Vec<f64>, Vec<f64>) = fine
        .nodes
        .iter()
        .zip(&fine.weights)
        .map(|(s, w)| {
            let t = 0.5 * (s + 1.0);
            (t, w * scale * (1.0 + t).powf(a))
        })
        .unzip();
    gauss_from_discrete(&x, &w, m)
}

/// Nodes (unit vectors) and area weights for the unit sphere or half-sphere.
#[derive(Clone, Debug)]
pub struct SphereRule {
    /// Ambient dimension.
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Gauss points per polar level.
    pub order: usize,
    /// Exponent `k` of the area scaling `r^k` (the sphere's own dimension).
    pub area_power: i32,
}

impl SphereRule {
    /// Full unit sphere `S^{dim−1} ⊂ R^dim`, `dim ≥ 2`.
    pub fn sphere(dim: usize, order: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::UnsupportedDimension { n: dim, supported: "sphere rules need dim >= 2" });
        }
        if order == 0 {
            return Err(Error::InvalidParameter("quadrature order must be positive".into()));
        }
        if dim == 2 {
            let m = 2 * order;
            let w = 2.0 * std::f64::consts::PI / m as f64;
            let points = (0..m)
                .map(|k| {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                    vec![phi.cos(), phi.sin()]
                })
                .collect();
            return Ok(SphereRule { dim, points, weights: vec![w; m], order, area_power: 1 });
        }
        let a = (dim as f64 - 3.0) / 2.0;
        let polar = gauss_jacobi(order, a, a);
        Ok(Self::extend(dim, &polar, &Self::sphere(dim - 1, order)?, order))
    }

    /// Upper half-sphere `{|x| = 1, x_dim ≥ 0}`, `dim ≥ 2`.
    pub fn hemisphere(dim: usize, order: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::UnsupportedDimension { n: dim, supported: "sphere rules need dim >= 2" });
        }
        if dim == 2 {
            let g = gauss_legendre(order);
            let (mut points, mut weights) = (Vec::new(), Vec::new());
            for (s, w) in g.nodes.iter().zip(&g.weights) {
                let phi = std::f64::consts::FRAC_PI_2 * (s + 1.0);
                points.push(vec![phi.cos(), phi.sin()]);
                weights.push(std::f64::consts::FRAC_PI_2 * w);
            }
            return Ok(SphereRule { dim, points, weights, order, area_power: 1 });
        }
        let a = (dim as f64 - 3.0) / 2.0;
        let polar = half_gegenbauer(order, a);
        Ok(Self::extend(dim, &polar, &Self::sphere(dim - 1, order)?, order))
    }

    fn extend(dim: usize, polar: &GaussRule, slice: &SphereRule, order: usize) -> SphereRule {
        let mut points = Vec::with_capacity(polar.nodes.len() * slice.points.len());
        let mut weights = Vec::with_capacity(points.capacity());
        for (&t, &wt) in polar.nodes.iter().zip(&polar.weights) {
            let s = (1.0 - t * t).max(0.0).sqrt();
            for (p, &wp) in slice.points.iter().zip(&slice.weights) {
                let mut x: Vec<f64> = p.iter().map(|c| c * s).collect();
                x.push(t);
                points.push(x);
                weights.push(wt * wp);
            }
        }
        SphereRule { dim, points, weights, order, area_power: dim as i32 - 1 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Integrates `f(x, unit)` over the sphere of radius `r`, summing in node order.
    pub fn integrate(&self, r: f64, mut f: impl FnMut(&[f64], &[f64]) -> f64) -> f64 {
        let jac = r.powi(self.area_power);
        let mut acc = 0.0;
        let mut x = vec![0.0; self.dim];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (xi, pi) in x.iter_mut().zip(p) {
                *xi = r * pi;
            }
            acc += w * f(&x, p);
        }
        acc * jac
    }
}

/// The rules used for half-sphere flux integrals in `R^n`: the half-sphere
/// `S₊^{n−1}` and its boundary `S^{n−2}` sitting in `{x_n = 0}`.
#[derive(Clone, Debug)]
pub struct FluxRules {
    pub hemisphere: SphereRule,
    pub corner: SphereRule,
}

impl FluxRules {
    pub fn new(n: usize, order: usize) -> Result<Self> {
        let hemisphere = SphereRule::hemisphere(n, order)?;
        let c = SphereRule::sphere(n - 1, order)?;
        let corner = SphereRule {
            dim: n,
            points: c
                .points
                .iter()
                .map(|p| {
                    let mut q = p.clone();
                    q.push(0.0);
                    q
                })
                .collect(),
            weights: c.weights,
            order,
            area_power: n as i32 - 2,
        };
        Ok(FluxRules { hemisphere, corner })
    }
}

/// Area of the unit sphere `S^{dim−1}`.
pub fn sphere_area(dim: usize) -> f64 {
    let d = dim as f64;
    2.0 * std::f64::consts::PI.powf(d / 2.0) / gamma(d / 2.0)
}
