//! Uniform boxed grids and second-order finite-difference stencils.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform grid over an axis-aligned box: `lo + i*h` along every axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPatch {
    pub lo: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
}

/// A list of `(offset, weight)` pairs along one axis.
pub type Stencil = Vec<(isize, f64)>;

impl GridPatch {
    pub fn new(lo: Vec<f64>, h: f64, shape: Vec<usize>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {h}")));
        }
        if lo.len() != shape.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: shape.len() });
        }
        if shape.iter().any(|&s| s < 4) {
            return Err(Error::InvalidParameter("every grid axis needs at least 4 nodes".into()));
        }
        Ok(GridPatch { lo, h, shape })
    }

    /// A cube of half-width `half` centred at `center`; the centre is always a node.
    pub fn centered(center: &[f64], half: f64, h: f64) -> Result<Self> {
        let k = (half / h).round() as usize;
        let lo = center.iter().map(|c| c - k as f64 * h).collect();
        GridPatch::new(lo, h, vec![2 * k + 1; center.len()])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hi(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.shape)
            .map(|(l, &s)| l + (s - 1) as f64 * self.h)
            .collect()
    }

    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(&self.lo).map(|(&i, l)| l + i as f64 * self.h).collect()
    }

    pub fn linear(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        for (a, &i) in idx.iter().enumerate() {
            k = k * self.shape[a] + i;
        }
        k
    }

    pub fn unlinear(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = k % self.shape[a];
            k /= self.shape[a];
        }
        idx
    }

    /// Node index of `x`, if `x` lies on a node (to within `1e-9 h`).
    pub fn node_of(&self, x: &[f64]) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.dim());
        for a in 0..self.dim() {
            let t = (x[a] - self.lo[a]) / self.h;
            let r = t.round();
            if (t - r).abs() > 1e-9 || r < 0.0 || r as usize >= self.shape[a] {
                return None;
            }
            idx.push(r as usize);
        }
        Some(idx)
    }

    pub fn offset(&self, idx: &[usize], axis: usize, by: isize) -> Result<Vec<usize>> {
        let mut out = idx.to_vec();
        let j = idx[axis] as isize + by;
        if j < 0 || j as usize >= self.shape[axis] {
            let node = idx.iter().map(|&i| i as isize).collect();
            return Err(Error::StencilOutOfPatch { node });
        }
        out[axis] = j as usize;
        Ok(out)
    }

    /// Second-order first-derivative stencil at position `i` along `axis`:
    /// central in the interior, one-sided on the faces.
    pub fn first_stencil(&self, axis: usize, i: usize) -> Stencil {
        first_derivative_stencil(i, self.shape[axis], self.h)
    }

    pub fn second_stencil(&self, axis: usize, i: usize) -> Stencil {
        second_derivative_stencil(i, self.shape[axis], self.h)
    }

    /// Whether `idx` sits on any face of the box.
    pub fn on_face(&self, idx: &[usize]) -> bool {
        idx.iter().zip(&self.shape).any(|(&i, &s)| i == 0 || i + 1 == s)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(move |k| self.unlinear(k))
    }
}

pub fn first_derivative_stencil(i: usize, len: usize, h: f64) -> Stencil {
    if i == 0 {
        vec![(0, -1.5 / h), (1, 2.0 / h), (2, -0.5 / h)]
    } else if i + 1 == len {
        vec![(0, 1.5 / h), (-1, -2.0 / h), (-2, 0.5 / h)]
    } else {
        vec![(-1, -0.5 / h), (1, 0.5 / h)]
    }
}

pub fn second_derivative_stencil(i: usize, len: usize, h: f64) -> Stencil {
    let h2 = h * h;
    if i == 0 {
        vec![(0, 2.0 / h2), (1, -5.0 / h2), (2, 4.0 / h2), (3, -1.0 / h2)]
    } else if i + 1 == len {
        vec![(0, 2.0 / h2), (-1, -5.0 / h2), (-2, 4.0 / h2), (-3, -1.0 / h2)]
    } else {
        vec![(-1, 1.0 / h2), (0, -2.0 / h2), (1, 1.0 / h2)]
    }
}

/// Composite Simpson weights for `len` nodes (odd) with spacing `h`;
/// falls back to trapezoid weights when `len` is even.
pub fn simpson_weights(len: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; len];
    if len % 2 == 1 && len >= 3 {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = if i == 0 || i + 1 == len {
                h / 3.0
            } else if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
        }
    } else {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = if i == 0 || i + 1 == len { h / 2.0 } else { h };
        }
    }
    w
}
