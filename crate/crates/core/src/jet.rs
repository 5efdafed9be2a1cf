//! Second-order forward-mode jets.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to up to [`MAX_DIM`] independent variables. Closed-form field
//! components written against `Jet` arithmetic yield exact first and second
//! partial derivatives, which is what the analytic backend relies on.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub const MAX_DIM: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; MAX_DIM],
    pub h: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet {
            v,
            d: [0.0; MAX_DIM],
            h: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    /// The coordinate function `x_k` evaluated at `v`.
    pub fn variable(v: f64, k: usize) -> Self {
        let mut j = Jet::constant(v);
        j.d[k] = 1.0;
        j
    }

    /// Seeds a point as a vector of independent variables.
    pub fn point(x: &[f64]) -> Vec<Jet> {
        assert!(x.len() <= MAX_DIM, "jet dimension exceeds MAX_DIM");
        x.iter().enumerate().map(|(k, &v)| Jet::variable(v, k)).collect()
    }

    /// Applies a scalar function given its value and first two derivatives.
    #[inline]
    fn chain(self, f: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet::constant(f);
        for i in 0..MAX_DIM {
            out.d[i] = f1 * self.d[i];
        }
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                out.h[i][j] = f1 * self.h[i][j] + f2 * self.d[i] * self.d[j];
            }
        }
        out
    }

    pub fn sqrt(self) -> Jet {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn powf(self, p: f64) -> Jet {
        let f = self.v.powf(p);
        let f1 = p * self.v.powf(p - 1.0);
        let f2 = p * (p - 1.0) * self.v.powf(p - 2.0);
        self.chain(f, f1, f2)
    }

    pub fn powi(self, p: i32) -> Jet {
        let f = self.v.powi(p);
        let f1 = p as f64 * self.v.powi(p - 1);
        let f2 = (p * (p - 1)) as f64 * self.v.powi(p - 2);
        self.chain(f, f1, f2)
    }

    pub fn recip(self) -> Jet {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn exp(self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Jet {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn sin(self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn value(&self) -> f64 {
        self.v
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, o: Jet) -> Jet {
        self.v += o.v;
        for i in 0..MAX_DIM {
            self.d[i] += o.d[i];
            for j in 0..MAX_DIM {
                self.h[i][j] += o.h[i][j];
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(mut self) -> Jet {
        self.v = -self.v;
        for i in 0..MAX_DIM {
            self.d[i] = -self.d[i];
            for j in 0..MAX_DIM {
                self.h[i][j] = -self.h[i][j];
            }
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for i in 0..MAX_DIM {
            out.d[i] = self.v * o.d[i] + o.v * self.d[i];
        }
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                out.h[i][j] = self.v * o.h[i][j]
                    + o.v * self.h[i][j]
                    + self.d[i] * o.d[j]
                    + o.d[i] * self.d[j];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, o: f64) -> Jet {
        self.v += o;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, o: f64) -> Jet {
        self.v -= o;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, o: f64) -> Jet {
        self.v *= o;
        for i in 0..MAX_DIM {
            self.d[i] *= o;
            for j in 0..MAX_DIM {
                self.h[i][j] *= o;
            }
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, o: f64) -> Jet {
        self * (1.0 / o)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        o + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        (-o) + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        o * self
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        o.recip() * self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, o: Jet) {
        *self = *self - o;
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, o: f64) {
        *self = *self * o;
    }
}

/// Euclidean norm squared of a jet vector.
pub fn norm_sq(x: &[Jet]) -> Jet {
    x.iter().fold(Jet::constant(0.0), |acc, &c| acc + c * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(&[Jet]) -> Jet, x: &[f64]) {
        let j = f(&Jet::point(x));
        let h = 1e-4;
        let eval = |y: &[f64]| f(&y.iter().map(|&v| Jet::constant(v)).collect::<Vec<_>>()).v;
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let d = (eval(&xp) - eval(&xm)) / (2.0 * h);
            assert!((d - j.d[i]).abs() < 1e-6, "d{i}: {d} vs {}", j.d[i]);
            for k in 0..x.len() {
                let mut pp = x.to_vec();
                let mut pm = x.to_vec();
                let mut mp = x.to_vec();
                let mut mm = x.to_vec();
                pp[i] += h;
                pp[k] += h;
                pm[i] += h;
                pm[k] -= h;
                mp[i] -= h;
                mp[k] += h;
                mm[i] -= h;
                mm[k] -= h;
                let d2 = (eval(&pp) - eval(&pm) - eval(&mp) + eval(&mm)) / (4.0 * h * h);
                assert!((d2 - j.h[i][k]).abs() < 1e-5, "h{i}{k}: {d2} vs {}", j.h[i][k]);
            }
        }
    }

    #[test]
    fn composite_functions_match_finite_differences() {
        fd_check(
            |x| (x[0] * x[1] + 1.0).sqrt() * x[2].sin() + (x[0] / (1.0 + x[2] * x[2])).exp(),
            &[0.7, 1.3, -0.4],
        );
        fd_check(
            |x| norm_sq(x).powf(-1.5) + norm_sq(x).ln() * x[1].cos() - x[0].powi(3),
            &[1.1, 0.2, 0.9],
        );
    }

    #[test]
    fn constants_have_no_derivatives() {
        let c = Jet::constant(3.0) * 2.0 + 1.0;
        assert_eq!(c.v, 7.0);
        assert!(c.d.iter().all(|&v| v == 0.0));
    }
}
