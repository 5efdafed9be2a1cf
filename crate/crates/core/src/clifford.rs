//! Complex Clifford representation of the spacetime algebra `Cl(n,1)` and the
//! boundary chirality operator.
//!
//! Index 0 is the timelike generator, `1..=n` are spatial and index `n` plays
//! the role of the outward boundary normal. Generators satisfy
//! `γᵃγᵇ + γᵇγᵃ = −2ηᵃᵇ` with `η = diag(−1, 1, …, 1)`, so `γ⁰` is a Hermitian
//! involution and each spatial `γⁱ` is anti-Hermitian with square `−I`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type Spinor = DVector<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Spinor dimension `2^⌈(n+1)/2⌉`.
pub fn spinor_dim(n: usize) -> usize {
    1 << (n + 1).div_ceil(2)
}

#[derive(Clone, Debug)]
pub struct SpinorRep {
    n: usize,
    dim: usize,
    gamma: Vec<CMatrix>,
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn pauli() -> [CMatrix; 4] {
    let id = CMatrix::identity(2, 2);
    let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    let y = CMatrix::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)]);
    let z = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
    [id, x, y, z]
}

/// Hermitian pairwise anticommuting involutions on `k` qubits, `2k + 1` of them.
fn involutions(k: usize) -> Vec<CMatrix> {
    let [id, x, y, z] = pauli();
    let chain = |j: usize, mid: &CMatrix| {
        let mut m = CMatrix::identity(1, 1);
        for q in 0..k {
            let f = if q < j {
                &z
            } else if q == j {
                mid
            } else {
                &id
            };
            m = kron(&m, f);
        }
        m
    };
    let mut out = Vec::with_capacity(2 * k + 1);
    for j in 0..k {
        out.push(chain(j, &x));
        out.push(chain(j, &y));
    }
    out.push(chain(k, &id));
    out
}

pub fn build_rep(n: usize) -> Result<SpinorRep> {
    if !(3..=6).contains(&n) {
        return Err(Error::UnsupportedDimension { n, supported: "3..=6" });
    }
    let k = (n + 1).div_ceil(2);
    let e = involutions(k);
    let gamma = (0..=n).map(|a| if a == 0 { e[0].clone() } else { &e[a] * I }).collect();
    Ok(SpinorRep { n, dim: spinor_dim(n), gamma })
}

impl SpinorRep {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Generator `γᵃ`, `a ∈ 0..=n`.
    pub fn gamma(&self, a: usize) -> &CMatrix {
        &self.gamma[a]
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::identity(self.dim, self.dim)
    }

    /// Product of generators in the given order.
    pub fn product(&self, idx: &[usize]) -> CMatrix {
        idx.iter().fold(self.identity(), |m, &a| m * &self.gamma[a])
    }

    /// Max entry of `γᵃγᵇ + γᵇγᵃ + 2ηᵃᵇ` over all pairs.
    pub fn clifford_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..=self.n {
            for b in 0..=self.n {
                let mut m = &self.gamma[a] * &self.gamma[b] + &self.gamma[b] * &self.gamma[a];
                if a == b {
                    let eta = if a == 0 { -1.0 } else { 1.0 };
                    m += self.identity() * c(2.0 * eta);
                }
                worst = worst.max(max_abs(&m));
            }
        }
        worst
    }

    /// Max deviation of `γ⁰` from Hermitian and of `γⁱ` from anti-Hermitian.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = max_abs(&(&self.gamma[0] - self.gamma[0].adjoint()));
        for a in 1..=self.n {
            worst = worst.max(max_abs(&(&self.gamma[a] + self.gamma[a].adjoint())));
        }
        worst
    }

    /// Max of `|γ⁰γᵃ − (γᵃ)†γ⁰|`, i.e. Clifford multiplication is symmetric
    /// for the pairing `(φ, ψ) = ⟨γ⁰φ, ψ⟩`.
    pub fn pairing_symmetry_residual(&self) -> f64 {
        (0..=self.n)
            .map(|a| {
                max_abs(&(&self.gamma[0] * &self.gamma[a] - self.gamma[a].adjoint() * &self.gamma[0]))
            })
            .fold(0.0, f64::max)
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermitian product `⟨φ, ψ⟩ = ψ†φ`, linear in the first slot.
pub fn inner(phi: &Spinor, psi: &Spinor) -> Complex64 {
    psi.dotc(phi)
}

/// `(φ, ψ) = ⟨γ⁰φ, ψ⟩`.
pub fn dirac_pairing(rep: &SpinorRep, phi: &Spinor, psi: &Spinor) -> Complex64 {
    inner(&(rep.gamma(0) * phi), psi)
}

fn check_theta(theta: f64) -> Result<()> {
    let half = std::f64::consts::FRAC_PI_2;
    if !theta.is_finite() || theta.abs() > half + 1e-15 {
        return Err(Error::AngleOutOfRange { value: theta, range: "[-pi/2, pi/2]" });
    }
    Ok(())
}

/// Boundary chirality operator `Q = cos θ γ⁰γⁿ + i sin θ γⁿ`.
#[derive(Clone, Debug)]
pub struct ChiralityOp {
    pub theta: f64,
    pub matrix: CMatrix,
}

impl ChiralityOp {
    pub fn new(rep: &SpinorRep, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        let n = rep.n();
        let matrix = rep.product(&[0, n]) * c(theta.cos()) + rep.gamma(n) * (I * theta.sin());
        Ok(Self { theta, matrix })
    }

    /// `½(I + sQ)`.
    pub fn projector(&self, sign: i8) -> CMatrix {
        let d = self.matrix.nrows();
        (CMatrix::identity(d, d) + &self.matrix * c(sign as f64)) * c(0.5)
    }

    /// `|Qφ − sφ|`.
    pub fn eigen_defect(&self, phi: &Spinor, sign: i8) -> f64 {
        (&self.matrix * phi - phi * c(sign as f64)).norm()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaRow {
    pub item: u8,
    pub identity: &'static str,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaTable {
    pub n: usize,
    pub thetas: Vec<f64>,
    pub rows: Vec<LemmaRow>,
}

impl LemmaTable {
    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.max_residual).fold(0.0, f64::max)
    }
}

/// Evaluates every algebraic identity satisfied by `Q` over all tangential
/// index pairs and the given angles.
pub fn verify_q_lemma(rep: &SpinorRep, thetas: &[f64]) -> Result<LemmaTable> {
    let n = rep.n();
    let id = rep.identity();
    let names: [&'static str; 13] = [
        "Q^2 = I and Q Hermitian",
        "{g^n, Q} = -2i sin(theta)",
        "{g^a g^b g^n, Q} = -2i sin(theta) g^a g^b",
        "{g^0, Q} = 0",
        "{g^a g^b g^0, Q} = 0",
        "[g^a, Q] = 2i sin(theta) g^a g^n",
        "{g^a, Q} = 2 cos(theta) g^a g^0 g^n",
        "{g^a g^n, Q} = 0",
        "{g^n g^0, Q} = -2 cos(theta)",
        "{g^a g^b g^0 g^n, Q} = 2 cos(theta) g^a g^b",
        "{g^a g^0, Q} = 2i sin(theta) g^a g^0 g^n",
        "[g^a g^b, Q] = 0 for a != b",
        "[g^a g^n g^0, Q] = 0",
    ];
    let mut worst = [0.0f64; 13];
    let anti = |m: &CMatrix, q: &CMatrix| m * q + q * m;
    let comm = |m: &CMatrix, q: &CMatrix| m * q - q * m;
    for &theta in thetas {
        let q = ChiralityOp::new(rep, theta)?.matrix;
        let (ct, st) = (c(theta.cos()), theta.sin());
        let is = I * st;
        let mut up = |k: usize, v: f64| worst[k] = worst[k].max(v);
        up(0, max_abs(&(&q * &q - &id)).max(max_abs(&(&q - q.adjoint()))));
        up(1, max_abs(&(anti(rep.gamma(n), &q) + &id * (is * 2.0))));
        up(3, max_abs(&anti(rep.gamma(0), &q)));
        up(8, max_abs(&(anti(&rep.product(&[n, 0]), &q) + &id * (ct * 2.0))));
        for a in 1..n {
            let ga = rep.gamma(a);
            up(5, max_abs(&(comm(ga, &q) - rep.product(&[a, n]) * (is * 2.0))));
            up(6, max_abs(&(anti(ga, &q) - rep.product(&[a, 0, n]) * (ct * 2.0))));
            up(7, max_abs(&anti(&rep.product(&[a, n]), &q)));
            up(10, max_abs(&(anti(&rep.product(&[a, 0]), &q) - rep.product(&[a, 0, n]) * (is * 2.0))));
            up(12, max_abs(&comm(&rep.product(&[a, n, 0]), &q)));
            for b in 1..n {
                let ab = rep.product(&[a, b]);
                up(2, max_abs(&(anti(&rep.product(&[a, b, n]), &q) + &ab * (is * 2.0))));
                up(4, max_abs(&anti(&rep.product(&[a, b, 0]), &q)));
                up(9, max_abs(&(anti(&rep.product(&[a, b, 0, n]), &q) - &ab * (ct * 2.0))));
                if a != b {
                    up(11, max_abs(&comm(&ab, &q)));
                }
            }
        }
    }
    let rows = names
        .iter()
        .enumerate()
        .map(|(k, name)| LemmaRow { item: k as u8 + 1, identity: name, max_residual: worst[k] })
        .collect();
    Ok(LemmaTable { n, thetas: thetas.to_vec(), rows })
}

/// Residuals of the three pointwise boundary identities for a `Q`-eigenspinor.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryIdentities {
    /// `⟨iγⁿφ, φ⟩ − s sin θ |φ|²`.
    pub normal: f64,
    /// `⟨γⁿγ⁰φ, φ⟩ + s cos θ |φ|²`.
    pub normal_time: f64,
    /// Max over `α` of `⟨γᵅγ⁰φ, φ⟩ + s⟨i sin θ γᵅγⁿγ⁰φ, φ⟩`.
    pub tangential_time: f64,
}

impl BoundaryIdentities {
    pub fn max(&self) -> f64 {
        self.normal.max(self.normal_time).max(self.tangential_time)
    }
}

pub fn boundary_identities(
    rep: &SpinorRep,
    theta: f64,
    sign: i8,
    phi: &Spinor,
) -> Result<BoundaryIdentities> {
    let q = ChiralityOp::new(rep, theta)?;
    let scale = phi.norm().max(1e-300);
    let defect = q.eigen_defect(phi, sign) / scale;
    if defect > 1e-10 {
        return Err(Error::NotEigenspinor { defect });
    }
    let n = rep.n();
    let s = sign as f64;
    let norm2 = phi.norm_squared();
    let normal = (inner(&(rep.gamma(n) * phi * I), phi) - c(s * theta.sin() * norm2)).norm();
    let normal_time = (inner(&(rep.product(&[n, 0]) * phi), phi) + c(s * theta.cos() * norm2)).norm();
    let mut tangential_time = 0.0f64;
    for a in 1..n {
        let lhs = inner(&(rep.product(&[a, 0]) * phi), phi);
        let rhs = inner(&(rep.product(&[a, n, 0]) * phi * (I * theta.sin())), phi) * c(s);
        tangential_time = tangential_time.max((lhs + rhs).norm());
    }
    Ok(BoundaryIdentities { normal, normal_time, tangential_time })
}

/// `A = Σ_α P_α iγᵅγⁿγ⁰` for a tangential momentum `P̂`.
pub fn a_operator(rep: &SpinorRep, p_hat: &[f64]) -> Result<CMatrix> {
    let n = rep.n();
    if p_hat.len() != n - 1 {
        return Err(Error::DimensionMismatch { expected: n - 1, got: p_hat.len() });
    }
    let mut a = CMatrix::zeros(rep.dim(), rep.dim());
    for (k, p) in p_hat.iter().enumerate() {
        a += rep.product(&[k + 1, n, 0]) * (I * *p);
    }
    Ok(a)
}

#[derive(Clone, Debug, Serialize)]
pub struct AOperatorCheck {
    pub hermitian: f64,
    /// `|A² − |P̂|² I|`.
    pub square: f64,
    /// `|[A, Q]|`.
    pub commutator: f64,
}

pub fn check_a_operator(rep: &SpinorRep, p_hat: &[f64], theta: f64) -> Result<AOperatorCheck> {
    let a = a_operator(rep, p_hat)?;
    let q = ChiralityOp::new(rep, theta)?.matrix;
    let p2: f64 = p_hat.iter().map(|p| p * p).sum();
    Ok(AOperatorCheck {
        hermitian: max_abs(&(&a - a.adjoint())),
        square: max_abs(&(&a * &a - rep.identity() * c(p2))),
        commutator: max_abs(&(&a * &q - &q * &a)),
    })
}

/// A constant spinor adapted to the boundary condition and to `P̂`.
#[derive(Clone, Debug, Serialize)]
pub struct Phi0 {
    pub spinor: Vec<Complex64>,
    /// The signed angle actually used in `Q`.
    pub theta: f64,
    pub sign: i8,
    /// Eigenvalue of `A` on the spinor.
    pub lambda: f64,
}

impl Phi0 {
    pub fn vector(&self) -> Spinor {
        Spinor::from_column_slice(&self.spinor)
    }
}

/// Picks a unit spinor with `Q(θ')φ = sφ` and `Aφ = |P̂|φ`, where the sign of
/// `θ' = −s|θ|` makes `−s sin θ' |P̂| = sin|θ| |P̂|`.
pub fn choose_phi0(rep: &SpinorRep, theta: f64, p_hat: &[f64], sign: i8) -> Result<Phi0> {
    check_theta(theta)?;
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidParameter(format!("sign must be +1 or -1, got {sign}")));
    }
    let theta_used = -(sign as f64) * theta.abs();
    let q = ChiralityOp::new(rep, theta_used)?;
    let a = a_operator(rep, p_hat)?;
    let norm: f64 = p_hat.iter().map(|p| p * p).sum::<f64>().sqrt();
    let mut proj = q.projector(sign);
    if norm > 0.0 {
        let pa = (rep.identity() + &a * c(1.0 / norm)) * c(0.5);
        proj = pa * proj;
    }
    for j in 0..rep.dim() {
        let v = proj.column(j).into_owned();
        let len = v.norm();
        if len > 1e-8 {
            let v = v / c(len);
            return Ok(Phi0 { spinor: v.iter().copied().collect(), theta: theta_used, sign, lambda: norm });
        }
    }
    Err(Error::TrivialEigenspinor)
}

/// Seeded random spinor with standard normal components.
pub fn random_spinor(dim: usize, seed: u64) -> Spinor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Spinor::from_fn(dim, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Every algebraic check on one representation, over an angle grid.
#[derive(Clone, Debug, Serialize)]
pub struct CliffordSuite {
    pub n: usize,
    pub dim: usize,
    pub clifford: f64,
    pub lemma: LemmaTable,
    /// Max of `|tr P − dim/2|` and `|P² − P|` over both projectors.
    pub projector: f64,
    pub boundary: f64,
    pub a_operator: f64,
}

impl CliffordSuite {
    pub fn max_residual(&self) -> f64 {
        [self.clifford, self.lemma.max_residual(), self.projector, self.boundary, self.a_operator]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// `count` equally spaced angles covering `[−π/2, π/2]`.
pub fn theta_grid(count: usize) -> Vec<f64> {
    let h = std::f64::consts::FRAC_PI_2;
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|k| -h + 2.0 * h * k as f64 / (count - 1) as f64).collect(),
    }
}

pub fn clifford_suite(n: usize, thetas: &[f64], seed: u64) -> Result<CliffordSuite> {
    let rep = build_rep(n)?;
    let lemma = verify_q_lemma(&rep, thetas)?;
    let half = c(rep.dim() as f64 / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut projector, mut boundary, mut a_op) = (0.0f64, 0.0f64, 0.0f64);
    for (k, &theta) in thetas.iter().enumerate() {
        let q = ChiralityOp::new(&rep, theta)?;
        for sign in [1i8, -1] {
            let p = q.projector(sign);
            projector = projector.max((p.trace() - half).norm()).max(max_abs(&(&p * &p - &p)));
            let phi = &p * random_spinor(rep.dim(), seed.wrapping_add(k as u64));
            boundary = boundary.max(boundary_identities(&rep, theta, sign, &phi)?.max() / phi.norm_squared());
        }
        let p_hat: Vec<f64> = (1..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = check_a_operator(&rep, &p_hat, theta)?;
        a_op = a_op.max(a.hermitian).max(a.square).max(a.commutator);
    }
    Ok(CliffordSuite {
        n,
        dim: rep.dim(),
        clifford: rep.clifford_residual(),
        lemma,
        projector,
        boundary,
        a_operator: a_op,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dimensions() {
        assert_eq!([3, 4, 5, 6].map(|n| build_rep(n).unwrap().dim()), [4, 8, 8, 16]);
        assert!(build_rep(2).is_err());
        assert!(build_rep(7).is_err());
    }

    #[test]
    fn generators_satisfy_clifford_relations() {
        for n in 3..=6 {
            let rep = build_rep(n).unwrap();
            assert!(rep.clifford_residual() < 1e-14, "n = {n}");
            assert!(rep.hermiticity_residual() < 1e-14);
            assert!(rep.pairing_symmetry_residual() < 1e-14);
        }
    }

    #[test]
    fn lemma_holds_on_grid_of_angles() {
        let thetas: Vec<f64> = (0..=12).map(|k| -1.5707963267948966 + k as f64 * 0.2617993877991494).collect();
        for n in 3..=6 {
            let table = verify_q_lemma(&build_rep(n).unwrap(), &thetas).unwrap();
            assert_eq!(table.rows.len(), 13);
            assert!(table.max_residual() < 1e-12, "{table:?}");
        }
    }

    #[test]
    fn projectors_have_half_rank() {
        for n in 3..=6 {
            let rep = build_rep(n).unwrap();
            let q = ChiralityOp::new(&rep, 0.4).unwrap();
            for s in [1, -1] {
                let tr = q.projector(s).trace();
                assert!((tr.re - rep.dim() as f64 / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn angle_outside_range_rejected() {
        let rep = build_rep(3).unwrap();
        assert!(matches!(ChiralityOp::new(&rep, 2.0), Err(Error::AngleOutOfRange { .. })));
    }

    #[test]
    fn non_eigenspinor_rejected() {
        let rep = build_rep(3).unwrap();
        let phi = random_spinor(4, 3);
        assert!(matches!(boundary_identities(&rep, 0.3, 1, &phi), Err(Error::NotEigenspinor { .. })));
    }

    #[test]
    fn phi0_without_momentum() {
        let rep = build_rep(4).unwrap();
        let phi = choose_phi0(&rep, 0.7, &[0.0; 3], -1).unwrap();
        let q = ChiralityOp::new(&rep, phi.theta).unwrap();
        assert!(q.eigen_defect(&phi.vector(), -1) < 1e-12);
        assert!((phi.vector().norm() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn boundary_identities_hold(n in 3usize..=6, theta in -1.57f64..1.57, plus in any::<bool>(), seed in any::<u64>()) {
            let rep = build_rep(n).unwrap();
            let s = if plus { 1 } else { -1 };
            let q = ChiralityOp::new(&rep, theta).unwrap();
            let phi = q.projector(s) * random_spinor(rep.dim(), seed);
            prop_assume!(phi.norm() > 1e-3);
            let r = boundary_identities(&rep, theta, s, &phi).unwrap();
            prop_assert!(r.max() < 1e-12 * (1.0 + phi.norm_squared()), "{r:?}");
        }

        #[test]
        fn a_operator_properties(n in 3usize..=6, theta in -1.57f64..1.57, p in prop::collection::vec(-2.0f64..2.0, 5)) {
            let rep = build_rep(n).unwrap();
            let r = check_a_operator(&rep, &p[..n - 1], theta).unwrap();
            prop_assert!(r.hermitian < 1e-12 && r.square < 1e-11 && r.commutator < 1e-12, "{r:?}");
        }

        #[test]
        fn phi0_attains_tilted_bound(n in 3usize..=6, theta in 0.05f64..1.5707963, neg in any::<bool>(), plus in any::<bool>(), p in prop::collection::vec(-2.0f64..2.0, 5)) {
            let rep = build_rep(n).unwrap();
            let theta = if neg { -theta } else { theta };
            let s = if plus { 1 } else { -1 };
            let p_hat = &p[..n - 1];
            let phi = choose_phi0(&rep, theta, p_hat, s).unwrap();
            let v = phi.vector();
            let q = ChiralityOp::new(&rep, phi.theta).unwrap();
            prop_assert!(q.eigen_defect(&v, s) < 1e-10);
            let a = a_operator(&rep, p_hat).unwrap();
            let av = inner(&(a * &v), &v).re;
            let norm: f64 = p_hat.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((av - norm).abs() < 1e-10);
            let bound = -(s as f64) * phi.theta.sin() * av;
            prop_assert!((bound - theta.abs().sin() * norm).abs() < 1e-10);
        }
    }
}
