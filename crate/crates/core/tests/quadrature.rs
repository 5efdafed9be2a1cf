use halfmass::quadrature::{sphere_area, SphereRule};
use proptest::prelude::*;
use statrs::function::gamma::gamma;

/// `∫_{S^{d−1}, x_d ≥ 0} Π x_i^{α_i}` for even `α_i`, `i < d`, and any `α_d`.
fn hemisphere_moment(alpha: &[u32]) -> f64 {
    let betas: Vec<f64> = alpha.iter().map(|&a| (a as f64 + 1.0) / 2.0).collect();
    betas.iter().map(|&b| gamma(b)).product::<f64>() / gamma(betas.iter().sum())
}

fn monomial(x: &[f64], alpha: &[u32]) -> f64 {
    x.iter().zip(alpha).map(|(v, &a)| v.powi(a as i32)).product()
}

#[test]
fn totals_match_areas() {
    for dim in 2..=6 {
        let full = SphereRule::sphere(dim, 8).unwrap();
        let half = SphereRule::hemisphere(dim, 8).unwrap();
        assert!((full.total() - sphere_area(dim)).abs() < 1e-12 * sphere_area(dim));
        assert!((2.0 * half.total() - sphere_area(dim)).abs() < 1e-12 * sphere_area(dim));
    }
}

#[test]
fn radius_scaling() {
    let rule = SphereRule::hemisphere(4, 6).unwrap();
    let r = 3.5;
    let value = rule.integrate(r, |x, _| x[3]);
    assert!((value - r.powi(4) * hemisphere_moment(&[0, 0, 0, 1])).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hemisphere_moments(dim in 3usize..=6, half in proptest::collection::vec(0u32..=2, 5), last in 0u32..=5) {
        let mut alpha: Vec<u32> = half[..dim - 1].iter().map(|a| 2 * a).collect();
        alpha.push(last);
        // total degree stays below 2·14 − 1, where the rule is exact
        let rule = SphereRule::hemisphere(dim, 14).unwrap();
        let got = rule.integrate(1.0, |_, u| monomial(u, &alpha));
        let want = hemisphere_moment(&alpha);
        prop_assert!((got - want).abs() < 1e-12 * want.max(1.0), "{alpha:?}: {got} vs {want}");
    }

    #[test]
    fn odd_moments_vanish_on_full_sphere(dim in 3usize..=6, k in 0usize..6, p in 0u32..3) {
        let i = k % dim;
        let rule = SphereRule::sphere(dim, 8).unwrap();
        let got = rule.integrate(1.0, |_, u| u[i].powi(2 * p as i32 + 1));
        prop_assert!(got.abs() < 1e-13);
    }
}
