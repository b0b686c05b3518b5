use divclosure::gausskernel::{maxwellian_poly_moment, Interval, Maxwellian};
use divclosure::polyspace::{hermite_basis, poly_real_roots, positivity_support, Polynomial};
use proptest::prelude::*;

fn from_roots(lead: f64, roots: &[f64]) -> Polynomial {
    roots.iter().fold(Polynomial::constant(lead), |acc, r| &acc * &Polynomial::linear(-r, 1.0))
}

fn separated_roots() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, 1..7).prop_filter("separated", |r| {
        let mut s = r.clone();
        s.sort_by(f64::total_cmp);
        s.windows(2).all(|w| w[1] - w[0] > 0.05)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn roots_are_recovered(roots in separated_roots(), lead in prop_oneof![-3.0f64..-0.2, 0.2f64..3.0]) {
        let p = from_roots(lead, &roots);
        let got = poly_real_roots(&p, 1e-9).unwrap();
        let mut want = roots.clone();
        want.sort_by(f64::total_cmp);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-8, "{} vs {}", g, w);
        }
    }

    #[test]
    fn support_agrees_with_sign_grid(coeffs in prop::collection::vec(-2.0f64..2.0, 2..8)) {
        let p = Polynomial::new(coeffs);
        prop_assume!(!p.is_zero());
        let support = positivity_support(&p, 1e-9).unwrap();
        let roots = poly_real_roots(&p, 1e-9).unwrap_or_default();
        for i in 0..=400 {
            let v = -10.0 + 0.05 * i as f64;
            if roots.iter().any(|r| (r - v).abs() < 1e-6) {
                continue;
            }
            let value = p.eval(v);
            if value.abs() < 1e-9 {
                continue;
            }
            prop_assert_eq!(support.contains(v), value > 0.0, "v={}, p(v)={}", v, value);
        }
    }

    #[test]
    fn complement_partitions_the_line(coeffs in prop::collection::vec(-2.0f64..2.0, 2..7), v in -8.0f64..8.0) {
        let p = Polynomial::new(coeffs);
        let s = positivity_support(&p, 1e-9).unwrap();
        let c = s.complement();
        prop_assume!(s.breakpoints().iter().all(|b| (b - v).abs() > 1e-9));
        prop_assert!(s.contains(v) ^ c.contains(v));
    }

    #[test]
    fn affine_composition(coeffs in prop::collection::vec(-2.0f64..2.0, 1..7), a in -2.0f64..2.0, b in -2.0f64..2.0, x in -2.0f64..2.0) {
        let p = Polynomial::new(coeffs);
        let q = p.compose_affine(a, b);
        let want = p.eval(a + b * x);
        prop_assert!((q.eval(x) - want).abs() < 1e-10 * (1.0 + want.abs()));
    }
}

#[test]
fn hermite_orthogonality() {
    // He_i ⊥ He_j under the standard Gaussian, with ⟨He_i²⟩ = i!
    let m = Maxwellian::standard();
    let basis = hermite_basis(10);
    let mut factorial = 1.0;
    for i in 0..basis.len() {
        if i > 0 {
            factorial *= i as f64;
        }
        for j in 0..basis.len() {
            let ip = maxwellian_poly_moment(&m, &(&basis[i] * &basis[j]), Interval::real_line());
            let want = if i == j { factorial } else { 0.0 };
            assert!((ip - want).abs() < 1e-9 * factorial.max(1.0), "({i},{j}): {ip}");
        }
    }
}

#[test]
fn tangential_root_keeps_support_whole() {
    // (x - 1)² > 0 away from 1; the support is one merged set
    let p = from_roots(1.0, &[1.0, 1.0]);
    let s = positivity_support(&p, 1e-9).unwrap();
    assert!(s.contains(0.0) && s.contains(2.0));
    let negative = from_roots(-1.0, &[1.0, 1.0]);
    assert!(positivity_support(&negative, 1e-9).unwrap().is_empty());
}
