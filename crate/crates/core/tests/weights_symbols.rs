use num_complex::Complex64;
use proptest::prelude::*;

use bergman_workbench::symbols::{horner, series_mul, Symbol};
use bergman_workbench::weights::WeightSpec;

fn complex_in_disk(max: f64) -> impl Strategy<Value = Complex64> {
    (0.0..max, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tau_is_positive_and_decreasing(b in 0.2..3.0f64, alpha in 0.2..3.0f64, r in 0.0..0.98f64) {
        let w = WeightSpec::exponential(b, alpha).unwrap();
        let (t0, t1) = (w.tau(r), w.tau(r + 0.01));
        prop_assert!(t0 > 0.0 && t1 > 0.0);
        prop_assert!(t1 <= t0 * (1.0 + 1e-12));
    }

    #[test]
    fn tau_coordinate_round_trips(r in 0.0..0.97f64) {
        let w = WeightSpec::exponential(1.0, 1.0).unwrap();
        let tc = w.tau_coordinate(0.99);
        prop_assert!((tc.radius(tc.rho(r)) - r).abs() < 1e-9);
    }

    #[test]
    fn distortion_law_holds_pointwise(r in 0.0..0.99f64) {
        let w = WeightSpec::exponential(1.0, 1.0).unwrap();
        let x = w.distortion(r).unwrap() * (1.0 + w.phi_prime(r));
        prop_assert!(x > 0.1 && x < 10.0);
    }

    #[test]
    fn weight_spec_text_round_trips(b in 0.1..5.0f64, alpha in 0.1..5.0f64) {
        let w = WeightSpec::exponential(b, alpha).unwrap();
        let back: WeightSpec = w.to_string().parse().unwrap();
        prop_assert_eq!(back.to_string(), w.to_string());
    }

    #[test]
    fn moebius_inverse_is_moebius_of_minus_a(a in complex_in_disk(0.9), z in complex_in_disk(0.99)) {
        let (m, inv) = (Symbol::moebius(a).unwrap(), Symbol::moebius(-a).unwrap());
        prop_assert!((inv.value(m.value(z)) - z).norm() < 1e-9);
        prop_assert!(m.value(a).norm() < 1e-15);
    }

    #[test]
    fn series_product_matches_pointwise(
        a in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..6),
        b in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..6),
        z in complex_in_disk(0.95),
    ) {
        let a: Vec<Complex64> = a.into_iter().map(|(x, y)| Complex64::new(x, y)).collect();
        let b: Vec<Complex64> = b.into_iter().map(|(x, y)| Complex64::new(x, y)).collect();
        let ab = series_mul(&a, &b, a.len() + b.len() - 1);
        prop_assert!((horner(&ab, z) - horner(&a, z) * horner(&b, z)).norm() < 1e-12);
    }

    #[test]
    fn symbol_text_round_trips(c in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..5)) {
        let s = Symbol::polynomial(c.into_iter().map(|(x, y)| Complex64::new(x, y)).collect());
        let back: Symbol = s.to_string().parse().unwrap();
        let z = Complex64::new(0.3, -0.2);
        prop_assert_eq!(back.value(z), s.value(z));
    }

    #[test]
    fn derivative_symbol_matches_finite_difference(a in complex_in_disk(0.8), z in complex_in_disk(0.8)) {
        let m = Symbol::moebius(a).unwrap();
        let h = 1e-6;
        let fd = (m.value(z + h) - m.value(z - h)) / (2.0 * h);
        prop_assert!((m.derivative_value(z) - fd).norm() < 1e-5 * (1.0 + fd.norm()));
    }
}

#[test]
fn self_map_check_rejects_escaping_polynomial() {
    assert!(Symbol::real_polynomial(&[0.0, 1.2]).require_self_map().is_err());
    assert!(Symbol::real_polynomial(&[0.1, 0.5, 0.3]).require_self_map().is_ok());
}
