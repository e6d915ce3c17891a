use num_complex::Complex64;

use bergman_workbench::operators::{build_operator, singular_values, Basis, TruncationOptions};
use bergman_workbench::symbols::Symbol;
use bergman_workbench::transforms::OpKind;
use bergman_workbench::weights::WeightSpec;

fn op_norm(kind: OpKind, psi: &Symbol, g: &Symbol, n: usize) -> f64 {
    let w = WeightSpec::exponential(1.0, 1.0).unwrap();
    let m = build_operator(kind, psi, g, &w, n, Basis::Standard, &TruncationOptions::default()).unwrap();
    singular_values(&m.entries).unwrap()[0]
}

#[test]
fn op_norm_is_monotone_in_truncation() {
    let cases = [
        (OpKind::CPsiG, Symbol::scale(Complex64::new(0.6, 0.2)), Symbol::real_polynomial(&[1.0, 0.5])),
        (OpKind::CGPsi, Symbol::real_polynomial(&[0.1, 0.5]), Symbol::real_polynomial(&[0.0, 1.0])),
        (OpKind::J, Symbol::identity(), Symbol::real_polynomial(&[0.0, 0.0, 1.0])),
    ];
    for (kind, psi, g) in &cases {
        let norms: Vec<f64> = [8, 16, 32].iter().map(|&n| op_norm(*kind, psi, g, n)).collect();
        assert!(norms.windows(2).all(|x| x[1] >= x[0] * (1.0 - 1e-10)), "{kind}: {norms:?}");
    }
}

#[test]
fn zero_symbol_gives_zero_matrix() {
    assert_eq!(op_norm(OpKind::CPsiG, &Symbol::identity(), &Symbol::zero(), 10), 0.0);
}

#[test]
fn composition_by_identity_with_unit_symbol_is_isometric() {
    let n = op_norm(OpKind::CPsiG, &Symbol::identity(), &Symbol::constant(Complex64::new(1.0, 0.0)), 12);
    assert!((n - 1.0).abs() < 1e-10, "{n}");
}

#[test]
fn operator_scales_linearly_in_g() {
    let psi = Symbol::scale(Complex64::new(0.5, 0.0));
    let g = Symbol::real_polynomial(&[1.0, 0.3]);
    let g3 = Symbol::real_polynomial(&[3.0, 0.9]);
    let (a, b) = (op_norm(OpKind::CPsiG, &psi, &g, 16), op_norm(OpKind::CPsiG, &psi, &g3, 16));
    assert!((b / a - 3.0).abs() < 1e-10);
}
