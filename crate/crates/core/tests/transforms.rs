use num_complex::Complex64;

use bergman_workbench::criteria::{CriteriaConfig, Workspace};
use bergman_workbench::numeric::Exponent;
use bergman_workbench::quadrature::AtomRing;
use bergman_workbench::symbols::Symbol;
use bergman_workbench::transforms::{KernelSum, OpKind, TransformRequest};
use bergman_workbench::weights::WeightSpec;

fn workspace() -> Workspace {
    Workspace::new(&WeightSpec::exponential(1.0, 1.0).unwrap(), &CriteriaConfig::default()).unwrap()
}

fn rings() -> Vec<AtomRing> {
    let mut offset = 0;
    [0.2, 0.6, 0.9]
        .iter()
        .map(|&radius| {
            let r = AtomRing { radius, count: 16, offset, start: 0.0 };
            offset += 16;
            r
        })
        .collect()
}

#[test]
fn pushforward_field_matches_exact_sum() {
    let ws = workspace();
    let psi = Symbol::real_polynomial(&[0.1, 0.5, 0.1]);
    let g = Symbol::real_polynomial(&[1.0, 0.4]);
    let f = Exponent::Finite(2.0);
    let req = TransformRequest::new(OpKind::CPsiG, f, f, psi.clone(), g).unwrap();
    let field = ws.m_field_on(&req, &rings()).unwrap();
    let reach = 0.97 * ws.inner_grid().nodes().map(|n| psi.value(n.z).norm()).fold(0.0, f64::max);
    let table = ws.table().reaching(reach).unwrap();
    let exact = KernelSum::m_transform(&req, &table, ws.inner_grid()).unwrap();
    for (ring, vals) in rings().iter().zip(&field) {
        for j in [0, 5, 11] {
            let z = Complex64::from_polar(ring.radius, std::f64::consts::TAU * j as f64 / ring.count as f64);
            let e = exact.log_value(z).unwrap();
            assert!((vals[j] - e).abs() < 0.02, "r={} j={j}: {} vs {e}", ring.radius, vals[j]);
        }
    }
}

#[test]
fn field_scales_with_the_symbol() {
    let ws = workspace();
    let psi = Symbol::scale(Complex64::new(0.5, 0.0));
    let f = Exponent::Finite(2.0);
    let q = Exponent::Finite(4.0);
    let field = |g: Symbol| {
        let req = TransformRequest::new(OpKind::CGPsi, f, q, psi.clone(), g).unwrap();
        ws.m_field_on(&req, &rings()).unwrap()
    };
    let a = field(Symbol::real_polynomial(&[1.0, 0.5]));
    let b = field(Symbol::real_polynomial(&[3.0, 1.5]));
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        assert!((y - x - 4.0 * 3f64.ln()).abs() < 1e-9);
    }
}

#[test]
fn rotation_of_psi_rotates_nothing_for_radial_data() {
    let ws = workspace();
    let f = Exponent::Finite(2.0);
    let field = |c: Complex64| {
        let req = TransformRequest::new(OpKind::CPsiG, f, f, Symbol::scale(c), Symbol::constant(Complex64::new(1.0, 0.0)))
            .unwrap();
        ws.m_field_on(&req, &rings()).unwrap()
    };
    let a = field(Complex64::new(0.5, 0.0));
    let b = field(Complex64::from_polar(0.5, 1.0));
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn operators_without_transform_are_rejected() {
    let f = Exponent::Finite(2.0);
    assert!(TransformRequest::new(OpKind::GV, f, f, Symbol::identity(), Symbol::identity()).is_err());
}
