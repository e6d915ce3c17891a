use num_complex::Complex64;

use bergman_workbench::lattice::{disk_membership, Lattice};
use bergman_workbench::weights::WeightSpec;

#[test]
fn coarse_lattice_passes_its_own_checks() {
    let w = WeightSpec::exponential(1.0, 1.0).unwrap();
    let lat = Lattice::build(&w, 0.5 * w.m_tau(), 0.9).unwrap();
    assert!(!lat.is_empty());
    let rep = lat.verify(&w, 5_000).unwrap();
    assert!(rep.all_ok(), "{rep:?}");
    // One ring past r_cut closes the cover.
    let edge = 0.9 + 2.0 * lat.delta * w.tau(0.9);
    assert!(lat.centers.iter().all(|c| c.norm() <= edge));
}

#[test]
fn lattice_is_deterministic() {
    let w = WeightSpec::exponential(0.5, 2.0).unwrap();
    let a = Lattice::build(&w, 0.4 * w.m_tau(), 0.8).unwrap();
    let b = Lattice::build(&w, 0.4 * w.m_tau(), 0.8).unwrap();
    assert_eq!(a.centers, b.centers);
}

#[test]
fn membership_shrinks_with_delta() {
    let w = WeightSpec::exponential(1.0, 1.0).unwrap();
    let a = Complex64::new(0.7, 0.0);
    let z = a + 0.3 * w.m_tau() * w.tau(0.7);
    assert!(disk_membership(&w, a, 0.5 * w.m_tau(), z));
    assert!(!disk_membership(&w, a, 0.1 * w.m_tau(), z));
}

#[test]
fn export_lists_every_centre() {
    let w = WeightSpec::exponential(1.0, 1.0).unwrap();
    let lat = Lattice::build(&w, 0.5 * w.m_tau(), 0.7).unwrap();
    let mut buf = Vec::new();
    lat.export(&mut buf).unwrap();
    let lines = String::from_utf8(buf).unwrap().lines().count();
    assert!(lines >= lat.len());
}
