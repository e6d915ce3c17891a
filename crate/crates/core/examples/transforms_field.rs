//! The M transform along a ray, and Berezin transform against the averaging function.

use bergman_workbench::criteria::{CriteriaConfig, Workspace};
use bergman_workbench::kernel::KernelTable;
use bergman_workbench::numeric::Exponent;
use bergman_workbench::quadrature::{pullback_measure, AtomRing, DiskQuadrature, GridOptions};
use bergman_workbench::symbols::Symbol;
use bergman_workbench::transforms::{AtomIndex, KernelSum, OpKind, TransformRequest};
use bergman_workbench::weights::WeightSpec;
use num_complex::Complex64;

fn main() -> bergman_workbench::Result<()> {
    let w = WeightSpec::exponential(1.0, 1.0)?;
    let ws = Workspace::new(&w, &CriteriaConfig::default())?;
    let req = TransformRequest::new(
        OpKind::CPsiG,
        Exponent::Finite(2.0),
        Exponent::Finite(4.0),
        Symbol::identity(),
        Symbol::identity(),
    )?;
    let rings: Vec<AtomRing> = [0.5, 0.8, 0.9, 0.95, 0.97]
        .iter()
        .enumerate()
        .map(|(i, &radius)| AtomRing { radius, count: 1, offset: i, start: 0.0 })
        .collect();
    for (r, v) in rings.iter().zip(ws.m_field_on(&req, &rings)?) {
        println!("ln M_(1,2,4)(z)({:.2}) = {:8.4}", r.radius, v[0]);
    }

    // G_2 against hat mu_delta for the area measure nu of (id, 1).
    let grid = DiskQuadrature::build(&w, 0.975, &GridOptions::default())?;
    let mu = pullback_measure(&w, &Symbol::identity(), &Symbol::constant(1.0.into()), 2.0, &grid)?;
    let nu = mu.nu_reweight(&w, 2.0);
    let table = KernelTable::with_reach(&w, 0.9 * 0.975)?;
    let g = KernelSum::berezin(&nu, 2.0, &table, Some(&grid))?;
    let idx = AtomIndex::new(&nu);
    for r in [0.0, 0.5, 0.8, 0.9] {
        let z = Complex64::new(r, 0.0);
        let ratio = (g.log_value(z)? - idx.log_averaging(&w, 0.9 * w.m_tau(), z)).exp();
        println!("G_2(nu) / hat nu at {r}: {ratio:.4}");
    }
    Ok(())
}
