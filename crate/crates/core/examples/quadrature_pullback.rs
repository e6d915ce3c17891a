//! Polar tau-grid, log-domain integration and the pullback measure of (id, 1).

use bergman_workbench::quadrature::{pullback_measure, DiskQuadrature, GridOptions};
use bergman_workbench::symbols::Symbol;
use bergman_workbench::weights::WeightSpec;

fn main() -> bergman_workbench::Result<()> {
    let w = WeightSpec::exponential(1.0, 1.0)?;
    let grid = DiskQuadrature::build(&w, 0.95, &GridOptions::default())?;
    println!("{} nodes on {} rings, total weight {:.12}", grid.len(), grid.rings().len(), grid.total_weight());

    let r4 = grid.integrate(|n| n.z.norm_sqr());
    println!("int |z|^2 dA = {r4:.10} (exact {:.10})", 0.95f64.powi(4) / 2.0);

    let mu = pullback_measure(&w, &Symbol::identity(), &Symbol::constant(1.0.into()), 2.0, &grid)?;
    println!("mu(D) = exp({:.6})", mu.log_total_mass());
    Ok(())
}
