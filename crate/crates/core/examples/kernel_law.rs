//! ||K_z||^2 omega(z) tau(z)^2 stays in a bounded band up to the boundary.

use bergman_workbench::kernel::KernelTable;
use bergman_workbench::numeric::Exponent;
use bergman_workbench::weights::WeightSpec;
use num_complex::Complex64;

fn main() -> bergman_workbench::Result<()> {
    let w = WeightSpec::exponential(1.0, 1.0)?;
    let table = KernelTable::with_reach(&w, 0.99 * 0.99)?;
    println!("degree cap {}", table.degree_cap());
    let ratios: Vec<f64> = (0..200)
        .map(|i| {
            let r = 0.99 * i as f64 / 199.0;
            let ln = table.kernel_norm(Complex64::new(r, 0.0), Exponent::Finite(2.0), None)?;
            Ok((2.0 * ln + w.log_omega(r) + 2.0 * w.tau(r).ln()).exp())
        })
        .collect::<bergman_workbench::Result<_>>()?;
    for i in (0..200).step_by(33) {
        println!("r {:.3}  ratio {:.4}", 0.99 * i as f64 / 199.0, ratios[i]);
    }
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    println!("band {:.3}", hi / lo);
    Ok(())
}
