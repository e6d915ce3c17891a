//! tau, omega and the distortion law for a few exponential weights.

use bergman_workbench::weights::WeightSpec;

fn main() -> bergman_workbench::Result<()> {
    for (b, alpha) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)] {
        let w = WeightSpec::exponential(b, alpha)?;
        println!("{w}  m_tau = {:.4}", w.m_tau());
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for r in [0.0, 0.5, 0.9, 0.95, 0.99] {
            let v = w.eval(r)?;
            let d = w.distortion(r)? * (1.0 + v.phi_prime);
            lo = lo.min(d);
            hi = hi.max(d);
            println!("  r {r:<5} tau {:.3e}  log omega {:>9.3}  psi_w (1+phi') {d:.4}", v.tau, v.log_omega);
        }
        println!("  distortion band {:.3}", hi / lo);
    }
    Ok(())
}
