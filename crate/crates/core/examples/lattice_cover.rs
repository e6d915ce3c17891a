//! A (delta, tau)-lattice and its covering conditions.

use bergman_workbench::lattice::Lattice;
use bergman_workbench::weights::WeightSpec;

fn main() -> bergman_workbench::Result<()> {
    let w = WeightSpec::exponential(1.0, 1.0)?;
    let t = std::time::Instant::now();
    let lat = Lattice::build(&w, 0.1 * w.m_tau(), 0.9)?;
    let rep = lat.verify(&w, 20_000)?;
    println!("{} centres in {:.2?}", lat.len(), t.elapsed());
    println!("{rep:#?}");
    Ok(())
}
