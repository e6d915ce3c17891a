//! Parsing, composing and truncating symbols.

use bergman_workbench::symbols::Symbol;
use num_complex::Complex64;

fn main() -> bergman_workbench::Result<()> {
    let psi: Symbol = "moebius:0.3".parse()?;
    let g: Symbol = "poly:0,0,1".parse()?;
    let check = psi.self_map_check();
    println!("{psi}: self-map {} (sup {:.6})", check.ok, check.sup_modulus);

    let t = psi.taylor_truncate(24)?;
    println!("Taylor degree 24, tail bound {:.2e}", t.tail_bound);
    for (k, c) in t.coeffs.iter().take(5).enumerate() {
        println!("  c_{k} = {:.6}", c);
    }

    let h = Symbol::compose(g, psi);
    let z = Complex64::new(0.2, 0.4);
    println!("(g o psi)(z) = {:.6}, derivative {:.6}", h.value(z), h.derivative_value(z));
    Ok(())
}
