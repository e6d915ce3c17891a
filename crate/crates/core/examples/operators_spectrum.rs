//! Truncated matrices, singular values and the Toeplitz identity.

use bergman_workbench::numeric::Exponent;
use bergman_workbench::operators::{
    build_operator, spectral_summary, toeplitz_grid, toeplitz_identity_check, Basis, TruncationOptions,
};
use bergman_workbench::symbols::Symbol;
use bergman_workbench::transforms::OpKind;
use bergman_workbench::weights::WeightSpec;

fn main() -> bergman_workbench::Result<()> {
    let w = WeightSpec::exponential(1.0, 1.0)?;
    let psi = Symbol::scale(0.5.into());
    let one = Symbol::constant(1.0.into());
    for n in [16, 32, 64] {
        let m = build_operator(OpKind::CGPsi, &psi, &one, &w, n, Basis::Standard, &TruncationOptions::default())?;
        let s = spectral_summary(&m, &[Exponent::Finite(2.0)])?;
        println!("N {n:3}  |T| {:.10}  |T|_S2 {:.10}", s.op_norm, s.schatten[0].1);
    }

    let grid = toeplitz_grid(&w)?;
    let rep = toeplitz_identity_check(&Symbol::moebius(0.3.into())?, &"poly:0,0,1".parse()?, &w, 30, &grid, &TruncationOptions::default())?;
    println!("Toeplitz identity: rel err {:.2e}, rank-one part {:.2e}", rep.frobenius_rel_err, rep.rank_one_rel);
    Ok(())
}
