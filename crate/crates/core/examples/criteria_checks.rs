//! Boundedness, compactness and Schatten checks, plus the psi = id panel.

use bergman_workbench::criteria::{
    check_boundedness, check_compactness, check_schatten, check_schatten_j_type, id_case_panel, CriteriaConfig,
    Workspace,
};
use bergman_workbench::numeric::Exponent;
use bergman_workbench::symbols::Symbol;
use bergman_workbench::transforms::OpKind;
use bergman_workbench::weights::WeightSpec;

fn main() -> bergman_workbench::Result<()> {
    let w = WeightSpec::exponential(1.0, 1.0)?;
    let ws = Workspace::new(&w, &CriteriaConfig::default())?;
    let f = Exponent::Finite;
    let id = Symbol::identity();
    let z = Symbol::identity();

    // psi = id, p < q: only g = 0 is bounded.
    let rep = check_boundedness(OpKind::CPsiG, &id, &z, f(2.0), f(4.0), &ws)?;
    println!("C_(id,z) 2->4: {} (route {:?}, sup {:.3e})", rep.verdict, rep.route, rep.statistic);

    let half = Symbol::scale(0.5.into());
    let one = Symbol::constant(1.0.into());
    let b = check_boundedness(OpKind::CGPsi, &half, &one, f(2.0), f(2.0), &ws)?;
    let c = check_compactness(OpKind::CGPsi, &half, &one, f(2.0), f(2.0), &ws)?;
    let s = check_schatten(OpKind::CGPsi, &half, &one, 2.0, &ws)?;
    println!("C^(z/2)_1: {} / {} / {} (S_2 statistic {:.4})", b.verdict, c.verdict, s.verdict, s.statistic);
    if let Some(cc) = &b.crosscheck {
        println!("  op_norm ladder {:?}", cc.op_norm);
    }

    let j = check_schatten_j_type(&"poly:0,0,1".parse()?, 0.5, &ws)?;
    println!("J_(z^2) in S_1/2: {} ({:?})", j.verdict, j.notes);

    let panel = id_case_panel(&"poly:0,0,1".parse()?, f(2.0), f(2.0), &ws)?;
    for e in panel.entries.iter().chain(&panel.m_route) {
        println!("  {:<16} {}", e.name, e.verdict);
    }
    println!("  consistent: {}", panel.consistent);
    Ok(())
}
