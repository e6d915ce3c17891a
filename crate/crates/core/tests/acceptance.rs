//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bergman_workbench::criteria::{
    check_boundedness, check_compactness, check_schatten, check_schatten_j_type, CriteriaConfig, Verdict, Workspace,
};
use bergman_workbench::kernel::KernelTable;
use bergman_workbench::lattice::Lattice;
use bergman_workbench::numeric::Exponent;
use bergman_workbench::operators::{
    build_operator, singular_values, toeplitz_grid, toeplitz_identity_check, Basis, TruncationOptions,
};
use bergman_workbench::quadrature::{pullback_measure, DiskQuadrature, GridOptions};
use bergman_workbench::symbols::Symbol;
use bergman_workbench::transforms::{ap_norm_pow, lp_norm, AtomIndex, KernelSum, OpKind};
use bergman_workbench::weights::WeightSpec;
use bergman_workbench::Result;

type Outcome = Result<(bool, String)>;

fn proto() -> WeightSpec {
    WeightSpec::exponential(1.0, 1.0).unwrap()
}

fn band(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn kernel_law() -> Outcome {
    let w = proto();
    let table = KernelTable::with_reach(&w, 0.99 * 0.99)?;
    let ratios = (0..200)
        .map(|i| {
            let r = 0.99 * i as f64 / 199.0;
            let ln = table.kernel_norm(c(r), Exponent::Finite(2.0), None)?;
            Ok((2.0 * ln + w.log_omega(r) + 2.0 * w.tau(r).ln()).exp())
        })
        .collect::<Result<Vec<_>>>()?;
    let b = band(&ratios);
    Ok((b <= 20.0, format!("band {b:.3}")))
}

fn lattice() -> Outcome {
    let w = proto();
    let lat = Lattice::build(&w, 0.1 * w.m_tau(), 0.95)?;
    let rep = lat.verify(&w, 100_000)?;
    let ok = rep.separation_ok && rep.uncovered == 0 && rep.max_multiplicity <= 256;
    Ok((
        ok,
        format!(
            "{} centres, min separation ratio {:.3}, uncovered {}, multiplicity {}",
            rep.count, rep.min_separation_ratio, rep.uncovered, rep.max_multiplicity
        ),
    ))
}

fn littlewood_paley() -> Outcome {
    let w = proto();
    // omega^{1/2} is below e^-30 at the edge of this grid, enough for p = 1.
    let grid = toeplitz_grid(&w)?;
    let table = KernelTable::with_reach(&w, 0.5 * grid.r_cut())?;
    let fs = [
        Symbol::real_polynomial(&[0.0, 1.0]),
        Symbol::real_polynomial(&[0.0, 0.0, 0.0, 1.0]),
        table.truncated_normalized_kernel(c(0.5), 1e-16)?,
    ];
    let mut ratios = Vec::new();
    for f in &fs {
        for p in [1.0, 2.0, 4.0] {
            ratios.push(lp_norm(f, Exponent::Finite(p), &grid, false)? / ap_norm_pow(f, p, &grid)?);
        }
    }
    let b = band(&ratios);
    Ok((b <= 50.0, format!("band {b:.3} over 9 cases")))
}

fn toeplitz() -> Outcome {
    let w = proto();
    let grid = toeplitz_grid(&w)?;
    let cases = [
        (Symbol::scale(c(0.5)), Symbol::real_polynomial(&[0.0, 1.0])),
        (Symbol::identity(), Symbol::constant(c(1.0))),
        (Symbol::moebius(c(0.3))?, Symbol::real_polynomial(&[0.0, 0.0, 1.0])),
    ];
    let mut worst = 0.0_f64;
    for (psi, g) in &cases {
        let rep = toeplitz_identity_check(psi, g, &w, 30, &grid, &TruncationOptions::default())?;
        worst = worst.max(rep.frobenius_rel_err);
    }
    Ok((worst < 1e-8, format!("worst Frobenius relative error {worst:.2e}")))
}

fn workspace() -> Result<Workspace> {
    Workspace::new(&proto(), &CriteriaConfig::default())
}

fn id_p_below_q() -> Outcome {
    let ws = workspace()?;
    let f = Exponent::Finite;
    let id = Symbol::identity();
    let grow = check_boundedness(OpKind::CPsiG, &id, &id, f(2.0), f(4.0), &ws)?;
    let monotone = grow.shells.windows(2).all(|s| s[1].log_max > s[0].log_max);
    let zero = check_boundedness(OpKind::CPsiG, &id, &Symbol::zero(), f(2.0), f(4.0), &ws)?;
    let ok = grow.verdict == Verdict::Unbounded
        && monotone
        && zero.verdict == Verdict::Bounded
        && zero.statistic == 0.0;
    Ok((
        ok,
        format!(
            "g=z: {} (monotone shells {monotone}), g=0: {} statistic {}",
            grow.verdict, zero.verdict, zero.statistic
        ),
    ))
}

fn random_poly(rng: &mut ChaCha8Rng, degree: usize) -> Vec<Complex64> {
    (0..=degree)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn route_b_equality() -> Outcome {
    let ws = workspace()?;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (p, q) = (Exponent::Finite(4.0), Exponent::Finite(2.0));
    let mut same = 0;
    let mut decisive = 0;
    for i in 0..20 {
        let d = rng.gen_range(1..=3);
        let mut a = random_poly(&mut rng, d);
        let scale = rng.gen_range(0.3..0.95) / a.iter().map(|x| x.norm()).sum::<f64>();
        a.iter_mut().for_each(|x| *x *= scale);
        let dg = rng.gen_range(0..=3);
        let psi = Symbol::polynomial(a);
        let g = Symbol::polynomial(random_poly(&mut rng, dg));
        let kind = if i % 2 == 0 { OpKind::CPsiG } else { OpKind::CGPsi };
        let b = check_boundedness(kind, &psi, &g, p, q, &ws)?;
        let k = check_compactness(kind, &psi, &g, p, q, &ws)?;
        let paired = matches!(
            (b.verdict, k.verdict),
            (Verdict::Bounded, Verdict::Compact)
                | (Verdict::Unbounded, Verdict::NotCompact)
                | (Verdict::Inconclusive, Verdict::Inconclusive)
        );
        same += usize::from(paired);
        decisive += usize::from(b.verdict.is_decisive());
    }
    Ok((same == 20, format!("{same}/20 identical, {decisive}/20 decisive")))
}

fn schatten_small_p() -> Outcome {
    let ws = workspace()?;
    let z2 = Symbol::real_polynomial(&[0.0, 0.0, 1.0]);
    let rep = check_schatten_j_type(&z2, 0.5, &ws)?;
    let growth = rep.refined_statistic.unwrap_or(f64::NAN) / rep.statistic;
    let cst = check_schatten_j_type(&Symbol::constant(c(1.0)), 0.5, &ws)?;
    let ok = rep.verdict == Verdict::NotInSp
        && growth >= 2.0
        && cst.verdict == Verdict::InSp
        && cst.statistic == 0.0;
    Ok((
        ok,
        format!(
            "g=z^2: {} (growth x{growth:.1} under refinement), g=1: {} statistic {}",
            rep.verdict, cst.verdict, cst.statistic
        ),
    ))
}

fn spectral_cross_validation() -> Outcome {
    let ws = workspace()?;
    let w = proto();
    let f = Exponent::Finite(2.0);
    let psi = Symbol::scale(c(0.5));
    let one = Symbol::constant(c(1.0));
    let b = check_boundedness(OpKind::CGPsi, &psi, &one, f, f, &ws)?;
    let k = check_compactness(OpKind::CGPsi, &psi, &one, f, f, &ws)?;
    let s = check_schatten(OpKind::CGPsi, &psi, &one, 2.0, &ws)?;
    let mut norms = Vec::new();
    let mut hs = Vec::new();
    for n in [16, 32, 64, 128] {
        let m = build_operator(OpKind::CGPsi, &psi, &one, &w, n, Basis::Standard, &TruncationOptions::default())?;
        let sv = singular_values(&m.entries)?;
        norms.push(sv[0]);
        if n <= 64 {
            hs.push(sv.iter().map(|x| x * x).sum::<f64>());
        }
    }
    let norm_spread = band(&norms) - 1.0;
    let hs_spread = band(&hs) - 1.0;
    let ok = b.verdict == Verdict::Bounded
        && k.verdict == Verdict::Compact
        && norm_spread < 0.05
        && hs_spread < 0.02
        && s.statistic.is_finite();
    Ok((
        ok,
        format!(
            "{} / {}, op_norm spread {norm_spread:.1e}, sum s^2 spread {hs_spread:.1e}, S_2 statistic {:.4}",
            b.verdict, k.verdict, s.statistic
        ),
    ))
}

fn carleson_band() -> Outcome {
    let w = proto();
    let m_tau = w.m_tau();
    let lat = Lattice::build(&w, 0.5 * m_tau, 0.9)?;
    let tc = w.tau_coordinate(0.999);
    let r_grid = tc.radius(tc.rho(0.9) + 4.0);
    let grid = DiskQuadrature::build(&w, r_grid, &GridOptions::default())?;
    let table = KernelTable::with_reach(&w, 0.9 * r_grid)?;
    let mu = pullback_measure(&w, &Symbol::identity(), &Symbol::constant(c(1.0)), 2.0, &grid)?;
    let nu = mu.nu_reweight(&w, 2.0);
    let step = lat.len() / 100;
    let centers: Vec<Complex64> = (0..100).map(|k| lat.centers[k * step]).collect();
    let ratio_band = |m| -> Result<f64> {
        let g = KernelSum::berezin(m, 2.0, &table, Some(&grid))?;
        let idx = AtomIndex::new(m);
        let logs = centers
            .iter()
            .map(|&z| Ok(g.log_value(z)? - idx.log_averaging(&w, 0.9 * m_tau, z)))
            .collect::<Result<Vec<f64>>>()?;
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((hi - lo).exp())
    };
    let b_nu = ratio_band(&nu)?;
    let b_mu = ratio_band(&mu)?;
    Ok((
        b_nu <= 100.0,
        format!("nu band {b_nu:.2}; with the omega-weighted mu itself the band is {b_mu:.1}"),
    ))
}

fn distortion_law() -> Outcome {
    let mut worst = 0.0_f64;
    for (b, alpha) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)] {
        let w = WeightSpec::exponential(b, alpha)?;
        let xs = (0..100)
            .map(|i| {
                let r = 0.99 * i as f64 / 99.0;
                Ok(w.distortion(r)? * (1.0 + w.phi_prime(r)))
            })
            .collect::<Result<Vec<_>>>()?;
        worst = worst.max(band(&xs));
    }
    Ok((worst <= 10.0, format!("worst band {worst:.3}")))
}

type Criterion = (&'static str, fn() -> Outcome, u64);

fn main() {
    let criteria: [Criterion; 10] = [
        ("kernel law", kernel_law, 60),
        ("lattice covering", lattice, 30),
        ("Littlewood-Paley band", littlewood_paley, 60),
        ("Toeplitz identity", toeplitz, 120),
        ("psi = id, p < q", id_p_below_q, 60),
        ("route B bounded = compact", route_b_equality, 600),
        ("Schatten small p", schatten_small_p, 120),
        ("spectral cross-validation", spectral_cross_validation, 300),
        ("Carleson band", carleson_band, 120),
        ("distortion law", distortion_law, 30),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let dt = t.elapsed();
        let in_time = dt <= Duration::from_secs(*budget);
        let (ok, detail) = match outcome {
            Ok((ok, d)) => (ok && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "{} {:>2}. {name}: {detail} [{:.1}s of {budget}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            dt.as_secs_f64()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
