//! Batch front-end: reads a JSON config and/or flags, runs one subcommand, writes a JSON
//! report (and optionally CSV data). Exit status: 0 decisive, 2 inconclusive, 1 error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use bergman_workbench::config::RunConfig;
use bergman_workbench::criteria::{
    check_boundedness, check_compactness, check_schatten, check_schatten_j_type, CriterionReport, Verdict, Workspace,
};
use bergman_workbench::kernel::KernelTable;
use bergman_workbench::lattice::Lattice;
use bergman_workbench::numeric::Exponent;
use bergman_workbench::operators::{toeplitz_grid, toeplitz_identity_check, TruncationOptions};
use bergman_workbench::quadrature::{AtomRing, DiskQuadrature, GridOptions};
use bergman_workbench::report::Report;
use bergman_workbench::transforms::{log_n_transform, write_sweep_csv, OpKind, TransformRequest};
use bergman_workbench::weights::{ClassLConstants, ClassWReport, WeightValues};
use bergman_workbench::{Error, Result};

#[derive(Parser)]
#[command(name = "bergman", version, about = "Operators on large weighted Bergman spaces")]
struct Cli {
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Flags {
    /// Weight, e.g. `exp:b=1,alpha=1`.
    #[arg(long, global = true)]
    weight: Option<String>,
    /// Symbol psi, e.g. `poly:0,1`, `scale:0.5`, `moebius:0.3`.
    #[arg(long, global = true)]
    psi: Option<String>,
    /// Symbol g, same grammar as psi.
    #[arg(long, global = true)]
    g: Option<String>,
    /// Exponent p (number or `inf`).
    #[arg(long, global = true)]
    p: Option<Exponent>,
    /// Exponent q.
    #[arg(long, global = true)]
    q: Option<Exponent>,
    /// c_psi_g, c_g_psi, gi, gv, j or i.
    #[arg(long, global = true)]
    op: Option<OpKind>,
    #[arg(long, global = true)]
    density: Option<f64>,
    /// Comma separated truncation ladder.
    #[arg(long, global = true, value_delimiter = ',')]
    ladder: Option<Vec<usize>>,
    /// Matrix truncation.
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    /// Radius in units of m_tau.
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    r_cut: Option<f64>,
    #[arg(long, global = true)]
    r_out: Option<f64>,
    #[arg(long, global = true)]
    points: Option<usize>,
    /// JSON report path (stdout if absent).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// CSV path. Columns: `weights probe` r,tau,log_omega,phi_prime,laplacian,distortion;
    /// `kernel norms` r,log_norm,log_ratio; `lattice build` re,im,tau;
    /// `transform sweep` r,theta,value_log.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Weight tables and class checks.
    Weights {
        #[command(subcommand)]
        action: WeightsCmd,
    },
    /// Kernel norms against the closed-form law.
    Kernel {
        #[command(subcommand)]
        action: KernelCmd,
    },
    /// Lattice construction and covering checks.
    Lattice {
        #[command(subcommand)]
        action: LatticeCmd,
    },
    /// M and N transform sweeps.
    Transform {
        #[command(subcommand)]
        action: TransformCmd,
    },
    /// Boundedness, compactness and Schatten criteria.
    Check {
        #[command(subcommand)]
        action: CheckCmd,
    },
    /// Adjoint identity against the Toeplitz operator of the pullback measure.
    Toeplitz {
        #[command(subcommand)]
        action: ToeplitzCmd,
    },
}

#[derive(Subcommand)]
enum WeightsCmd {
    /// phi, tau, omega and distortion on `points` radii up to r_cut.
    Probe,
}

#[derive(Subcommand)]
enum KernelCmd {
    /// `||K_z||_{A^p}` against `omega^{-1/2} tau^{2(1/p - 1)}` up to r_cut.
    Norms,
}

#[derive(Subcommand)]
enum LatticeCmd {
    /// Greedy (delta, tau)-lattice up to r_cut, verified on `points` probes.
    Build,
}

#[derive(Subcommand)]
enum TransformCmd {
    /// M (finite q) or N (q = inf) transform along the positive real axis up to r_out.
    Sweep,
}

#[derive(Subcommand)]
enum CheckCmd {
    Bounded,
    Compact,
    Schatten,
}

#[derive(Subcommand)]
enum ToeplitzCmd {
    /// Gram matrix of C_g^psi against the Toeplitz matrix of its pullback measure.
    Verify,
}

impl Flags {
    fn apply(self, c: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(weight, psi, g, p, q, op, density, ladder, n, delta, r_cut, r_out, points);
        if self.output.is_some() {
            c.output = self.output;
        }
        if self.csv.is_some() {
            c.csv = self.csv;
        }
    }
}

fn radii(hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| hi * i as f64 / (n - 1) as f64)
}

fn emit<T: Serialize>(cfg: &RunConfig, command: &str, result: T) -> Result<()> {
    let report = Report::new(command, cfg, result);
    match &cfg.output {
        Some(p) => report.write(p),
        None => {
            print!("{}", report.to_json()?);
            Ok(())
        }
    }
}

fn csv_file(cfg: &RunConfig) -> Result<Option<std::io::BufWriter<std::fs::File>>> {
    cfg.csv
        .as_ref()
        .map(|p| Ok(std::io::BufWriter::new(std::fs::File::create(p)?)))
        .transpose()
}

#[derive(Serialize)]
struct ProbeRow {
    #[serde(flatten)]
    values: WeightValues,
    distortion: f64,
}

#[derive(Serialize)]
struct ProbeResult {
    m_tau: f64,
    class_l: ClassLConstants,
    class_w: ClassWReport,
    rows: Vec<ProbeRow>,
}

fn weights_probe(cfg: &RunConfig) -> Result<u8> {
    let w = cfg.weight_spec()?;
    let rows = radii(cfg.r_cut, cfg.points)
        .map(|r| {
            Ok(ProbeRow {
                values: w.eval(r)?,
                distortion: w.distortion(r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(mut f) = csv_file(cfg)? {
        writeln!(f, "r,tau,log_omega,phi_prime,laplacian,distortion")?;
        for x in &rows {
            let v = &x.values;
            writeln!(
                f,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                v.r, v.tau, v.log_omega, v.phi_prime, v.laplacian_phi, x.distortion
            )?;
        }
    }
    let class_w = w.class_w_check();
    if let Some(msg) = &class_w.warning {
        eprintln!("warning: {msg}");
    }
    emit(
        cfg,
        "weights probe",
        ProbeResult {
            m_tau: w.m_tau(),
            class_l: w.class_l_constants(),
            class_w,
            rows,
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct NormRow {
    r: f64,
    log_norm: f64,
    log_ratio: f64,
}

#[derive(Serialize)]
struct NormResult {
    p: Exponent,
    band: f64,
    rows: Vec<NormRow>,
}

fn kernel_norms(cfg: &RunConfig) -> Result<u8> {
    let w = cfg.weight_spec()?;
    let table = KernelTable::with_reach(&w, cfg.r_cut * cfg.r_cut)?;
    let grid = match cfg.p {
        Exponent::Finite(2.0) => None,
        _ => Some(DiskQuadrature::build_default(&w, &GridOptions::with_density(cfg.density))?),
    };
    let e = 2.0 * (cfg.p.recip() - 1.0);
    let rows = radii(cfg.r_cut, cfg.points)
        .map(|r| {
            let log_norm = table.kernel_norm(Complex64::new(r, 0.0), cfg.p, grid.as_ref())?;
            Ok(NormRow {
                r,
                log_norm,
                log_ratio: log_norm + 0.5 * w.log_omega(r) - e * w.tau(r).ln(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x.log_ratio), b.max(x.log_ratio)));
    if let Some(mut f) = csv_file(cfg)? {
        writeln!(f, "r,log_norm,log_ratio")?;
        for x in &rows {
            writeln!(f, "{:.16e},{:.16e},{:.16e}", x.r, x.log_norm, x.log_ratio)?;
        }
    }
    emit(
        cfg,
        "kernel norms",
        NormResult {
            p: cfg.p,
            band: (hi - lo).exp(),
            rows,
        },
    )?;
    Ok(0)
}

fn lattice_build(cfg: &RunConfig) -> Result<u8> {
    let w = cfg.weight_spec()?;
    let lat = Lattice::build(&w, cfg.delta * w.m_tau(), cfg.r_cut)?;
    let report = lat.verify(&w, cfg.points)?;
    if let Some(mut f) = csv_file(cfg)? {
        writeln!(f, "re,im,tau")?;
        for (z, t) in lat.centers.iter().zip(&lat.taus) {
            writeln!(f, "{:.16e},{:.16e},{:.16e}", z.re, z.im, t)?;
        }
    }
    let ok = report.all_ok();
    emit(cfg, "lattice build", report)?;
    Ok(if ok { 0 } else { 2 })
}

#[derive(Serialize)]
struct SweepRow {
    r: f64,
    theta: f64,
    value_log: f64,
}

fn transform_sweep(cfg: &RunConfig) -> Result<u8> {
    let w = cfg.weight_spec()?;
    let (kind, psi) = match cfg.op {
        OpKind::J => (OpKind::CGPsi, "poly:0,1".parse()?),
        OpKind::I => (OpKind::CPsiG, "poly:0,1".parse()?),
        k => (k, cfg.psi_symbol()?),
    };
    let req = TransformRequest::new(kind, cfg.p, cfg.q, psi, cfg.g_symbol()?)?;
    let rs: Vec<f64> = radii(cfg.r_out, cfg.points).collect();
    let values = if cfg.q.is_infinite() {
        rs.iter()
            .map(|&r| log_n_transform(&req, &w, Complex64::new(r, 0.0)))
            .collect::<Result<Vec<_>>>()?
    } else {
        let ws = Workspace::new(&w, &cfg.criteria())?;
        let rings: Vec<AtomRing> = rs
            .iter()
            .enumerate()
            .map(|(i, &r)| AtomRing {
                radius: r,
                count: 1,
                offset: i,
                start: 0.0,
            })
            .collect();
        ws.m_field_on(&req, &rings)?.into_iter().map(|v| v[0]).collect()
    };
    let rows: Vec<SweepRow> = rs
        .iter()
        .zip(&values)
        .map(|(&r, &v)| SweepRow {
            r,
            theta: 0.0,
            value_log: v,
        })
        .collect();
    if let Some(f) = csv_file(cfg)? {
        let t: Vec<(f64, f64, f64)> = rows.iter().map(|x| (x.r, x.theta, x.value_log)).collect();
        write_sweep_csv(f, &t)?;
    }
    emit(cfg, "transform sweep", rows)?;
    Ok(0)
}

fn check(cfg: &RunConfig, action: &CheckCmd) -> Result<u8> {
    let w = cfg.weight_spec()?;
    let ws = Workspace::new(&w, &cfg.criteria())?;
    let (psi, g) = (cfg.psi_symbol()?, cfg.g_symbol()?);
    let (name, rep): (&str, CriterionReport) = match action {
        CheckCmd::Bounded => ("check bounded", check_boundedness(cfg.op, &psi, &g, cfg.p, cfg.q, &ws)?),
        CheckCmd::Compact => ("check compact", check_compactness(cfg.op, &psi, &g, cfg.p, cfg.q, &ws)?),
        CheckCmd::Schatten => {
            let Exponent::Finite(p) = cfg.p else {
                return Err(Error::Argument("Schatten check needs a finite p".into()));
            };
            let rep = match cfg.op {
                OpKind::J => check_schatten_j_type(&g, p, &ws)?,
                k => check_schatten(k, &psi, &g, p, &ws)?,
            };
            ("check schatten", rep)
        }
    };
    let code = if rep.verdict == Verdict::Inconclusive { 2 } else { 0 };
    emit(cfg, name, rep)?;
    Ok(code)
}

fn toeplitz_verify(cfg: &RunConfig) -> Result<u8> {
    let w = cfg.weight_spec()?;
    let grid = toeplitz_grid(&w)?;
    let rep = toeplitz_identity_check(
        &cfg.psi_symbol()?,
        &cfg.g_symbol()?,
        &w,
        cfg.n,
        &grid,
        &TruncationOptions::default(),
    )?;
    emit(cfg, "toeplitz verify", rep)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cli.flags.apply(&mut cfg);
    cfg.validate()?;
    match &cli.command {
        Command::Weights { action: WeightsCmd::Probe } => weights_probe(&cfg),
        Command::Kernel { action: KernelCmd::Norms } => kernel_norms(&cfg),
        Command::Lattice { action: LatticeCmd::Build } => lattice_build(&cfg),
        Command::Transform { action: TransformCmd::Sweep } => transform_sweep(&cfg),
        Command::Check { action } => check(&cfg, action),
        Command::Toeplitz { action: ToeplitzCmd::Verify } => toeplitz_verify(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
