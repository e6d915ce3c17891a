//! Decision procedures for boundedness, compactness and Schatten membership, necessary
//! conditions and the `psi = id` panel. Every verdict is read off boundary trends over
//! tau-shells: rings equally spaced in `rho(r) = int dr / tau` up to `r_out`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::numeric::{fitted_slope, gauss_legendre, Exponent, LogSumExp};
use crate::operators::{build_operator, singular_values, Basis, TruncationOptions};
use crate::quadrature::{AtomRing, DiskQuadrature, GridOptions};
use crate::symbols::Symbol;
use crate::transforms::{log_n_transform, KernelSum, OpKind, TransformRequest};
use crate::weights::{TauCoordinate, WeightSpec};

/// Shells inspected by the `L^inf` rule.
pub const LINF_TAIL: usize = 5;
/// Shells inspected by the `limit = 0` rule.
pub const LIMIT_TAIL: usize = 8;
/// Minimum fitted log-slope per shell for a growth verdict.
pub const TREND_SLOPE: f64 = 0.05;
/// Final shell over interior maximum below which a limit counts as zero.
pub const LIMIT_RATIO: f64 = 1e-3;
/// Relative `op_norm` increment over the last ladder step below which the ladder saturates.
pub const LADDER_SATURATION: f64 = 0.10;
const MONO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "bounded")]
    Bounded,
    #[serde(rename = "unbounded")]
    Unbounded,
    #[serde(rename = "compact")]
    Compact,
    #[serde(rename = "not_compact")]
    NotCompact,
    #[serde(rename = "in_Sp")]
    InSp,
    #[serde(rename = "not_in_Sp")]
    NotInSp,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Verdict {
    pub fn is_decisive(self) -> bool {
        self != Verdict::Inconclusive
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Bounded => "bounded",
            Verdict::Unbounded => "unbounded",
            Verdict::Compact => "compact",
            Verdict::NotCompact => "not_compact",
            Verdict::InSp => "in_Sp",
            Verdict::NotInSp => "not_in_Sp",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    A,
    B,
    C,
    #[serde(rename = "schatten")]
    Schatten,
    #[serde(rename = "id-case")]
    IdCase,
}

/// Criterion clause for the exponent pair.
pub fn route_for(p: Exponent, q: Exponent) -> Route {
    match (p, q) {
        (_, Exponent::Infinity) => Route::C,
        (Exponent::Finite(p), Exponent::Finite(q)) if p <= q => Route::A,
        _ => Route::B,
    }
}

/// `s` with `M in L^s(d lambda)` in route B.
pub fn route_b_exponent(p: Exponent, q: f64) -> f64 {
    match p {
        Exponent::Finite(p) => p / (p - q),
        Exponent::Infinity => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaConfig {
    /// Outermost evaluation radius.
    pub r_out: f64,
    pub shells: usize,
    pub rings_per_shell: usize,
    /// Evaluation points per ring are at least `angular_factor * 2 pi r / tau(r)`.
    pub angular_factor: f64,
    /// How far (in tau units) the integration grid reaches past `r_out`.
    pub margin: f64,
    pub density: f64,
    pub gl_order: usize,
    /// Image cells per tau when pulled-back atoms of a non-dilation `psi` are re-binned.
    pub bins_per_tau: f64,
    /// Spectral cross-check for `p = q = 2`.
    pub crosscheck: bool,
    pub ladder: Vec<usize>,
    /// Schatten statistic recomputed with `1 - r_out` halved.
    pub refine: bool,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self {
            r_out: 0.97,
            shells: 16,
            rings_per_shell: 2,
            angular_factor: 2.0,
            margin: 3.0,
            density: 0.5,
            gl_order: 4,
            bins_per_tau: 32.0,
            crosscheck: true,
            ladder: vec![16, 32, 64, 128],
            refine: true,
        }
    }
}

impl CriteriaConfig {
    pub fn validate(&self, w: &WeightSpec) -> Result<()> {
        let guard = w.r_max_guard();
        if !(self.r_out > 0.0 && self.r_out < guard) {
            return Err(Error::Argument(format!("r_out {} must lie in (0, {guard})", self.r_out)));
        }
        if self.shells < LIMIT_TAIL {
            return Err(Error::Argument(format!("at least {LIMIT_TAIL} shells are needed")));
        }
        if self.rings_per_shell == 0 || self.gl_order == 0 {
            return Err(Error::Argument("rings per shell and GL order must be positive".into()));
        }
        if !(self.angular_factor > 0.0 && self.margin >= 0.0 && self.density > 0.0 && self.bins_per_tau > 0.0) {
            return Err(Error::Argument("angular factor, margin, density and bins per tau must be positive".into()));
        }
        if self.ladder.windows(2).any(|w| w[1] <= w[0]) || self.ladder.contains(&0) {
            return Err(Error::Argument("the N ladder must be positive and increasing".into()));
        }
        Ok(())
    }

    /// Same settings with the boundary gap `1 - r_out` halved.
    pub fn refined(&self) -> Self {
        Self {
            r_out: 1.0 - 0.5 * (1.0 - self.r_out),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shell {
    /// Outer radius.
    pub r: f64,
    pub max: f64,
    pub log_max: f64,
    /// Shell contribution to the integral statistic, where one is computed.
    pub mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crosscheck {
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub op_norm: Vec<f64>,
    /// `sum_k s_k^p` per truncation, for Schatten checks.
    pub schatten_sums: Option<Vec<f64>>,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessaryReport {
    pub sup: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub verdict: Verdict,
    pub statistic: f64,
    pub route: Route,
    pub operator: OpKind,
    pub p: Exponent,
    pub q: Exponent,
    pub shells: Vec<Shell>,
    pub crosscheck: Option<Crosscheck>,
    pub necessary: Option<NecessaryReport>,
    pub refined_statistic: Option<f64>,
    pub notes: Vec<String>,
}

/// Evaluation rings grouped into shells, with `d lambda` and `dA` weights per point.
#[derive(Debug, Clone)]
pub struct EvalGrid {
    pub rings: Vec<AtomRing>,
    pub lambda_weight: Vec<f64>,
    pub area_weight: Vec<f64>,
    pub shell_of: Vec<usize>,
    pub shell_outer: Vec<f64>,
}

impl EvalGrid {
    fn build(w: &WeightSpec, tc: &TauCoordinate, cfg: &CriteriaConfig) -> Self {
        let rho_out = tc.rho(cfg.r_out);
        let h = rho_out / cfg.shells as f64;
        let (gx, gw) = gauss_legendre(cfg.rings_per_shell);
        let mut g = EvalGrid {
            rings: Vec::new(),
            lambda_weight: Vec::new(),
            area_weight: Vec::new(),
            shell_of: Vec::new(),
            shell_outer: Vec::new(),
        };
        let mut offset = 0;
        for k in 0..cfg.shells {
            for (x, wt) in gx.iter().zip(&gw) {
                let rho = h * (k as f64 + 0.5 * (x + 1.0));
                let r = tc.radius(rho);
                let t = w.tau(r);
                let count = ((cfg.angular_factor * std::f64::consts::TAU * r / t).ceil() as usize)
                    .max(16)
                    .next_power_of_two();
                // dA = r dr dtheta / pi and dr = tau drho.
                let area = 2.0 * r * t * 0.5 * h * wt / count as f64;
                g.rings.push(AtomRing {
                    radius: r,
                    count,
                    offset,
                    start: 0.0,
                });
                g.area_weight.push(area);
                g.lambda_weight.push(area / (t * t));
                g.shell_of.push(k);
                offset += count;
            }
            g.shell_outer.push(tc.radius(h * (k + 1) as f64));
        }
        g
    }

    pub fn shells(&self) -> usize {
        self.shell_outer.len()
    }

    pub fn points(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.rings.iter().enumerate().flat_map(|(i, r)| {
            (0..r.count).map(move |j| {
                (i, Complex64::from_polar(r.radius, r.start + std::f64::consts::TAU * j as f64 / r.count as f64))
            })
        })
    }

    /// Evaluates `f` at every point, ring by ring.
    pub fn map<F: FnMut(Complex64) -> Result<f64>>(&self, mut f: F) -> Result<Vec<Vec<f64>>> {
        self.rings
            .iter()
            .map(|r| {
                (0..r.count)
                    .map(|j| {
                        f(Complex64::from_polar(
                            r.radius,
                            r.start + std::f64::consts::TAU * j as f64 / r.count as f64,
                        ))
                    })
                    .collect()
            })
            .collect()
    }

    /// Largest log value per shell.
    pub fn shell_log_max(&self, field: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.shells()];
        for (i, vals) in field.iter().enumerate() {
            let s = &mut out[self.shell_of[i]];
            *s = vals.iter().copied().fold(*s, f64::max);
        }
        out
    }

    /// `ln int_shell e^{s log f} d(measure)` per shell.
    pub fn shell_log_integral(&self, field: &[Vec<f64>], s: f64, lambda: bool) -> Vec<f64> {
        let mut acc = vec![LogSumExp::new(); self.shells()];
        for (i, vals) in field.iter().enumerate() {
            let lw = if lambda { self.lambda_weight[i] } else { self.area_weight[i] }.ln();
            let a = &mut acc[self.shell_of[i]];
            for v in vals {
                if *v > f64::NEG_INFINITY {
                    a.add(lw + s * v);
                }
            }
        }
        acc.into_iter().map(|a| a.value()).collect()
    }
}

/// Shared grids and kernel table for a batch of checks on one weight.
pub struct Workspace {
    w: WeightSpec,
    cfg: CriteriaConfig,
    tc: TauCoordinate,
    eval: EvalGrid,
    inner: DiskQuadrature,
    table: KernelTable,
}

impl Workspace {
    pub fn new(w: &WeightSpec, cfg: &CriteriaConfig) -> Result<Self> {
        cfg.validate(w)?;
        let guard = w.r_max_guard();
        let tc = w.tau_coordinate(guard.min(0.9999));
        let eval = EvalGrid::build(w, &tc, cfg);
        let r_grid = tc.radius(tc.rho(cfg.r_out) + cfg.margin).min(guard);
        let opts = GridOptions {
            density: cfg.density,
            gl_order: cfg.gl_order,
            min_angular: 16,
            dyadic: true,
            ..GridOptions::default()
        };
        let inner = DiskQuadrature::build(w, r_grid, &opts)?;
        let table = KernelTable::with_reach(w, cfg.r_out * r_grid)?;
        Ok(Self {
            w: w.clone(),
            cfg: cfg.clone(),
            tc,
            eval,
            inner,
            table,
        })
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.w
    }

    pub fn config(&self) -> &CriteriaConfig {
        &self.cfg
    }

    pub fn eval_grid(&self) -> &EvalGrid {
        &self.eval
    }

    pub fn inner_grid(&self) -> &DiskQuadrature {
        &self.inner
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    pub fn tau_coordinate(&self) -> &TauCoordinate {
        &self.tc
    }

    fn shells(&self, log_max: &[f64], mass: Option<&[f64]>) -> Vec<Shell> {
        log_max
            .iter()
            .enumerate()
            .map(|(k, &l)| Shell {
                r: self.eval.shell_outer[k],
                max: l.exp(),
                log_max: l,
                mass: mass.map(|m| m[k].exp()),
            })
            .collect()
    }

    /// Kernel table reaching `r_out` times the largest atom radius of `psi` on the inner grid.
    fn table_for(&self, psi: &Symbol) -> Result<KernelTable> {
        let amax = match psi.as_dilation() {
            Some(c) => c.norm() * self.inner.r_cut(),
            None => self.inner.nodes().map(|n| psi.value(n.z).norm()).fold(0.0, f64::max),
        };
        let reach = self.cfg.r_out * amax;
        if reach >= 1.0 {
            return Err(Error::Precondition(format!("psi reaches |psi| = {amax} on the grid")));
        }
        self.table.reaching(reach)
    }

    /// `ln M^psi_{n,p,q}(g)` on the evaluation grid.
    pub fn m_field(&self, req: &TransformRequest) -> Result<Vec<Vec<f64>>> {
        self.m_field_on(req, &self.eval.rings)
    }

    /// `ln M^psi_{n,p,q}(g)` on arbitrary rings inside `r_out`.
    pub fn m_field_on(&self, req: &TransformRequest, rings: &[AtomRing]) -> Result<Vec<Vec<f64>>> {
        if let Some(r) = rings.iter().find(|r| r.radius > self.cfg.r_out) {
            return Err(Error::Argument(format!("ring radius {} beyond r_out {}", r.radius, self.cfg.r_out)));
        }
        let table = self.table_for(&req.psi)?;
        let ks = KernelSum::m_transform(req, &table, &self.inner)?;
        self.field(ks, &req.psi, rings)
    }

    /// `ln` of the `GV` Schatten transform on the evaluation grid.
    pub fn gv_field(&self, psi: &Symbol, g: &Symbol) -> Result<Vec<Vec<f64>>> {
        let table = self.table_for(psi)?;
        let ks = KernelSum::gv_transform(psi, g, &table, &self.inner)?;
        self.field(ks, psi, &self.eval.rings)
    }

    fn field(&self, ks: KernelSum<'_>, psi: &Symbol, rings: &[AtomRing]) -> Result<Vec<Vec<f64>>> {
        if psi.as_dilation().is_some() {
            ks.log_field(rings)
        } else {
            ks.rebinned(&self.tc, self.cfg.bins_per_tau)?.log_field(rings)
        }
    }
}

/// `L^inf` rule on shell maxima (log scale).
pub fn linf_verdict(log_max: &[f64]) -> Verdict {
    let k = log_max.len();
    if log_max.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Verdict::Bounded;
    }
    let tail = &log_max[k.saturating_sub(LINF_TAIL)..];
    let argmax = log_max
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
        .0;
    let non_increasing = tail.windows(2).all(|w| w[1] <= w[0] + MONO_TOL);
    if non_increasing && argmax + 3 < k {
        return Verdict::Bounded;
    }
    let increasing = tail.windows(2).all(|w| w[1] > w[0]);
    if increasing && fitted_slope(tail) > TREND_SLOPE {
        return Verdict::Unbounded;
    }
    Verdict::Inconclusive
}

/// `lim = 0` rule on shell maxima (log scale); returns the verdict and the fitted tail slope.
pub fn limit_verdict(log_max: &[f64]) -> (Verdict, f64) {
    let k = log_max.len();
    let top = log_max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return (Verdict::Compact, f64::NEG_INFINITY);
    }
    let tail = &log_max[k.saturating_sub(LIMIT_TAIL)..];
    let slope = if tail.iter().all(|v| v.is_finite()) {
        fitted_slope(tail)
    } else {
        f64::NEG_INFINITY
    };
    let decreasing = tail.windows(2).all(|w| w[1] < w[0] || w[1] == f64::NEG_INFINITY);
    if decreasing && tail[tail.len() - 1] < top + LIMIT_RATIO.ln() {
        return (Verdict::Compact, slope);
    }
    let short = &log_max[k.saturating_sub(LINF_TAIL)..];
    if short.windows(2).all(|w| w[1] >= w[0] - MONO_TOL) {
        return (Verdict::NotCompact, slope);
    }
    (Verdict::Inconclusive, slope)
}

/// Tail rule for integral statistics on shell contributions (log scale): `Some(true)` when the
/// contributions decay geometrically, `Some(false)` when they do not decay at all.
pub fn integral_verdict(log_mass: &[f64]) -> Option<bool> {
    let k = log_mass.len();
    if log_mass.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Some(true);
    }
    let tail = &log_mass[k.saturating_sub(LINF_TAIL)..];
    if tail.contains(&f64::NEG_INFINITY) {
        return tail
            .windows(2)
            .all(|w| w[1] <= w[0] + MONO_TOL)
            .then_some(true);
    }
    let slope = fitted_slope(tail);
    if tail.windows(2).all(|w| w[1] <= w[0] + MONO_TOL) && slope < -TREND_SLOPE {
        Some(true)
    } else if tail.windows(2).all(|w| w[1] >= w[0] - MONO_TOL) {
        Some(false)
    } else {
        None
    }
}

fn normalize_kind(kind: OpKind, psi: &Symbol) -> Result<(u32, Symbol)> {
    Ok(match kind {
        OpKind::CPsiG => (1, psi.clone()),
        OpKind::CGPsi => (0, psi.clone()),
        OpKind::I => (1, Symbol::identity()),
        OpKind::J => (0, Symbol::identity()),
        OpKind::GI | OpKind::GV => {
            return Err(Error::Argument(format!(
                "no boundedness or compactness criterion is available for {kind}"
            )))
        }
    })
}

fn request(n: u32, p: Exponent, q: Exponent, psi: Symbol, g: &Symbol) -> Result<TransformRequest> {
    let kind = if n == 1 { OpKind::CPsiG } else { OpKind::CGPsi };
    TransformRequest::new(kind, p, q, psi, g.clone())
}

/// `ln` of the pointwise necessary-condition quantity at `z` (`n = 1` for `C_{psi,g}`).
pub fn necessary_condition(
    kind: OpKind,
    psi: &Symbol,
    g: &Symbol,
    p: Exponent,
    q: Exponent,
    w: &WeightSpec,
    z: Complex64,
) -> Result<f64> {
    let (n, psi) = normalize_kind(kind, psi)?;
    if z.norm() >= 1.0 {
        return Err(Error::Domain(format!("point {z} outside the disk")));
    }
    let pz = psi.value(z);
    let (r, s) = (z.norm(), pz.norm());
    if s >= 1.0 {
        return Err(Error::Precondition(format!("|psi({z})| >= 1")));
    }
    let v = g.value(pz).norm().ln() + psi.derivative_value(z).norm().ln() + 2.0 * q.recip() * w.tau(r).ln()
        - 2.0 * p.recip() * w.tau(s).ln()
        + n as f64 * w.phi_prime(s).ln_1p()
        - w.phi_prime(r).ln_1p()
        + 0.5 * (w.log_omega(r) - w.log_omega(s));
    Ok(if v.is_nan() { f64::NEG_INFINITY } else { v })
}

fn zero_report(route: Route, verdict: Verdict, kind: OpKind, p: Exponent, q: Exponent, ws: &Workspace) -> CriterionReport {
    let k = ws.eval.shells();
    CriterionReport {
        verdict,
        statistic: 0.0,
        route,
        operator: kind,
        p,
        q,
        shells: ws.shells(&vec![f64::NEG_INFINITY; k], None),
        crosscheck: None,
        necessary: None,
        refined_statistic: None,
        notes: vec!["g is identically zero".into()],
    }
}

fn spectral_ladder(
    kind: OpKind,
    psi: &Symbol,
    g: &Symbol,
    ws: &Workspace,
    schatten_p: Option<f64>,
) -> Result<Crosscheck> {
    let mut op_norm = Vec::new();
    let mut sums = Vec::new();
    for &n in &ws.cfg.ladder {
        let m = build_operator(kind, psi, g, &ws.w, n, Basis::Standard, &TruncationOptions::default())?;
        let s = singular_values(&m.entries)?;
        op_norm.push(s.first().copied().unwrap_or(0.0));
        if let Some(p) = schatten_p {
            sums.push(s.iter().map(|x| x.powf(p)).sum::<f64>());
        }
    }
    let saturated = match op_norm.as_slice() {
        [.., a, b] => *b <= *a * (1.0 + LADDER_SATURATION) || *b == 0.0,
        _ => true,
    };
    Ok(Crosscheck {
        n: ws.cfg.ladder.clone(),
        op_norm,
        schatten_sums: schatten_p.map(|_| sums),
        saturated,
    })
}

fn is_hilbert(p: Exponent, q: Exponent) -> bool {
    p == Exponent::Finite(2.0) && q == Exponent::Finite(2.0)
}

struct Evidence {
    verdict: Verdict,
    statistic: f64,
    shells: Vec<Shell>,
    log_max: Vec<f64>,
}

fn evidence(
    route: Route,
    n: u32,
    p: Exponent,
    q: Exponent,
    psi: &Symbol,
    g: &Symbol,
    ws: &Workspace,
) -> Result<Evidence> {
    let req = request(n, p, q, psi.clone(), g)?;
    match route {
        Route::A => {
            let field = ws.m_field(&req)?;
            let lm = ws.eval.shell_log_max(&field);
            let top = lm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(Evidence {
                verdict: linf_verdict(&lm),
                statistic: top.exp(),
                shells: ws.shells(&lm, None),
                log_max: lm,
            })
        }
        Route::B => {
            let Exponent::Finite(qv) = q else { unreachable!() };
            let s = route_b_exponent(p, qv);
            let field = ws.m_field(&req)?;
            let lm = ws.eval.shell_log_max(&field);
            let mass = ws.eval.shell_log_integral(&field, s, true);
            let mut total = LogSumExp::new();
            mass.iter().for_each(|m| total.add(*m));
            let verdict = match integral_verdict(&mass) {
                Some(true) => Verdict::Bounded,
                Some(false) => Verdict::Unbounded,
                None => Verdict::Inconclusive,
            };
            Ok(Evidence {
                verdict,
                statistic: (total.value() / s).exp(),
                shells: ws.shells(&lm, Some(&mass)),
                log_max: lm,
            })
        }
        Route::C => {
            let field = ws.eval.map(|z| log_n_transform(&req, &ws.w, z))?;
            let lm = ws.eval.shell_log_max(&field);
            let top = lm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(Evidence {
                verdict: linf_verdict(&lm),
                statistic: top.exp(),
                shells: ws.shells(&lm, None),
                log_max: lm,
            })
        }
        _ => Err(Error::Argument(format!("route {route:?} is not a boundedness route"))),
    }
}

fn necessary_report(kind: OpKind, psi: &Symbol, g: &Symbol, p: Exponent, q: Exponent, ws: &Workspace) -> Result<NecessaryReport> {
    let field = ws.eval.map(|z| necessary_condition(kind, psi, g, p, q, &ws.w, z))?;
    let lm = ws.eval.shell_log_max(&field);
    Ok(NecessaryReport {
        sup: lm.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp(),
        verdict: linf_verdict(&lm),
    })
}

/// Boundedness check for `C_{psi,g}` (`n = 1`) or `C^psi_g` (`n = 0`).
pub fn check_boundedness(
    kind: OpKind,
    psi: &Symbol,
    g: &Symbol,
    p: Exponent,
    q: Exponent,
    ws: &Workspace,
) -> Result<CriterionReport> {
    let (n, psi_eff) = normalize_kind(kind, psi)?;
    psi_eff.require_self_map()?;
    let route = route_for(p, q);
    if g.is_zero() {
        return Ok(zero_report(route, Verdict::Bounded, kind, p, q, ws));
    }
    let ev = evidence(route, n, p, q, &psi_eff, g, ws)?;
    let mut notes = Vec::new();
    let mut verdict = ev.verdict;
    let necessary = match (route, p, q) {
        (Route::A, Exponent::Finite(_), Exponent::Finite(_)) => {
            let nr = necessary_report(kind, &psi_eff, g, p, q, ws)?;
            if verdict == Verdict::Bounded && nr.verdict == Verdict::Unbounded {
                notes.push("necessary condition grows along the boundary shells".into());
                verdict = Verdict::Inconclusive;
            }
            Some(nr)
        }
        _ => None,
    };
    let crosscheck = if ws.cfg.crosscheck && is_hilbert(p, q) {
        let cc = spectral_ladder(kind, &psi_eff, g, ws, None)?;
        if verdict == Verdict::Bounded && !cc.saturated {
            notes.push("op_norm ladder does not saturate".into());
            verdict = Verdict::Inconclusive;
        }
        if verdict == Verdict::Unbounded && cc.saturated {
            notes.push("op_norm ladder saturates".into());
            verdict = Verdict::Inconclusive;
        }
        Some(cc)
    } else {
        None
    };
    Ok(CriterionReport {
        verdict,
        statistic: ev.statistic,
        route,
        operator: kind,
        p,
        q,
        shells: ev.shells,
        crosscheck,
        necessary,
        refined_statistic: None,
        notes,
    })
}

/// Largest `|psi|` on the unit circle (to `1e-12`).
fn boundary_sup(psi: &Symbol) -> f64 {
    (0..4096)
        .map(|j| {
            psi.value(Complex64::from_polar(1.0 - 1e-12, std::f64::consts::TAU * j as f64 / 4096.0))
                .norm()
        })
        .fold(0.0, f64::max)
}

/// Compactness check.
pub fn check_compactness(
    kind: OpKind,
    psi: &Symbol,
    g: &Symbol,
    p: Exponent,
    q: Exponent,
    ws: &Workspace,
) -> Result<CriterionReport> {
    let (n, psi_eff) = normalize_kind(kind, psi)?;
    psi_eff.require_self_map()?;
    let route = route_for(p, q);
    if g.is_zero() {
        return Ok(zero_report(route, Verdict::Compact, kind, p, q, ws));
    }
    if route == Route::B {
        let mut rep = check_boundedness(kind, psi, g, p, q, ws)?;
        rep.verdict = match rep.verdict {
            Verdict::Bounded => Verdict::Compact,
            Verdict::Unbounded => Verdict::NotCompact,
            v => v,
        };
        rep.notes.push("route B: compactness coincides with boundedness".into());
        return Ok(rep);
    }
    let mut notes = Vec::new();
    if route == Route::C {
        let sup = boundary_sup(&psi_eff);
        if sup < 1.0 - 1e-6 {
            notes.push(format!("limit over |psi(z)| -> 1 is vacuous: sup |psi| = {sup:.6}"));
            return Ok(CriterionReport {
                verdict: Verdict::Compact,
                statistic: 0.0,
                route,
                operator: kind,
                p,
                q,
                shells: Vec::new(),
                crosscheck: None,
                necessary: None,
                refined_statistic: None,
                notes,
            });
        }
    }
    let ev = if route == Route::C {
        // Shells by |psi(z)| instead of |z|.
        let req = request(n, p, q, psi_eff.clone(), g)?;
        let k = ws.eval.shells();
        let h = ws.tc.rho(ws.cfg.r_out) / k as f64;
        let mut lm = vec![f64::NEG_INFINITY; k];
        for (_, z) in ws.eval.points() {
            let s = psi_eff.value(z).norm();
            if s <= ws.cfg.r_out {
                let idx = ((ws.tc.rho(s) / h) as usize).min(k - 1);
                lm[idx] = lm[idx].max(log_n_transform(&req, &ws.w, z)?);
            }
        }
        Evidence {
            verdict: Verdict::Inconclusive,
            statistic: 0.0,
            shells: ws.shells(&lm, None),
            log_max: lm,
        }
    } else {
        evidence(route, n, p, q, &psi_eff, g, ws)?
    };
    let (mut verdict, slope) = limit_verdict(&ev.log_max);
    if route == Route::A && linf_verdict(&ev.log_max) == Verdict::Unbounded {
        verdict = Verdict::NotCompact;
    }
    let crosscheck = if ws.cfg.crosscheck && is_hilbert(p, q) {
        Some(spectral_ladder(kind, &psi_eff, g, ws, None)?)
    } else {
        None
    };
    Ok(CriterionReport {
        verdict,
        statistic: slope,
        route,
        operator: kind,
        p,
        q,
        shells: ev.shells,
        crosscheck,
        necessary: None,
        refined_statistic: None,
        notes,
    })
}

fn schatten_statistic(kind: OpKind, psi: &Symbol, g: &Symbol, p: f64, ws: &Workspace) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let field = match kind {
        OpKind::GV => ws.gv_field(psi, g)?,
        _ => ws.m_field(&request(0, Exponent::Finite(2.0), Exponent::Finite(2.0), psi.clone(), g)?)?,
    };
    let s = p / 2.0;
    let mass = ws.eval.shell_log_integral(&field, s, true);
    let mut total = LogSumExp::new();
    mass.iter().for_each(|m| total.add(*m));
    Ok(((total.value() / s).exp(), ws.eval.shell_log_max(&field), mass))
}

/// Schatten check for `C^psi_g` (also `J`) and `GV_{psi,g}` on `A^2_omega`.
pub fn check_schatten(kind: OpKind, psi: &Symbol, g: &Symbol, p: f64, ws: &Workspace) -> Result<CriterionReport> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Argument(format!("Schatten exponent must be positive, got {p}")));
    }
    let psi_eff = match kind {
        OpKind::CGPsi | OpKind::GV => psi.clone(),
        OpKind::J => Symbol::identity(),
        _ => {
            return Err(Error::Argument(format!(
                "no Schatten criterion is available for {kind}"
            )))
        }
    };
    psi_eff.require_self_map()?;
    let two = Exponent::Finite(2.0);
    if g.is_zero() {
        let mut r = zero_report(Route::Schatten, Verdict::InSp, kind, two, two, ws);
        r.p = Exponent::Finite(p);
        return Ok(r);
    }
    let mut notes = Vec::new();
    if kind == OpKind::GV {
        notes.push("GV integrand uses the exponent 2 on (1 + phi')".into());
    }
    let (stat, lm, mass) = schatten_statistic(kind, &psi_eff, g, p, ws)?;
    let mut verdict = match integral_verdict(&mass) {
        Some(true) => Verdict::InSp,
        Some(false) => Verdict::NotInSp,
        None => Verdict::Inconclusive,
    };
    let mut route = Route::Schatten;
    let refined_statistic = if ws.cfg.refine {
        let fine = Workspace::new(&ws.w, &ws.cfg.refined())?;
        let (s2, _, _) = schatten_statistic(kind, &psi_eff, g, p, &fine)?;
        let growth = s2 / stat;
        if verdict == Verdict::InSp && growth > 2.0 {
            notes.push(format!("statistic grew by {growth:.3} under refinement"));
            verdict = Verdict::Inconclusive;
        }
        if verdict == Verdict::NotInSp && growth < 1.1 {
            notes.push(format!("statistic stable under refinement ({growth:.3})"));
            verdict = Verdict::Inconclusive;
        }
        Some(s2)
    } else {
        None
    };
    if p <= 1.0 && psi_eff.is_identity() && kind != OpKind::GV {
        // For p <= 1 the symbol under the integral must vanish identically.
        notes.push("p <= 1 with psi = id: only the zero integrand symbol is in S_p".into());
        verdict = Verdict::NotInSp;
        route = Route::IdCase;
    }
    let crosscheck = if ws.cfg.crosscheck {
        Some(spectral_ladder(kind, &psi_eff, g, ws, Some(p))?)
    } else {
        None
    };
    Ok(CriterionReport {
        verdict,
        statistic: stat,
        route,
        operator: kind,
        p: Exponent::Finite(p),
        q: two,
        shells: ws.shells(&lm, Some(&mass)),
        crosscheck,
        necessary: None,
        refined_statistic,
        notes,
    })
}

/// Schatten check for `J_g` through the id-case simplification: the integrand symbol is `g'`.
pub fn check_schatten_j_type(g: &Symbol, p: f64, ws: &Workspace) -> Result<CriterionReport> {
    let mut rep = check_schatten(OpKind::J, &Symbol::identity(), &g.derivative()?, p, ws)?;
    rep.notes.push("integrand symbol is g'".into());
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelEntry {
    pub name: String,
    pub verdict: Verdict,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelReport {
    pub p: Exponent,
    pub q: Exponent,
    pub entries: Vec<PanelEntry>,
    pub m_route: Vec<PanelEntry>,
    pub consistent: bool,
}

/// The `psi = id` simplifications for the symbol `g` (entering through `g'`), each next to
/// the corresponding `M`-transform verdict for `C^id_{g'}`.
pub fn id_case_panel(g: &Symbol, p: Exponent, q: Exponent, ws: &Workspace) -> Result<PanelReport> {
    let w = &ws.w;
    let dg = g.derivative()?;
    let id = Symbol::identity();
    let zero = dg.is_zero();
    let mut entries = Vec::new();
    let mut m_route = Vec::new();
    let lg = |z: Complex64| dg.value(z).norm().ln();
    // Shell rules see the q-th power, the scale on which M compares to these quantities.
    let power = match q {
        Exponent::Finite(q) => q,
        Exponent::Infinity => 1.0,
    };
    let pair = |name: &str, field: &[Vec<f64>], limit: bool| -> PanelEntry {
        let lm = ws.eval.shell_log_max(field);
        let top = lm.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp();
        let scaled: Vec<f64> = lm.iter().map(|v| power * v).collect();
        PanelEntry {
            name: name.into(),
            verdict: if limit { limit_verdict(&scaled).0 } else { linf_verdict(&scaled) },
            statistic: top,
        }
    };
    let integral = |name: &str, field: &[Vec<f64>], s: f64, lambda: bool, yes: Verdict, no: Verdict| {
        let mass = ws.eval.shell_log_integral(field, s, lambda);
        let mut t = LogSumExp::new();
        mass.iter().for_each(|m| t.add(*m));
        PanelEntry {
            name: name.into(),
            verdict: match integral_verdict(&mass) {
                Some(true) => yes,
                Some(false) => no,
                None => Verdict::Inconclusive,
            },
            statistic: if zero { 0.0 } else { (t.value() / s).exp() },
        }
    };
    let route = route_for(p, q);
    if route != Route::B {
        let e = p.recip() - q.recip();
        let lap = ws.eval.map(|z| {
            let r = z.norm();
            Ok(lg(z) - w.phi_prime(r).ln_1p() + e * w.laplacian(r).ln())
        })?;
        entries.push(pair("laplacian_sup", &lap, false));
        entries.push(pair("laplacian_limit", &lap, true));
    } else if let (Exponent::Finite(pv), Exponent::Finite(qv)) = (p, q) {
        let r_exp = pv * qv / (pv - qv);
        let f = ws.eval.map(|z| Ok(lg(z) - w.phi_prime(z.norm()).ln_1p()))?;
        entries.push(integral("derivative_lebesgue", &f, r_exp, false, Verdict::Bounded, Verdict::Unbounded));
    }
    let dist: Vec<f64> = ws
        .eval
        .rings
        .iter()
        .map(|r| w.distortion(r.radius).map(f64::ln))
        .collect::<Result<_>>()?;
    let pw: Vec<Vec<f64>> = ws
        .eval
        .rings
        .iter()
        .zip(&dist)
        .map(|(r, d)| {
            (0..r.count)
                .map(|j| lg(Complex64::from_polar(r.radius, std::f64::consts::TAU * j as f64 / r.count as f64)) + d)
                .collect()
        })
        .collect();
    if p == q {
        entries.push(pair("distortion_sup", &pw, false));
        entries.push(pair("distortion_limit", &pw, true));
    }
    if let Exponent::Finite(sp) = p {
        let mut e = integral("distortion_schatten", &pw, sp, true, Verdict::InSp, Verdict::NotInSp);
        if sp <= 1.0 {
            e.verdict = if zero { Verdict::InSp } else { Verdict::NotInSp };
        }
        entries.push(e);
    }

    let bounded = check_boundedness(OpKind::CGPsi, &id, &dg, p, q, ws)?;
    m_route.push(PanelEntry {
        name: "bounded".into(),
        verdict: bounded.verdict,
        statistic: bounded.statistic,
    });
    let compact = check_compactness(OpKind::CGPsi, &id, &dg, p, q, ws)?;
    m_route.push(PanelEntry {
        name: "compact".into(),
        verdict: compact.verdict,
        statistic: compact.statistic,
    });
    if let Exponent::Finite(sp) = p {
        let sch = check_schatten(OpKind::CGPsi, &id, &dg, sp, ws)?;
        m_route.push(PanelEntry {
            name: "schatten".into(),
            verdict: sch.verdict,
            statistic: sch.statistic,
        });
    }
    let find = |list: &[PanelEntry], name: &str| list.iter().find(|e| e.name == name).map(|e| e.verdict);
    let mut consistent = true;
    for (panel, m) in [
        ("laplacian_sup", "bounded"),
        ("derivative_lebesgue", "bounded"),
        ("distortion_sup", "bounded"),
        ("laplacian_limit", "compact"),
        ("distortion_limit", "compact"),
        ("distortion_schatten", "schatten"),
    ] {
        if let (Some(a), Some(b)) = (find(&entries, panel), find(&m_route, m)) {
            consistent &= a == b;
        }
    }
    Ok(PanelReport {
        p,
        q,
        entries,
        m_route,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linf_rule() {
        let up: Vec<f64> = (0..16).map(|k| 0.2 * k as f64).collect();
        assert_eq!(linf_verdict(&up), Verdict::Unbounded);
        let down: Vec<f64> = (0..16).map(|k| -((k as f64 - 4.0).powi(2))).collect();
        assert_eq!(linf_verdict(&down), Verdict::Bounded);
        let zig: Vec<f64> = (0..16).map(|k| if k % 2 == 0 { 1.0 } else { 0.0 }).collect();
        assert_eq!(linf_verdict(&zig), Verdict::Inconclusive);
        assert_eq!(linf_verdict(&[f64::NEG_INFINITY; 16]), Verdict::Bounded);
    }

    #[test]
    fn limit_rule() {
        let down: Vec<f64> = (0..16).map(|k| -(k as f64)).collect();
        assert_eq!(limit_verdict(&down).0, Verdict::Compact);
        let flat = vec![0.0; 16];
        assert_eq!(limit_verdict(&flat).0, Verdict::NotCompact);
    }

    #[test]
    fn integral_rule() {
        let decay: Vec<f64> = (0..16).map(|k| -0.5 * k as f64).collect();
        assert_eq!(integral_verdict(&decay), Some(true));
        let grow: Vec<f64> = (0..16).map(|k| 0.1 * k as f64).collect();
        assert_eq!(integral_verdict(&grow), Some(false));
    }

    #[test]
    fn routes() {
        let f = Exponent::Finite;
        assert_eq!(route_for(f(2.0), f(4.0)), Route::A);
        assert_eq!(route_for(f(4.0), f(2.0)), Route::B);
        assert_eq!(route_for(Exponent::Infinity, f(2.0)), Route::B);
        assert_eq!(route_for(f(2.0), Exponent::Infinity), Route::C);
        assert_eq!(route_b_exponent(f(4.0), 2.0), 2.0);
        assert_eq!(route_b_exponent(Exponent::Infinity, 2.0), 1.0);
    }

    #[test]
    fn necessary_condition_cancels_for_identity() {
        let w = WeightSpec::exponential(1.0, 1.0).unwrap();
        let g = Symbol::real_polynomial(&[0.3, 1.0]);
        let z = Complex64::new(0.4, 0.5);
        let f = Exponent::Finite(3.0);
        let v = necessary_condition(OpKind::CGPsi, &Symbol::identity(), &g, f, f, &w, z).unwrap();
        let want = g.value(z).norm() / (1.0 + w.phi_prime(z.norm()));
        assert!((v.exp() / want - 1.0).abs() < 1e-12);
    }
}
