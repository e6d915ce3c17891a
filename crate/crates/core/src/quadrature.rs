//! Tau-adapted polar quadrature on the disk `|z| < r_cut` (normalized area measure),
//! log-domain integration, `L^s(d lambda)` norms and discrete measures.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, Exponent, LogSumExp};
use crate::symbols::Symbol;
use crate::weights::{WeightSpec, WeightValues};

/// Log-domain decay of `omega` that bounds the default cut radius.
pub const LOG_DECAY_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOptions {
    /// Refinement factor: annulus width is `tau/(2 density)`.
    pub density: f64,
    /// Gauss-Legendre nodes per annulus.
    pub gl_order: usize,
    pub min_angular: usize,
    /// Multiplies the `8 pi r density / tau` angular count.
    pub angular_scale: f64,
    /// Start angle (radians) of every ring.
    pub angular_offset: f64,
    pub node_budget: usize,
    /// Round angular counts up to powers of two, so rings nest under FFT folding.
    pub dyadic: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            density: 1.0,
            gl_order: 8,
            min_angular: 64,
            angular_scale: 1.0,
            angular_offset: 0.0,
            node_budget: 50_000_000,
            dyadic: false,
        }
    }
}

impl GridOptions {
    pub fn with_density(density: f64) -> Self {
        Self {
            density,
            ..Self::default()
        }
    }
}

/// One circle of equally spaced nodes sharing radius and area weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub radius: f64,
    pub count: usize,
    /// Index of the first node of this ring in the flat node order.
    pub offset: usize,
    pub start: f64,
    /// Area weight of each node on the ring.
    pub weight: f64,
    pub values: WeightValues,
}

impl Ring {
    #[inline]
    pub fn angle(&self, j: usize) -> f64 {
        self.start + std::f64::consts::TAU * j as f64 / self.count as f64
    }

    #[inline]
    pub fn point(&self, j: usize) -> Complex64 {
        Complex64::from_polar(self.radius, self.angle(j))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Node<'a> {
    pub index: usize,
    pub z: Complex64,
    pub weight: f64,
    pub ring: &'a Ring,
}

#[derive(Debug, Clone)]
pub struct DiskQuadrature {
    r_cut: f64,
    annuli: Vec<f64>,
    angular_counts: Vec<usize>,
    rings: Vec<Ring>,
    len: usize,
    options: GridOptions,
}

struct Plan {
    annuli: Vec<f64>,
    counts: Vec<usize>,
    total: usize,
}

fn plan(w: &WeightSpec, r_cut: f64, opts: &GridOptions, budget: usize) -> Option<Plan> {
    let mut annuli = vec![0.0];
    let mut counts = Vec::new();
    let mut total = 0usize;
    let mut r0 = 0.0;
    while r0 < r_cut {
        let mut width = w.tau(r0) / (2.0 * opts.density);
        for _ in 0..6 {
            width = w.tau((r0 + 0.5 * width).min(r_cut)) / (2.0 * opts.density);
        }
        while width > w.tau(r0 + 0.5 * width) / (2.0 * opts.density) {
            width *= 0.99;
        }
        let r1 = (r0 + width).min(r_cut);
        let scaled = 8.0 * std::f64::consts::PI * r1 * opts.density * opts.angular_scale / w.tau(r1);
        let mut j = (scaled.ceil() as usize).max(opts.min_angular);
        if opts.dyadic {
            j = j.next_power_of_two();
        }
        total = total.saturating_add(j * opts.gl_order);
        if total > budget {
            return None;
        }
        counts.push(j);
        annuli.push(r1);
        r0 = r1;
    }
    Some(Plan {
        annuli,
        counts,
        total,
    })
}

impl DiskQuadrature {
    pub fn build(w: &WeightSpec, r_cut: f64, opts: &GridOptions) -> Result<Self> {
        if !(r_cut > 0.0 && r_cut <= w.r_max_guard()) {
            return Err(Error::Argument(format!(
                "r_cut {r_cut} must lie in (0, {}]",
                w.r_max_guard()
            )));
        }
        if !(opts.density > 0.0 && opts.gl_order > 0 && opts.angular_scale > 0.0) {
            return Err(Error::Argument("grid density, order and angular scale must be positive".into()));
        }
        let p = plan(w, r_cut, opts, opts.node_budget).ok_or_else(|| {
            Error::Resource(format!(
                "grid to r_cut {r_cut} exceeds the node budget {}",
                opts.node_budget
            ))
        })?;
        let (gx, gw) = gauss_legendre(opts.gl_order);
        let mut rings = Vec::with_capacity(p.counts.len() * opts.gl_order);
        let mut offset = 0;
        for (k, &j) in p.counts.iter().enumerate() {
            let (a, b) = (p.annuli[k], p.annuli[k + 1]);
            let half = 0.5 * (b - a);
            for (x, wt) in gx.iter().zip(&gw) {
                let r = a + half * (x + 1.0);
                let radial = wt * half;
                rings.push(Ring {
                    radius: r,
                    count: j,
                    offset,
                    start: opts.angular_offset,
                    weight: 2.0 * radial * r / j as f64,
                    values: w.eval(r)?,
                });
                offset += j;
            }
        }
        Ok(Self {
            r_cut,
            annuli: p.annuli,
            angular_counts: p.counts,
            rings,
            len: p.total,
            options: opts.clone(),
        })
    }

    /// Grid whose cut radius is the default one from [`default_r_cut`].
    pub fn build_default(w: &WeightSpec, opts: &GridOptions) -> Result<Self> {
        Self::build(w, default_r_cut(w, opts), opts)
    }

    pub fn r_cut(&self) -> f64 {
        self.r_cut
    }

    pub fn annuli(&self) -> &[f64] {
        &self.annuli
    }

    pub fn angular_counts(&self) -> &[usize] {
        &self.angular_counts
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    /// Ring geometry in the form used by kernel ring sums.
    pub fn atom_rings(&self) -> Vec<AtomRing> {
        self.rings
            .iter()
            .map(|r| AtomRing {
                radius: r.radius,
                count: r.count,
                offset: r.offset,
                start: r.start,
            })
            .collect()
    }

    pub fn options(&self) -> &GridOptions {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node<'_>> + '_ {
        self.rings.iter().flat_map(|ring| {
            (0..ring.count).map(move |j| Node {
                index: ring.offset + j,
                z: ring.point(j),
                weight: ring.weight,
                ring,
            })
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.rings.iter().map(|r| r.weight * r.count as f64).sum()
    }

    /// `log int f dA` for `f = exp(log_f)`; NaN samples are an error.
    pub fn integrate_log<F: FnMut(&Node) -> f64>(&self, mut log_f: F) -> Result<f64> {
        let mut acc = LogSumExp::new();
        for node in self.nodes() {
            let v = log_f(&node);
            if v.is_nan() {
                return Err(Error::NanIntegrand {
                    node: node.index,
                    point: node.z,
                });
            }
            acc.add(v + node.weight.ln());
        }
        Ok(acc.value())
    }

    /// Plain weighted sum, for integrands of moderate size.
    pub fn integrate<F: FnMut(&Node) -> f64>(&self, mut f: F) -> f64 {
        self.nodes().map(|n| f(&n) * n.weight).sum()
    }

    pub fn integrate_complex<F: FnMut(&Node) -> Complex64>(&self, mut f: F) -> Complex64 {
        self.nodes().map(|n| f(&n) * n.weight).sum()
    }

    /// `log ||F||_{L^s(d lambda)}` with `d lambda = dA / tau^2`, from `log F` samples.
    pub fn lambda_norm_log<F: FnMut(&Node) -> f64>(&self, mut log_f: F, s: Exponent) -> Result<f64> {
        match s {
            Exponent::Infinity => {
                let mut best = f64::NEG_INFINITY;
                for node in self.nodes() {
                    let v = log_f(&node);
                    if v.is_nan() {
                        return Err(Error::NanIntegrand {
                            node: node.index,
                            point: node.z,
                        });
                    }
                    best = best.max(v);
                }
                Ok(best)
            }
            Exponent::Finite(s) => {
                let l = self.integrate_log(|n| s * log_f(n) + n.ring.values.laplacian_phi.ln())?;
                Ok(l / s)
            }
        }
    }

    /// `||F||_{L^s(d lambda)}` for nonnegative samples; negative samples break the contract.
    pub fn lambda_norm<F: FnMut(&Node) -> f64>(&self, mut f: F, s: Exponent) -> Result<f64> {
        let mut bad = None;
        let l = self.lambda_norm_log(
            |n| {
                let v = f(n);
                if v < 0.0 && bad.is_none() {
                    bad = Some((n.index, v));
                }
                v.ln()
            },
            s,
        );
        if let Some((i, v)) = bad {
            return Err(Error::Contract(format!(
                "lambda_norm integrand is negative ({v}) at node {i}"
            )));
        }
        Ok(l?.exp())
    }

    /// One node per line: `re im weight`, preceded by a `# r_cut` header.
    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# r_cut {:.16e}", self.r_cut)?;
        for n in self.nodes() {
            writeln!(out, "{:.16e} {:.16e} {:.16e}", n.z.re, n.z.im, n.weight)?;
        }
        Ok(())
    }

    /// Reads a dump back; consecutive nodes of equal radius form a ring.
    pub fn restore<R: BufRead>(w: &WeightSpec, input: R) -> Result<Self> {
        let mut r_cut = None;
        let mut pts: Vec<(Complex64, f64)> = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if let Some(h) = t.strip_prefix("# r_cut") {
                r_cut = h.trim().parse::<f64>().ok();
                continue;
            }
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let v: Vec<f64> = t
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    pos: lineno + 1,
                    msg: format!("expected 're im weight', got '{t}'"),
                })?;
            if v.len() != 3 {
                return Err(Error::Parse {
                    pos: lineno + 1,
                    msg: format!("expected 're im weight', got '{t}'"),
                });
            }
            pts.push((Complex64::new(v[0], v[1]), v[2]));
        }
        let mut rings: Vec<Ring> = Vec::new();
        for (i, (z, wt)) in pts.iter().enumerate() {
            let r = z.norm();
            match rings.last_mut() {
                Some(ring) if (ring.radius - r).abs() <= 1e-12 * r.max(1e-300) => ring.count += 1,
                _ => rings.push(Ring {
                    radius: r,
                    count: 1,
                    offset: i,
                    start: z.arg(),
                    weight: *wt,
                    values: w.eval(r)?,
                }),
            }
        }
        let max_r = rings.iter().map(|r| r.radius).fold(0.0, f64::max);
        let len = pts.len();
        let angular_counts = rings.iter().map(|r| r.count).collect();
        Ok(Self {
            r_cut: r_cut.unwrap_or(max_r),
            annuli: Vec::new(),
            angular_counts,
            rings,
            len,
            options: GridOptions::default(),
        })
    }
}

/// `min(r_max_guard, radius where log omega fell by 700, largest radius within the node budget)`.
pub fn default_r_cut(w: &WeightSpec, opts: &GridOptions) -> f64 {
    let guard = w.r_max_guard();
    let lw0 = w.log_omega(0.0);
    let decay = bisect(0.0, guard, |r| lw0 - w.log_omega(r) < LOG_DECAY_LIMIT);
    let hi = guard.min(decay);
    if plan(w, hi, opts, opts.node_budget).is_some() {
        return hi;
    }
    bisect(0.0, hi, |r| plan(w, r, opts, opts.node_budget).is_some())
}

/// Largest `x` in `[lo, hi]` with `pred(x)`, assuming `pred` is true then false.
fn bisect<F: Fn(f64) -> bool>(lo: f64, hi: f64, pred: F) -> f64 {
    if pred(hi) {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if pred(m) {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Provenance {
    Pullback { psi: String, g: String, q: f64 },
    /// Pullback reweighted by `(1 + phi')^q omega^{-q/2}` at the atom.
    PullbackNu { psi: String, g: String, q: f64 },
    PointMass,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub point: Complex64,
    /// `ln(mass)`; `-inf` for a zero mass.
    pub log_mass: f64,
}

impl Atom {
    pub fn mass(&self) -> f64 {
        self.log_mass.exp()
    }
}

/// Atoms that sit on a circle with equally spaced angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomRing {
    pub radius: f64,
    pub count: usize,
    pub offset: usize,
    pub start: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
    pub provenance: Provenance,
    /// Present when atoms come in ring order (pullbacks by dilations).
    pub rings: Option<Vec<AtomRing>>,
}

impl DiscreteMeasure {
    pub fn zero() -> Self {
        Self {
            atoms: Vec::new(),
            provenance: Provenance::Custom,
            rings: None,
        }
    }

    pub fn point_mass(point: Complex64, mass: f64) -> Result<Self> {
        if mass < 0.0 || point.norm() >= 1.0 {
            return Err(Error::Argument("point mass needs mass >= 0 and |point| < 1".into()));
        }
        Ok(Self {
            atoms: vec![Atom {
                point,
                log_mass: mass.ln(),
            }],
            provenance: Provenance::PointMass,
            rings: None,
        })
    }

    pub fn from_atoms(atoms: Vec<(Complex64, f64)>) -> Result<Self> {
        let atoms = atoms
            .into_iter()
            .map(|(point, mass)| {
                if mass < 0.0 || point.norm() >= 1.0 {
                    Err(Error::Argument(format!("invalid atom {point} with mass {mass}")))
                } else {
                    Ok(Atom {
                        point,
                        log_mass: mass.ln(),
                    })
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            atoms,
            provenance: Provenance::Custom,
            rings: None,
        })
    }

    pub fn log_total_mass(&self) -> f64 {
        let mut acc = LogSumExp::new();
        for a in &self.atoms {
            acc.add(a.log_mass);
        }
        acc.value()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.log_mass == f64::NEG_INFINITY)
    }

    /// Multiplies each atom by `(1 + phi'(|a|))^q omega(a)^{-q/2}` (the companion nu-measure).
    pub fn nu_reweight(&self, w: &WeightSpec, q: f64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let r = a.point.norm();
                Atom {
                    point: a.point,
                    log_mass: a.log_mass + q * w.phi_prime(r).ln_1p() - 0.5 * q * w.log_omega(r),
                }
            })
            .collect();
        let provenance = match &self.provenance {
            Provenance::Pullback { psi, g, q } => Provenance::PullbackNu {
                psi: psi.clone(),
                g: g.clone(),
                q: *q,
            },
            p => p.clone(),
        };
        Self {
            atoms,
            provenance,
            rings: self.rings.clone(),
        }
    }
}

/// Pullback measure: atoms at `psi(xi)` with mass
/// `|g(psi)|^q |psi'|^q omega(xi)^{q/2} (1 + phi'(xi))^{-q} dA(xi)`.
pub fn pullback_measure(
    _w: &WeightSpec,
    psi: &Symbol,
    g: &Symbol,
    q: f64,
    grid: &DiskQuadrature,
) -> Result<DiscreteMeasure> {
    psi.require_self_map()?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Argument(format!("pullback exponent q must be positive, got {q}")));
    }
    let mut atoms = Vec::with_capacity(grid.len());
    for node in grid.nodes() {
        let p = psi.value(node.z);
        let v = &node.ring.values;
        let log_mass = q * (g.value(p).norm().ln() + psi.derivative_value(node.z).norm().ln())
            + 0.5 * q * v.log_omega
            - q * v.log_one_plus_phi_prime()
            + node.weight.ln();
        atoms.push(Atom {
            point: p,
            log_mass: if log_mass.is_nan() { f64::NEG_INFINITY } else { log_mass },
        });
    }
    let rings = psi.as_dilation().map(|c| {
        grid.rings()
            .iter()
            .map(|r| AtomRing {
                radius: c.norm() * r.radius,
                count: r.count,
                offset: r.offset,
                start: r.start + c.arg(),
            })
            .collect()
    });
    Ok(DiscreteMeasure {
        atoms,
        provenance: Provenance::Pullback {
            psi: psi.to_string(),
            g: g.to_string(),
            q,
        },
        rings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proto() -> WeightSpec {
        WeightSpec::exponential(1.0, 1.0).unwrap()
    }

    #[test]
    fn total_weight_is_disk_area() {
        let g = DiskQuadrature::build(&proto(), 0.9, &GridOptions::default()).unwrap();
        assert!((g.total_weight() - 0.81).abs() < 1e-10);
    }

    #[test]
    fn second_moment_of_disk() {
        let g = DiskQuadrature::build(&proto(), 0.9, &GridOptions::default()).unwrap();
        let v = g.integrate(|n| n.z.norm_sqr());
        assert!((v - 0.9f64.powi(4) / 2.0).abs() < 1e-8);
    }

    #[test]
    fn annulus_width_follows_tau() {
        let w = proto();
        let g = DiskQuadrature::build(&w, 0.95, &GridOptions::default()).unwrap();
        for a in g.annuli().windows(2) {
            assert!(a[1] - a[0] <= w.tau(0.5 * (a[0] + a[1])) / 2.0 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn zero_integrand_is_minus_infinity() {
        let g = DiskQuadrature::build(&proto(), 0.5, &GridOptions::default()).unwrap();
        assert_eq!(g.integrate_log(|_| f64::NEG_INFINITY).unwrap(), f64::NEG_INFINITY);
        let l = g.integrate_log(|_| 0.0).unwrap();
        assert!((l - 0.25f64.ln()).abs() < 1e-12);
        assert!(matches!(g.integrate_log(|_| f64::NAN), Err(Error::NanIntegrand { node: 0, .. })));
    }

    #[test]
    fn lambda_norm_contract() {
        let g = DiskQuadrature::build(&proto(), 0.5, &GridOptions::default()).unwrap();
        assert_eq!(g.lambda_norm(|_| 0.0, Exponent::Finite(2.0)).unwrap(), 0.0);
        assert_eq!(g.lambda_norm(|_| 1.0, Exponent::Infinity).unwrap(), 1.0);
        assert!(matches!(
            g.lambda_norm(|_| -1.0, Exponent::Finite(1.0)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn node_budget_is_enforced() {
        let opts = GridOptions {
            node_budget: 1000,
            ..GridOptions::default()
        };
        assert!(matches!(
            DiskQuadrature::build(&proto(), 0.9, &opts),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn dump_restore_round_trip() {
        let w = proto();
        let g = DiskQuadrature::build(&w, 0.5, &GridOptions::default()).unwrap();
        let mut buf = Vec::new();
        g.dump(&mut buf).unwrap();
        let h = DiskQuadrature::restore(&w, buf.as_slice()).unwrap();
        assert_eq!(h.len(), g.len());
        assert_eq!(h.rings().len(), g.rings().len());
        assert!((h.total_weight() - g.total_weight()).abs() < 1e-14);
    }

    #[test]
    fn zero_symbol_pullback_has_no_mass() {
        let w = proto();
        let g = DiskQuadrature::build(&w, 0.5, &GridOptions::default()).unwrap();
        let mu = pullback_measure(&w, &Symbol::identity(), &Symbol::zero(), 2.0, &g).unwrap();
        assert!(mu.is_zero());
        let bad = pullback_measure(&w, &Symbol::real_polynomial(&[0.0, 2.0]), &Symbol::zero(), 2.0, &g);
        assert!(matches!(bad, Err(Error::Precondition(_))));
    }
}
