//! Berezin-type transforms (`M`, `N`, `G_t`, averaging functions), function-space
//! norms and embedding constants, all evaluated in the log domain.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rstar::primitives::GeomWithData;
use rustfft::FftPlanner;
use rstar::RTree;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::lattice::Lattice;
use crate::numeric::{Exponent, LogSumExp};
use crate::quadrature::{pullback_measure, Atom, AtomRing, DiscreteMeasure, DiskQuadrature};
use crate::symbols::Symbol;
use crate::weights::{TauCoordinate, WeightSpec};

/// The six integral operators. Only `CPsiG` (n = 1) and `CGPsi` (n = 0) carry transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    /// `f -> int_0^{psi(z)} f' g`
    CPsiG,
    /// `f -> int_0^{psi(z)} f g`
    CGPsi,
    /// `f -> int_0^z f'(psi) g`
    GI,
    /// `f -> int_0^z f(psi) g`
    GV,
    /// `f -> int_0^z f g` (the `psi = id` case of `CGPsi`)
    J,
    /// `f -> int_0^z f' g` (the `psi = id` case of `CPsiG`)
    I,
}

impl OpKind {
    /// Exponent `n` of `(1 + phi'(psi))^{nq}` in the `M`/`N` transforms.
    pub fn n(self) -> Option<u32> {
        match self {
            OpKind::CPsiG => Some(1),
            OpKind::CGPsi => Some(0),
            _ => None,
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpKind::CPsiG => "c_psi_g",
            OpKind::CGPsi => "c_g_psi",
            OpKind::GI => "gi",
            OpKind::GV => "gv",
            OpKind::J => "j",
            OpKind::I => "i",
        })
    }
}

impl Serialize for OpKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OpKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "c_psi_g" => OpKind::CPsiG,
            "c_g_psi" => OpKind::CGPsi,
            "gi" => OpKind::GI,
            "gv" => OpKind::GV,
            "j" => OpKind::J,
            "i" => OpKind::I,
            other => {
                return Err(Error::Parse {
                    pos: 0,
                    msg: format!("unknown operator '{other}' (c_psi_g, c_g_psi, gi, gv, j, i)"),
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformRequest {
    pub kind: OpKind,
    pub p: Exponent,
    pub q: Exponent,
    pub psi: Symbol,
    pub g: Symbol,
}

impl TransformRequest {
    pub fn new(kind: OpKind, p: Exponent, q: Exponent, psi: Symbol, g: Symbol) -> Result<Self> {
        if kind.n().is_none() {
            return Err(Error::Argument(format!("operator {kind} has no M/N transform")));
        }
        Ok(Self { kind, p, q, psi, g })
    }

    pub fn n(&self) -> u32 {
        self.kind.n().unwrap_or(0)
    }

    /// `1/p` for finite `p`, `0` for `p = inf`.
    pub fn t(&self) -> f64 {
        self.p.recip()
    }
}

/// Log-units below the largest bound at which field contributions are dropped.
pub const PRUNE: f64 = 40.0;
/// Relative level below which FFT convolution entries are recomputed directly.
const FFT_FLOOR: f64 = 1e-7;

/// `z -> sum_a |k_{p,z}(a)|^q m_a` over a fixed atom set, with cached kernel norms.
pub struct KernelSum<'a> {
    table: &'a KernelTable,
    atoms: Vec<Atom>,
    rings: Option<Vec<AtomRing>>,
    q: f64,
    p: Exponent,
    norm_grid: Option<&'a DiskQuadrature>,
    norms: RefCell<HashMap<u64, f64>>,
    fft: RefCell<FftPlanner<f64>>,
}

impl<'a> KernelSum<'a> {
    pub fn new(
        table: &'a KernelTable,
        atoms: Vec<Atom>,
        rings: Option<Vec<AtomRing>>,
        q: f64,
        p: Exponent,
        norm_grid: Option<&'a DiskQuadrature>,
    ) -> Self {
        Self {
            table,
            atoms,
            rings,
            q,
            p,
            norm_grid,
            norms: RefCell::new(HashMap::new()),
            fft: RefCell::new(FftPlanner::new()),
        }
    }

    /// `M^psi_{n,p,q}(g)` with atoms pulled back from `grid`.
    pub fn m_transform(req: &TransformRequest, table: &'a KernelTable, grid: &'a DiskQuadrature) -> Result<Self> {
        let Exponent::Finite(q) = req.q else {
            return Err(Error::Argument("the M transform needs a finite q".into()));
        };
        let w = table.weight();
        let mut mu = pullback_measure(w, &req.psi, &req.g, q, grid)?;
        let nq = req.n() as f64 * q;
        if nq != 0.0 {
            for a in &mut mu.atoms {
                a.log_mass += nq * w.phi_prime(a.point.norm()).ln_1p();
            }
        }
        Ok(Self::new(table, mu.atoms, mu.rings, q, req.p, Some(grid)))
    }

    /// Atoms merged onto a polar grid in the image with `per_tau` cells per `tau` in both
    /// directions, each cell represented by its center. Lets the ring convolution handle
    /// arbitrary atom layouts at a cost of `O(1 / per_tau)` in the kernel phase.
    pub fn rebinned(&self, tc: &TauCoordinate, per_tau: f64) -> Result<Self> {
        if per_tau.is_nan() || per_tau <= 0.0 {
            return Err(Error::Argument(format!("bins per tau must be positive, got {per_tau}")));
        }
        let w = self.table.weight();
        let r_max = self.atoms.iter().map(|a| a.point.norm()).fold(0.0, f64::max);
        let h = 1.0 / per_tau;
        let n_rings = (tc.rho(r_max) / h).floor() as usize + 1;
        let mut rings = Vec::with_capacity(n_rings);
        let mut offset = 0;
        for i in 0..n_rings {
            let r = tc.radius((i as f64 + 0.5) * h);
            let count = ((std::f64::consts::TAU * r * per_tau / w.tau(r)).ceil() as usize)
                .max(16)
                .next_power_of_two();
            rings.push(AtomRing {
                radius: r,
                count,
                offset,
                start: 0.0,
            });
            offset += count;
        }
        let mut acc = vec![LogSumExp::new(); offset];
        for a in &self.atoms {
            let i = ((tc.rho(a.point.norm()) / h) as usize).min(n_rings - 1);
            let ring = &rings[i];
            let turn = a.point.arg().rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
            let j = (turn * ring.count as f64).round() as usize % ring.count;
            acc[ring.offset + j].add(a.log_mass);
        }
        let atoms = rings
            .iter()
            .flat_map(|r| {
                (0..r.count).map(move |j| (r.offset + j, Complex64::from_polar(r.radius, std::f64::consts::TAU * j as f64 / r.count as f64)))
            })
            .map(|(k, point)| Atom {
                point,
                log_mass: acc[k].value(),
            })
            .collect();
        Ok(Self::new(self.table, atoms, Some(rings), self.q, self.p, self.norm_grid))
    }

    /// Transform in the `GV` Schatten criterion:
    /// `int |k_{2,z}(psi(xi))|^2 |g(xi)|^2 omega(xi) (1 + phi'(xi))^{-2} dA(xi)`.
    pub fn gv_transform(psi: &Symbol, g: &Symbol, table: &'a KernelTable, grid: &'a DiskQuadrature) -> Result<Self> {
        psi.require_self_map()?;
        let atoms = grid
            .nodes()
            .map(|n| {
                let v = &n.ring.values;
                let lm = 2.0 * g.value(n.z).norm().ln() + v.log_omega - 2.0 * v.log_one_plus_phi_prime()
                    + n.weight.ln();
                Atom {
                    point: psi.value(n.z),
                    log_mass: if lm.is_nan() { f64::NEG_INFINITY } else { lm },
                }
            })
            .collect();
        let rings = psi.as_dilation().map(|c| {
            grid.atom_rings()
                .into_iter()
                .map(|r| AtomRing {
                    radius: r.radius * c.norm(),
                    start: r.start + c.arg(),
                    ..r
                })
                .collect()
        });
        Ok(Self::new(table, atoms, rings, 2.0, Exponent::Finite(2.0), Some(grid)))
    }

    /// Berezin transform `G_t(mu)(z) = int |k_{t,z}|^t omega^{t/2} d mu`.
    pub fn berezin(mu: &DiscreteMeasure, t: f64, table: &'a KernelTable, grid: Option<&'a DiskQuadrature>) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Argument(format!("Berezin exponent t must be positive, got {t}")));
        }
        let w = table.weight();
        let atoms = mu
            .atoms
            .iter()
            .map(|a| Atom {
                point: a.point,
                log_mass: a.log_mass + 0.5 * t * w.log_omega(a.point.norm()),
            })
            .collect();
        Ok(Self::new(table, atoms, mu.rings.clone(), t, Exponent::Finite(t), grid))
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.log_mass == f64::NEG_INFINITY)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `ln ||K_z||_{A^p}` for `|z| = r` (radial, cached).
    pub fn log_norm(&self, r: f64) -> Result<f64> {
        let key = r.to_bits();
        if let Some(v) = self.norms.borrow().get(&key) {
            return Ok(*v);
        }
        let v = self.table.kernel_norm(Complex64::new(r, 0.0), self.p, self.norm_grid)?;
        self.norms.borrow_mut().insert(key, v);
        Ok(v)
    }

    /// Logarithm of the transform at `z`.
    pub fn log_value(&self, z: Complex64) -> Result<f64> {
        if self.is_zero() {
            return Ok(f64::NEG_INFINITY);
        }
        let ln = self.log_norm(z.norm())?;
        let mut acc = LogSumExp::new();
        match &self.rings {
            Some(rings) => {
                let mut buf = Vec::new();
                for ring in rings {
                    buf.resize(ring.count, 0.0);
                    self.table.ring_log_abs(z, ring.radius, ring.count, ring.start, &mut buf)?;
                    for (j, v) in buf.iter().enumerate() {
                        let m = self.atoms[ring.offset + j].log_mass;
                        if m > f64::NEG_INFINITY {
                            acc.add(self.q * (v - ln) + m);
                        }
                    }
                }
            }
            None => {
                for a in &self.atoms {
                    if a.log_mass > f64::NEG_INFINITY {
                        let k = self.table.kernel_eval(z, a.point)?.log_modulus;
                        acc.add(self.q * (k - ln) + a.log_mass);
                    }
                }
            }
        }
        Ok(acc.value())
    }

    /// Logarithm of the transform at every point of the given rings, one vector per ring.
    ///
    /// Values are accurate relative to the largest value on each ring: contributions bounded
    /// by `e^{-PRUNE}` times the largest single-atom bound of that ring are skipped.
    pub fn log_field(&self, rings: &[AtomRing]) -> Result<Vec<Vec<f64>>> {
        if self.is_zero() {
            return Ok(rings.iter().map(|r| vec![f64::NEG_INFINITY; r.count]).collect());
        }
        let norms: Vec<f64> = rings.iter().map(|r| self.log_norm(r.radius)).collect::<Result<_>>()?;
        let groups: Vec<AtomRing> = match &self.rings {
            Some(r) => r.clone(),
            None => (0..self.atoms.len())
                .map(|i| AtomRing {
                    radius: self.atoms[i].point.norm(),
                    count: 1,
                    offset: i,
                    start: self.atoms[i].point.arg(),
                })
                .collect(),
        };
        let peak: Vec<f64> = groups
            .iter()
            .map(|g| {
                self.atoms[g.offset..g.offset + g.count]
                    .iter()
                    .map(|a| a.log_mass)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let mut out = Vec::with_capacity(rings.len());
        for (e, &ln) in rings.iter().zip(&norms) {
            let mut bound_cache = HashMap::new();
            let mut bound = |r: f64| -> Result<f64> {
                // Upper bound through the radius rounded up to a multiple of 2^-12.
                let k = (r * 4096.0).ceil() as u32;
                if let Some(v) = bound_cache.get(&k) {
                    return Ok(*v);
                }
                let mut x = e.radius * (k as f64 / 4096.0).min(1.0);
                if self.table.stop_degree(x).is_none() {
                    x = e.radius * r;
                }
                let v = self.table.log_series_positive(x)?;
                bound_cache.insert(k, v);
                Ok(v)
            };
            let bounds: Vec<f64> = groups
                .iter()
                .zip(&peak)
                .map(|(g, &m)| {
                    if m == f64::NEG_INFINITY {
                        Ok(f64::NEG_INFINITY)
                    } else {
                        Ok(m + self.q * (bound(g.radius)? - ln))
                    }
                })
                .collect::<Result<_>>()?;
            let top = bounds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut acc = vec![LogSumExp::new(); e.count];
            for (g, &b) in groups.iter().zip(&bounds) {
                if b < top - PRUNE {
                    continue;
                }
                let (big, small) = (e.count.max(g.count), e.count.min(g.count));
                if g.count > 1 && big % small == 0 {
                    self.ring_pair(e, g, ln, top, &mut acc)?;
                } else {
                    self.atoms_onto_ring(e, g, ln, top, &mut acc)?;
                }
            }
            out.push(acc.into_iter().map(|l| l.value()).collect());
        }
        Ok(out)
    }

    /// Adds every atom of `g` to the ring `e` one FFT at a time.
    fn atoms_onto_ring(&self, e: &AtomRing, g: &AtomRing, ln: f64, top: f64, acc: &mut [LogSumExp]) -> Result<()> {
        let mut buf = vec![0.0; e.count];
        for a in &self.atoms[g.offset..g.offset + g.count] {
            if a.log_mass == f64::NEG_INFINITY {
                continue;
            }
            let bound = a.log_mass + self.q * (self.table.log_series_positive(a.point.norm() * e.radius)? - ln);
            if bound < top - PRUNE {
                continue;
            }
            // |K_z(a)| = |K_a(z)|
            self.table.ring_log_abs(a.point, e.radius, e.count, e.start, &mut buf)?;
            let base = a.log_mass - self.q * ln;
            for (o, v) in acc.iter_mut().zip(&buf) {
                o.add(self.q * v + base);
            }
        }
        Ok(())
    }

    /// Circular convolution between an equally spaced atom ring and the evaluation ring, whose
    /// counts divide one another. Broad kernels go through an FFT; entries the FFT cannot
    /// resolve (below `FFT_FLOOR` of the pair maximum) are summed directly.
    fn ring_pair(&self, e: &AtomRing, g: &AtomRing, ln: f64, top: f64, acc: &mut [LogSumExp]) -> Result<()> {
        let c = e.count.max(g.count);
        let (step_e, step_a) = (c / e.count, c / g.count);
        let mut k = vec![0.0; c];
        let a0 = Complex64::from_polar(g.radius, g.start);
        self.table.ring_log_abs(a0, e.radius, c, e.start, &mut k)?;
        let masses = &self.atoms[g.offset..g.offset + g.count];
        let mmax = masses.iter().map(|a| a.log_mass).fold(f64::NEG_INFINITY, f64::max);
        let kmax = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let floor = top - PRUNE - mmax + self.q * ln;
        let significant: Vec<bool> = k
            .iter()
            .map(|&v| self.q * v >= (self.q * kmax - PRUNE).max(floor))
            .collect();
        let nsig = significant.iter().filter(|&&b| b).count();
        let direct = |j: usize, out: &mut LogSumExp| {
            // Kernel offsets d with (j step_e - d) a multiple of step_a.
            let dj = j * step_e;
            let mut d = dj % step_a;
            while d < c {
                if significant[d] {
                    let m = masses[((dj + c - d) % c) / step_a].log_mass;
                    if m > f64::NEG_INFINITY {
                        out.add(self.q * (k[d] - ln) + m);
                    }
                }
                d += step_a;
            }
        };
        let direct_cost = e.count * nsig / step_a.max(1);
        if direct_cost <= 2 * c {
            for (j, out) in acc.iter_mut().enumerate() {
                direct(j, out);
            }
            return Ok(());
        }
        let mut kv: Vec<Complex64> = k
            .iter()
            .zip(&significant)
            .map(|(&v, &s)| Complex64::new(if s { (self.q * (v - kmax)).exp() } else { 0.0 }, 0.0))
            .collect();
        let mut mv = vec![Complex64::new(0.0, 0.0); c];
        for (i, a) in masses.iter().enumerate() {
            mv[i * step_a] = Complex64::new((a.log_mass - mmax).exp(), 0.0);
        }
        {
            let mut planner = self.fft.borrow_mut();
            let fwd = planner.plan_fft_forward(c);
            let inv = planner.plan_fft_inverse(c);
            fwd.process(&mut kv);
            fwd.process(&mut mv);
            for (a, b) in kv.iter_mut().zip(&mv) {
                *a *= b;
            }
            inv.process(&mut kv);
        }
        let conv: Vec<f64> = (0..e.count).map(|j| kv[j * step_e].re / c as f64).collect();
        let cmax = conv.iter().copied().fold(0.0, f64::max);
        let shift = self.q * (kmax - ln) + mmax;
        for (j, (out, &v)) in acc.iter_mut().zip(&conv).enumerate() {
            if v > FFT_FLOOR * cmax {
                out.add(v.ln() + shift);
            } else {
                direct(j, out);
            }
        }
        Ok(())
    }

    /// The field on every node of `grid`, in flat node order.
    pub fn log_on_grid(&self, grid: &DiskQuadrature) -> Result<Vec<f64>> {
        Ok(self.log_field(&grid.atom_rings())?.concat())
    }
}

/// `ln N^{psi,t}_{n,p,inf}(g)(z)`.
pub fn log_n_transform(req: &TransformRequest, w: &WeightSpec, z: Complex64) -> Result<f64> {
    if z.norm() >= 1.0 {
        return Err(Error::Domain(format!("point {z} outside the disk")));
    }
    let pz = req.psi.value(z);
    let (r, s) = (z.norm(), pz.norm());
    if s >= 1.0 {
        return Err(Error::Precondition(format!("|psi({z})| = {s} >= 1")));
    }
    let v = req.g.value(pz).norm().ln() + req.psi.derivative_value(z).norm().ln() - w.phi_prime(r).ln_1p()
        + req.n() as f64 * w.phi_prime(s).ln_1p()
        + 0.5 * (w.log_omega(r) - w.log_omega(s))
        + req.t() * w.laplacian(s).ln();
    Ok(if v.is_nan() { f64::NEG_INFINITY } else { v })
}

pub fn n_transform(req: &TransformRequest, w: &WeightSpec, z: Complex64) -> Result<f64> {
    Ok(log_n_transform(req, w, z)?.exp())
}

/// Spatial index over the atoms of a measure for disk queries.
pub struct AtomIndex<'m> {
    measure: &'m DiscreteMeasure,
    tree: RTree<GeomWithData<[f64; 2], usize>>,
}

impl<'m> AtomIndex<'m> {
    pub fn new(measure: &'m DiscreteMeasure) -> Self {
        let items = measure
            .atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.log_mass > f64::NEG_INFINITY)
            .map(|(i, a)| GeomWithData::new([a.point.re, a.point.im], i))
            .collect();
        Self {
            measure,
            tree: RTree::bulk_load(items),
        }
    }

    /// `ln mu(D_delta(z))` after adding `extra(atom)` to each log mass.
    pub fn log_disk_mass<F: Fn(&Atom) -> f64>(&self, w: &WeightSpec, delta: f64, z: Complex64, extra: F) -> f64 {
        let rad = delta * w.tau(z.norm());
        let mut acc = LogSumExp::new();
        for e in self.tree.locate_within_distance([z.re, z.im], rad * rad) {
            let a = &self.measure.atoms[e.data];
            if (a.point - z).norm() < rad {
                acc.add(a.log_mass + extra(a));
            }
        }
        acc.value()
    }

    /// `ln hat mu_delta(z) = ln (mu(D_delta(z)) / tau(z)^2)`.
    pub fn log_averaging(&self, w: &WeightSpec, delta: f64, z: Complex64) -> f64 {
        self.log_disk_mass(w, delta, z, |_| 0.0) - 2.0 * w.tau(z.norm()).ln()
    }

    /// `ln F_{delta,mu}(z) = ln (tau(z)^{-e} int_{D_delta(z)} (1 + phi')^q omega^{-q/2} d mu)` with
    /// `e = 2q/p` (finite p) or `2` (p = inf).
    pub fn log_embedding_function(&self, w: &WeightSpec, p: Exponent, q: f64, delta: f64, z: Complex64) -> f64 {
        let e = match p {
            Exponent::Finite(p) => 2.0 * q / p,
            Exponent::Infinity => 2.0,
        };
        let mass = self.log_disk_mass(w, delta, z, |a| {
            let r = a.point.norm();
            q * w.phi_prime(r).ln_1p() - 0.5 * q * w.log_omega(r)
        });
        mass - e * w.tau(z.norm()).ln()
    }
}

/// `mu(D_delta(z)) / tau(z)^2` by a linear scan (small measures).
pub fn averaging(w: &WeightSpec, mu: &DiscreteMeasure, delta: f64, z: Complex64) -> Result<f64> {
    if !(delta > 0.0 && delta < w.m_tau()) {
        return Err(Error::DeltaTooLarge {
            delta,
            m_tau: w.m_tau(),
        });
    }
    Ok(AtomIndex::new(mu).log_averaging(w, delta, z).exp())
}

/// `sup` over lattice centres of the embedding function.
pub fn embedding_constant(
    w: &WeightSpec,
    mu: &DiscreteMeasure,
    p: Exponent,
    q: f64,
    delta: f64,
    lattice: &Lattice,
) -> Result<f64> {
    if !(delta > 0.0 && delta < w.m_tau()) {
        return Err(Error::DeltaTooLarge {
            delta,
            m_tau: w.m_tau(),
        });
    }
    let index = AtomIndex::new(mu);
    let best = lattice
        .centers
        .iter()
        .map(|&z| index.log_embedding_function(w, p, q, delta, z))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best.exp())
}

/// `int |f|^p omega^{p/2} (1 + phi')^{-p} dA` for finite `p` (the p-th power of the norm);
/// `sup |f| omega^{1/2} (1 + phi')^{-1}` over the grid for `p = inf`.
pub fn sp_norm(f: &Symbol, p: Exponent, grid: &DiskQuadrature) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let density = |n: &crate::quadrature::Node, e: f64| {
        let v = &n.ring.values;
        e * (f.value(n.z).norm().ln() + 0.5 * v.log_omega - v.log_one_plus_phi_prime())
    };
    match p {
        Exponent::Finite(p) => Ok(grid.integrate_log(|n| density(n, p))?.exp()),
        Exponent::Infinity => Ok(grid
            .nodes()
            .map(|n| density(&n, 1.0))
            .fold(f64::NEG_INFINITY, f64::max)
            .exp()),
    }
}

/// Littlewood-Paley functional `|f(0)|^p + int |f'|^p omega^{p/2} (1 + phi')^{-p} dA`
/// (`|f(0)|` instead of `|f(0)|^p` when `verbatim`); `p = inf` uses the weighted sup of `f'`.
pub fn lp_norm(f: &Symbol, p: Exponent, grid: &DiskQuadrature, verbatim: bool) -> Result<f64> {
    let f0 = f.value(Complex64::new(0.0, 0.0)).norm();
    let d = f.derivative()?;
    let head = match p {
        Exponent::Finite(p) if !verbatim => f0.powf(p),
        _ => f0,
    };
    Ok(head + sp_norm(&d, p, grid)?)
}

/// `||f||^p_{A^p_omega} = int |f|^p omega^{p/2} dA` (finite `p`).
pub fn ap_norm_pow(f: &Symbol, p: f64, grid: &DiskQuadrature) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    Ok(grid
        .integrate_log(|n| p * (f.value(n.z).norm().ln() + 0.5 * n.ring.values.log_omega))?
        .exp())
}

/// CSV sweep `r,theta,value_log`.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[(f64, f64, f64)]) -> Result<()> {
    writeln!(out, "r,theta,value_log")?;
    for (r, t, v) in rows {
        writeln!(out, "{r:.16e},{t:.16e},{v:.16e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GridOptions;

    fn proto() -> WeightSpec {
        WeightSpec::exponential(1.0, 1.0).unwrap()
    }

    #[test]
    fn op_kind_parsing() {
        assert_eq!("c_g_psi".parse::<OpKind>().unwrap(), OpKind::CGPsi);
        assert_eq!(OpKind::CPsiG.n(), Some(1));
        assert!("foo".parse::<OpKind>().is_err());
    }

    #[test]
    fn zero_symbol_gives_zero_transforms() {
        let w = proto();
        let grid = DiskQuadrature::build(&w, 0.8, &GridOptions::default()).unwrap();
        let t = KernelTable::with_reach(&w, 0.8).unwrap();
        let req = TransformRequest::new(
            OpKind::CPsiG,
            Exponent::Finite(2.0),
            Exponent::Finite(2.0),
            Symbol::identity(),
            Symbol::zero(),
        )
        .unwrap();
        let m = KernelSum::m_transform(&req, &t, &grid).unwrap();
        assert_eq!(m.log_value(Complex64::new(0.3, 0.0)).unwrap(), f64::NEG_INFINITY);
        assert_eq!(n_transform(&req, &w, Complex64::new(0.3, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn ring_field_matches_brute_force() {
        let w = proto();
        let opts = GridOptions {
            dyadic: true,
            ..GridOptions::with_density(0.5)
        };
        let grid = DiskQuadrature::build(&w, 0.93, &opts).unwrap();
        let t = KernelTable::with_reach(&w, 0.92).unwrap();
        let g = Symbol::polynomial(vec![Complex64::new(0.2, 0.1), Complex64::new(1.0, -0.5), Complex64::new(0.0, 0.7)]);
        let eval = [
            AtomRing { radius: 0.3, count: 16, offset: 0, start: 0.0 },
            AtomRing { radius: 0.85, count: 256, offset: 16, start: 0.0 },
            AtomRing { radius: 0.9, count: 1024, offset: 272, start: 0.0 },
        ];
        for psi in [Symbol::identity(), Symbol::scale(Complex64::new(0.6, 0.2))] {
            let req = TransformRequest::new(OpKind::CPsiG, Exponent::Finite(2.0), Exponent::Finite(3.0), psi, g.clone()).unwrap();
            let m = KernelSum::m_transform(&req, &t, &grid).unwrap();
            let field = m.log_field(&eval).unwrap();
            for (e, vals) in eval.iter().zip(&field) {
                let ln = m.log_norm(e.radius).unwrap();
                for j in (0..e.count).step_by(e.count / 8) {
                    let z = Complex64::from_polar(e.radius, std::f64::consts::TAU * j as f64 / e.count as f64);
                    let mut acc = LogSumExp::new();
                    for a in m.atoms() {
                        let k = t.kernel_eval(z, a.point).unwrap().log_modulus;
                        acc.add(3.0 * (k - ln) + a.log_mass);
                    }
                    assert!((vals[j] - acc.value()).abs() < 1e-8, "{} {} {}", e.radius, vals[j], acc.value());
                }
            }
        }
    }

    #[test]
    fn n_transform_identity_cancels() {
        let w = proto();
        let g = Symbol::real_polynomial(&[0.5, 1.0]);
        let req = TransformRequest::new(OpKind::CGPsi, Exponent::Finite(2.0), Exponent::Finite(2.0), Symbol::identity(), g.clone())
            .unwrap();
        let z = Complex64::new(0.6, 0.2);
        let v = w.eval(z.norm()).unwrap();
        let want = g.value(z).norm() / (1.0 + v.phi_prime) * v.laplacian_phi.powf(0.5);
        assert!((n_transform(&req, &w, z).unwrap() / want - 1.0).abs() < 1e-13);
    }

    #[test]
    fn averaging_of_point_mass() {
        let w = proto();
        let mu = DiscreteMeasure::point_mass(Complex64::new(0.0, 0.0), 2.0).unwrap();
        let d = 0.1 * w.m_tau();
        let a = averaging(&w, &mu, d, Complex64::new(0.0, 0.0)).unwrap();
        assert!((a - 2.0 / w.tau(0.0).powi(2)).abs() < 1e-12);
        assert_eq!(averaging(&w, &mu, d, Complex64::new(0.5, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn lp_norm_of_constant() {
        let w = proto();
        let grid = DiskQuadrature::build(&w, 0.5, &GridOptions::default()).unwrap();
        let f = Symbol::constant(Complex64::new(-3.0, 0.0));
        assert!((lp_norm(&f, Exponent::Finite(2.0), &grid, false).unwrap() - 9.0).abs() < 1e-12);
        assert!((lp_norm(&f, Exponent::Finite(2.0), &grid, true).unwrap() - 3.0).abs() < 1e-12);
    }
}
