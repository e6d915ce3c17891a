//! `(delta, tau)`-lattices: greedy construction over staggered tau-adapted rings and
//! sampled verification of separation, coverage, multiplicity and tau comparability.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstar::primitives::GeomWithData;
use rstar::RTree;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, integrate_adaptive};
use crate::symbols::Symbol;
use crate::weights::WeightSpec;

/// Ring gap and angular spacing, in units of `delta tau`.
const RING_GAP: f64 = 1.15;
const ARC_STEP: f64 = 1.3;
/// Multiplicity bound from the covering lemma.
pub const MULTIPLICITY_BOUND: usize = 256;
const PROBE_SEED: u64 = 0x5eed_1a77;

type Entry = GeomWithData<[f64; 2], usize>;

/// `|z - a| < delta tau(a)`.
pub fn disk_membership(w: &WeightSpec, a: Complex64, delta: f64, z: Complex64) -> bool {
    (z - a).norm() < delta * w.tau(a.norm())
}

#[derive(Debug, Clone)]
pub struct Lattice {
    pub centers: Vec<Complex64>,
    pub taus: Vec<f64>,
    pub delta: f64,
    pub r_cut: f64,
    tree: RTree<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeReport {
    pub count: usize,
    pub delta: f64,
    pub r_cut: f64,
    pub separation_ok: bool,
    /// `min |z_n - z_k| / (delta tau(z_k))` over neighbouring pairs.
    pub min_separation_ratio: f64,
    pub probes: usize,
    pub uncovered: usize,
    pub coverage_fraction: f64,
    pub max_multiplicity: usize,
    pub multiplicity_ok: bool,
    /// `max tau(z)/tau(a)` and `min tau(z)/tau(a)` over sampled `z in D_delta(a)`.
    pub tau_ratio_range: (f64, f64),
    pub tau_comparable: bool,
    pub condition_iii_ok: bool,
    /// Centre count divided by `delta^{-2} int_{|z|<r_cut} tau^{-2} dA`.
    pub cardinality_ratio: f64,
}

impl LatticeReport {
    pub fn all_ok(&self) -> bool {
        self.separation_ok
            && self.uncovered == 0
            && self.multiplicity_ok
            && self.tau_comparable
            && self.condition_iii_ok
    }
}

fn tau_bound(w: &WeightSpec, r: f64, reach: f64) -> f64 {
    let lo = (r - reach).max(0.0);
    (0..=4)
        .map(|i| w.tau(lo + (r + reach - lo) * i as f64 / 4.0))
        .fold(0.0, f64::max)
        * 1.1
}

impl Lattice {
    pub fn build(w: &WeightSpec, delta: f64, r_cut: f64) -> Result<Self> {
        let m_tau = w.m_tau();
        if !(delta > 0.0 && delta < m_tau) {
            return Err(Error::DeltaTooLarge { delta, m_tau });
        }
        if !(r_cut > 0.0 && r_cut <= w.r_max_guard()) {
            return Err(Error::Argument(format!(
                "lattice r_cut {r_cut} must lie in (0, {}]",
                w.r_max_guard()
            )));
        }
        let mut centers = vec![Complex64::new(0.0, 0.0)];
        let mut taus = vec![w.tau(0.0)];
        let mut tree = RTree::new();
        tree.insert(Entry::new([0.0, 0.0], 0));
        let mut r = 0.0;
        let mut k = 0usize;
        while r <= r_cut {
            let mut gap = RING_GAP * delta * w.tau(r);
            for _ in 0..4 {
                gap = RING_GAP * delta * w.tau(r + gap);
            }
            r += gap;
            k += 1;
            if r >= 1.0 {
                return Err(Error::Numerical(format!("lattice ring left the disk at r = {r}")));
            }
            let t = w.tau(r);
            let n = ((std::f64::consts::TAU * r / (ARC_STEP * delta * t)).ceil() as usize).max(6);
            let shift = if k % 2 == 1 { 0.5 } else { 0.0 };
            let reach = delta * tau_bound(w, r, 3.0 * gap);
            for j in 0..n {
                let c = Complex64::from_polar(r, std::f64::consts::TAU * (j as f64 + shift) / n as f64);
                let blocked = tree
                    .locate_within_distance([c.re, c.im], reach * reach)
                    .any(|e| (c - centers[e.data]).norm() < delta * taus[e.data]);
                if !blocked {
                    tree.insert(Entry::new([c.re, c.im], centers.len()));
                    centers.push(c);
                    taus.push(t);
                }
            }
        }
        Ok(Self {
            centers,
            taus,
            delta,
            r_cut,
            tree,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Indices of centres `z_n` with `|p - z_n| < factor delta tau(z_n)`.
    pub fn containing(&self, p: Complex64, factor: f64, tau_p: f64) -> impl Iterator<Item = usize> + '_ {
        // tau(z_n) <= 2 tau(p) inside the disks of interest.
        let reach = 2.0 * factor * self.delta * tau_p;
        self.tree
            .locate_within_distance([p.re, p.im], reach * reach)
            .map(|e| e.data)
            .filter(move |&i| (p - self.centers[i]).norm() < factor * self.delta * self.taus[i])
    }

    /// Sampled verification of the covering-lemma conditions.
    pub fn verify(&self, w: &WeightSpec, probes: usize) -> Result<LatticeReport> {
        let delta = self.delta;
        let mut min_sep = f64::INFINITY;
        for (k, (&z, &t)) in self.centers.iter().zip(&self.taus).enumerate() {
            let reach = 2.0 * delta * t;
            for e in self.tree.locate_within_distance([z.re, z.im], reach * reach) {
                if e.data != k {
                    min_sep = min_sep.min((self.centers[e.data] - z).norm() / (delta * t));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
        let mut uncovered = 0;
        let mut max_mult = 0;
        for _ in 0..probes {
            let p = Complex64::from_polar(
                self.r_cut * rng.gen::<f64>().sqrt(),
                std::f64::consts::TAU * rng.gen::<f64>(),
            );
            let tp = w.tau(p.norm());
            if self.containing(p, 1.0, tp).next().is_none() {
                uncovered += 1;
            }
            max_mult = max_mult.max(self.containing(p, 3.0, tp).count());
        }
        for (&z, &t) in self.centers.iter().zip(&self.taus) {
            if z.norm() <= self.r_cut {
                max_mult = max_mult.max(self.containing(z, 3.0, t).count());
            }
        }
        // tau comparability and condition (iii) on sampled disks.
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let mut iii = true;
        let inside: Vec<usize> = (0..self.len()).filter(|&i| self.centers[i].norm() <= self.r_cut).collect();
        for s in 0..1000 {
            let i = inside[rng.gen_range(0..inside.len())];
            let a = self.centers[i];
            let ta = self.taus[i];
            let rad = delta * ta * rng.gen::<f64>().sqrt();
            let z = a + Complex64::from_polar(rad, std::f64::consts::TAU * rng.gen::<f64>());
            let ratio = w.tau(z.norm()) / ta;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            // Worst point of D_delta(z) seen from a, with z pushed to the rim every other sample.
            let z_rim = if s % 2 == 0 {
                a + (z - a) * (delta * ta * (1.0 - 1e-12) / (z - a).norm().max(1e-300))
            } else {
                z
            };
            if (z_rim - a).norm() + delta * w.tau(z_rim.norm()) >= 3.0 * delta * ta {
                iii = false;
            }
        }
        let area = integrate_adaptive(
            |r| 2.0 * r * w.laplacian(r),
            &[0.0, 0.5 * self.r_cut, self.r_cut],
            1e-10,
            0.0,
            "tau area",
        )?
        .value;
        let inside_count = inside.len();
        Ok(LatticeReport {
            count: self.len(),
            delta,
            r_cut: self.r_cut,
            separation_ok: min_sep >= 1.0,
            min_separation_ratio: min_sep,
            probes,
            uncovered,
            coverage_fraction: 1.0 - uncovered as f64 / probes.max(1) as f64,
            max_multiplicity: max_mult,
            multiplicity_ok: max_mult <= MULTIPLICITY_BOUND,
            tau_ratio_range: (lo, hi),
            tau_comparable: lo >= 0.5 && hi <= 2.0,
            condition_iii_ok: iii,
            cardinality_ratio: inside_count as f64 * delta * delta / area,
        })
    }

    /// Text export: one centre per line, `re im tau`.
    pub fn export<W: Write>(&self, mut out: W) -> Result<()> {
        for (z, t) in self.centers.iter().zip(&self.taus) {
            writeln!(out, "{:.16e} {:.16e} {:.16e}", z.re, z.im, t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalMaxReport {
    /// `(z, ratio)` for every sample whose disk stays inside `r_cut`.
    pub ratios: Vec<(f64, f64, f64)>,
    pub max_ratio: f64,
    pub bound: f64,
    pub flagged: usize,
    pub skipped: usize,
}

/// Parameters of the local maximum check: `|f|^p omega^beta (1 + phi')^{-gamma}` at `z`
/// against its average over `D_delta(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalMaxParams {
    pub p: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub r_cut: f64,
    pub bound: f64,
}

impl Default for LocalMaxParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            beta: 1.0,
            gamma: 0.0,
            delta: 0.05,
            r_cut: 0.95,
            bound: 64.0,
        }
    }
}

/// Log of the `D_delta(z)` average of `exp(log_g)` by a 16 x 64 polar rule.
fn log_disk_average<F: Fn(Complex64) -> f64>(z: Complex64, radius: f64, log_g: F) -> f64 {
    let (x, wt) = gauss_legendre(16);
    let m = 64;
    let mut vals = Vec::with_capacity(16 * m);
    for (xi, wi) in x.iter().zip(&wt) {
        let s = 0.5 * (xi + 1.0);
        for j in 0..m {
            let p = z + Complex64::from_polar(radius * s, std::f64::consts::TAU * (j as f64 + 0.5) / m as f64);
            // Polar weight: (1/pi) r dr dtheta divided by the normalized disk area radius^2.
            let weight = 0.5 * wi * s * 2.0 / m as f64;
            vals.push(log_g(p) + weight.ln());
        }
    }
    let mx = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + vals.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
}

fn local_check<F, G>(
    w: &WeightSpec,
    samples: &[Complex64],
    params: &LocalMaxParams,
    log_point: F,
    log_integrand: G,
) -> LocalMaxReport
where
    F: Fn(Complex64) -> f64,
    G: Fn(Complex64) -> f64 + Copy,
{
    let mut ratios = Vec::new();
    let mut skipped = 0;
    for &z in samples {
        let radius = params.delta * w.tau(z.norm());
        if z.norm() + radius > params.r_cut {
            skipped += 1;
            continue;
        }
        let avg = log_disk_average(z, radius, log_integrand);
        ratios.push((z.re, z.im, (log_point(z) - avg).exp()));
    }
    let max_ratio = ratios.iter().map(|r| r.2).fold(0.0, f64::max);
    let flagged = ratios.iter().filter(|r| r.2 > params.bound).count();
    LocalMaxReport {
        ratios,
        max_ratio,
        bound: params.bound,
        flagged,
        skipped,
    }
}

/// Sub-mean-value check for `|f|^p omega^beta (1 + phi')^{-gamma}`.
pub fn local_max_bound_check(
    w: &WeightSpec,
    f: &Symbol,
    samples: &[Complex64],
    params: &LocalMaxParams,
) -> LocalMaxReport {
    let g = |z: Complex64| {
        let r = z.norm();
        params.p * f.value(z).norm().ln() + params.beta * w.log_omega(r)
            - params.gamma * w.phi_prime(r).ln_1p()
    };
    local_check(w, samples, params, g, g)
}

/// Derivative variant: `|f'(z)|^p omega(z)^beta tau(z)^p` against the disk average of
/// `|f|^p omega^beta`.
pub fn derivative_bound_check(
    w: &WeightSpec,
    f: &Symbol,
    samples: &[Complex64],
    params: &LocalMaxParams,
) -> LocalMaxReport {
    let point = |z: Complex64| {
        let r = z.norm();
        params.p * (f.derivative_value(z).norm().ln() + w.tau(r).ln()) + params.beta * w.log_omega(r)
    };
    let integrand = |z: Complex64| params.p * f.value(z).norm().ln() + params.beta * w.log_omega(z.norm());
    local_check(w, samples, params, point, integrand)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proto() -> WeightSpec {
        WeightSpec::exponential(1.0, 1.0).unwrap()
    }

    #[test]
    fn delta_must_be_below_m_tau() {
        let w = proto();
        let e = Lattice::build(&w, 1.0, 0.5).unwrap_err();
        assert!(matches!(e, Error::DeltaTooLarge { .. }));
    }

    #[test]
    fn small_lattice_satisfies_lemma() {
        let w = proto();
        let l = Lattice::build(&w, 0.1 * w.m_tau(), 0.5).unwrap();
        let rep = l.verify(&w, 20_000).unwrap();
        assert!(rep.all_ok(), "{rep:?}");
        assert!(l.centers.windows(2).all(|p| p[1].norm() >= p[0].norm() - 1e-15));
    }

    #[test]
    fn membership() {
        let w = proto();
        let zero = Complex64::new(0.0, 0.0);
        assert!(disk_membership(&w, zero, 0.1, zero));
        assert!(!disk_membership(&w, zero, 0.1, Complex64::new(0.2 * w.tau(0.0), 0.0)));
    }

    #[test]
    fn constant_function_has_unit_ratio() {
        let w = proto();
        let params = LocalMaxParams {
            beta: 0.0,
            ..LocalMaxParams::default()
        };
        let rep = local_max_bound_check(&w, &Symbol::real_polynomial(&[1.0]), &[Complex64::new(0.3, 0.1)], &params);
        assert!((rep.ratios[0].2 - 1.0).abs() < 1e-12);
    }
}
