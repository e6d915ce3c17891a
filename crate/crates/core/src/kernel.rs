//! Reproducing kernel of `A^2_omega` through monomial moments
//! `c_n = 2 int_0^1 r^{2n+1} omega(r) dr`, evaluated in the log domain.

use std::cell::RefCell;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{integrate_adaptive, Exponent, LogSumExp};
use crate::quadrature::DiskQuadrature;
use crate::symbols::Symbol;
use crate::weights::WeightSpec;

/// Hard cap on the series degree.
pub const MAX_DEGREE: usize = 20_000;
/// Relative size at which a decreasing kernel series is cut.
pub const SERIES_CUTOFF: f64 = 1e-18;
const LOG_CUTOFF: f64 = 41.446_531_673_892_82; // -ln(1e-18)
const MOMENT_RTOL: f64 = 1e-13;
const RESCALE: f64 = 1e200;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn inverse_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub log_modulus: f64,
    pub phase: f64,
}

impl KernelValue {
    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.log_modulus.exp(), self.phase)
    }
}

/// `log c_n` for `n = 0..=degree_cap` plus the weight they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    log_c: Vec<f64>,
    /// `c_{n-1} / c_n` at index `n` (index 0 unused).
    ratio: Vec<f64>,
    weight: WeightSpec,
}

/// `ln c_n` by log-domain adaptive quadrature around the peak of `r^{2n+1} omega(r)`.
pub fn log_moment(w: &WeightSpec, n: usize) -> Result<f64> {
    log_radial_moment(w, 2.0 * n as f64 + 1.0, |_| 0.0, &format!("moment c_{n}"))
}

/// `ln (2 int_0^1 r^k omega(r) e^{extra(r)} dr)`; `extra` should vary slowly next to `omega`.
pub fn log_radial_moment<F: Fn(f64) -> f64>(w: &WeightSpec, k: f64, extra: F, what: &str) -> Result<f64> {
    let hi = w.r_support();
    let g = |r: f64| {
        if r <= 0.0 {
            if k == 0.0 {
                extra(0.0) - 2.0 * w.phi_raw(0.0)
            } else {
                f64::NEG_INFINITY
            }
        } else {
            k * r.ln() - 2.0 * w.phi_raw(r) + extra(r)
        }
    };
    let slope = |r: f64| k / r - 2.0 * w.phi_prime(r);
    let top = hi * (1.0 - 1e-15);
    let peak = if slope(top) >= 0.0 {
        top
    } else {
        let (mut a, mut b) = (1e-300f64.max(0.0), top);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if slope(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let lmax = g(peak);
    let curv = k / (peak * peak) + 2.0 * (w.laplacian(peak) - w.phi_prime(peak) / peak);
    let sigma = if curv > 0.0 { curv.sqrt().recip() } else { 0.1 };
    let mut pts = vec![0.0, hi];
    for m in [-16.0, -4.0, -1.0, 0.0, 1.0, 4.0, 16.0] {
        let x = peak + m * sigma;
        if x > 0.0 && x < hi {
            pts.push(x);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let q = integrate_adaptive(
        |r| (g(r) - lmax).exp(),
        &pts,
        MOMENT_RTOL,
        0.0,
        what,
    )?;
    if q.value <= 0.0 || !q.value.is_finite() {
        return Err(Error::Accuracy {
            what: what.to_string(),
            achieved: f64::INFINITY,
            requested: MOMENT_RTOL,
        });
    }
    Ok(std::f64::consts::LN_2 + lmax + q.value.ln())
}

impl KernelTable {
    /// Moments `c_0..=c_n`.
    pub fn moments(w: &WeightSpec, n: usize) -> Result<Self> {
        let mut t = Self {
            log_c: Vec::new(),
            ratio: Vec::new(),
            weight: w.clone(),
        };
        t.push_moments(n + 1)?;
        Ok(t)
    }

    fn push_moments(&mut self, len: usize) -> Result<()> {
        if len > MAX_DEGREE + 1 {
            return Err(Error::Resource(format!(
                "kernel degree {} exceeds the cap {MAX_DEGREE}",
                len - 1
            )));
        }
        for n in self.log_c.len()..len {
            let lc = log_moment(&self.weight, n)?;
            let r = match self.log_c.last() {
                Some(prev) => (prev - lc).exp(),
                None => f64::NAN,
            };
            self.log_c.push(lc);
            self.ratio.push(r);
        }
        Ok(())
    }

    /// New table holding at least `c_0..=c_n`.
    pub fn extended(&self, n: usize) -> Result<Self> {
        let mut t = self.clone();
        t.push_moments(n + 1)?;
        Ok(t)
    }

    /// Table long enough to sum the kernel series for every `|conj(z) zeta| <= rho`.
    pub fn with_reach(w: &WeightSpec, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::Domain(format!("kernel reach {rho} outside [0, 1)")));
        }
        let mut t = Self::moments(w, 255)?;
        loop {
            if t.stop_degree(rho).is_some() {
                return Ok(t);
            }
            let next = (2 * t.log_c.len()).min(MAX_DEGREE + 1);
            if next == t.log_c.len() {
                return Err(Error::Resource(format!(
                    "kernel series at |z zeta| = {rho} needs more than {MAX_DEGREE} terms"
                )));
            }
            t.push_moments(next)?;
        }
    }

    /// Like [`KernelTable::with_reach`] but extending an existing table.
    pub fn reaching(&self, rho: f64) -> Result<Self> {
        if self.stop_degree(rho).is_some() {
            return Ok(self.clone());
        }
        let mut t = self.clone();
        loop {
            let next = (2 * t.log_c.len()).min(MAX_DEGREE + 1);
            if next == t.log_c.len() {
                return Err(Error::Resource(format!(
                    "kernel series at |z zeta| = {rho} needs more than {MAX_DEGREE} terms"
                )));
            }
            t.push_moments(next)?;
            if t.stop_degree(rho).is_some() {
                return Ok(t);
            }
        }
    }

    pub fn degree_cap(&self) -> usize {
        self.log_c.len() - 1
    }

    pub fn log_moments(&self) -> &[f64] {
        &self.log_c
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    /// Degree at which the series for `|w| = x` may be cut, if the table reaches it.
    pub fn stop_degree(&self, x: f64) -> Option<usize> {
        if x == 0.0 {
            return Some(0);
        }
        let lx = x.ln();
        let mut best = f64::NEG_INFINITY;
        for n in 0..self.log_c.len() {
            let a = n as f64 * lx - self.log_c[n];
            best = best.max(a);
            let next_q = self.ratio.get(n + 1).map(|r| r * x);
            if let Some(q) = next_q {
                if q < 1.0 && a - (1.0 - q).ln() < best - LOG_CUTOFF {
                    return Some(n);
                }
            }
        }
        None
    }

    fn reach_error(&self, x: f64) -> Error {
        // Crude estimate of the missing degree from the last ratio at |w| = x.
        let avail = self.degree_cap();
        let needed = match self.ratio.last() {
            Some(r) if r * x < 1.0 => avail + 1,
            _ => (avail * 2).max(avail + 1),
        };
        Error::KernelReach {
            needed,
            available: avail,
        }
    }

    /// Log magnitudes `n ln x - ln c_n` up to the cut degree.
    fn positive_terms(&self, x: f64) -> Result<(Vec<f64>, f64)> {
        let stop = self.stop_degree(x).ok_or_else(|| self.reach_error(x))?;
        if x == 0.0 {
            return Ok((vec![-self.log_c[0]], -self.log_c[0]));
        }
        let lx = x.ln();
        let a: Vec<f64> = (0..=stop).map(|n| n as f64 * lx - self.log_c[n]).collect();
        let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((a, m))
    }

    /// `ln sum_n x^n / c_n` for `x >= 0`.
    pub fn log_series_positive(&self, x: f64) -> Result<f64> {
        let (a, m) = self.positive_terms(x)?;
        let s: f64 = a.iter().map(|v| (v - m).exp()).sum();
        Ok(m + s.ln())
    }

    /// `sum_n w^n / c_n` (or its derivative series `sum_n n w^{n-1}/c_n`) as log modulus and phase.
    fn series(&self, w: Complex64, derivative: bool) -> Result<KernelValue> {
        let x = w.norm();
        let stop = self.stop_degree(x).ok_or_else(|| self.reach_error(x))?;
        let start = usize::from(derivative);
        if stop < start {
            return Ok(KernelValue {
                log_modulus: if derivative && self.log_c.len() > 1 {
                    -self.log_c[1]
                } else {
                    -self.log_c[0]
                },
                phase: 0.0,
            });
        }
        let mut log_scale = -self.log_c[start];
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in start + 1..=stop {
            let mut f = w * self.ratio[n];
            if derivative {
                f *= n as f64 / (n - 1) as f64;
            }
            term *= f;
            sum += term;
            if term.norm() > RESCALE {
                term /= RESCALE;
                sum /= RESCALE;
                log_scale += RESCALE.ln();
            }
        }
        Ok(KernelValue {
            log_modulus: log_scale + sum.norm().ln(),
            phase: sum.arg(),
        })
    }

    /// `K_z(zeta) = sum_n (conj(z) zeta)^n / c_n`.
    pub fn kernel_eval(&self, z: Complex64, zeta: Complex64) -> Result<KernelValue> {
        let w = z.conj() * zeta;
        if w.norm() >= 1.0 {
            return Err(Error::Domain(format!("|conj(z) zeta| = {} >= 1", w.norm())));
        }
        self.series(w, false)
    }

    /// `d/dzeta K_z(zeta)`.
    pub fn kernel_derivative(&self, z: Complex64, zeta: Complex64) -> Result<KernelValue> {
        let w = z.conj() * zeta;
        if w.norm() >= 1.0 {
            return Err(Error::Domain(format!("|conj(z) zeta| = {} >= 1", w.norm())));
        }
        let s = self.series(w, true)?;
        Ok(KernelValue {
            log_modulus: s.log_modulus + z.norm().ln(),
            phase: s.phase + z.conj().arg(),
        })
    }

    /// `ln |K_z(zeta_j)|` for the `count` equally spaced points of a circle, by FFT folding.
    pub fn ring_log_abs(
        &self,
        z: Complex64,
        radius: f64,
        count: usize,
        start: f64,
        out: &mut [f64],
    ) -> Result<()> {
        debug_assert_eq!(out.len(), count);
        let x = z.norm() * radius;
        if x >= 1.0 {
            return Err(Error::Domain(format!("|conj(z) zeta| = {x} >= 1")));
        }
        if x == 0.0 {
            out.fill(-self.log_c[0]);
            return Ok(());
        }
        let (a, m) = self.positive_terms(x)?;
        let theta = start - z.arg();
        let step = Complex64::from_polar(1.0, theta);
        let mut buf = vec![Complex64::new(0.0, 0.0); count];
        let mut phase = Complex64::new(1.0, 0.0);
        for (n, an) in a.iter().enumerate() {
            if n % 64 == 0 {
                phase = Complex64::from_polar(1.0, theta * n as f64);
            }
            let d = an - m;
            if d > -LOG_CUTOFF - 5.0 {
                buf[n % count] += phase * d.exp();
            }
            phase *= step;
        }
        inverse_fft(count).process(&mut buf);
        for (o, v) in out.iter_mut().zip(&buf) {
            *o = m + v.norm().ln();
        }
        Ok(())
    }

    /// `ln ||K_z||_{A^p_omega}`. `p = 2` uses `K_z(z)`; other finite `p` integrate over `grid`;
    /// `p = inf` maximizes `|K_z| omega^{1/2}` along the ray through `z`.
    pub fn kernel_norm(&self, z: Complex64, p: Exponent, grid: Option<&DiskQuadrature>) -> Result<f64> {
        match p {
            Exponent::Finite(2.0) => Ok(0.5 * self.log_series_positive(z.norm_sqr())?),
            Exponent::Finite(p) => {
                let grid = grid.ok_or_else(|| {
                    Error::Argument(format!("kernel norm for p = {p} needs a quadrature grid"))
                })?;
                self.kernel_norm_quadrature(z, p, grid)
            }
            Exponent::Infinity => self.sup_norm(z),
        }
    }

    /// `ln (int |K_z|^p omega^{p/2} dA)^{1/p}` over the grid, ring by ring.
    pub fn kernel_norm_quadrature(&self, z: Complex64, p: f64, grid: &DiskQuadrature) -> Result<f64> {
        let mut acc = LogSumExp::new();
        let mut buf = Vec::new();
        for ring in grid.rings() {
            buf.resize(ring.count, 0.0);
            self.ring_log_abs(z, ring.radius, ring.count, ring.start, &mut buf)?;
            let base = 0.5 * p * ring.values.log_omega + ring.weight.ln();
            for v in &buf {
                acc.add(p * v + base);
            }
        }
        Ok(acc.value() / p)
    }

    fn sup_norm(&self, z: Complex64) -> Result<f64> {
        let w = &self.weight;
        let hi = w.r_max_guard();
        let r = z.norm();
        let h = |t: f64| -> Result<f64> { Ok(self.log_series_positive(r * t)? + 0.5 * w.log_omega(t)) };
        let n = 2000;
        let s_end = -(1.0 - hi).ln();
        let ts: Vec<f64> = (0..=n).map(|i| 1.0 - (-s_end * i as f64 / n as f64).exp()).collect();
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &t) in ts.iter().enumerate() {
            let v = h(t)?;
            if v > best.1 {
                best = (i, v);
            }
        }
        let (mut a, mut b) = (ts[best.0.saturating_sub(1)], ts[(best.0 + 1).min(n)]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if h(c)? > h(d)? {
                b = d;
            } else {
                a = c;
            }
        }
        Ok(best.1.max(h(0.5 * (a + b))?))
    }

    pub fn normalized_kernel(
        &self,
        z: Complex64,
        p: Exponent,
        grid: Option<&DiskQuadrature>,
    ) -> Result<NormalizedKernel<'_>> {
        Ok(NormalizedKernel {
            table: self,
            z,
            log_norm: self.kernel_norm(z, p, grid)?,
        })
    }

    /// `F_a = tau(a) k_{2,a}`, the stand-in for the peak test functions.
    pub fn surrogate(&self, a: Complex64) -> Result<Surrogate<'_>> {
        let tau = self.weight.tau(a.norm());
        Ok(Surrogate {
            table: self,
            a,
            log_scale: tau.ln() - self.kernel_norm(a, Exponent::Finite(2.0), None)?,
        })
    }

    /// Polynomial truncation of `k_{2,a}` keeping coefficients above `tol` of the largest.
    pub fn truncated_normalized_kernel(&self, a: Complex64, tol: f64) -> Result<Symbol> {
        let log_norm = self.kernel_norm(a, Exponent::Finite(2.0), None)?;
        let x = a.norm();
        let (terms, m) = self.positive_terms(x)?;
        let cut = m + tol.ln();
        let last = terms.iter().rposition(|&v| v >= cut).unwrap_or(0);
        let dir = if x > 0.0 { a.conj() / x } else { Complex64::new(1.0, 0.0) };
        let coeffs = (0..=last)
            .map(|n| {
                let mag = if x > 0.0 {
                    (terms[n] - log_norm).exp()
                } else if n == 0 {
                    (-self.log_c[0] - log_norm).exp()
                } else {
                    0.0
                };
                dir.powu(n as u32) * mag
            })
            .collect();
        Ok(Symbol::polynomial(coeffs))
    }

    /// Text export: one line `n log_c_n` per moment.
    pub fn export<W: Write>(&self, mut out: W) -> Result<()> {
        for (n, lc) in self.log_c.iter().enumerate() {
            writeln!(out, "{n} {lc:.16e}")?;
        }
        Ok(())
    }
}

/// `zeta -> ln |k_{p,z}(zeta)|`.
#[derive(Debug, Clone, Copy)]
pub struct NormalizedKernel<'a> {
    table: &'a KernelTable,
    pub z: Complex64,
    pub log_norm: f64,
}

impl NormalizedKernel<'_> {
    pub fn log_abs(&self, zeta: Complex64) -> Result<f64> {
        Ok(self.table.kernel_eval(self.z, zeta)?.log_modulus - self.log_norm)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Surrogate<'a> {
    table: &'a KernelTable,
    pub a: Complex64,
    /// `ln tau(a) - ln ||K_a||_2`
    pub log_scale: f64,
}

impl Surrogate<'_> {
    pub fn value(&self, zeta: Complex64) -> Result<Complex64> {
        let k = self.table.kernel_eval(self.a, zeta)?;
        Ok(Complex64::from_polar((k.log_modulus + self.log_scale).exp(), k.phase))
    }

    pub fn derivative(&self, zeta: Complex64) -> Result<Complex64> {
        if self.a == Complex64::new(0.0, 0.0) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let k = self.table.kernel_derivative(self.a, zeta)?;
        Ok(Complex64::from_polar((k.log_modulus + self.log_scale).exp(), k.phase))
    }

    pub fn log_abs(&self, zeta: Complex64) -> Result<f64> {
        Ok(self.table.kernel_eval(self.a, zeta)?.log_modulus + self.log_scale)
    }

    pub fn log_abs_derivative(&self, zeta: Complex64) -> Result<f64> {
        if self.a == Complex64::new(0.0, 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.table.kernel_derivative(self.a, zeta)?.log_modulus + self.log_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GridOptions;

    fn proto() -> WeightSpec {
        WeightSpec::exponential(1.0, 1.0).unwrap()
    }

    #[test]
    fn constant_weight_moments() {
        let t = KernelTable::moments(&WeightSpec::constant(), 20).unwrap();
        for (n, lc) in t.log_moments().iter().enumerate() {
            assert!((lc.exp() * (n + 1) as f64 - 1.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn moments_decrease() {
        let t = KernelTable::moments(&proto(), 50).unwrap();
        assert!(t.log_moments().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn kernel_at_origin_is_inverse_c0() {
        let t = KernelTable::with_reach(&proto(), 0.9).unwrap();
        let v = t.kernel_eval(Complex64::new(0.7, 0.2), Complex64::new(0.0, 0.0)).unwrap();
        assert!((v.log_modulus + t.log_moments()[0]).abs() < 1e-14);
    }

    #[test]
    fn hermitian_symmetry() {
        let t = KernelTable::with_reach(&proto(), 0.9).unwrap();
        let (z, u) = (Complex64::new(0.5, 0.3), Complex64::new(-0.2, 0.6));
        let a = t.kernel_eval(z, u).unwrap().to_complex();
        let b = t.kernel_eval(u, z).unwrap().to_complex();
        assert!((a - b.conj()).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn ring_fft_matches_direct() {
        let t = KernelTable::with_reach(&proto(), 0.95).unwrap();
        let z = Complex64::new(0.6, -0.5);
        let mut out = vec![0.0; 37];
        t.ring_log_abs(z, 0.8, 37, 0.3, &mut out).unwrap();
        for (j, v) in out.iter().enumerate() {
            let zeta = Complex64::from_polar(0.8, 0.3 + std::f64::consts::TAU * j as f64 / 37.0);
            let d = t.kernel_eval(z, zeta).unwrap().log_modulus;
            assert!((v - d).abs() < 1e-9, "j={j}: {v} vs {d}");
        }
    }

    #[test]
    fn short_table_reports_reach() {
        let t = KernelTable::moments(&proto(), 10).unwrap();
        let e = t.kernel_eval(Complex64::new(0.95, 0.0), Complex64::new(0.95, 0.0));
        assert!(matches!(e, Err(Error::KernelReach { available: 10, .. })));
    }

    #[test]
    fn p2_norm_matches_quadrature() {
        let w = proto();
        let t = KernelTable::with_reach(&w, 0.9).unwrap();
        let grid = DiskQuadrature::build(&w, 0.97, &GridOptions::default()).unwrap();
        let z = Complex64::new(0.5, 0.0);
        let a = t.kernel_norm(z, Exponent::Finite(2.0), None).unwrap();
        let b = t.kernel_norm_quadrature(z, 2.0, &grid).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn surrogate_has_norm_tau() {
        let w = proto();
        let t = KernelTable::with_reach(&w, 0.9).unwrap();
        let a = Complex64::new(0.5, 0.0);
        let s = t.surrogate(a).unwrap();
        let norm = t.kernel_norm(a, Exponent::Finite(2.0), None).unwrap() + s.log_scale;
        assert!((norm - w.tau(0.5).ln()).abs() < 1e-14);
    }
}
