//! Radial weights `omega = exp(-2 phi)` and every derived radial quantity:
//! `phi'`, the Laplacian, `tau = (Laplacian phi)^(-1/2)`, the class-L constants
//! and the distortion function.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::integrate_adaptive;

/// `2 phi` at which the linear-domain guard radius is placed.
pub const GUARD_TWO_PHI: f64 = 600.0;
const UNIT_GUARD: f64 = 1.0 - 1e-9;
/// Default band limit used by [`WeightSpec::jcn_check`] to flag non-conformance.
pub const JCN_BAND_LIMIT: f64 = 100.0;

/// Values of the weight and its derived quantities at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightValues {
    pub r: f64,
    pub phi: f64,
    pub phi_prime: f64,
    pub laplacian_phi: f64,
    pub tau: f64,
    pub log_omega: f64,
}

impl WeightValues {
    /// `ln(1 + phi')`.
    #[inline]
    pub fn log_one_plus_phi_prime(&self) -> f64 {
        self.phi_prime.ln_1p()
    }
}

/// Tabulated `phi` with a natural cubic spline through the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPhi {
    r: Vec<f64>,
    phi: Vec<f64>,
    second: Vec<f64>,
    source: Option<PathBuf>,
}

impl TabulatedPhi {
    pub fn new(r: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if r.len() != phi.len() || r.len() < 4 {
            return Err(Error::Argument(
                "a weight table needs at least four (r, phi) rows".into(),
            ));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("table radii must be strictly increasing".into()));
        }
        if r[0] < 0.0 || *r.last().unwrap() >= 1.0 {
            return Err(Error::Argument("table radii must lie in [0, 1)".into()));
        }
        let second = natural_spline_second_derivatives(&r, &phi);
        Ok(Self {
            r,
            phi,
            second,
            source: None,
        })
    }

    /// Reads a two-column text file `r phi` (whitespace or comma separated, `#` comments).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut r = Vec::new();
        let mut phi = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Parse {
                    pos: lineno + 1,
                    msg: format!("expected two columns 'r phi', got '{line}'"),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    pos: lineno + 1,
                    msg: format!("not a number: '{s}'"),
                })
            };
            r.push(parse(cols[0])?);
            phi.push(parse(cols[1])?);
        }
        let mut t = Self::new(r, phi)?;
        t.source = Some(path.to_path_buf());
        Ok(t)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.r[0], *self.r.last().unwrap())
    }

    fn interp(&self, x: f64) -> f64 {
        let n = self.r.len();
        let i = match self.r.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let (x0, x1) = (self.r[i], self.r[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * self.phi[i]
            + b * self.phi[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }
}

fn natural_spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let mut u = vec![0.0; n];
    for i in 1..n - 1 {
        let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
        let p = sig * m[i - 1] + 2.0;
        m[i] = (sig - 1.0) / p;
        let d = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
        u[i] = (6.0 * d / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
    }
    m[n - 1] = 0.0;
    for k in (0..n - 1).rev() {
        m[k] = m[k] * m[k + 1] + u[k];
    }
    m
}

/// Weight families. `Constant` (omega = 1) and `Quadratic` (constant tau) are
/// oracle and synthetic inputs outside the large-weight class.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFamily {
    Exponential { b: f64, alpha: f64 },
    Custom(TabulatedPhi),
    Constant,
    Quadratic { c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    family: WeightFamily,
    r_max_guard: f64,
}

/// Estimated class-L constants on the test grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassLConstants {
    /// max of `tau(r) / (1 - r)`
    pub c1: f64,
    /// max of `|tau(r_{i+1}) - tau(r_i)| / (r_{i+1} - r_i)`
    pub c2: f64,
    pub m_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JcnReport {
    pub t: f64,
    pub min: f64,
    pub max: f64,
    pub ratio: f64,
    pub conforming: bool,
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassWReport {
    /// `(r, tau'(r) ln(1/tau(r)))` approaching the guard radius.
    pub samples: Vec<(f64, f64)>,
    pub confirmed: bool,
    pub warning: Option<String>,
}

impl WeightSpec {
    pub fn exponential(b: f64, alpha: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite() && alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Argument(format!(
                "exponential weight needs b > 0 and alpha > 0, got b={b}, alpha={alpha}"
            )));
        }
        let s = (b / GUARD_TWO_PHI).powf(1.0 / alpha);
        if s >= 1.0 {
            return Err(Error::Argument(format!(
                "b={b} puts 2phi(0) above the guard level {GUARD_TWO_PHI}"
            )));
        }
        Ok(Self {
            family: WeightFamily::Exponential { b, alpha },
            r_max_guard: (1.0 - s).sqrt(),
        })
    }

    pub fn custom(table: TabulatedPhi) -> Result<Self> {
        let (lo, hi) = table.range();
        let mut guard = hi;
        if 2.0 * table.interp(hi) > GUARD_TWO_PHI {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if 2.0 * table.interp(m) > GUARD_TWO_PHI {
                    b = m;
                } else {
                    a = m;
                }
            }
            guard = a;
        }
        Ok(Self {
            family: WeightFamily::Custom(table),
            r_max_guard: guard,
        })
    }

    /// `omega = 1`; only meaningful for moment and distortion oracles.
    pub fn constant() -> Self {
        Self {
            family: WeightFamily::Constant,
            r_max_guard: UNIT_GUARD,
        }
    }

    /// `phi = c r^2 / 4`, so the Laplacian is the constant `c` (constant tau).
    pub fn quadratic(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Argument(format!("quadratic weight needs c > 0, got {c}")));
        }
        Ok(Self {
            family: WeightFamily::Quadratic { c },
            r_max_guard: UNIT_GUARD,
        })
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    pub fn r_max_guard(&self) -> f64 {
        self.r_max_guard
    }

    /// Largest radius at which the family can be evaluated at all.
    pub fn r_support(&self) -> f64 {
        match &self.family {
            WeightFamily::Custom(t) => t.range().1,
            _ => 1.0,
        }
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::Domain(format!("radius {r} outside [0, 1)")));
        }
        if let WeightFamily::Custom(t) = &self.family {
            let (lo, hi) = t.range();
            if r < lo || r > hi {
                return Err(Error::Range { r, lo, hi });
            }
        }
        Ok(())
    }

    /// `phi(r)` without range checks (callers stay inside the support).
    pub(crate) fn phi_raw(&self, r: f64) -> f64 {
        match &self.family {
            WeightFamily::Exponential { b, alpha } => 0.5 * b * (1.0 - r * r).powf(-alpha),
            WeightFamily::Custom(t) => t.interp(r),
            WeightFamily::Constant => 0.0,
            WeightFamily::Quadratic { c } => 0.25 * c * r * r,
        }
    }

    fn custom_step(t: &TabulatedPhi, r: f64) -> (f64, f64) {
        let (lo, hi) = t.range();
        let h = 1e-4 * (hi - lo);
        let a = (r - h).max(lo);
        let b = (r + h).min(hi);
        (a, b)
    }

    /// `(phi', phi'/r)`; the second entry is the `r -> 0` limit `phi''(0)` at the origin.
    fn phi_prime_parts(&self, r: f64) -> (f64, f64) {
        match &self.family {
            WeightFamily::Exponential { b, alpha } => {
                let s = 1.0 - r * r;
                let over_r = b * alpha * s.powf(-alpha - 1.0);
                (over_r * r, over_r)
            }
            WeightFamily::Custom(t) => {
                let (a, b) = Self::custom_step(t, r);
                let d1 = (t.interp(b) - t.interp(a)) / (b - a);
                if r < 1e-6 {
                    (d1, self.custom_second(t, r))
                } else {
                    (d1, d1 / r)
                }
            }
            WeightFamily::Constant => (0.0, 0.0),
            WeightFamily::Quadratic { c } => (0.5 * c * r, 0.5 * c),
        }
    }

    fn custom_second(&self, t: &TabulatedPhi, r: f64) -> f64 {
        let (lo, hi) = t.range();
        let h = 1e-4 * (hi - lo);
        let c = r.clamp(lo + h, hi - h);
        (t.interp(c + h) - 2.0 * t.interp(c) + t.interp(c - h)) / (h * h)
    }

    fn laplacian_raw(&self, r: f64) -> f64 {
        match &self.family {
            WeightFamily::Exponential { b, alpha } => {
                let s = 1.0 - r * r;
                2.0 * b * alpha * s.powf(-alpha - 2.0) * (1.0 + alpha * r * r)
            }
            WeightFamily::Custom(t) => {
                let (_, over_r) = self.phi_prime_parts(r);
                self.custom_second(t, r) + over_r
            }
            WeightFamily::Constant => 0.0,
            WeightFamily::Quadratic { c } => *c,
        }
    }

    /// All derived values at radius `r`.
    pub fn eval(&self, r: f64) -> Result<WeightValues> {
        self.check_radius(r)?;
        Ok(self.eval_raw(r))
    }

    pub(crate) fn eval_raw(&self, r: f64) -> WeightValues {
        let phi = self.phi_raw(r);
        let (phi_prime, _) = self.phi_prime_parts(r);
        let laplacian_phi = self.laplacian_raw(r);
        WeightValues {
            r,
            phi,
            phi_prime,
            laplacian_phi,
            tau: laplacian_phi.powf(-0.5),
            log_omega: -2.0 * phi,
        }
    }

    pub fn tau(&self, r: f64) -> f64 {
        self.laplacian_raw(r).powf(-0.5)
    }

    pub fn log_omega(&self, r: f64) -> f64 {
        -2.0 * self.phi_raw(r)
    }

    pub fn phi_prime(&self, r: f64) -> f64 {
        self.phi_prime_parts(r).0
    }

    pub fn laplacian(&self, r: f64) -> f64 {
        self.laplacian_raw(r)
    }

    /// Distortion `psi_omega(r) = omega(r)^{-1} int_r^1 omega(u) du`, evaluated with the
    /// integrand shifted by `omega(r)` so it never leaves a safe range.
    pub fn distortion(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        let hi = self.r_support();
        let base = 2.0 * self.phi_raw(r);
        let decay = 1.0 / (2.0 * self.phi_prime(r) + 1.0);
        let mut pts = vec![r];
        for k in [1.0, 4.0, 16.0, 64.0, 256.0] {
            let x = r + k * decay;
            if x < hi {
                pts.push(x);
            }
        }
        pts.push(hi);
        let q = integrate_adaptive(
            |u| (base - 2.0 * self.phi_raw(u)).exp(),
            &pts,
            1e-12,
            0.0,
            "distortion",
        )?;
        if let WeightFamily::Custom(t) = &self.family {
            let tail = (base - 2.0 * t.interp(hi)).exp();
            if tail > 1e-12 * q.value {
                return Err(Error::Accuracy {
                    what: "distortion (table ends before omega is negligible)".into(),
                    achieved: tail / q.value,
                    requested: 1e-12,
                });
            }
        }
        Ok(q.value)
    }

    /// Grid estimates of the class-L constants and `m_tau = min(1, 1/c1, 1/c2)/4`.
    pub fn class_l_constants(&self) -> ClassLConstants {
        let n = 4000;
        let (lo, hi) = match &self.family {
            WeightFamily::Custom(t) => (t.range().0, self.r_max_guard.min(t.range().1)),
            _ => (0.0, self.r_max_guard),
        };
        let mut c1: f64 = 0.0;
        let mut c2: f64 = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=n {
            let r = lo + (hi - lo) * i as f64 / n as f64;
            let t = self.tau(r);
            c1 = c1.max(t / (1.0 - r));
            if let Some((rp, tp)) = prev {
                c2 = c2.max((t - tp).abs() / (r - rp));
            }
            prev = Some((r, t));
        }
        let m_tau = if c1.is_finite() && c2.is_finite() {
            1.0f64.min(1.0 / c1).min(1.0 / c2) / 4.0
        } else {
            0.0
        };
        ClassLConstants { c1, c2, m_tau }
    }

    pub fn m_tau(&self) -> f64 {
        self.class_l_constants().m_tau
    }

    /// Band of `Laplacian(r) (1 - r)^t psi_omega(r)` over `grid`.
    pub fn jcn_check(&self, t: f64, grid: &[f64]) -> Result<JcnReport> {
        if grid.is_empty() {
            return Err(Error::Argument("jcn_check needs a non-empty radius grid".into()));
        }
        if t < 1.0 {
            return Err(Error::Argument(format!("jcn_check needs t >= 1, got {t}")));
        }
        let mut samples = Vec::with_capacity(grid.len());
        for &r in grid {
            let v = self.eval(r)?.laplacian_phi * (1.0 - r).powf(t) * self.distortion(r)?;
            samples.push((r, v));
        }
        let min = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let max = samples.iter().map(|s| s.1).fold(0.0, f64::max);
        let ratio = max / min;
        Ok(JcnReport {
            t,
            min,
            max,
            ratio,
            conforming: ratio.is_finite() && ratio <= JCN_BAND_LIMIT,
            samples,
        })
    }

    /// Numerical look at `tau'(r) ln(1/tau(r)) -> 0`; only warns when unconfirmed.
    pub fn class_w_check(&self) -> ClassWReport {
        let hi = self.r_max_guard;
        let mut samples = Vec::new();
        let mut k = 1;
        loop {
            let r = 1.0 - 0.5f64.powi(k);
            if r > hi {
                break;
            }
            let h = 1e-3 * (1.0 - r);
            let d = (self.tau(r + h) - self.tau(r - h)) / (2.0 * h);
            samples.push((r, d * (1.0 / self.tau(r)).ln()));
            k += 1;
        }
        let confirmed = samples.len() >= 3 && {
            let first = samples[0].1.abs();
            let last = samples.last().unwrap().1.abs();
            let tail = &samples[samples.len() - 3..];
            last < 0.1 * first.max(1e-300) && tail.windows(2).all(|w| w[1].1.abs() <= w[0].1.abs())
        };
        let warning = (!confirmed).then(|| {
            "tau'(r) log(1/tau(r)) -> 0 not confirmed on the probe radii; class W unverified".to_string()
        });
        ClassWReport {
            samples,
            confirmed,
            warning,
        }
    }

    /// Radius-indexed tau-coordinate `rho(r) = int_0^r du / tau(u)` on a fine table.
    pub fn tau_coordinate(&self, r_end: f64) -> TauCoordinate {
        TauCoordinate::new(self, r_end)
    }
}

/// Monotone map `r -> rho(r) = int_0^r du/tau(u)` and its inverse, tabulated.
#[derive(Debug, Clone)]
pub struct TauCoordinate {
    r: Vec<f64>,
    rho: Vec<f64>,
}

impl TauCoordinate {
    fn new(w: &WeightSpec, r_end: f64) -> Self {
        let n = 4096;
        let mut r = Vec::with_capacity(n + 1);
        let mut rho = Vec::with_capacity(n + 1);
        r.push(0.0);
        rho.push(0.0);
        // Steps uniform in -ln(1 - r) resolve the boundary layer.
        let s_end = -(1.0 - r_end).ln();
        let mut acc = 0.0;
        let mut prev = 0.0;
        for i in 1..=n {
            let x = 1.0 - (-s_end * i as f64 / n as f64).exp();
            let mid = 0.5 * (prev + x);
            acc += (x - prev) / w.tau(mid);
            r.push(x);
            rho.push(acc);
            prev = x;
        }
        Self { r, rho }
    }

    pub fn rho(&self, x: f64) -> f64 {
        interp_monotone(&self.r, &self.rho, x)
    }

    pub fn radius(&self, rho: f64) -> f64 {
        interp_monotone(&self.rho, &self.r, rho)
    }
}

fn interp_monotone(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        let k = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
        return ys[n - 1] + k * (x - xs[n - 1]);
    }
    let i = xs.partition_point(|v| *v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            WeightFamily::Exponential { b, alpha } => write!(f, "exp:b={b:?},alpha={alpha:?}"),
            WeightFamily::Custom(t) => match &t.source {
                Some(p) => write!(f, "table:{}", p.display()),
                None => write!(f, "table:<memory>"),
            },
            WeightFamily::Constant => write!(f, "constant"),
            WeightFamily::Quadratic { c } => write!(f, "quadratic:c={c:?}"),
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    /// `exp:b=<float>,alpha=<float>` or `table:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("exp:") {
            let mut b = None;
            let mut alpha = None;
            let mut offset = 4;
            for part in rest.split(',') {
                let (key, val) = part.split_once('=').ok_or_else(|| Error::Parse {
                    pos: offset,
                    msg: format!("expected key=value, got '{part}'"),
                })?;
                let x: f64 = val.trim().parse().map_err(|_| Error::Parse {
                    pos: offset + key.len() + 1,
                    msg: format!("not a number: '{val}'"),
                })?;
                match key.trim() {
                    "b" => b = Some(x),
                    "alpha" => alpha = Some(x),
                    other => {
                        return Err(Error::Parse {
                            pos: offset,
                            msg: format!("unknown weight parameter '{other}'"),
                        })
                    }
                }
                offset += part.len() + 1;
            }
            let b = b.ok_or_else(|| Error::Parse {
                pos: 4,
                msg: "missing b".into(),
            })?;
            let alpha = alpha.ok_or_else(|| Error::Parse {
                pos: 4,
                msg: "missing alpha".into(),
            })?;
            WeightSpec::exponential(b, alpha)
        } else if let Some(path) = s.strip_prefix("table:") {
            WeightSpec::custom(TabulatedPhi::from_file(Path::new(path))?)
        } else {
            Err(Error::Parse {
                pos: 0,
                msg: format!("weight must start with 'exp:' or 'table:', got '{s}'"),
            })
        }
    }
}
