//! Analytic symbols on the disk: polynomials, Möbius maps, scaled Möbius maps and
//! compositions, with exact derivatives and truncated Taylor arithmetic.

use std::fmt;
use std::str::FromStr;
use std::sync::RwLock;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest Taylor degree [`Symbol::taylor_truncate`] will produce.
pub const MAX_TAYLOR_DEGREE: usize = 4096;
/// Radius at which Taylor tail bounds are reported by default.
pub const TAIL_RADIUS: f64 = 0.5;
const SELF_MAP_RADIUS: f64 = 0.999;
const SELF_MAP_ANGLES: usize = 4096;
const SELF_MAP_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolKind {
    Polynomial(Vec<Complex64>),
    /// `(z - a) / (1 - conj(a) z)`
    Moebius(Complex64),
    /// `c (z - a) / (1 - conj(a) z)`
    ScaledMoebius { c: Complex64, a: Complex64 },
    /// `outer(inner(z))`
    Composition(Box<Symbol>, Box<Symbol>),
}

#[derive(Debug)]
pub struct Symbol {
    kind: SymbolKind,
    taylor_cache: RwLock<Vec<Complex64>>,
}

impl Clone for Symbol {
    fn clone(&self) -> Self {
        Self::from_kind(self.kind.clone())
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfMapReport {
    pub ok: bool,
    pub sup_modulus: f64,
    pub by_construction: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Taylor {
    pub coeffs: Vec<Complex64>,
    /// Upper estimate of `sup_{|z| <= radius} |s(z) - truncation(z)|`.
    pub tail_bound: f64,
    pub radius: f64,
}

impl Symbol {
    fn from_kind(kind: SymbolKind) -> Self {
        Self {
            kind,
            taylor_cache: RwLock::new(Vec::new()),
        }
    }

    pub fn polynomial(coeffs: Vec<Complex64>) -> Self {
        let mut c = coeffs;
        while c.len() > 1 && c.last() == Some(&ZERO) {
            c.pop();
        }
        if c.is_empty() {
            c.push(ZERO);
        }
        Self::from_kind(SymbolKind::Polynomial(c))
    }

    pub fn real_polynomial(coeffs: &[f64]) -> Self {
        Self::polynomial(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn identity() -> Self {
        Self::polynomial(vec![ZERO, ONE])
    }

    pub fn constant(c: Complex64) -> Self {
        Self::polynomial(vec![c])
    }

    pub fn zero() -> Self {
        Self::constant(ZERO)
    }

    /// `z -> c z`.
    pub fn scale(c: Complex64) -> Self {
        Self::polynomial(vec![ZERO, c])
    }

    pub fn moebius(a: Complex64) -> Result<Self> {
        if a.norm() >= 1.0 {
            return Err(Error::Argument(format!("Möbius parameter |a| = {} must be < 1", a.norm())));
        }
        Ok(Self::from_kind(SymbolKind::Moebius(a)))
    }

    pub fn scaled_moebius(c: Complex64, a: Complex64) -> Result<Self> {
        if a.norm() >= 1.0 {
            return Err(Error::Argument(format!("Möbius parameter |a| = {} must be < 1", a.norm())));
        }
        Ok(Self::from_kind(SymbolKind::ScaledMoebius { c, a }))
    }

    pub fn compose(outer: Symbol, inner: Symbol) -> Self {
        Self::from_kind(SymbolKind::Composition(Box::new(outer), Box::new(inner)))
    }

    pub fn kind(&self) -> &SymbolKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            SymbolKind::Polynomial(c) => c.iter().all(|x| *x == ZERO),
            SymbolKind::ScaledMoebius { c, .. } => *c == ZERO,
            _ => false,
        }
    }

    pub fn is_constant(&self) -> bool {
        match &self.kind {
            SymbolKind::Polynomial(c) => c.len() == 1,
            SymbolKind::ScaledMoebius { c, .. } => *c == ZERO,
            SymbolKind::Moebius(_) => false,
            SymbolKind::Composition(o, i) => o.is_constant() || i.is_constant(),
        }
    }

    /// `Some(c)` when the symbol is exactly `z -> c z`.
    pub fn as_dilation(&self) -> Option<Complex64> {
        match &self.kind {
            SymbolKind::Polynomial(c) if c.len() == 2 && c[0] == ZERO => Some(c[1]),
            SymbolKind::Moebius(a) if *a == ZERO => Some(ONE),
            SymbolKind::ScaledMoebius { c, a } if *a == ZERO => Some(*c),
            _ => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.as_dilation() == Some(ONE)
    }

    /// Evaluation without the `|z| < 1` check.
    pub fn value(&self, z: Complex64) -> Complex64 {
        match &self.kind {
            SymbolKind::Polynomial(c) => horner(c, z),
            SymbolKind::Moebius(a) => (z - a) / (ONE - a.conj() * z),
            SymbolKind::ScaledMoebius { c, a } => c * (z - a) / (ONE - a.conj() * z),
            SymbolKind::Composition(o, i) => o.value(i.value(z)),
        }
    }

    /// Derivative without the `|z| < 1` check.
    pub fn derivative_value(&self, z: Complex64) -> Complex64 {
        match &self.kind {
            SymbolKind::Polynomial(c) => {
                let mut acc = ZERO;
                for k in (1..c.len()).rev() {
                    acc = acc * z + c[k] * k as f64;
                }
                acc
            }
            SymbolKind::Moebius(a) => {
                let d = ONE - a.conj() * z;
                (1.0 - a.norm_sqr()) / (d * d)
            }
            SymbolKind::ScaledMoebius { c, a } => {
                let d = ONE - a.conj() * z;
                c * (1.0 - a.norm_sqr()) / (d * d)
            }
            SymbolKind::Composition(o, i) => o.derivative_value(i.value(z)) * i.derivative_value(z),
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        check_disk(z)?;
        if let SymbolKind::Composition(o, i) = &self.kind {
            let w = i.eval(z)?;
            return o.eval(w);
        }
        Ok(self.value(z))
    }

    pub fn eval_derivative(&self, z: Complex64) -> Result<Complex64> {
        check_disk(z)?;
        if let SymbolKind::Composition(o, i) = &self.kind {
            let w = i.eval(z)?;
            return Ok(o.eval_derivative(w)? * i.derivative_value(z));
        }
        Ok(self.derivative_value(z))
    }

    /// Symbol of the derivative, as a polynomial truncation when the kind is not polynomial.
    pub fn derivative(&self) -> Result<Symbol> {
        match &self.kind {
            SymbolKind::Polynomial(c) => Ok(Symbol::polynomial(series_derivative(c))),
            _ => {
                let t = self.taylor_truncate(MAX_TAYLOR_DEGREE.min(512))?;
                Ok(Symbol::polynomial(series_derivative(&t.coeffs)))
            }
        }
    }

    /// `sup |s|` on the circle of radius 0.999; Möbius kinds and `|c| <= 1` dilations are
    /// accepted by construction.
    pub fn self_map_check(&self) -> SelfMapReport {
        let sup = (0..SELF_MAP_ANGLES)
            .map(|j| {
                let z = Complex64::from_polar(
                    SELF_MAP_RADIUS,
                    std::f64::consts::TAU * j as f64 / SELF_MAP_ANGLES as f64,
                );
                self.value(z).norm()
            })
            .fold(0.0, f64::max);
        let by_construction = match &self.kind {
            SymbolKind::Moebius(_) => true,
            SymbolKind::ScaledMoebius { c, .. } => c.norm() <= 1.0,
            _ => self.as_dilation().is_some_and(|c| c.norm() <= 1.0),
        };
        SelfMapReport {
            ok: by_construction || sup <= 1.0 + SELF_MAP_TOL,
            sup_modulus: sup,
            by_construction,
        }
    }

    pub fn require_self_map(&self) -> Result<()> {
        let rep = self.self_map_check();
        if rep.ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "symbol {self} is not a self-map of the disk (sup |psi| = {})",
                rep.sup_modulus
            )))
        }
    }

    /// Applies the symbol to a power series `s` (with `|s(0)| < 1`), truncated to `s.len()` terms.
    pub fn apply_to_series(&self, s: &[Complex64]) -> Vec<Complex64> {
        let n = s.len();
        match &self.kind {
            SymbolKind::Polynomial(c) => {
                let mut acc = vec![ZERO; n];
                for &ck in c.iter().rev() {
                    acc = series_mul(&acc, s, n);
                    if n > 0 {
                        acc[0] += ck;
                    }
                }
                acc
            }
            SymbolKind::Moebius(a) => moebius_series(ONE, *a, s),
            SymbolKind::ScaledMoebius { c, a } => moebius_series(*c, *a, s),
            SymbolKind::Composition(o, i) => o.apply_to_series(&i.apply_to_series(s)),
        }
    }

    fn raw_coefficients(&self, len: usize) -> Vec<Complex64> {
        {
            let cache = self.taylor_cache.read().expect("taylor cache poisoned");
            if cache.len() >= len {
                return cache[..len].to_vec();
            }
        }
        let coeffs = match &self.kind {
            SymbolKind::Polynomial(c) => {
                let mut v = c.clone();
                v.resize(len.max(c.len()), ZERO);
                v
            }
            SymbolKind::Moebius(a) => moebius_coefficients(ONE, *a, len),
            SymbolKind::ScaledMoebius { c, a } => moebius_coefficients(*c, *a, len),
            SymbolKind::Composition(o, i) => o.apply_to_series(&i.raw_coefficients(len)),
        };
        let mut cache = self.taylor_cache.write().expect("taylor cache poisoned");
        if cache.len() < coeffs.len() {
            *cache = coeffs.clone();
        }
        coeffs[..len].to_vec()
    }

    pub fn taylor_truncate(&self, degree: usize) -> Result<Taylor> {
        self.taylor_truncate_at(degree, TAIL_RADIUS)
    }

    /// Maclaurin coefficients up to `degree` with a tail bound on `|z| <= radius`.
    pub fn taylor_truncate_at(&self, degree: usize, radius: f64) -> Result<Taylor> {
        if degree > MAX_TAYLOR_DEGREE {
            return Err(Error::Resource(format!(
                "Taylor degree {degree} exceeds {MAX_TAYLOR_DEGREE}"
            )));
        }
        if !(0.0..1.0).contains(&radius) {
            return Err(Error::Domain(format!("tail radius {radius} outside [0, 1)")));
        }
        let coeffs = self.raw_coefficients(degree + 1);
        let tail_bound = match &self.kind {
            SymbolKind::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(degree + 1)
                .map(|(k, x)| x.norm() * radius.powi(k as i32))
                .sum(),
            SymbolKind::Moebius(a) => moebius_tail(1.0, a.norm(), radius, degree),
            SymbolKind::ScaledMoebius { c, a } => moebius_tail(c.norm(), a.norm(), radius, degree),
            SymbolKind::Composition(..) => self.cauchy_tail(radius, degree),
        };
        Ok(Taylor {
            coeffs,
            tail_bound,
            radius,
        })
    }

    /// Cauchy-estimate tail bound `min_R M(R) (rho/R)^{d+1} / (1 - rho/R)`, with `M(R)` sampled
    /// on 512 angles and inflated by 1%.
    fn cauchy_tail(&self, rho: f64, degree: usize) -> f64 {
        let mut best = f64::INFINITY;
        for k in 1..=20 {
            let big_r = rho + (1.0 - rho) * k as f64 / 21.0;
            let m = (0..512)
                .map(|j| {
                    let z = Complex64::from_polar(big_r, std::f64::consts::TAU * j as f64 / 512.0);
                    self.value(z).norm()
                })
                .fold(0.0, f64::max)
                * 1.01;
            let q = rho / big_r;
            best = best.min(m * q.powi(degree as i32 + 1) / (1.0 - q));
        }
        best
    }
}

fn check_disk(z: Complex64) -> Result<()> {
    if z.norm() >= 1.0 || !z.norm().is_finite() {
        Err(Error::Domain(format!("point {z} outside the open unit disk")))
    } else {
        Ok(())
    }
}

pub fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(ZERO, |acc, &x| acc * z + x)
}

/// Product of two power series truncated to `n` terms.
pub fn series_mul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; n];
    for (i, &ai) in a.iter().enumerate().take(n) {
        if ai == ZERO {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub fn series_derivative(c: &[Complex64]) -> Vec<Complex64> {
    if c.len() <= 1 {
        return vec![ZERO];
    }
    c.iter().enumerate().skip(1).map(|(k, &x)| x * k as f64).collect()
}

/// Antiderivative vanishing at the origin.
pub fn series_antiderivative(c: &[Complex64]) -> Vec<Complex64> {
    std::iter::once(ZERO)
        .chain(c.iter().enumerate().map(|(k, &x)| x / (k + 1) as f64))
        .collect()
}

fn moebius_series(c: Complex64, a: Complex64, s: &[Complex64]) -> Vec<Complex64> {
    // Solve (1 - conj(a) s) q = c (s - a) term by term.
    let n = s.len();
    let ab = a.conj();
    let d0 = ONE - ab * s.first().copied().unwrap_or(ZERO);
    let mut q = vec![ZERO; n];
    for k in 0..n {
        let mut rhs = c * s[k];
        if k == 0 {
            rhs -= c * a;
        }
        for j in 1..=k {
            rhs += ab * s[j] * q[k - j];
        }
        q[k] = rhs / d0;
    }
    q
}

fn moebius_coefficients(c: Complex64, a: Complex64, len: usize) -> Vec<Complex64> {
    let ab = a.conj();
    let scale = 1.0 - a.norm_sqr();
    let mut out = Vec::with_capacity(len);
    let mut pow = ONE;
    for k in 0..len {
        if k == 0 {
            out.push(-c * a);
        } else {
            out.push(c * pow * scale);
            pow *= ab;
        }
    }
    out
}

fn moebius_tail(c: f64, a: f64, rho: f64, degree: usize) -> f64 {
    // sum_{n > d} |c| |a|^{n-1} (1 - |a|^2) rho^n
    let x = a * rho;
    c * (1.0 - a * a) * rho * x.powi(degree as i32) / (1.0 - x)
}

fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 && z.im.is_sign_positive() {
        format!("{:?}", z.re)
    } else {
        let sign = if z.im.is_sign_negative() { '-' } else { '+' };
        format!("{:?}{sign}{:?}i", z.re, z.im.abs())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SymbolKind::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|&x| format_complex(x)).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            SymbolKind::Moebius(a) => write!(f, "moebius:{}", format_complex(*a)),
            SymbolKind::ScaledMoebius { c, a } => {
                write!(f, "scaled_moebius:{},{}", format_complex(*c), format_complex(*a))
            }
            SymbolKind::Composition(o, i) => write!(f, "compose({o},{i})"),
        }
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also `i`, `-i`).
pub fn parse_complex(s: &str, pos: usize) -> Result<Complex64> {
    let t = s.trim();
    let err = || Error::Parse {
        pos,
        msg: format!("invalid complex literal '{t}'"),
    };
    if t.is_empty() {
        return Err(err());
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|x| Complex64::new(x, 0.0)).map_err(|_| err());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re_s, im_s) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im_s {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().map_err(|_| err())?,
    };
    let re = re_s.parse::<f64>().map_err(|_| err())?;
    Ok(Complex64::new(re, im))
}

const KEYWORDS: [&str; 5] = ["poly:", "moebius:", "scale:", "scaled_moebius:", "compose("];

fn parse_symbol(s: &str, pos: usize) -> Result<Symbol> {
    let lead = s.len() - s.trim_start().len();
    let t = s.trim();
    let pos = pos + lead;
    if let Some(rest) = t.strip_prefix("poly:") {
        let mut coeffs = Vec::new();
        let mut off = pos + 5;
        for part in rest.split(',') {
            coeffs.push(parse_complex(part, off)?);
            off += part.len() + 1;
        }
        Ok(Symbol::polynomial(coeffs))
    } else if let Some(rest) = t.strip_prefix("moebius:") {
        Symbol::moebius(parse_complex(rest, pos + 8)?).map_err(|e| Error::Parse {
            pos: pos + 8,
            msg: e.to_string(),
        })
    } else if let Some(rest) = t.strip_prefix("scaled_moebius:") {
        let (c, a) = rest.split_once(',').ok_or(Error::Parse {
            pos: pos + 15,
            msg: "scaled_moebius needs 'c,a'".into(),
        })?;
        let a = parse_complex(a, pos + 16 + c.len())?;
        let c = parse_complex(c, pos + 15)?;
        Symbol::scaled_moebius(c, a).map_err(|e| Error::Parse {
            pos: pos + 15,
            msg: e.to_string(),
        })
    } else if let Some(rest) = t.strip_prefix("scale:") {
        Ok(Symbol::scale(parse_complex(rest, pos + 6)?))
    } else if let Some(rest) = t.strip_prefix("compose(") {
        let inner = rest.strip_suffix(')').ok_or(Error::Parse {
            pos: pos + t.len(),
            msg: "missing closing ')' in compose".into(),
        })?;
        let base = pos + 8;
        let mut depth = 0i32;
        let mut split = None;
        for (k, ch) in inner.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    let next = inner[k + 1..].trim_start();
                    if KEYWORDS.iter().any(|kw| next.starts_with(kw)) {
                        split = Some(k);
                        break;
                    }
                }
                _ => {}
            }
        }
        let k = split.ok_or(Error::Parse {
            pos: base,
            msg: "compose needs two symbol arguments".into(),
        })?;
        let outer = parse_symbol(&inner[..k], base)?;
        let inner_sym = parse_symbol(&inner[k + 1..], base + k + 1)?;
        Ok(Symbol::compose(outer, inner_sym))
    } else {
        Err(Error::Parse {
            pos,
            msg: format!("expected poly:, moebius:, scale: or compose(, got '{t}'"),
        })
    }
}

impl FromStr for Symbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_symbol(s, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_and_moebius_values() {
        let z = c(0.3, 0.1);
        assert_eq!(Symbol::identity().eval(z).unwrap(), z);
        let m = Symbol::moebius(c(0.5, 0.0)).unwrap();
        assert_eq!(m.eval(ZERO).unwrap(), c(-0.5, 0.0));
        assert_eq!(m.eval_derivative(ZERO).unwrap(), c(0.75, 0.0));
        let sq = Symbol::real_polynomial(&[0.0, 0.0, 1.0]);
        assert!((sq.eval_derivative(c(0.4, 0.0)).unwrap() - c(0.8, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn outside_disk_is_domain_error() {
        assert!(matches!(Symbol::identity().eval(ONE), Err(Error::Domain(_))));
    }

    #[test]
    fn self_map_examples() {
        let half = Symbol::scale(c(0.5, 0.0));
        let r = half.self_map_check();
        assert!(r.ok && (r.sup_modulus - 0.4995).abs() < 1e-12);
        assert!(!Symbol::scale(c(2.0, 0.0)).self_map_check().ok);
        assert!(Symbol::moebius(c(0.9, 0.0)).unwrap().self_map_check().by_construction);
    }

    #[test]
    fn moebius_taylor() {
        let t = Symbol::moebius(c(0.5, 0.0)).unwrap().taylor_truncate(2).unwrap();
        let want = [c(-0.5, 0.0), c(0.75, 0.0), c(0.375, 0.0)];
        for (a, b) in t.coeffs.iter().zip(want) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn polynomial_truncation() {
        let sq = Symbol::real_polynomial(&[0.0, 0.0, 1.0]);
        let t = sq.taylor_truncate(1).unwrap();
        assert_eq!(t.coeffs, vec![ZERO, ZERO]);
        assert!(t.tail_bound > 0.0);
        let p = Symbol::real_polynomial(&[1.0, 2.0, 3.0]);
        assert_eq!(p.taylor_truncate(2).unwrap().coeffs, vec![c(1., 0.), c(2., 0.), c(3., 0.)]);
        assert!(matches!(p.taylor_truncate(5000), Err(Error::Resource(_))));
    }

    #[test]
    fn composition_series_matches_eval() {
        let s = Symbol::compose(
            Symbol::moebius(c(0.3, 0.2)).unwrap(),
            Symbol::real_polynomial(&[0.1, 0.5, 0.2]),
        );
        let t = s.taylor_truncate(40).unwrap();
        let z = c(0.3, -0.35);
        let err = (horner(&t.coeffs, z) - s.eval(z).unwrap()).norm();
        assert!(err <= t.tail_bound && t.tail_bound < 1e-6, "{err} {}", t.tail_bound);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for src in [
            "poly:0,1",
            "poly:1+2i,-0.5i,3e-5-1e-3i",
            "moebius:0.3",
            "scale:0.5",
            "compose(poly:0,0,1,moebius:0.2-0.1i)",
            "compose(compose(scale:0.5,moebius:0.1),poly:0,1)",
        ] {
            let s: Symbol = src.parse().unwrap();
            let again: Symbol = s.to_string().parse().unwrap();
            assert_eq!(s, again, "{src}");
        }
        assert_eq!("scale:0.5".parse::<Symbol>().unwrap().as_dilation(), Some(c(0.5, 0.0)));
        let e = "poly:0,x".parse::<Symbol>().unwrap_err();
        assert!(matches!(e, Error::Parse { pos: 7, .. }), "{e:?}");
        assert!("moebius:1.5".parse::<Symbol>().is_err());
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("i", 0).unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("-i", 0).unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("1e-3+2e+1i", 0).unwrap(), c(1e-3, 20.0));
        assert_eq!(parse_complex("-2.5", 0).unwrap(), c(-2.5, 0.0));
    }
}
