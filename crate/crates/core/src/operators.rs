//! Truncated matrices of the integral operators and of Toeplitz operators, their singular
//! values, and the adjoint identity `(C_g^psi)^* C_g^psi = T_m`.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{log_moment, log_radial_moment};
use crate::numeric::Exponent;
use crate::quadrature::{pullback_measure, DiscreteMeasure, DiskQuadrature, GridOptions};
use crate::symbols::{series_antiderivative, series_mul, Symbol, SymbolKind};
use crate::transforms::OpKind;
use crate::weights::WeightSpec;

/// Largest allowed `N * (M + deg g)`.
pub const MATRIX_BUDGET: usize = 8192;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Orthonormal monomials of `<f, h> = int f conj(h) omega dA`.
    Standard,
    /// Orthonormal monomials of `f(0) conj(h(0)) + int f' conj(h') omega (1 + phi')^{-2} dA`.
    LittlewoodPaley,
}

/// `ln ||z^n||` under the pairing of `basis`, for `n < len`.
pub fn basis_log_norms(w: &WeightSpec, basis: Basis, len: usize) -> Result<Vec<f64>> {
    (0..len)
        .map(|n| match basis {
            Basis::Standard => Ok(0.5 * log_moment(w, n)?),
            Basis::LittlewoodPaley if n == 0 => Ok(0.0),
            Basis::LittlewoodPaley => {
                let m = log_radial_moment(
                    w,
                    2.0 * n as f64 - 1.0,
                    |r| -2.0 * w.phi_prime(r).ln_1p(),
                    &format!("LP moment d_{n}"),
                )?;
                Ok((n as f64).ln() + 0.5 * m)
            }
        })
        .collect()
}

/// Where and how finely non-polynomial symbols are truncated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationOptions {
    pub radius: f64,
    pub tol: f64,
}

impl Default for TruncationOptions {
    fn default() -> Self {
        Self {
            radius: 0.99,
            tol: 1e-14,
        }
    }
}

/// Taylor coefficients of `s` whose tail stays below `opts.tol` on `|z| <= opts.radius`.
pub fn truncate_symbol(s: &Symbol, opts: &TruncationOptions) -> Result<Vec<Complex64>> {
    if let SymbolKind::Polynomial(c) = s.kind() {
        let mut c = c.clone();
        while c.len() > 1 && c.last() == Some(&ZERO) {
            c.pop();
        }
        return Ok(c);
    }
    let mut degree = 8;
    let mut last = f64::INFINITY;
    while degree <= crate::symbols::MAX_TAYLOR_DEGREE {
        let t = s.taylor_truncate_at(degree, opts.radius)?;
        if t.tail_bound < opts.tol {
            return Ok(t.coeffs);
        }
        last = t.tail_bound;
        degree *= 2;
    }
    Err(Error::Truncation {
        bound: last,
        limit: opts.tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpTag {
    pub kind: String,
    pub psi: String,
    pub g: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    /// `N x N` block `<T e_n, e_m>` for `m, n < N`.
    pub entries: DMatrix<Complex64>,
    /// Every Taylor coefficient of `T e_n` (rows up to the image degree), same column basis.
    pub image: DMatrix<Complex64>,
    pub basis: Basis,
    pub truncation: usize,
    pub tag: OpTag,
}

impl OperatorMatrix {
    /// `A^* A` over the full image, i.e. the Gram matrix of `T e_0, .., T e_{N-1}`.
    pub fn gram(&self) -> DMatrix<Complex64> {
        self.image.adjoint() * &self.image
    }

    /// Writes `m n re im` lines.
    pub fn export<W: Write>(&self, mut out: W) -> Result<()> {
        for n in 0..self.entries.ncols() {
            for m in 0..self.entries.nrows() {
                let v = self.entries[(m, n)];
                writeln!(out, "{m} {n} {:.16e} {:.16e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

fn poly_powers(psi: &[Complex64], count: usize) -> Vec<Vec<Complex64>> {
    let mut out = vec![vec![Complex64::new(1.0, 0.0)]];
    for k in 1..count {
        let prev = &out[k - 1];
        let len = prev.len() + psi.len() - 1;
        out.push(series_mul(prev, psi, len));
    }
    out
}

fn compose(outer: &[Complex64], powers: &[Vec<Complex64>]) -> Vec<Complex64> {
    let len = outer
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != ZERO)
        .map(|(k, _)| powers[k].len())
        .max()
        .unwrap_or(1);
    let mut acc = vec![ZERO; len];
    for (c, p) in outer.iter().zip(powers) {
        if *c != ZERO {
            for (a, x) in acc.iter_mut().zip(p) {
                *a += c * x;
            }
        }
    }
    acc
}

fn monomial_times(n: usize, scale: f64, g: &[Complex64]) -> Vec<Complex64> {
    let mut v = vec![ZERO; n];
    v.extend(g.iter().map(|c| c * scale));
    v
}

/// Matrix of `kind` with symbols `psi`, `g` on the first `n` basis monomials.
pub fn build_operator(
    kind: OpKind,
    psi: &Symbol,
    g: &Symbol,
    w: &WeightSpec,
    n: usize,
    basis: Basis,
    opts: &TruncationOptions,
) -> Result<OperatorMatrix> {
    if n == 0 {
        return Err(Error::Argument("truncation N must be positive".into()));
    }
    let id = Symbol::identity();
    let psi = match kind {
        OpKind::J | OpKind::I => &id,
        _ => psi,
    };
    psi.require_self_map()?;
    let gc = truncate_symbol(g, opts)?;
    let pc = if psi.is_identity() {
        vec![ZERO, Complex64::new(1.0, 0.0)]
    } else {
        truncate_symbol(psi, opts)?
    };
    let m = pc.len() - 1;
    if n * (m + gc.len() - 1).max(1) > MATRIX_BUDGET {
        return Err(Error::Resource(format!(
            "N (M + deg g) = {} exceeds {MATRIX_BUDGET}",
            n * (m + gc.len() - 1)
        )));
    }
    let tag = OpTag {
        kind: kind.to_string(),
        psi: psi.to_string(),
        g: g.to_string(),
    };

    let images: Vec<Vec<Complex64>> = match kind {
        OpKind::CPsiG | OpKind::CGPsi | OpKind::I | OpKind::J => {
            let powers = poly_powers(&pc, n + gc.len() + 1);
            (0..n)
                .map(|k| {
                    let inner = match kind {
                        OpKind::CPsiG | OpKind::I if k == 0 => vec![ZERO],
                        OpKind::CPsiG | OpKind::I => monomial_times(k - 1, k as f64, &gc),
                        _ => monomial_times(k, 1.0, &gc),
                    };
                    compose(&series_antiderivative(&inner), &powers)
                })
                .collect()
        }
        OpKind::GI | OpKind::GV => {
            let powers = poly_powers(&pc, n + 1);
            (0..n)
                .map(|k| {
                    let inner = match kind {
                        OpKind::GI if k == 0 => vec![ZERO],
                        OpKind::GI => powers[k - 1].iter().map(|c| c * k as f64).collect(),
                        _ => powers[k].clone(),
                    };
                    let len = inner.len() + gc.len() - 1;
                    series_antiderivative(&series_mul(&inner, &gc, len))
                })
                .collect()
        }
    };

    let rows = images.iter().map(Vec::len).max().unwrap_or(1).max(n);
    let norms = basis_log_norms(w, basis, rows)?;
    let image = DMatrix::from_fn(rows, n, |r, c| {
        images[c]
            .get(r)
            .map_or(ZERO, |&v| if v == ZERO { ZERO } else { v * (norms[r] - norms[c]).exp() })
    });
    if image.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical("non-finite operator matrix entry".into()));
    }
    Ok(OperatorMatrix {
        entries: image.rows(0, n).into_owned(),
        image,
        basis,
        truncation: n,
        tag,
    })
}

/// Toeplitz form `sum_a e_n(a) conj(e_m(a)) omega(a) mu({a})`.
pub fn build_toeplitz(mu: &DiscreteMeasure, w: &WeightSpec, n: usize, basis: Basis) -> Result<OperatorMatrix> {
    let norms = basis_log_norms(w, basis, n)?;
    let mut acc = DMatrix::<Complex64>::zeros(n, n);
    let mut v = vec![ZERO; n];
    for a in &mu.atoms {
        if a.log_mass == f64::NEG_INFINITY {
            continue;
        }
        let r = a.point.norm();
        if r >= 1.0 {
            return Err(Error::Domain(format!("atom {} outside the disk", a.point)));
        }
        let half = 0.5 * (a.log_mass + w.log_omega(r));
        let (lr, th) = (r.ln(), a.point.arg());
        for (k, x) in v.iter_mut().enumerate() {
            *x = if k == 0 {
                Complex64::new((half - norms[0]).exp(), 0.0)
            } else if r == 0.0 {
                ZERO
            } else {
                Complex64::from_polar((k as f64 * lr + half - norms[k]).exp(), k as f64 * th)
            };
        }
        for c in 0..n {
            if v[c] == ZERO {
                continue;
            }
            for rr in 0..=c {
                acc[(rr, c)] += v[c] * v[rr].conj();
            }
        }
    }
    for c in 0..n {
        for rr in 0..c {
            acc[(c, rr)] = acc[(rr, c)].conj();
        }
    }
    Ok(OperatorMatrix {
        image: acc.clone(),
        entries: acc,
        basis,
        truncation: n,
        tag: OpTag {
            kind: "toeplitz".into(),
            psi: String::new(),
            g: String::new(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSummary {
    pub singular_values: Vec<f64>,
    pub op_norm: f64,
    /// `(p, (sum s_k^p)^{1/p})`
    pub schatten: Vec<(f64, f64)>,
    /// `(m, ||T restricted to span{e_k : k >= m}||)`
    pub tail_trend: Vec<(usize, f64)>,
}

impl SpectralSummary {
    pub fn schatten_norm(&self, p: f64) -> f64 {
        schatten_of(&self.singular_values, p)
    }
}

fn schatten_of(s: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return s.first().copied().unwrap_or(0.0);
    }
    s.iter().map(|x| x.powf(p)).sum::<f64>().powf(p.recip())
}

pub fn singular_values(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let svd = m
        .clone()
        .try_svd(false, false, 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn spectral_summary(mat: &OperatorMatrix, p_list: &[Exponent]) -> Result<SpectralSummary> {
    let e = &mat.entries;
    let s = singular_values(e)?;
    let n = e.ncols();
    let tail_trend = [n / 4, n / 2, 3 * n / 4]
        .into_iter()
        .map(|m| {
            let sub = e.columns(m, n - m).into_owned();
            Ok((m, singular_values(&sub)?.first().copied().unwrap_or(0.0)))
        })
        .collect::<Result<_>>()?;
    Ok(SpectralSummary {
        op_norm: s.first().copied().unwrap_or(0.0),
        schatten: p_list.iter().map(|p| (p.value(), schatten_of(&s, p.value()))).collect(),
        tail_trend,
        singular_values: s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToeplitzIdentityReport {
    /// `||A^*A - R - B||_F / ||B||_F` where `R` is the rank-one `f(0) conj(h(0))` part.
    pub frobenius_rel_err: f64,
    /// Same without removing `R`.
    pub uncorrected_rel_err: f64,
    /// `||R||_F / ||B||_F`.
    pub rank_one_rel: f64,
    pub truncation: usize,
    pub image_degree: usize,
    pub atoms: usize,
}

/// Log-decay of `omega` below `omega(0)` at which the Toeplitz grid stops.
pub const TOEPLITZ_LOG_DECAY: f64 = 60.0;

/// Grid for [`toeplitz_identity_check`]: out to where `omega` has dropped by
/// `e^-TOEPLITZ_LOG_DECAY`, with at least 256 nodes per ring.
pub fn toeplitz_grid(w: &WeightSpec) -> Result<DiskQuadrature> {
    let lw0 = w.log_omega(0.0);
    let (mut lo, mut hi) = (0.0, w.r_max_guard());
    if lw0 - w.log_omega(hi) > TOEPLITZ_LOG_DECAY {
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if lw0 - w.log_omega(mid) > TOEPLITZ_LOG_DECAY {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let opts = GridOptions {
        min_angular: 256,
        ..GridOptions::default()
    };
    DiskQuadrature::build(w, hi, &opts)
}

/// Compares the Gram matrix of `C_g^psi` in the Littlewood-Paley basis with the Toeplitz
/// matrix of `m_{psi,2}` assembled on `grid`.
pub fn toeplitz_identity_check(
    psi: &Symbol,
    g: &Symbol,
    w: &WeightSpec,
    n: usize,
    grid: &DiskQuadrature,
    opts: &TruncationOptions,
) -> Result<ToeplitzIdentityReport> {
    let a = build_operator(OpKind::CGPsi, psi, g, w, n, Basis::LittlewoodPaley, opts)?;
    let image_degree = a.image.nrows() - 1;
    if g.is_zero() {
        return Ok(ToeplitzIdentityReport {
            frobenius_rel_err: 0.0,
            uncorrected_rel_err: 0.0,
            rank_one_rel: 0.0,
            truncation: n,
            image_degree,
            atoms: 0,
        });
    }
    let full = a.gram();
    let tail = a.image.rows(1, a.image.nrows() - 1);
    let corrected = tail.adjoint() * tail;
    // dmu = |g(psi)|^2 |psi'|^2 omega (1+phi')^{-2} dA pushed forward; the Toeplitz form
    // multiplies m = mu / omega by omega again, so mu enters unchanged.
    let mu = pullback_measure(w, psi, g, 2.0, grid)?;
    let m = DiscreteMeasure {
        atoms: mu
            .atoms
            .iter()
            .map(|x| crate::quadrature::Atom {
                point: x.point,
                log_mass: x.log_mass - w.log_omega(x.point.norm()),
            })
            .collect(),
        ..mu
    };
    let b = build_toeplitz(&m, w, n, Basis::LittlewoodPaley)?.entries;
    let nb = b.norm();
    if nb == 0.0 {
        return Err(Error::Numerical("Toeplitz side vanished for a nonzero symbol".into()));
    }
    Ok(ToeplitzIdentityReport {
        frobenius_rel_err: (&corrected - &b).norm() / nb,
        uncorrected_rel_err: (&full - &b).norm() / nb,
        rank_one_rel: (&full - &corrected).norm() / nb,
        truncation: n,
        image_degree,
        atoms: m.atoms.len(),
    })
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(h: &DMatrix<Complex64>) -> f64 {
    h.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w() -> WeightSpec {
        WeightSpec::exponential(1.0, 1.0).unwrap()
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn fundamental_theorem() {
        let m = build_operator(
            OpKind::CPsiG,
            &Symbol::identity(),
            &Symbol::constant(c(1.0)),
            &w(),
            12,
            Basis::Standard,
            &TruncationOptions::default(),
        )
        .unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j && i > 0 { 1.0 } else { 0.0 };
                assert!((m.entries[(i, j)] - c(want)).norm() < 1e-13, "{i} {j}");
            }
        }
    }

    #[test]
    fn weighted_shifts() {
        let w = w();
        let logc: Vec<f64> = (0..12).map(|n| log_moment(&w, n).unwrap()).collect();
        let one = Symbol::constant(c(1.0));
        let j = build_operator(OpKind::CGPsi, &Symbol::identity(), &one, &w, 10, Basis::Standard, &Default::default())
            .unwrap();
        let gv = build_operator(OpKind::GV, &Symbol::scale(c(0.5)), &one, &w, 10, Basis::Standard, &Default::default())
            .unwrap();
        for n in 0..9 {
            let shift = (0.5 * (logc[n + 1] - logc[n])).exp() / (n + 1) as f64;
            assert!((j.entries[(n + 1, n)].re / shift - 1.0).abs() < 1e-12);
            assert!((gv.entries[(n + 1, n)].re / (shift * 0.5f64.powi(n as i32)) - 1.0).abs() < 1e-12);
        }
        let s = spectral_summary(&j, &[Exponent::Finite(2.0)]).unwrap();
        let mut mags: Vec<f64> = (0..9).map(|n| j.entries[(n + 1, n)].norm()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in mags.iter().zip(&s.singular_values) {
            assert!((a - b).abs() < 1e-12 * mags[0]);
        }
    }

    #[test]
    fn zero_symbol_zero_matrix() {
        let m = build_operator(
            OpKind::GI,
            &Symbol::scale(c(0.5)),
            &Symbol::zero(),
            &w(),
            8,
            Basis::LittlewoodPaley,
            &Default::default(),
        )
        .unwrap();
        assert!(m.entries.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn diagonal_summary() {
        let mut e = DMatrix::zeros(2, 2);
        e[(0, 0)] = c(3.0);
        e[(1, 1)] = c(1.0);
        let mat = OperatorMatrix {
            image: e.clone(),
            entries: e,
            basis: Basis::Standard,
            truncation: 2,
            tag: OpTag {
                kind: "test".into(),
                psi: String::new(),
                g: String::new(),
            },
        };
        let s = spectral_summary(&mat, &[Exponent::Finite(1.0), Exponent::Finite(2.0)]).unwrap();
        assert!((s.op_norm - 3.0).abs() < 1e-14);
        assert!((s.schatten[0].1 - 4.0).abs() < 1e-13);
        assert!((s.schatten[1].1 - 10f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn toeplitz_point_mass_at_origin() {
        let mu = DiscreteMeasure::point_mass(c(0.0), 2.0).unwrap();
        let t = build_toeplitz(&mu, &w(), 5, Basis::Standard).unwrap().entries;
        assert!(t[(0, 0)].norm() > 0.0);
        assert!(t.iter().enumerate().skip(1).all(|(_, v)| *v == ZERO));
    }

    #[test]
    fn moebius_truncation_degree() {
        let p = Symbol::moebius(c(0.3)).unwrap();
        let t = truncate_symbol(&p, &TruncationOptions::default()).unwrap();
        assert!(t.len() <= 65);
    }
}
