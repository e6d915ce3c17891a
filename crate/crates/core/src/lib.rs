//! Numerical workbench for weighted composition, Volterra-type and Toeplitz operators on
//! Bergman spaces `A^p_omega` with rapidly decreasing radial weights `omega = e^{-2 phi}`.
//!
//! The pieces build on each other:
//! [`weights`] gives `phi`, `tau` and the class checks; [`kernel`] the reproducing kernel from
//! radial moments; [`quadrature`] polar grids and discrete measures; [`lattice`] the
//! `(delta, tau)`-covering; [`transforms`] the Berezin-type sums `M`, `N` and the
//! Littlewood-Paley functional; [`operators`] truncated matrices and their spectra;
//! [`criteria`] the boundedness, compactness and Schatten verdicts.
//!
//! Everything is carried in log scale, since `omega` spans hundreds of orders of magnitude
//! across the disk.
//!
//! ```
//! use bergman_workbench::criteria::{check_boundedness, CriteriaConfig, Verdict, Workspace};
//! use bergman_workbench::numeric::Exponent;
//! use bergman_workbench::symbols::Symbol;
//! use bergman_workbench::transforms::OpKind;
//! use bergman_workbench::weights::WeightSpec;
//! use num_complex::Complex64;
//!
//! let w = WeightSpec::exponential(1.0, 1.0)?;
//! let ws = Workspace::new(&w, &CriteriaConfig::default())?;
//! let psi = Symbol::scale(Complex64::new(0.5, 0.0));
//! let g = Symbol::real_polynomial(&[1.0, 1.0]);
//! let two = Exponent::Finite(2.0);
//! let rep = check_boundedness(OpKind::CPsiG, &psi, &g, two, two, &ws)?;
//! assert_eq!(rep.verdict, Verdict::Bounded);
//! # Ok::<(), bergman_workbench::Error>(())
//! ```

pub mod config;
pub mod criteria;
pub mod error;
pub mod kernel;
pub mod lattice;
pub mod numeric;
pub mod operators;
pub mod quadrature;
pub mod report;
pub mod symbols;
pub mod transforms;
pub mod weights;

pub use error::{Error, Result};
