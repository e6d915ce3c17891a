//! Run configuration shared by the command line front-end and batch scripts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::criteria::CriteriaConfig;
use crate::error::{Error, Result};
use crate::numeric::Exponent;
use crate::symbols::Symbol;
use crate::transforms::OpKind;
use crate::weights::WeightSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub weight: String,
    pub psi: String,
    pub g: String,
    pub p: Exponent,
    pub q: Exponent,
    pub op: OpKind,
    /// Inner quadrature density.
    pub density: f64,
    #[serde(rename = "N_ladder")]
    pub ladder: Vec<usize>,
    /// Matrix truncation for single-size runs.
    #[serde(rename = "N")]
    pub n: usize,
    /// Lattice and averaging radius in units of `m_tau`.
    pub delta: f64,
    pub r_cut: f64,
    pub r_out: f64,
    /// Sample count for probes and sweeps.
    pub points: usize,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = CriteriaConfig::default();
        Self {
            weight: "exp:b=1,alpha=1".into(),
            psi: "poly:0,1".into(),
            g: "poly:1".into(),
            p: Exponent::Finite(2.0),
            q: Exponent::Finite(2.0),
            op: OpKind::CGPsi,
            density: c.density,
            ladder: c.ladder,
            n: 30,
            delta: 0.5,
            r_cut: 0.9,
            r_out: c.r_out,
            points: 200,
            output: None,
            csv: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            pos: e.column(),
            msg: format!("line {}: {e}", e.line()),
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn weight_spec(&self) -> Result<WeightSpec> {
        self.weight.parse()
    }

    pub fn psi_symbol(&self) -> Result<Symbol> {
        self.psi.parse()
    }

    pub fn g_symbol(&self) -> Result<Symbol> {
        self.g.parse()
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.weight_spec()?;
        self.psi_symbol()?;
        self.g_symbol()?;
        let guard = w.r_max_guard();
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::Argument(msg)) };
        check(
            self.density > 0.0 && self.density <= 64.0,
            format!("density {} outside (0, 64]", self.density),
        )?;
        check(self.n >= 1 && self.n <= 8192, format!("N {} outside [1, 8192]", self.n))?;
        check(
            !self.ladder.is_empty() && self.ladder.windows(2).all(|w| w[0] < w[1]) && self.ladder[0] > 0,
            "N ladder must be positive and increasing".into(),
        )?;
        check(
            self.delta > 0.0 && self.delta < 1.0,
            format!("delta {} outside (0, 1) (units of m_tau)", self.delta),
        )?;
        check(
            self.r_cut > 0.0 && self.r_cut <= guard,
            format!("r_cut {} outside (0, {guard}]", self.r_cut),
        )?;
        check(
            self.r_out > 0.0 && self.r_out < guard,
            format!("r_out {} outside (0, {guard})", self.r_out),
        )?;
        check(self.points >= 2, format!("points {} below 2", self.points))
    }

    /// Criteria settings with this run's density, ladder and outer radius.
    pub fn criteria(&self) -> CriteriaConfig {
        CriteriaConfig {
            density: self.density,
            ladder: self.ladder.clone(),
            r_out: self.r_out,
            ..CriteriaConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let c = RunConfig {
            q: Exponent::Infinity,
            output: Some("out.json".into()),
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::from_json(r#"{"p": 4, "q": 2, "op": "c_psi_g"}"#).unwrap();
        assert_eq!(c.p, Exponent::Finite(4.0));
        assert_eq!(c.op, OpKind::CPsiG);
        assert_eq!(c.n, 30);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_json(r#"{"density": -1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"weight": "exp:b=-1,alpha=1"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
