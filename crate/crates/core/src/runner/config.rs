//! Experiment configuration: a flat TOML table with a fixed set of keys.
//!
//! ```toml
//! d = 1
//! n_list = [64, 256, 1024]
//! beta_list = [0.5]
//! h_list = [0.5]
//! ensemble_size = 200
//! engine = "auto"            # auto | exact | transfer | mcmc
//! mcmc_sweeps = 20000
//! mcmc_burn_in = 2000
//! mcmc_ladder = [0.3, 0.4, 0.5]
//! seed = 7
//! checks = ["fkg", "gg_trend", "concentration"]
//! quadrature = false
//! block_m = 2
//! fd_delta = 0.001
//! output = "results"
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, RfimError};
use crate::verify::Engine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Fkg,
    VarBound,
    OverlapVarBound,
    RxySum,
    HnIdentity,
    GgIbp,
    GgTrend,
    ConvexityP,
    ConvexityRealization,
    BlockBound,
    Hermite,
    FourthDeriv,
    HnConcentration,
    Concentration,
}

impl CheckName {
    pub const ALL: [CheckName; 14] = [
        CheckName::Fkg,
        CheckName::VarBound,
        CheckName::OverlapVarBound,
        CheckName::RxySum,
        CheckName::HnIdentity,
        CheckName::GgIbp,
        CheckName::GgTrend,
        CheckName::ConvexityP,
        CheckName::ConvexityRealization,
        CheckName::BlockBound,
        CheckName::Hermite,
        CheckName::FourthDeriv,
        CheckName::HnConcentration,
        CheckName::Concentration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Fkg => "fkg",
            CheckName::VarBound => "var_bound",
            CheckName::OverlapVarBound => "overlap_var_bound",
            CheckName::RxySum => "rxy_sum",
            CheckName::HnIdentity => "hn_identity",
            CheckName::GgIbp => "gg_ibp",
            CheckName::GgTrend => "gg_trend",
            CheckName::ConvexityP => "convexity_p",
            CheckName::ConvexityRealization => "convexity_realization",
            CheckName::BlockBound => "block_bound",
            CheckName::Hermite => "hermite",
            CheckName::FourthDeriv => "fourth_deriv",
            CheckName::HnConcentration => "hn_concentration",
            CheckName::Concentration => "concentration",
        }
    }

    /// Checks that run once over the whole `n_list`.
    pub fn spans_sizes(self) -> bool {
        matches!(
            self,
            CheckName::GgTrend | CheckName::HnConcentration | CheckName::Concentration
        )
    }

    /// Checks that accept a quadrature estimate of the disorder average.
    pub fn supports_quadrature(self) -> bool {
        matches!(
            self,
            CheckName::VarBound
                | CheckName::OverlapVarBound
                | CheckName::RxySum
                | CheckName::HnIdentity
                | CheckName::GgIbp
                | CheckName::FourthDeriv
                | CheckName::ConvexityP
        )
    }
}

fn default_ensemble() -> usize {
    200
}
fn default_sweeps() -> usize {
    20_000
}
fn default_burn_in() -> usize {
    2_000
}
fn default_block_m() -> usize {
    2
}
fn default_fd_delta() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n_list: Vec<usize>,
    pub beta_list: Vec<f64>,
    pub h_list: Vec<f64>,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default = "default_sweeps")]
    pub mcmc_sweeps: usize,
    #[serde(default = "default_burn_in")]
    pub mcmc_burn_in: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcmc_ladder: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checks: Vec<CheckName>,
    /// Use quadrature instead of sampled realizations where a check allows it.
    #[serde(default)]
    pub quadrature: bool,
    #[serde(default = "default_block_m")]
    pub block_m: usize,
    /// `h` step of the per-realization convexity check.
    #[serde(default = "default_fd_delta")]
    pub fd_delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Name of the offending key in a TOML deserialization error.
fn error_key(source: &str, err: &toml::de::Error) -> String {
    let message = err.message();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return rest[..end].to_string();
        }
    }
    if let Some(rest) = message.strip_prefix("missing field `") {
        if let Some(end) = rest.find('`') {
            return rest[..end].to_string();
        }
    }
    if let Some(span) = err.span() {
        let line_start = source[..span.start].rfind('\n').map_or(0, |i| i + 1);
        let line = source[line_start..].lines().next().unwrap_or("");
        if let Some((key, _)) = line.split_once('=') {
            return key.trim().to_string();
        }
    }
    "<config>".to_string()
}

impl ExperimentConfig {
    pub fn from_toml(source: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(source).map_err(|e| RfimError::Config {
            key: error_key(source, &e),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| Err(RfimError::config(key, message));
        if self.d == 0 {
            return bad("d", "d must be >= 1");
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return bad("n_list", "n_list must hold sizes >= 1");
        }
        if self.beta_list.is_empty() {
            return bad("beta_list", "beta_list is empty");
        }
        if self.beta_list.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return bad("beta_list", "beta must be > 0");
        }
        if self.h_list.is_empty() {
            return bad("h_list", "h_list is empty");
        }
        if self.h_list.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return bad("h_list", "h must be > 0");
        }
        if self.ensemble_size < 2 {
            return bad("ensemble_size", "ensemble_size must be >= 2");
        }
        if self.mcmc_sweeps <= self.mcmc_burn_in {
            return bad("mcmc_sweeps", "mcmc_sweeps must exceed mcmc_burn_in");
        }
        if let Some(ladder) = &self.mcmc_ladder {
            if ladder.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                return bad("mcmc_ladder", "ladder betas must be >= 0");
            }
            if let Some(b) = self
                .beta_list
                .iter()
                .find(|b| !ladder.iter().any(|l| (l - *b).abs() <= 1e-12 * b.max(1.0)))
            {
                return bad("mcmc_ladder", &format!("ladder does not contain beta = {b}"));
            }
        }
        if self.block_m == 0 {
            return bad("block_m", "block_m must be >= 1");
        }
        let h_min = self.h_list.iter().copied().fold(f64::INFINITY, f64::min);
        if !(self.fd_delta > 0.0 && self.fd_delta < h_min) {
            return bad("fd_delta", "fd_delta must satisfy 0 < fd_delta < min(h_list)");
        }
        let mut sizes = self.n_list.clone();
        sizes.sort_unstable();
        sizes.dedup();
        for check in &self.checks {
            if check.spans_sizes() && (sizes.len() < 2 || sizes != self.n_list) {
                return bad(
                    "n_list",
                    &format!("{} needs at least two increasing sizes", check.as_str()),
                );
            }
            if *check == CheckName::ConvexityP && self.h_list.len() < 3 {
                return bad("h_list", "convexity_p needs at least three h values");
            }
        }
        Ok(())
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON form,
    /// excluding the output location.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..6])
    }
}
