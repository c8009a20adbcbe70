//! Named numerical checks of the model's bounds and identities.
//!
//! Each check produces a [`LemmaReport`]. Expectations over the disorder are
//! estimated either by tensor quadrature on systems of at most three sites or
//! by averaging over seeded realizations. Ensemble bounds are asserted with a
//! slack of three standard errors, quadrature results with an absolute
//! tolerance.

mod checks;
mod stats;
mod trends;

pub use checks::{
    check_block_bound, check_convexity_per_realization, check_fkg, check_fourth_deriv_bound,
    check_gg_exact_ibp, check_hermite, check_hn_identity, check_overlap_var_bound,
    check_rxy_sum, check_var_bound, QUADRATURE_TOL,
};
pub use stats::{jackknife, Accumulator, EnsembleStats};
pub use trends::{
    check_convexity_p, check_gg_residual_trend, check_hn_concentration, concentration_experiment,
    ConcentrationOutcome, ConcentrationRow, GgRow, TrendOutcome,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{
    disorder_average_many, gauss_hermite_grid, sample_disorder, trapezoid_grid, trapezoid_step_for,
    DisorderField, QuadratureGrid,
};
use crate::error::{Result, RfimError};
use crate::gibbs::{
    enumerate_gibbs, exact_summary, transfer_matrix_1d, GibbsSummary, ModelParams,
    DEFAULT_ENUMERATION_CAP,
};
use crate::lattice::LatticeSpec;
use crate::mcmc::{derive_seed, mcmc_summary, McmcSettings};
use crate::observables::{realization_observables, RealizationObservables};

/// How a disorder expectation was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Quadrature,
    Mc,
    Exact,
}

/// Comparison a report asserts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// `lhs <= rhs + slack`.
    Upper,
    /// `lhs >= rhs - slack`.
    Lower,
    /// `|lhs - rhs| <= slack`.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    /// Failed, but the failure is not conclusive (see the report note).
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub check: String,
    pub d: usize,
    pub n: usize,
    pub beta: f64,
    pub h: f64,
    pub ensemble: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub se: f64,
    pub pass: bool,
    pub mode: Mode,
    pub seed: u64,
    pub kind: Kind,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl LemmaReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        check: &str,
        cfg: &CheckConfig,
        mode: Mode,
        kind: Kind,
        lhs: f64,
        rhs: f64,
        slack: f64,
        se: f64,
    ) -> Self {
        let pass = match kind {
            Kind::Upper => lhs <= rhs + slack,
            Kind::Lower => lhs >= rhs - slack,
            Kind::Identity => (lhs - rhs).abs() <= slack,
        };
        LemmaReport {
            check: check.to_string(),
            d: cfg.d,
            n: cfg.n,
            beta: cfg.params.beta,
            h: cfg.params.h,
            ensemble: if mode == Mode::Quadrature { 0 } else { cfg.ensemble },
            lhs,
            rhs,
            slack,
            se,
            pass,
            mode,
            seed: cfg.seed,
            kind,
            status: if pass { Status::Pass } else { Status::Fail },
            n_list: None,
            note: None,
        }
    }

    pub(crate) fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub(crate) fn with_n_list(mut self, n_list: &[usize]) -> Self {
        self.n_list = Some(n_list.to_vec());
        self
    }

    /// Downgrades a failure to a warning.
    pub(crate) fn warn_on_fail(mut self) -> Self {
        if !self.pass {
            self.status = Status::Warn;
        }
        self
    }
}

/// Gibbs engine used per realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Transfer recursion for chains, enumeration up to the cap, else MCMC.
    #[default]
    Auto,
    Exact,
    Transfer,
    Mcmc,
}

impl Engine {
    pub fn resolve(self, lattice: &LatticeSpec) -> Result<Engine> {
        match self {
            Engine::Auto if lattice.dim() == 1 => Ok(Engine::Transfer),
            Engine::Auto if lattice.num_sites() <= DEFAULT_ENUMERATION_CAP => Ok(Engine::Exact),
            Engine::Auto => Ok(Engine::Mcmc),
            Engine::Transfer if lattice.dim() != 1 => {
                Err(RfimError::invalid("transfer engine requires d = 1"))
            }
            e => Ok(e),
        }
    }
}

/// Inputs shared by all checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub d: usize,
    pub n: usize,
    pub params: ModelParams,
    /// `Quadrature` or `Mc`.
    pub mode: Mode,
    pub ensemble: usize,
    pub seed: u64,
    pub engine: Engine,
    pub mcmc: McmcSettings,
    pub quadrature: Quadrature,
}

/// One-dimensional rule behind quadrature-mode estimates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    /// Trapezoid rule with spacing [`trapezoid_step_for`]`(h)`.
    #[default]
    Auto,
    GaussHermite(usize),
    Trapezoid(f64),
}

impl CheckConfig {
    pub fn ensemble(d: usize, n: usize, params: ModelParams, ensemble: usize, seed: u64) -> Self {
        CheckConfig {
            d,
            n,
            params,
            mode: Mode::Mc,
            ensemble,
            seed,
            engine: Engine::Auto,
            mcmc: McmcSettings::new(20_000, 2_000, seed),
            quadrature: Quadrature::Auto,
        }
    }

    pub fn quadrature(d: usize, n: usize, params: ModelParams) -> Self {
        CheckConfig {
            mode: Mode::Quadrature,
            ..Self::ensemble(d, n, params, 0, 0)
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        CheckConfig { n, ..self.clone() }
    }

    pub fn with_params(&self, params: ModelParams) -> Self {
        CheckConfig {
            params,
            ..self.clone()
        }
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.d, self.n)
    }

    pub(crate) fn grid(&self, lattice: &LatticeSpec) -> Result<QuadratureGrid> {
        match self.quadrature {
            Quadrature::Auto => trapezoid_grid(lattice, trapezoid_step_for(self.params.h)),
            Quadrature::Trapezoid(step) => trapezoid_grid(lattice, step),
            Quadrature::GaussHermite(order) => gauss_hermite_grid(lattice, order),
        }
    }

    pub(crate) fn engine(&self, lattice: &LatticeSpec) -> Result<Engine> {
        self.engine.resolve(lattice)
    }

    pub(crate) fn require_exact(&self, lattice: &LatticeSpec, check: &str) -> Result<()> {
        if self.engine(lattice)? == Engine::Mcmc {
            return Err(RfimError::invalid(format!("{check} requires an exact engine")));
        }
        Ok(())
    }

    pub(crate) fn require_ensemble(&self, check: &str) -> Result<()> {
        if self.mode != Mode::Mc || self.ensemble < 2 {
            return Err(RfimError::invalid(format!(
                "{check} needs an ensemble of at least two realizations"
            )));
        }
        Ok(())
    }

    /// Seed for the Monte Carlo chains of one realization.
    pub fn mcmc_seed(&self, realization_id: u64) -> u64 {
        derive_seed(&[
            self.mcmc.seed,
            self.d as u64,
            self.n as u64,
            self.params.beta.to_bits(),
            self.params.h.to_bits(),
            realization_id,
        ])
    }
}

/// Gibbs summary of one realization with the configured engine. MCMC
/// summaries carry NaN free energies.
pub fn realization_summary(
    cfg: &CheckConfig,
    lattice: &LatticeSpec,
    disorder: &DisorderField,
) -> Result<GibbsSummary> {
    Ok(realization_with_overlaps(cfg, lattice, disorder)?.0)
}

fn realization_with_overlaps(
    cfg: &CheckConfig,
    lattice: &LatticeSpec,
    disorder: &DisorderField,
) -> Result<(GibbsSummary, Option<(f64, f64)>)> {
    match cfg.engine(lattice)? {
        Engine::Transfer => Ok((transfer_matrix_1d(lattice, disorder, cfg.params)?, None)),
        Engine::Exact => Ok((enumerate_gibbs(lattice, disorder, cfg.params)?, None)),
        Engine::Auto => Ok((exact_summary(lattice, disorder, cfg.params)?, None)),
        Engine::Mcmc => {
            let mut settings = cfg.mcmc.clone();
            settings.seed = cfg.mcmc_seed(disorder.realization_id().unwrap_or(0));
            let (summary, run) = mcmc_summary(lattice, disorder, cfg.params, &settings)?;
            let est = run.overlap_estimates()?;
            Ok((summary, Some((est.r12.mean, est.r12_sq.mean))))
        }
    }
}

/// All per-realization observables. With MCMC, `r12` and `r12_sq` come from
/// the two-replica overlap series and `r12_r13` from the estimated `m`, `C`.
pub fn observe(
    cfg: &CheckConfig,
    lattice: &LatticeSpec,
    disorder: &DisorderField,
) -> Result<RealizationObservables> {
    let (summary, overlaps) = realization_with_overlaps(cfg, lattice, disorder)?;
    let mut obs = realization_observables(&summary, disorder)?;
    if let Some((r12, r12_sq)) = overlaps {
        obs.overlap.r12 = r12;
        obs.overlap.r12_sq = r12_sq;
        obs.overlap.r23_r14 = r12 * r12;
        obs.overlap.gibbs_var = r12_sq - r12 * r12;
    }
    Ok(obs)
}

/// Disorder expectations of a vector-valued functional.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Estimates {
    Quadrature(Vec<f64>),
    Ensemble(Vec<Vec<f64>>),
}

impl Estimates {
    /// A statistic of the means, with its jackknife error (zero for quadrature).
    pub(crate) fn eval(&self, stat: impl Fn(&[f64]) -> f64) -> (f64, f64) {
        match self {
            Estimates::Quadrature(means) => (stat(means), 0.0),
            Estimates::Ensemble(rows) => jackknife(rows, stat),
        }
    }

    /// Slack for an estimate with error `se`: the quadrature tolerance, or
    /// three standard errors.
    pub(crate) fn slack(&self, se: f64) -> f64 {
        match self {
            Estimates::Quadrature(_) => QUADRATURE_TOL,
            Estimates::Ensemble(_) => 3.0 * se,
        }
    }

    pub(crate) fn mode(&self) -> Mode {
        match self {
            Estimates::Quadrature(_) => Mode::Quadrature,
            Estimates::Ensemble(_) => Mode::Mc,
        }
    }
}

/// Seeded realizations `0..cfg.ensemble`, in parallel, in order.
pub(crate) fn over_realizations<T, F>(cfg: &CheckConfig, lattice: &LatticeSpec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&DisorderField) -> Result<T> + Sync,
{
    (0..cfg.ensemble as u64)
        .into_par_iter()
        .map(|rid| f(&sample_disorder(lattice, cfg.seed, rid)))
        .collect()
}

/// Disorder expectation of `functional` under the configured mode.
pub(crate) fn estimate_over_disorder<F>(
    cfg: &CheckConfig,
    lattice: &LatticeSpec,
    functional: F,
) -> Result<Estimates>
where
    F: Fn(&DisorderField) -> Result<Vec<f64>> + Sync,
{
    match cfg.mode {
        Mode::Quadrature => {
            let grid = cfg.grid(lattice)?;
            Ok(Estimates::Quadrature(disorder_average_many(&grid, functional)?))
        }
        Mode::Mc | Mode::Exact => {
            cfg.require_ensemble("an ensemble estimate")?;
            Ok(Estimates::Ensemble(over_realizations(cfg, lattice, functional)?))
        }
    }
}
