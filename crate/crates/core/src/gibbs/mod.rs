//! Gibbs expectations for a fixed disorder realization.
//!
//! Two exact engines are provided: full enumeration for any dimension on small
//! boxes, and a log-domain transfer recursion for chains. Both produce a
//! [`GibbsSummary`]; the MCMC estimator in [`crate::mcmc`] produces the same type
//! with error bars attached.

mod derivatives;
mod enumerate;
mod transfer;

pub use derivatives::{
    fd_derivative_check, fd_h_derivative, fourth_cumulant, fourth_derivative,
    fourth_derivative_stencil, h_second_difference, FdReport, FdSteps, FourthDerivative,
};
pub use enumerate::{
    enumerate_gibbs, enumerate_gibbs_with_cap, gibbs_moment, ExactGibbs, DEFAULT_ENUMERATION_CAP,
};
pub(crate) use enumerate::log_partition_with_bonds;
pub use transfer::{transfer_matrix_1d, transfer_matrix_1d_with_cap, DEFAULT_TRANSFER_CAP};

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{Result, RfimError};
use crate::lattice::LatticeSpec;

/// Inverse temperature and field strength.
///
/// `beta = 0` is accepted as the product-measure limit used by closed-form
/// oracles. Experiment configs require both to be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub h: f64,
}

impl ModelParams {
    pub fn new(beta: f64, h: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(RfimError::invalid(format!("beta must be >= 0 (got {beta})")));
        }
        if !h.is_finite() || h <= 0.0 {
            return Err(RfimError::invalid(format!("h must be > 0 (got {h})")));
        }
        Ok(ModelParams { beta, h })
    }

    pub fn with_h(self, h: f64) -> Result<Self> {
        Self::new(self.beta, h)
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(beta, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummarySource {
    ExactEnumeration,
    TransferMatrix,
    Mcmc,
}

impl SummarySource {
    pub fn is_exact(self) -> bool {
        !matches!(self, SummarySource::Mcmc)
    }
}

/// Two-point function `C_{x,y} = <s_x s_y>`.
///
/// Chains store only the per-bond slopes of the conditional expectation
/// `E[s_{k+1} | s_k]`; for `x < y` the connected part is
/// `(1 - m_x^2) * prod_{k=x}^{y-1} slope_k`, which is non-negative whenever
/// every slope is. Rows are materialized on demand so long chains never need
/// an `n x n` buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum Correlation {
    Dense { n: usize, values: Vec<f64> },
    Chain { magnetization: Vec<f64>, slopes: Vec<f64> },
}

impl Correlation {
    pub fn len(&self) -> usize {
        match self {
            Correlation::Dense { n, .. } => *n,
            Correlation::Chain { magnetization, .. } => magnetization.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Connected correlation row `r_{x,.} = C_{x,.} - m_x m_.`.
    pub fn connected_row(&self, m: &[f64], x: usize, out: &mut [f64]) {
        match self {
            Correlation::Dense { n, values } => {
                let row = &values[x * n..(x + 1) * n];
                for y in 0..*n {
                    out[y] = row[y] - m[x] * m[y];
                }
            }
            Correlation::Chain {
                magnetization,
                slopes,
            } => {
                let var = |k: usize| 1.0 - magnetization[k] * magnetization[k];
                out[x] = var(x);
                let mut prod = 1.0;
                for y in (0..x).rev() {
                    prod *= slopes[y];
                    out[y] = var(y) * prod;
                }
                prod = 1.0;
                for y in x + 1..magnetization.len() {
                    prod *= slopes[y - 1];
                    out[y] = var(x) * prod;
                }
            }
        }
    }

    /// Full row `C_{x,.}`.
    pub fn row(&self, m: &[f64], x: usize, out: &mut [f64]) {
        match self {
            Correlation::Dense { n, values } => out.copy_from_slice(&values[x * n..(x + 1) * n]),
            Correlation::Chain { .. } => {
                self.connected_row(m, x, out);
                for (y, v) in out.iter_mut().enumerate() {
                    *v += m[x] * m[y];
                }
                out[x] = 1.0;
            }
        }
    }

    pub fn get(&self, m: &[f64], x: usize, y: usize) -> f64 {
        match self {
            Correlation::Dense { n, values } => values[x * n + y],
            Correlation::Chain { .. } => {
                let mut row = vec![0.0; self.len()];
                self.row(m, x, &mut row);
                row[y]
            }
        }
    }

    /// Dense row-major copy.
    pub fn to_dense(&self, m: &[f64]) -> Vec<f64> {
        match self {
            Correlation::Dense { values, .. } => values.clone(),
            Correlation::Chain { .. } => {
                let n = self.len();
                let mut out = vec![0.0; n * n];
                for x in 0..n {
                    self.row(m, x, &mut out[x * n..(x + 1) * n]);
                }
                out
            }
        }
    }
}

/// Standard errors attached to MCMC-derived summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryErrors {
    pub magnetization: Vec<f64>,
    /// Dense row-major standard errors of `C`.
    pub correlation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSummary {
    /// `F = log Z`; NaN when the source cannot estimate it (MCMC).
    pub log_partition: f64,
    pub psi: f64,
    pub magnetization: Vec<f64>,
    pub correlation: Correlation,
    /// `<H_n> = (1/|V|) sum_x g_x m_x`.
    pub h_n: f64,
    pub source: SummarySource,
    pub errors: Option<SummaryErrors>,
}

impl GibbsSummary {
    pub fn num_sites(&self) -> usize {
        self.magnetization.len()
    }

    pub fn correlation_at(&self, x: usize, y: usize) -> f64 {
        self.correlation.get(&self.magnetization, x, y)
    }

    pub fn connected_row(&self, x: usize, out: &mut [f64]) {
        self.correlation.connected_row(&self.magnetization, x, out)
    }

    pub fn correlation_row(&self, x: usize, out: &mut [f64]) {
        self.correlation.row(&self.magnetization, x, out)
    }

    /// Smallest connected correlation over all ordered pairs.
    pub fn min_connected(&self) -> f64 {
        let n = self.num_sites();
        let mut row = vec![0.0; n];
        let mut min = f64::INFINITY;
        for x in 0..n {
            self.connected_row(x, &mut row);
            min = row.iter().copied().fold(min, f64::min);
        }
        min
    }

    /// JSON-ready record with the stable external field names.
    pub fn to_record(
        &self,
        lattice: &LatticeSpec,
        disorder: &DisorderField,
        params: ModelParams,
    ) -> SummaryRecord {
        SummaryRecord {
            d: lattice.dim(),
            n: lattice.side(),
            beta: params.beta,
            h: params.h,
            seed: disorder.seed(),
            realization_id: disorder.realization_id(),
            f: self.log_partition,
            psi: self.psi,
            m: self.magnetization.clone(),
            c: self.correlation.to_dense(&self.magnetization),
            source: self.source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub d: usize,
    pub n: usize,
    pub beta: f64,
    pub h: f64,
    pub seed: Option<u64>,
    pub realization_id: Option<u64>,
    #[serde(rename = "F")]
    pub f: f64,
    pub psi: f64,
    pub m: Vec<f64>,
    /// Dense row-major.
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub source: SummarySource,
}

/// Picks the cheapest exact engine: transfer recursion for chains,
/// enumeration otherwise.
pub fn exact_summary(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
) -> Result<GibbsSummary> {
    if lattice.dim() == 1 {
        transfer_matrix_1d(lattice, disorder, params)
    } else {
        enumerate_gibbs(lattice, disorder, params)
    }
}

/// `F = log Z` from the cheapest exact engine.
pub fn log_partition(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
) -> Result<f64> {
    if lattice.dim() == 1 {
        transfer::chain_log_partition(lattice, disorder, params)
    } else {
        enumerate::log_partition_with_bonds(lattice.num_sites(), lattice.bonds(), disorder, params)
    }
}

/// `log(2 cosh x)` without overflow.
pub(crate) fn ln_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.0, 0.0).is_err());
        assert!(ModelParams::new(-1.0, 1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0).is_err());
        assert!(ModelParams::new(0.0, 1.0).is_ok());
        let err = ModelParams::new(1.0, 0.0).unwrap_err().to_string();
        assert!(err.contains("h must be > 0"));
    }

    #[test]
    fn ln_2cosh_is_stable() {
        assert!((ln_2cosh(0.7) - (2.0 * 0.7f64.cosh()).ln()).abs() < 1e-15);
        assert!((ln_2cosh(1000.0) - 1000.0).abs() < 1e-12);
        assert!((ln_2cosh(-1000.0) - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn summary_record_field_names() {
        let l = LatticeSpec::new(1, 2).unwrap();
        let g = DisorderField::explicit(vec![0.1, -0.3]);
        let p = ModelParams::new(0.5, 1.0).unwrap();
        let s = enumerate_gibbs(&l, &g, p).unwrap();
        let v = serde_json::to_value(s.to_record(&l, &g, p)).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<_> = obj.keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["C", "F", "beta", "d", "h", "m", "n", "psi", "realization_id", "seed", "source"]
        );
        assert_eq!(obj["source"], "exact-enumeration");
        assert_eq!(obj["C"].as_array().unwrap().len(), 4);
    }
}
