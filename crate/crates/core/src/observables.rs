//! Multi-replica overlap moments reduced to one-replica marginals.
//!
//! Replicas are independent draws from the same Gibbs measure, so any product
//! of overlaps factorizes over replicas. With `m_x = <s_x>` and
//! `C_{x,y} = <s_x s_y>`:
//!
//! - `<R12>       = (1/|V|)   sum_x m_x^2`
//! - `<R12^2>     = (1/|V|^2) sum_{x,y} C_{x,y}^2`
//! - `<R12 R13>   = (1/|V|^2) sum_{x,y} C_{x,y} m_x m_y`
//! - `<R23 R14>   = <R12>^2`
//! - `<H(s1) R12> = (1/|V|^2) sum_{x,y} g_x C_{x,y} m_y`

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{Result, RfimError};
use crate::gibbs::GibbsSummary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapMoments {
    pub r12: f64,
    pub r12_sq: f64,
    pub r12_r13: f64,
    pub r23_r14: f64,
    /// `<R12^2> - <R12>^2`.
    pub gibbs_var: f64,
}

/// Every per-realization scalar used by the ensemble checks, from one
/// `O(|V|^2)` pass over the correlation rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizationObservables {
    pub log_partition: f64,
    pub psi: f64,
    pub overlap: OverlapMoments,
    /// `<H_n>`.
    pub hn: f64,
    /// `<H_n^2> - <H_n>^2`.
    pub hn_var: f64,
    /// `<H_n(s1) R12>`.
    pub hn_r12: f64,
    /// `sum_{x,y} r_{x,y}^2`, diagonal included.
    pub sum_r_sq: f64,
    /// `min_{x,y} r_{x,y}`.
    pub min_r: f64,
}

fn check_summary(summary: &GibbsSummary, disorder: Option<&DisorderField>) -> Result<usize> {
    let n = summary.num_sites();
    if n == 0 || summary.correlation.len() != n {
        return Err(RfimError::invalid(
            "summary lacks a full correlation matrix for its magnetizations",
        ));
    }
    if let Some(g) = disorder {
        g.check_len(n)?;
    }
    Ok(n)
}

pub fn realization_observables(
    summary: &GibbsSummary,
    disorder: &DisorderField,
) -> Result<RealizationObservables> {
    let n = check_summary(summary, Some(disorder))?;
    let m = &summary.magnetization;
    let g = &disorder.values;
    let mut r = vec![0.0; n];
    let (mut c_sq, mut c_mm, mut gibbs_var) = (0.0, 0.0, 0.0);
    let (mut ggr, mut gcm, mut r_sq) = (0.0, 0.0, 0.0);
    let mut min_r = f64::INFINITY;
    for x in 0..n {
        summary.connected_row(x, &mut r);
        let (mut row_c_sq, mut row_c_m, mut row_var, mut row_gr, mut row_cm) =
            (0.0, 0.0, 0.0, 0.0, 0.0);
        for y in 0..n {
            let mm = m[x] * m[y];
            let c = r[y] + mm;
            row_c_sq += c * c;
            row_c_m += c * m[y];
            row_var += r[y] * (r[y] + 2.0 * mm);
            row_gr += g[y] * r[y];
            row_cm += c * m[y];
            r_sq += r[y] * r[y];
            min_r = min_r.min(r[y]);
        }
        c_sq += row_c_sq;
        c_mm += m[x] * row_c_m;
        gibbs_var += row_var;
        ggr += g[x] * row_gr;
        gcm += g[x] * row_cm;
    }
    let nf = n as f64;
    let n2 = nf * nf;
    let r12 = m.iter().map(|v| v * v).sum::<f64>() / nf;
    Ok(RealizationObservables {
        log_partition: summary.log_partition,
        psi: summary.psi,
        overlap: OverlapMoments {
            r12,
            r12_sq: c_sq / n2,
            r12_r13: c_mm / n2,
            r23_r14: r12 * r12,
            gibbs_var: gibbs_var / n2,
        },
        hn: hn_value(summary, disorder)?,
        hn_var: ggr / n2,
        hn_r12: gcm / n2,
        sum_r_sq: r_sq,
        min_r,
    })
}

pub fn overlap_moments(summary: &GibbsSummary) -> Result<OverlapMoments> {
    check_summary(summary, None)?;
    let zeros = DisorderField::zeros(summary.num_sites());
    Ok(realization_observables(summary, &zeros)?.overlap)
}

/// `<H_n> = (1/|V|) sum_x g_x m_x`.
pub fn hn_value(summary: &GibbsSummary, disorder: &DisorderField) -> Result<f64> {
    disorder.check_len(summary.num_sites())?;
    Ok(disorder
        .values
        .iter()
        .zip(&summary.magnetization)
        .map(|(g, m)| g * m)
        .sum::<f64>()
        / summary.num_sites() as f64)
}

/// `<H_n^2> - <H_n>^2 = (1/|V|^2) sum_{x,y} g_x g_y r_{x,y}`.
pub fn hn_gibbs_variance(summary: &GibbsSummary, disorder: &DisorderField) -> Result<f64> {
    Ok(realization_observables(summary, disorder)?.hn_var)
}

/// The two overlap functions `f` used with the Ghirlanda–Guerra relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverlapFn {
    /// `f = R12` with `k = 2` replicas.
    R12,
    /// `f = R23` with `k = 3` replicas.
    R23,
}

impl OverlapFn {
    pub fn replicas(self) -> usize {
        match self {
            OverlapFn::R12 => 2,
            OverlapFn::R23 => 3,
        }
    }

    pub fn for_k(k: usize, name: &str) -> Result<Self> {
        match (k, name) {
            (2, "R12") => Ok(OverlapFn::R12),
            (3, "R23") => Ok(OverlapFn::R23),
            _ => Err(RfimError::invalid(format!(
                "unsupported overlap function {name} with k = {k}; use R12 with k = 2 or R23 with k = 3"
            ))),
        }
    }
}

/// Per-realization Gibbs terms of the integration-by-parts relation
/// `E<H(s1) f> = h sum_{i=1}^k E<f R_{1,i}> - h k E<f R_{1,k+1}>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgTerms {
    pub f: OverlapFn,
    pub k: usize,
    /// `<H_n(s1) f>`.
    pub hn_f: f64,
    /// `<f>`.
    pub f_mean: f64,
    /// `<f R_{1,i}>` for `i = 1..=k` (`R_{1,1} = 1`).
    pub f_r1i: Vec<f64>,
    /// `<f R_{1,k+1}>`.
    pub f_r1_next: f64,
    /// `<H_n>` and `<R12>`, for the covariance form of the relation.
    pub hn: f64,
    pub r12: f64,
}

impl GgTerms {
    /// Flattened as `[hn_f, f_mean, f_r1i.., f_r1_next, hn, r12]` for disorder averaging.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.hn_f, self.f_mean];
        v.extend(&self.f_r1i);
        v.extend([self.f_r1_next, self.hn, self.r12]);
        v
    }
}

pub fn gg_covariance_terms_from(obs: &RealizationObservables, f: OverlapFn) -> GgTerms {
    let o = &obs.overlap;
    match f {
        OverlapFn::R12 => GgTerms {
            f,
            k: 2,
            hn_f: obs.hn_r12,
            f_mean: o.r12,
            f_r1i: vec![o.r12, o.r12_sq],
            f_r1_next: o.r12_r13,
            hn: obs.hn,
            r12: o.r12,
        },
        // R23 does not involve replica 1, so <H(s1) R23> = <H><R12>.
        OverlapFn::R23 => GgTerms {
            f,
            k: 3,
            hn_f: obs.hn * o.r12,
            f_mean: o.r12,
            f_r1i: vec![o.r12, o.r12_r13, o.r12_r13],
            f_r1_next: o.r23_r14,
            hn: obs.hn,
            r12: o.r12,
        },
    }
}

pub fn gg_covariance_terms(
    summary: &GibbsSummary,
    disorder: &DisorderField,
    k: usize,
    f: OverlapFn,
) -> Result<GgTerms> {
    if k != f.replicas() {
        return Err(RfimError::invalid(format!(
            "{f:?} is supported only with k = {}",
            f.replicas()
        )));
    }
    let obs = realization_observables(summary, disorder)?;
    Ok(gg_covariance_terms_from(&obs, f))
}
