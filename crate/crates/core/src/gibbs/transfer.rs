//! Exact chain engine.
//!
//! With `a_k = h g_k`, the forward effective field obeys
//! `phi_0 = a_0`, `phi_{k+1} = a_{k+1} + w(phi_k)` and the backward one
//! `psi_{n-1} = 0`, `psi_k = w(a_{k+1} + psi_{k+1})`, where
//! `w(u) = (ln cosh(u + beta) - ln cosh(u - beta)) / 2`. Then
//! `m_k = tanh(phi_k + psi_k)` and, conditionally on `s_k`,
//! `E[s_{k+1} | s_k] = tanh(beta s_k + a_{k+1} + psi_{k+1})`, an affine map of
//! `s_k` with slope `sinh(2 beta) / (2 cosh(u + beta) cosh(u - beta))`.

use crate::disorder::DisorderField;
use crate::error::{Result, RfimError};
use crate::lattice::LatticeSpec;

use super::{ln_2cosh, Correlation, GibbsSummary, ModelParams, SummarySource};

pub const DEFAULT_TRANSFER_CAP: usize = 4096;

fn half_log_ratio(u: f64, beta: f64) -> f64 {
    0.5 * (ln_2cosh(u + beta) - ln_2cosh(u - beta))
}

fn slope(u: f64, beta: f64) -> f64 {
    let denom = 2.0 * (u + beta).cosh() * (u - beta).cosh();
    if denom.is_finite() {
        (2.0 * beta).sinh() / denom
    } else {
        0.0
    }
}

fn check_chain(lattice: &LatticeSpec, disorder: &DisorderField, cap: usize) -> Result<()> {
    if lattice.dim() != 1 {
        return Err(RfimError::invalid(format!(
            "transfer matrix needs d = 1 (got d = {})",
            lattice.dim()
        )));
    }
    if lattice.num_sites() > cap {
        return Err(RfimError::Capacity {
            what: "transfer-matrix chain length",
            requested: lattice.num_sites() as u128,
            cap: cap as u128,
        });
    }
    disorder.check_len(lattice.num_sites())
}

/// Forward fields and `log Z`.
fn forward(field: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let n = field.len();
    let mut phi = Vec::with_capacity(n);
    let mut log_const = 0.0;
    phi.push(field[0]);
    for k in 1..n {
        let prev = phi[k - 1];
        log_const += 0.5 * (ln_2cosh(prev + beta) + ln_2cosh(prev - beta));
        phi.push(field[k] + half_log_ratio(prev, beta));
    }
    let log_z = log_const + ln_2cosh(phi[n - 1]);
    (phi, log_z)
}

pub(crate) fn chain_log_partition(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
) -> Result<f64> {
    // F alone is O(n); no cap needed beyond the lattice's own.
    check_chain(lattice, disorder, usize::MAX)?;
    let field: Vec<f64> = disorder.values.iter().map(|g| params.h * g).collect();
    Ok(forward(&field, params.beta).1)
}

pub fn transfer_matrix_1d(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
) -> Result<GibbsSummary> {
    transfer_matrix_1d_with_cap(lattice, disorder, params, DEFAULT_TRANSFER_CAP)
}

pub fn transfer_matrix_1d_with_cap(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
    cap: usize,
) -> Result<GibbsSummary> {
    check_chain(lattice, disorder, cap)?;
    let beta = params.beta;
    let n = lattice.num_sites();
    let field: Vec<f64> = disorder.values.iter().map(|g| params.h * g).collect();
    let (phi, log_z) = forward(&field, beta);

    let mut psi = vec![0.0; n];
    for k in (0..n - 1).rev() {
        psi[k] = half_log_ratio(field[k + 1] + psi[k + 1], beta);
    }
    let magnetization: Vec<f64> = (0..n).map(|k| (phi[k] + psi[k]).tanh()).collect();
    let slopes: Vec<f64> = (0..n - 1)
        .map(|k| slope(field[k + 1] + psi[k + 1], beta))
        .collect();
    let h_n = disorder
        .values
        .iter()
        .zip(&magnetization)
        .map(|(g, m)| g * m)
        .sum::<f64>()
        / n as f64;
    Ok(GibbsSummary {
        log_partition: log_z,
        psi: log_z / n as f64,
        correlation: Correlation::Chain {
            magnetization: magnetization.clone(),
            slopes,
        },
        magnetization,
        h_n,
        source: SummarySource::TransferMatrix,
        errors: None,
    })
}
