//! Error bars for correlated time series.
//!
//! Convention: `tau = 1/2 + sum_{t >= 1} rho_t`, so an i.i.d. series has
//! `tau = 0.5`, and the standard error of the mean is `sd * sqrt(2 tau / N)`.
//! The sum is truncated with Geyer's initial monotone sequence: lag pairs
//! `rho_{2k} + rho_{2k+1}` are accumulated while positive and forced to be
//! non-increasing.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RfimError};

pub const MIN_SERIES_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Integrated autocorrelation time, i.i.d. = 0.5.
    pub tau: f64,
    pub effective_samples: f64,
    pub burn_in: usize,
    pub samples: usize,
}

pub fn estimate(series: &[f64]) -> Result<McmcEstimate> {
    estimate_with_burn_in(series, 0)
}

/// Like [`estimate`], recording how many sweeps were discarded before `series`.
pub fn estimate_with_burn_in(series: &[f64], burn_in: usize) -> Result<McmcEstimate> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(RfimError::invalid(format!(
            "series has {n} samples, need at least {MIN_SERIES_LEN}"
        )));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / nf
    };
    let gamma0 = autocov(0);
    // Rounding of the mean leaves a residue of order eps * |mean|.
    if gamma0 <= (4.0 * f64::EPSILON * mean.abs()).powi(2) {
        return Ok(McmcEstimate {
            mean,
            std_error: 0.0,
            tau: 0.5,
            effective_samples: nf,
            burn_in,
            samples: n,
        });
    }

    let mut pair_sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = autocov(2 * k) + autocov(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        pair_sum += pair;
        prev_pair = pair;
        k += 1;
    }
    let tau = ((2.0 * pair_sum - gamma0) / (2.0 * gamma0)).max(0.5);
    Ok(McmcEstimate {
        mean,
        std_error: (gamma0 * 2.0 * tau / nf).sqrt(),
        tau,
        effective_samples: nf / (2.0 * tau),
        burn_in,
        samples: n,
    })
}
