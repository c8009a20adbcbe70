//! Finite-difference derivatives of `F = log Z` in the disorder and in `h`.
//!
//! `F` is the cumulant generating function of the spins in the variables
//! `h g_x`, so `dF/dg_x = h m_x`, `d2F/dg_x dg_y = h^2 r_{x,y}` and
//! `d4F/dg_x^2 dg_y^2 = h^4 k(s_x, s_x, s_y, s_y)`. The difference quotients
//! here are checked against those closed forms.

use crate::disorder::DisorderField;
use crate::error::{Result, RfimError};
use crate::lattice::LatticeSpec;

use super::{log_partition, GibbsSummary, ModelParams};

/// Largest system accepted by the nested fourth-order stencils.
pub const FOURTH_DERIVATIVE_MAX_SITES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    pub first: f64,
    pub second: f64,
    pub fourth: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            first: 1e-4,
            second: 1e-4,
            fourth: 5e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub x: usize,
    pub y: usize,
    /// Central difference of `F` in `g_x`.
    pub first_fd: f64,
    /// `h m_x`.
    pub first_exact: f64,
    pub first_residual: f64,
    /// Mixed second difference in `g_x, g_y` (pure second difference if `x == y`).
    pub second_fd: f64,
    /// `h^2 (C_{x,y} - m_x m_y)`.
    pub second_exact: f64,
    pub second_residual: f64,
}

fn shifted(disorder: &DisorderField, shifts: &[(usize, f64)]) -> DisorderField {
    let mut values = disorder.values.clone();
    for &(site, by) in shifts {
        values[site] += by;
    }
    DisorderField {
        origin: disorder.origin,
        values,
    }
}

fn check_site(lattice: &LatticeSpec, site: usize) -> Result<()> {
    if site >= lattice.num_sites() {
        return Err(RfimError::invalid(format!(
            "site {site} out of range for {} sites",
            lattice.num_sites()
        )));
    }
    Ok(())
}

/// Compares difference quotients of `F` in the disorder against `h m_x` and
/// `h^2 r_{x,y}` taken from `summary`.
pub fn fd_derivative_check(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
    summary: &GibbsSummary,
    x: usize,
    y: usize,
    steps: FdSteps,
) -> Result<FdReport> {
    check_site(lattice, x)?;
    check_site(lattice, y)?;
    let f = |shifts: &[(usize, f64)]| log_partition(lattice, &shifted(disorder, shifts), params);

    let d1 = steps.first;
    let first_fd = (f(&[(x, d1)])? - f(&[(x, -d1)])?) / (2.0 * d1);
    let first_exact = params.h * summary.magnetization[x];

    let d2 = steps.second;
    let second_fd = if x == y {
        (f(&[(x, d2)])? - 2.0 * f(&[])? + f(&[(x, -d2)])?) / (d2 * d2)
    } else {
        (f(&[(x, d2), (y, d2)])? - f(&[(x, d2), (y, -d2)])? - f(&[(x, -d2), (y, d2)])?
            + f(&[(x, -d2), (y, -d2)])?)
            / (4.0 * d2 * d2)
    };
    let m = &summary.magnetization;
    let second_exact = params.h * params.h * (summary.correlation_at(x, y) - m[x] * m[y]);
    Ok(FdReport {
        x,
        y,
        first_fd,
        first_exact,
        first_residual: (first_fd - first_exact).abs(),
        second_fd,
        second_exact,
        second_residual: (second_fd - second_exact).abs(),
    })
}

fn log_partition_at_h(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    beta: f64,
    h: f64,
) -> Result<f64> {
    // Shifted h may leave the validated domain only through h <= 0, which the
    // callers rule out by requiring delta < h.
    log_partition(lattice, disorder, ModelParams { beta, h })
}

/// Central difference of `psi_n = F / |V|` in `h`; equals `<H_n>`.
pub fn fd_h_derivative(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < params.h) {
        return Err(RfimError::invalid("h step must satisfy 0 < delta < h"));
    }
    let up = log_partition_at_h(lattice, disorder, params.beta, params.h + delta)?;
    let down = log_partition_at_h(lattice, disorder, params.beta, params.h - delta)?;
    Ok((up - down) / (2.0 * delta) / lattice.num_sites() as f64)
}

/// `(F(h + delta) - 2 F(h) + F(h - delta)) / delta^2`, an estimate of `d2F/dh2 >= 0`.
pub fn h_second_difference(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < params.h) {
        return Err(RfimError::invalid("h step must satisfy 0 < delta < h"));
    }
    let up = log_partition_at_h(lattice, disorder, params.beta, params.h + delta)?;
    let mid = log_partition(lattice, disorder, params)?;
    let down = log_partition_at_h(lattice, disorder, params.beta, params.h - delta)?;
    Ok((up - 2.0 * mid + down) / (delta * delta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourthDerivative {
    /// Richardson combination `(4 D(delta/2) - D(delta)) / 3`; error `O(delta^4)`.
    pub value: f64,
    /// Plain central stencil `D(delta)`; error `O(delta^2)`.
    pub stencil: f64,
    pub delta: f64,
}

/// Plain central difference for `d4F / dg_x^2 dg_y^2` with step `delta`:
/// the five-point fourth difference when `x == y`, otherwise the product of
/// two three-point second differences.
pub fn fourth_derivative_stencil(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
    x: usize,
    y: usize,
    delta: f64,
) -> Result<f64> {
    check_site(lattice, x)?;
    check_site(lattice, y)?;
    if lattice.num_sites() > FOURTH_DERIVATIVE_MAX_SITES {
        return Err(RfimError::Capacity {
            what: "fourth-derivative sites",
            requested: lattice.num_sites() as u128,
            cap: FOURTH_DERIVATIVE_MAX_SITES as u128,
        });
    }
    let f = |shifts: &[(usize, f64)]| log_partition(lattice, &shifted(disorder, shifts), params);
    let d4 = delta.powi(4);
    if x == y {
        let coeffs = [(-2.0, 1.0), (-1.0, -4.0), (0.0, 6.0), (1.0, -4.0), (2.0, 1.0)];
        let mut acc = 0.0;
        for (k, c) in coeffs {
            acc += c * f(&[(x, k * delta)])?;
        }
        Ok(acc / d4)
    } else {
        let second = [(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)];
        let mut acc = 0.0;
        for (i, ci) in second {
            for (j, cj) in second {
                acc += ci * cj * f(&[(x, i * delta), (y, j * delta)])?;
            }
        }
        Ok(acc / d4)
    }
}

pub fn fourth_derivative(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
    x: usize,
    y: usize,
    delta: f64,
) -> Result<FourthDerivative> {
    let coarse = fourth_derivative_stencil(lattice, disorder, params, x, y, delta)?;
    let fine = fourth_derivative_stencil(lattice, disorder, params, x, y, 0.5 * delta)?;
    Ok(FourthDerivative {
        value: (4.0 * fine - coarse) / 3.0,
        stencil: coarse,
        delta,
    })
}

/// Exact `d4F / dg_x^2 dg_y^2 = h^4 (-2 C^2 + 8 m_x m_y C - 6 m_x^2 m_y^2)`,
/// the joint cumulant of `(s_x, s_x, s_y, s_y)` scaled by `h^4`.
pub fn fourth_cumulant(summary: &GibbsSummary, h: f64, x: usize, y: usize) -> f64 {
    let c = summary.correlation_at(x, y);
    let (mx, my) = (summary.magnetization[x], summary.magnetization[y]);
    h.powi(4) * (-2.0 * c * c + 8.0 * mx * my * c - 6.0 * mx * mx * my * my)
}
