//! Single-size checks: bounds, exact identities and per-realization facts.

use crate::disorder::{gauss_hermite_grid, DisorderField};
use crate::error::{Result, RfimError};
use crate::gibbs::{
    fourth_derivative, h_second_difference, log_partition, log_partition_with_bonds, FdSteps,
};
use crate::lattice::{Bond, LatticeSpec};
use crate::observables::{gg_covariance_terms_from, OverlapFn};

use super::{
    estimate_over_disorder, observe, over_realizations, CheckConfig, Estimates, Kind, LemmaReport,
    Mode, Quadrature,
};

/// Absolute tolerance for quadrature-exact checks.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// Gauss–Hermite order for the orthonormality check; exact for degree < 40.
const HERMITE_CHECK_ORDER: usize = 20;

/// Largest chain accepted by [`check_fourth_deriv_bound`].
const FOURTH_DERIV_SITES: usize = 6;

/// Relative allowance for finite-difference truncation in the fourth derivatives.
const FOURTH_DERIV_FD_SLACK: f64 = 0.1;

/// Smallest connected correlation over all realizations and pairs is `>= -1e-12`.
pub fn check_fkg(cfg: &CheckConfig) -> Result<LemmaReport> {
    let l = cfg.lattice()?;
    cfg.require_exact(&l, "check_fkg")?;
    let mins = over_realizations(cfg, &l, |g| Ok(observe(cfg, &l, g)?.min_r))?;
    let min = mins.into_iter().fold(f64::INFINITY, f64::min);
    Ok(LemmaReport::new("fkg", cfg, Mode::Exact, Kind::Lower, min, 0.0, 1e-12, 0.0))
}

/// `Var(F_n) <= h^2 |V_n|`.
pub fn check_var_bound(cfg: &CheckConfig) -> Result<LemmaReport> {
    let l = cfg.lattice()?;
    cfg.require_exact(&l, "check_var_bound")?;
    let params = cfg.params;
    let rhs = params.h * params.h * l.num_sites() as f64;
    let free_energy = |g: &DisorderField| log_partition(&l, g, params);
    let (var, se, mode) = match cfg.mode {
        Mode::Quadrature => {
            let mean = estimate_over_disorder(cfg, &l, |g| Ok(vec![free_energy(g)?]))?.eval(|m| m[0]).0;
            let var = estimate_over_disorder(cfg, &l, |g| Ok(vec![(free_energy(g)? - mean).powi(2)]))?
                .eval(|m| m[0])
                .0;
            (var, 0.0, Mode::Quadrature)
        }
        _ => {
            cfg.require_ensemble("check_var_bound")?;
            let f = over_realizations(cfg, &l, |g| free_energy(g))?;
            let shift = f[0];
            let rows: Vec<Vec<f64>> =
                f.iter().map(|x| x - shift).map(|x| vec![x, x * x]).collect();
            let n = rows.len() as f64;
            let est = Estimates::Ensemble(rows);
            let (var, se) = est.eval(|m| (m[1] - m[0] * m[0]) * n / (n - 1.0));
            (var, se, Mode::Mc)
        }
    };
    let slack = if mode == Mode::Quadrature { QUADRATURE_TOL } else { 3.0 * se };
    Ok(LemmaReport::new("var_bound", cfg, mode, Kind::Upper, var, rhs, slack, se))
}

/// Bound on an expectation of one per-realization observable.
fn expectation_bound(
    cfg: &CheckConfig,
    name: &str,
    rhs: f64,
    value: impl Fn(&crate::observables::RealizationObservables) -> f64 + Sync,
) -> Result<LemmaReport> {
    let l = cfg.lattice()?;
    let est = estimate_over_disorder(cfg, &l, |g| Ok(vec![value(&observe(cfg, &l, g)?)]))?;
    let (lhs, se) = est.eval(|m| m[0]);
    Ok(LemmaReport::new(name, cfg, est.mode(), Kind::Upper, lhs, rhs, est.slack(se), se))
}

/// `E(<R12^2> - <R12>^2) <= 2 sqrt(2 + h^2) / (h sqrt|V_n|)`.
pub fn check_overlap_var_bound(cfg: &CheckConfig) -> Result<LemmaReport> {
    let h = cfg.params.h;
    let v = cfg.lattice()?.num_sites() as f64;
    let rhs = 2.0 * (2.0 + h * h).sqrt() / (h * v.sqrt());
    expectation_bound(cfg, "overlap_var_bound", rhs, |o| o.overlap.gibbs_var)
}

/// `E sum_{x,y} r_{x,y}^2 <= (2 + h^2) |V_n| / h^2`.
pub fn check_rxy_sum(cfg: &CheckConfig) -> Result<LemmaReport> {
    let l = cfg.lattice()?;
    cfg.require_exact(&l, "check_rxy_sum")?;
    let h = cfg.params.h;
    let rhs = (2.0 + h * h) * l.num_sites() as f64 / (h * h);
    expectation_bound(cfg, "rxy_sum", rhs, |o| o.sum_r_sq)
}

/// `E<H_n> = h (1 - E<R12>)`.
pub fn check_hn_identity(cfg: &CheckConfig) -> Result<LemmaReport> {
    let l = cfg.lattice()?;
    let h = cfg.params.h;
    let est = estimate_over_disorder(cfg, &l, |g| {
        let o = observe(cfg, &l, g)?;
        Ok(vec![o.hn, o.overlap.r12])
    })?;
    let (lhs, _) = est.eval(|m| m[0]);
    let (rhs, _) = est.eval(|m| h * (1.0 - m[1]));
    let (_, se) = est.eval(|m| m[0] - h * (1.0 - m[1]));
    Ok(LemmaReport::new("hn_identity", cfg, est.mode(), Kind::Identity, lhs, rhs, est.slack(se), se))
}

/// `E<H(s1) f> - E<H>E<f> = h E<R12> E<f> + h sum_{i=2}^k E<f R_{1,i}> - h k E<f R_{1,k+1}>`.
pub fn check_gg_exact_ibp(cfg: &CheckConfig, f: OverlapFn) -> Result<LemmaReport> {
    let l = cfg.lattice()?;
    let h = cfg.params.h;
    let k = f.replicas();
    let est = estimate_over_disorder(cfg, &l, |g| {
        Ok(gg_covariance_terms_from(&observe(cfg, &l, g)?, f).to_vec())
    })?;
    // Layout: [hn_f, f, f_r1i (k entries), f_r1_next, hn, r12].
    let lhs_of = |m: &[f64]| m[0] - m[k + 3] * m[1];
    let rhs_of = move |m: &[f64]| {
        let tail: f64 = m[3..2 + k].iter().sum();
        h * m[k + 4] * m[1] + h * tail - h * k as f64 * m[k + 2]
    };
    let (lhs, _) = est.eval(lhs_of);
    let (rhs, _) = est.eval(rhs_of);
    let (_, se) = est.eval(|m| lhs_of(m) - rhs_of(m));
    let name = match f {
        OverlapFn::R12 => "gg_ibp_k2_r12",
        OverlapFn::R23 => "gg_ibp_k3_r23",
    };
    Ok(LemmaReport::new(name, cfg, est.mode(), Kind::Identity, lhs, rhs, est.slack(se), se))
}

/// Per-realization convexity of `F_n` in `h`: the second difference with step
/// `delta` is `>= -1e-8` on every realization.
pub fn check_convexity_per_realization(cfg: &CheckConfig, delta: f64) -> Result<LemmaReport> {
    let l = cfg.lattice()?;
    cfg.require_exact(&l, "check_convexity_per_realization")?;
    cfg.require_ensemble("check_convexity_per_realization")?;
    let d2 = over_realizations(cfg, &l, |g| h_second_difference(&l, g, cfg.params, delta))?;
    let min = d2.into_iter().fold(f64::INFINITY, f64::min);
    Ok(LemmaReport::new("convexity_per_realization", cfg, Mode::Exact, Kind::Lower, min, 0.0, 1e-8, 0.0))
}

/// Removing the bonds between the `m^d` blocks of side `n` changes `log Z` on
/// the box of side `m n` by at most `beta` per removed bond. Also checks that
/// the cut partition function factorizes over blocks.
pub fn check_block_bound(cfg: &CheckConfig, m: usize) -> Result<Vec<LemmaReport>> {
    let big = LatticeSpec::new(cfg.d, m.checked_mul(cfg.n).ok_or_else(|| {
        RfimError::invalid("block box side overflows")
    })?)?;
    let part = big.block_partition(cfg.n, m)?;
    cfg.require_ensemble("check_block_bound")?;
    let params = cfg.params;
    let sites = big.num_sites();
    let block_bonds: Vec<(Vec<usize>, Vec<Bond>)> = part
        .blocks
        .iter()
        .enumerate()
        .map(|(b, members)| {
            let local = |x: usize| members.iter().position(|&s| s == x).unwrap();
            let bonds = part
                .internal_bonds
                .iter()
                .filter(|&&(x, _)| part.assignment[x] == b)
                .map(|&(x, y)| (local(x), local(y)))
                .collect();
            (members.clone(), bonds)
        })
        .collect();
    let rows = over_realizations(cfg, &big, |g| {
        let full = log_partition(&big, g, params)?;
        let cut = log_partition_with_bonds(sites, &part.internal_bonds, g, params)?;
        let mut blocks = 0.0;
        for (members, bonds) in &block_bonds {
            let sub = DisorderField::explicit(members.iter().map(|&x| g.values[x]).collect());
            blocks += log_partition_with_bonds(members.len(), bonds, &sub, params)?;
        }
        Ok(((cut - full).abs(), (cut - blocks).abs(), full.abs()))
    })?;
    let max_delta = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_split = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let scale = rows.iter().map(|r| r.2).fold(1.0, f64::max);
    let cut = part.cut_bonds.len();
    let rhs = params.beta * cut as f64;
    let rounding = 1e-12 * scale;
    let bound = LemmaReport::new("block_bound", cfg, Mode::Exact, Kind::Upper, max_delta, rhs, rounding, 0.0)
        .with_note(format!(
            "m = {m}, {cut} cut bonds; coarse form C(d) beta n^(d-1) m^d = {}",
            params.beta * part.cut_bound(cfg.d) as f64
        ));
    let split = LemmaReport::new("block_factorization", cfg, Mode::Exact, Kind::Identity, max_split, 0.0, rounding, 0.0);
    Ok(vec![bound, split])
}

/// The normalized Hermite chaos `t_u` for `u in {xx, yy, xy}` are orthonormal
/// under the two-site Gaussian measure.
pub fn check_hermite(cfg: &CheckConfig) -> Result<LemmaReport> {
    let two = LatticeSpec::new(1, 2)?;
    let order = match cfg.quadrature {
        Quadrature::GaussHermite(order) => order,
        _ => HERMITE_CHECK_ORDER,
    };
    let grid = gauss_hermite_grid(&two, order)?;
    let t = |g: &[f64]| {
        let quartic = |x: f64| (x.powi(4) - 6.0 * x * x + 3.0) / 24f64.sqrt();
        [quartic(g[0]), quartic(g[1]), 0.5 * (g[0] * g[0] - 1.0) * (g[1] * g[1] - 1.0)]
    };
    let mut mean = [0.0; 3];
    let mut gram = [[0.0; 3]; 3];
    for (g, w) in grid.nodes() {
        let v = t(&g);
        for i in 0..3 {
            mean[i] += w * v[i];
            for j in 0..3 {
                gram[i][j] += w * v[i] * v[j];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        worst = worst.max(mean[i].abs());
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[i][j] - want).abs());
        }
    }
    let mut cfg = cfg.clone();
    cfg.d = 1;
    cfg.n = 2;
    Ok(LemmaReport::new("hermite", &cfg, Mode::Quadrature, Kind::Identity, worst, 0.0, 1e-10, 0.0))
}

/// `sum_{x,y} (E d4F/dg_x^2 dg_y^2)^2 <= 24 h^2 |V_n|`, with the derivatives
/// taken by Richardson-extrapolated finite differences.
pub fn check_fourth_deriv_bound(cfg: &CheckConfig) -> Result<LemmaReport> {
    let l = cfg.lattice()?;
    let v = l.num_sites();
    if cfg.d != 1 || v > FOURTH_DERIV_SITES {
        return Err(RfimError::Capacity {
            what: "fourth-derivative check sites (d = 1)",
            requested: v as u128,
            cap: FOURTH_DERIV_SITES as u128,
        });
    }
    let params = cfg.params;
    let delta = FdSteps::default().fourth;
    let est = estimate_over_disorder(cfg, &l, |g| {
        let mut out = Vec::with_capacity(v * v);
        for x in 0..v {
            for y in 0..v {
                out.push(fourth_derivative(&l, g, params, x, y, delta)?.value);
            }
        }
        Ok(out)
    })?;
    let (lhs, se) = est.eval(|m| m.iter().map(|e| e * e).sum());
    let rhs = 24.0 * params.h * params.h * v as f64;
    let statistical = if est.mode() == Mode::Mc { 3.0 * se } else { 0.0 };
    Ok(LemmaReport::new(
        "fourth_deriv_bound",
        cfg,
        est.mode(),
        Kind::Upper,
        lhs,
        rhs,
        FOURTH_DERIV_FD_SLACK * rhs + statistical,
        se,
    )
    .with_note(format!("finite-difference step {delta}, slack includes 10% of the bound")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::ModelParams;
    use crate::verify::Status;

    fn params(beta: f64, h: f64) -> ModelParams {
        ModelParams::new(beta, h).unwrap()
    }

    #[test]
    fn fkg_examples() {
        let r = check_fkg(&CheckConfig::ensemble(2, 3, params(1.0, 1.0), 20, 1)).unwrap();
        assert!(r.pass, "{r:?}");
        let r = check_fkg(&CheckConfig::ensemble(1, 64, params(0.8, 0.5), 10, 1)).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn var_bound_one_site_quadrature() {
        let cfg = CheckConfig::quadrature(1, 1, params(1.0, 1.0));
        let r = check_var_bound(&cfg).unwrap();
        assert!(r.pass && r.rhs == 1.0 && r.lhs > 0.0 && r.lhs < 1.0);
        let mut coarse = cfg.clone();
        coarse.quadrature = Quadrature::Trapezoid(0.2);
        assert!((check_var_bound(&coarse).unwrap().lhs - r.lhs).abs() < 1e-10);
    }

    #[test]
    fn var_bound_free_spins_match_single_site() {
        // At beta = 0 the free energy is a sum of independent terms.
        let one = check_var_bound(&CheckConfig::quadrature(1, 1, params(0.0, 1.0))).unwrap();
        let two = check_var_bound(&CheckConfig::quadrature(1, 2, params(0.0, 1.0))).unwrap();
        assert!((two.lhs - 2.0 * one.lhs).abs() < 1e-10);
    }

    #[test]
    fn overlap_bound_single_site_is_vacuous() {
        let r = check_overlap_var_bound(&CheckConfig::quadrature(1, 1, params(1.0, 1.0))).unwrap();
        assert!((r.rhs - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!(r.lhs < 1.0 && r.pass);
    }

    #[test]
    fn identities_by_quadrature() {
        for (d, n, beta, h) in [(1, 1, 1.0, 1.0), (1, 2, 1.0, 0.7), (1, 3, 0.6, 1.4), (2, 1, 2.0, 2.0)] {
            let cfg = CheckConfig::quadrature(d, n, params(beta, h));
            let r = check_hn_identity(&cfg).unwrap();
            assert!(r.pass && (r.lhs - r.rhs).abs() < 1e-9, "{r:?}");
            for f in [OverlapFn::R12, OverlapFn::R23] {
                let r = check_gg_exact_ibp(&cfg, f).unwrap();
                assert!((r.lhs - r.rhs).abs() < 1e-9, "{r:?}");
            }
        }
    }

    #[test]
    fn ensemble_identity_within_error() {
        let r = check_hn_identity(&CheckConfig::ensemble(2, 3, params(1.0, 1.0), 300, 4)).unwrap();
        assert!(r.pass && r.se > 0.0, "{r:?}");
    }

    #[test]
    fn block_examples() {
        for (d, n, m, cut) in [(1, 2, 2, 1.0), (2, 2, 2, 8.0)] {
            let reports = check_block_bound(&CheckConfig::ensemble(d, n, params(0.7, 1.0), 5, 2), m).unwrap();
            assert_eq!(reports[0].rhs, 0.7 * cut);
            assert!(reports.iter().all(|r| r.pass), "{reports:?}");
        }
        let free = check_block_bound(&CheckConfig::ensemble(2, 2, params(0.0, 1.0), 3, 2), 2).unwrap();
        assert!(free[0].lhs < 1e-12);
    }

    #[test]
    fn hermite_orthonormal() {
        let r = check_hermite(&CheckConfig::quadrature(1, 2, params(1.0, 1.0))).unwrap();
        assert!(r.pass && r.lhs < 1e-10, "{r:?}");
    }

    #[test]
    fn fourth_derivative_two_site_chain() {
        let mut cfg = CheckConfig::quadrature(1, 2, params(1.0, 1.0));
        cfg.quadrature = Quadrature::GaussHermite(30);
        let r = check_fourth_deriv_bound(&cfg).unwrap();
        assert_eq!(r.rhs, 48.0);
        assert!(r.pass && r.status == Status::Pass, "{r:?}");
        assert!(check_fourth_deriv_bound(&CheckConfig::quadrature(1, 7, params(1.0, 1.0))).is_err());
    }

    #[test]
    fn per_realization_convexity() {
        let r = check_convexity_per_realization(&CheckConfig::ensemble(2, 2, params(0.9, 1.0), 20, 8), 1e-3)
            .unwrap();
        assert!(r.pass && r.lhs > 0.0);
    }
}
