//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Pass criterion numbers as arguments to run
//! a subset, e.g. `cargo test --test acceptance -- 6 7`.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::{brute_force, max_abs_diff};
use rfim::disorder::{sample_disorder, DisorderField};
use rfim::gibbs::{
    enumerate_gibbs, exact_summary, fd_derivative_check, fd_h_derivative, h_second_difference,
    transfer_matrix_1d, FdSteps, ModelParams,
};
use rfim::lattice::LatticeSpec;
use rfim::mcmc::{mcmc_summary, run_two_replicas, write_series, McmcSettings, SeriesFormat};
use rfim::observables::OverlapFn;
use rfim::verify::{
    check_block_bound, check_fkg, check_gg_exact_ibp, check_gg_residual_trend, check_hermite,
    check_hn_identity, check_overlap_var_bound, check_var_bound, concentration_experiment,
    CheckConfig, Engine, LemmaReport, Mode, Status, QUADRATURE_TOL,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn params(beta: f64, h: f64) -> ModelParams {
    ModelParams::new(beta, h).unwrap()
}

fn all_pass(reports: &[LemmaReport]) -> bool {
    reports.iter().all(|r| r.status == Status::Pass)
}

fn describe(r: &LemmaReport) -> String {
    format!(
        "{}(d={},n={},h={}): lhs={:.4e} rhs={:.4e} slack={:.2e} {:?}",
        r.check, r.d, r.n, r.h, r.lhs, r.rhs, r.slack, r.status
    )
}

fn random_small_lattice(rng: &mut ChaCha8Rng, max_sites: usize) -> LatticeSpec {
    loop {
        let d = rng.random_range(1..=2);
        let n = rng.random_range(1..=max_sites);
        if let Ok(l) = LatticeSpec::with_cap(d, n, max_sites) {
            return l;
        }
    }
}

fn positive(rng: &mut ChaCha8Rng, hi: f64) -> f64 {
    // Uniform on (0, hi].
    hi * (1.0 - rng.random::<f64>())
}

/// Exact engines against brute-force summation; transfer against enumeration.
fn engine_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases: Vec<_> = (0..200)
        .map(|i| {
            let l = random_small_lattice(&mut rng, 12);
            let p = params(positive(&mut rng, 3.0), positive(&mut rng, 3.0));
            (l, p, i as u64)
        })
        .collect();
    let worst_enum = cases
        .par_iter()
        .map(|(l, p, rid)| {
            let g = sample_disorder(l, 101, *rid);
            let s = enumerate_gibbs(l, &g, *p).unwrap();
            let (f, m, c) = brute_force(l, &g, *p);
            (s.log_partition - f)
                .abs()
                .max(max_abs_diff(&s.magnetization, &m))
                .max(max_abs_diff(&s.correlation.to_dense(&s.magnetization), &c))
        })
        .reduce(|| 0.0, f64::max);
    let worst_transfer = (0..200)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
            let l = LatticeSpec::new(1, rng.random_range(1..=16)).unwrap();
            let p = params(positive(&mut rng, 3.0), positive(&mut rng, 3.0));
            let g = sample_disorder(&l, 102, i);
            let t = transfer_matrix_1d(&l, &g, p).unwrap();
            let e = enumerate_gibbs(&l, &g, p).unwrap();
            (t.log_partition - e.log_partition)
                .abs()
                .max(max_abs_diff(&t.magnetization, &e.magnetization))
                .max(max_abs_diff(
                    &t.correlation.to_dense(&t.magnetization),
                    &e.correlation.to_dense(&e.magnetization),
                ))
        })
        .reduce(|| 0.0, f64::max);
    Verdict {
        pass: worst_enum <= 1e-10 && worst_transfer <= 1e-10,
        detail: format!(
            "max |enumeration - brute force| = {worst_enum:.2e}, max |transfer - enumeration| = {worst_transfer:.2e} (tol 1e-10)"
        ),
    }
}

/// Connected correlations are non-negative.
fn fkg() -> Verdict {
    let reports = vec![
        check_fkg(&CheckConfig::ensemble(2, 3, params(1.0, 1.0), 100, 2)).unwrap(),
        check_fkg(&CheckConfig::ensemble(1, 512, params(0.8, 0.5), 100, 2)).unwrap(),
    ];
    Verdict {
        pass: all_pass(&reports),
        detail: reports.iter().map(describe).collect::<Vec<_>>().join("; "),
    }
}

/// Composite Simpson rule for `E phi(g)`, `g ~ N(0,1)`, on `[-12, 12]`.
fn gaussian_simpson(phi: impl Fn(f64) -> f64) -> f64 {
    let steps = 24_000;
    let dx = 24.0 / steps as f64;
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut total = 0.0;
    for i in 0..=steps {
        let x = -12.0 + i as f64 * dx;
        let w = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * phi(x) * density(x);
    }
    total * dx / 3.0
}

/// `Var(F_n) <= h^2 |V_n|`.
fn variance_bound() -> Verdict {
    let mut reports = Vec::new();
    let mut worst_oracle: f64 = 0.0;
    for h in [0.5, 1.0, 2.0] {
        for n in [1, 2] {
            let r = check_var_bound(&CheckConfig::quadrature(1, n, params(0.5, h))).unwrap();
            if n == 1 {
                let log_2cosh = |x: f64| {
                    let a = (h * x).abs();
                    a + (-2.0 * a).exp().ln_1p() + std::f64::consts::LN_2
                };
                let mean = gaussian_simpson(log_2cosh);
                let var = gaussian_simpson(|x| (log_2cosh(x) - mean).powi(2));
                worst_oracle = worst_oracle.max((r.lhs - var).abs());
            }
            reports.push(r);
        }
    }
    for h in [0.5, 1.0, 2.0] {
        reports.push(check_var_bound(&CheckConfig::ensemble(2, 3, params(0.5, h), 2000, 3)).unwrap());
    }
    let quadrature_tol = reports
        .iter()
        .filter(|r| r.mode == Mode::Quadrature)
        .all(|r| r.slack == QUADRATURE_TOL);
    Verdict {
        pass: all_pass(&reports) && quadrature_tol && worst_oracle <= QUADRATURE_TOL,
        detail: format!(
            "one-site variance vs Simpson: {worst_oracle:.2e}; {}",
            reports.iter().filter(|r| r.mode == Mode::Mc).map(describe).collect::<Vec<_>>().join("; ")
        ),
    }
}

/// `E(<R12^2> - <R12>^2) <= 2 sqrt(2 + h^2) / (h sqrt|V_n|)`.
fn overlap_variance_bound() -> Verdict {
    let chain = check_overlap_var_bound(&CheckConfig::ensemble(1, 1024, params(0.5, 0.5), 200, 4)).unwrap();
    let mut square_cfg = CheckConfig::ensemble(2, 4, params(0.5, 1.0), 200, 4);
    square_cfg.engine = Engine::Exact;
    let square = check_overlap_var_bound(&square_cfg).unwrap();
    let rhs_ok = (chain.rhs - 0.1875).abs() < 1e-12 && (square.rhs - 0.75f64.sqrt()).abs() < 1e-12;
    Verdict {
        pass: chain.status == Status::Pass && square.status == Status::Pass && rhs_ok,
        detail: format!("{}; {}", describe(&chain), describe(&square)),
    }
}

/// Exact disorder identities by quadrature, tolerance 1e-8.
fn quadrature_identities() -> Verdict {
    let mut reports = Vec::new();
    for (d, n, beta, h) in [(1, 1, 0.7, 1.0), (1, 2, 0.7, 1.0), (1, 2, 1.3, 0.6), (1, 3, 0.5, 1.4), (2, 1, 2.0, 2.0)] {
        let cfg = CheckConfig::quadrature(d, n, params(beta, h));
        reports.push(check_hn_identity(&cfg).unwrap());
        reports.push(check_gg_exact_ibp(&cfg, OverlapFn::R12).unwrap());
        reports.push(check_gg_exact_ibp(&cfg, OverlapFn::R23).unwrap());
    }
    let hermite = check_hermite(&CheckConfig::quadrature(1, 2, params(0.5, 1.0))).unwrap();
    let worst = reports
        .iter()
        .map(|r| (r.lhs - r.rhs).abs())
        .fold(0.0, f64::max);
    let tol_ok = reports.iter().all(|r| r.slack == QUADRATURE_TOL);
    reports.push(hermite.clone());
    Verdict {
        pass: all_pass(&reports) && tol_ok,
        detail: format!(
            "{} identity checks, max |lhs - rhs| = {worst:.2e} (tol 1e-8); hermite max deviation {:.2e}",
            reports.len() - 1,
            (hermite.lhs - hermite.rhs).abs()
        ),
    }
}

const SWEEP_SIZES: [usize; 3] = [64, 256, 1024];

fn sweep_config() -> CheckConfig {
    CheckConfig::ensemble(1, 1024, params(0.5, 0.5), 200, 6)
}

/// Ghirlanda–Guerra residuals decrease with n and halve from the first to the last size.
fn gg_residual_decay() -> Verdict {
    let out = check_gg_residual_trend(&sweep_config(), &SWEEP_SIZES).unwrap();
    let table: Vec<String> = out
        .table
        .iter()
        .map(|r| format!("n={} gg1={:.3e}±{:.1e} gg2={:.3e}±{:.1e}", r.n, r.gg1, r.gg1_se, r.gg2, r.gg2_se))
        .collect();
    Verdict {
        pass: all_pass(&out.reports),
        detail: format!(
            "{}; {}",
            table.join(", "),
            out.reports.iter().map(|r| format!("{}:{:?}", r.check, r.status)).collect::<Vec<_>>().join(" ")
        ),
    }
}

/// `E<(R12 - q)^2>` halves beyond combined error from the first to the last size.
fn overlap_concentration() -> Verdict {
    let out = concentration_experiment(&sweep_config(), &SWEEP_SIZES).unwrap();
    let table: Vec<String> = out
        .table
        .iter()
        .map(|r| format!("n={} E<R12>={:.5} E<(R12-q)^2>={:.4e}±{:.1e}", r.n, r.mean_r12, r.dev_q, r.dev_se))
        .collect();
    Verdict {
        pass: out.report.status == Status::Pass,
        detail: format!("q_hat={:.5}; {}; {}", out.q_hat, table.join(", "), describe(&out.report)),
    }
}

/// Finite differences of `F` against `h m`, `h^2 r` and `<H_n>`, and convexity in `h`.
fn derivative_identities() -> Verdict {
    let worst = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(8000 + i);
            let l = random_small_lattice(&mut rng, 9);
            let p = params(0.05 + positive(&mut rng, 1.95), 0.1 + positive(&mut rng, 1.9));
            let g = sample_disorder(&l, 8, i);
            let s = exact_summary(&l, &g, p).unwrap();
            let v = l.num_sites();
            let (x, y) = (rng.random_range(0..v), rng.random_range(0..v));
            let mut residual: f64 = 0.0;
            for (a, b) in [(x, y), (x, x)] {
                let r = fd_derivative_check(&l, &g, p, &s, a, b, FdSteps::default()).unwrap();
                residual = residual.max(r.first_residual).max(r.second_residual);
            }
            let dpsi = fd_h_derivative(&l, &g, p, 1e-4).unwrap();
            residual = residual.max((dpsi - s.h_n).abs());
            let curvature = h_second_difference(&l, &g, p, 1e-3).unwrap();
            (residual, curvature)
        })
        .reduce(|| (0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));
    Verdict {
        pass: worst.0 < 1e-5 && worst.1 >= -1e-8,
        detail: format!(
            "max residual {:.2e} (tol 1e-5), min second difference in h {:.3e} (tol -1e-8)",
            worst.0, worst.1
        ),
    }
}

/// Brute-force `log Z` keeping only the listed bonds.
fn log_z_with_bonds(sites: usize, bonds: &[(usize, usize)], g: &DisorderField, p: ModelParams) -> f64 {
    let e: Vec<f64> = (0..1usize << sites)
        .map(|mask| {
            let s = |i: usize| if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
            p.beta * bonds.iter().map(|&(x, y)| s(x) * s(y)).sum::<f64>()
                + p.h * (0..sites).map(|x| g.values[x] * s(x)).sum::<f64>()
        })
        .collect();
    let top = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + e.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// Cutting block boundaries moves `log Z` by at most `beta` per cut bond.
fn block_decomposition() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_margin = f64::INFINITY;
    let mut ok = true;
    for i in 0..50u64 {
        let (d, n, m) = loop {
            let d = rng.random_range(1..=2);
            let n: usize = rng.random_range(1..=4);
            let m = rng.random_range(2..=4);
            if (n * m).pow(d as u32) <= 16 {
                break (d, n, m);
            }
        };
        let p = params(positive(&mut rng, 3.0), positive(&mut rng, 3.0));
        let big = LatticeSpec::new(d, n * m).unwrap();
        let part = big.block_partition(n, m).unwrap();
        let g = sample_disorder(&big, 9, i);
        let full = exact_summary(&big, &g, p).unwrap().log_partition;
        let cut = log_z_with_bonds(big.num_sites(), &part.internal_bonds, &g, p);
        let bound = p.beta * part.cut_bonds.len() as f64;
        let delta = (cut - full).abs();
        ok &= delta <= bound + 1e-12 * full.abs().max(1.0);
        worst_margin = worst_margin.min(bound - delta);
    }
    let reports = check_block_bound(&CheckConfig::ensemble(2, 2, params(1.5, 1.0), 10, 9), 2).unwrap();
    Verdict {
        pass: ok && all_pass(&reports),
        detail: format!(
            "50 instances, smallest margin beta*cut - |dlogZ| = {worst_margin:.3e}; {}",
            reports.iter().map(describe).collect::<Vec<_>>().join("; ")
        ),
    }
}

/// Two-replica MCMC against exact `m`, `C`, `<R12>`, `<R12^2>`.
fn mcmc_validity() -> Verdict {
    let shapes = [(1, 12), (2, 3), (3, 2), (1, 7)];
    // Per observable: (within 3 SE, total).
    let counts = (0..100u64)
        .into_par_iter()
        .map(|t| {
            let (d, n) = shapes[t as usize % shapes.len()];
            let l = LatticeSpec::new(d, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + t);
            let p = params(0.2 + 0.8 * rng.random::<f64>(), 0.3 + 1.2 * rng.random::<f64>());
            let g = sample_disorder(&l, 10, t);
            let exact = exact_summary(&l, &g, p).unwrap();
            let settings = McmcSettings::new(20_000, 2_000, t);
            let (est, run) = mcmc_summary(&l, &g, p, &settings).unwrap();
            let errors = est.errors.as_ref().unwrap();
            let v = l.num_sites();
            let within = |value: f64, target: f64, se: f64| (value - target).abs() <= 3.0 * se;
            let mut c = [[0usize; 2]; 4];
            for x in 0..v {
                c[0][0] += within(est.magnetization[x], exact.magnetization[x], errors.magnetization[x]) as usize;
                c[0][1] += 1;
                for y in x + 1..v {
                    let k = x * v + y;
                    c[1][0] += within(est.correlation_at(x, y), exact.correlation_at(x, y), errors.correlation[k]) as usize;
                    c[1][1] += 1;
                }
            }
            let vf = v as f64;
            let r12: f64 = exact.magnetization.iter().map(|m| m * m).sum::<f64>() / vf;
            let mut r12_sq = 0.0;
            for x in 0..v {
                for y in 0..v {
                    r12_sq += exact.correlation_at(x, y).powi(2);
                }
            }
            r12_sq /= vf * vf;
            let o = run.overlap_estimates().unwrap();
            c[2] = [within(o.r12.mean, r12, o.r12.std_error) as usize, 1];
            c[3] = [within(o.r12_sq.mean, r12_sq, o.r12_sq.std_error) as usize, 1];
            c
        })
        .reduce(
            || [[0usize; 2]; 4],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x[0] += y[0];
                    x[1] += y[1];
                }
                a
            },
        );
    let rates: Vec<f64> = counts.iter().map(|c| c[0] as f64 / c[1] as f64).collect();

    let l = LatticeSpec::new(2, 3).unwrap();
    let g = sample_disorder(&l, 10, 0);
    let replay = || {
        let run = run_two_replicas(&l, &g, params(0.6, 0.8), &McmcSettings::new(5_000, 500, 77)).unwrap();
        let mut bytes = Vec::new();
        write_series(&run, SeriesFormat::Jsonl, &mut bytes).unwrap();
        bytes
    };
    let identical = replay() == replay();
    Verdict {
        pass: rates.iter().all(|&r| r >= 0.95) && identical,
        detail: format!(
            "within 3 SE: m {:.3}, C {:.3}, <R12> {:.3}, <R12^2> {:.3} (need >= 0.95); replay identical: {identical}",
            rates[0], rates[1], rates[2], rates[3]
        ),
    }
}

type Criterion = (u32, &'static str, u64, fn() -> Verdict);

const CRITERIA: [Criterion; 10] = [
    (1, "engine oracle equivalence", 60, engine_oracles),
    (2, "FKG", 60, fkg),
    (3, "free energy variance bound", 120, variance_bound),
    (4, "overlap variance bound", 300, overlap_variance_bound),
    (5, "exact disorder identities", 60, quadrature_identities),
    (6, "GG residual decay", 600, gg_residual_decay),
    (7, "overlap concentration", 600, overlap_concentration),
    (8, "convexity and derivative identities", 60, derivative_identities),
    (9, "block decomposition bound", 60, block_decomposition),
    (10, "MCMC validity", 600, mcmc_validity),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, budget, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = verdict.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "criterion {id:>2} {}: {name} [{:.1}s, budget {budget}s] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            verdict.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
