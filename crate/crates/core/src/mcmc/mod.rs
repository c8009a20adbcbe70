//! Heat-bath sampling of the Gibbs measure, two-replica overlap runs and
//! replica exchange.
//!
//! Every chain draws from its own ChaCha stream `(seed, stream id)`, so a run
//! is a pure function of its inputs and seeds.

mod autocorr;
mod tempering;

pub use autocorr::{estimate, estimate_with_burn_in, McmcEstimate, MIN_SERIES_LEN};
pub use tempering::{parallel_tempering, RungSeries, TemperingRun};

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{Result, RfimError};
use crate::gibbs::{Correlation, GibbsSummary, ModelParams, SummaryErrors, SummarySource};
use crate::lattice::LatticeSpec;

/// Stream id of rung `rung` in replica `replica`.
pub fn stream_id(replica: u32, rung: u32) -> u64 {
    (u64::from(replica) << 32) | u64::from(rung)
}

/// Folds `parts` into one seed with the SplitMix64 finalizer.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        let mut z = (state ^ p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state = z ^ (z >> 31);
    }
    state
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub spins: Vec<i8>,
    pub sweep_count: u64,
    pub seed: u64,
    pub stream: u64,
    rng: ChaCha8Rng,
}

impl ChainState {
    /// Uniformly random initial spins drawn from the chain's own stream.
    pub fn new(num_sites: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let spins = (0..num_sites)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        ChainState {
            spins,
            sweep_count: 0,
            seed,
            stream,
            rng,
        }
    }

    /// `sum_{<xy>} s_x s_y`.
    pub fn bond_sum(&self, lattice: &LatticeSpec) -> f64 {
        lattice
            .bonds()
            .iter()
            .map(|&(x, y)| f64::from(self.spins[x] * self.spins[y]))
            .sum()
    }

    /// `H_n(s) = (1/|V|) sum_x g_x s_x`.
    pub fn hn(&self, disorder: &DisorderField) -> f64 {
        disorder
            .values
            .iter()
            .zip(&self.spins)
            .map(|(g, &s)| g * f64::from(s))
            .sum::<f64>()
            / self.spins.len() as f64
    }

    /// Negative log Boltzmann weight, `-(beta * bonds + h * sum_x g_x s_x)`.
    pub fn energy(&self, lattice: &LatticeSpec, disorder: &DisorderField, params: ModelParams) -> f64 {
        -(params.beta * self.bond_sum(lattice)
            + params.h * self.hn(disorder) * self.spins.len() as f64)
    }
}

/// One typewriter pass of heat-bath updates:
/// `P(s_x = +1) = 1 / (1 + exp(-2 l_x))`, `l_x = beta sum_{y~x} s_y + h g_x`.
pub fn heat_bath_sweep(
    state: &mut ChainState,
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
) {
    for x in 0..state.spins.len() {
        let nb: i32 = lattice
            .neighbors(x)
            .iter()
            .map(|&y| i32::from(state.spins[y]))
            .sum();
        let local = params.beta * f64::from(nb) + params.h * disorder.values[x];
        let p_up = 1.0 / (1.0 + (-2.0 * local).exp());
        state.spins[x] = if state.rng.random::<f64>() < p_up { 1 } else { -1 };
    }
    state.sweep_count += 1;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Optional tempering ladder; must contain the target `beta`.
    #[serde(default)]
    pub ladder: Option<Vec<f64>>,
    /// Keep per-sweep spin snapshots (needed for `m` and `C` estimates).
    #[serde(default)]
    pub record_spins: bool,
}

impl McmcSettings {
    pub fn new(sweeps: usize, burn_in: usize, seed: u64) -> Self {
        McmcSettings {
            sweeps,
            burn_in,
            seed,
            ladder: None,
            record_spins: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sweeps <= self.burn_in {
            return Err(RfimError::invalid(format!(
                "sweeps ({}) must exceed burn_in ({})",
                self.sweeps, self.burn_in
            )));
        }
        Ok(())
    }
}

/// Measurement series of two independent chains on the same disorder.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoReplicaRun {
    pub sweep: Vec<u64>,
    pub r12: Vec<f64>,
    pub hn: [Vec<f64>; 2],
    pub energy: [Vec<f64>; 2],
    /// Per-measurement spin snapshots, if requested.
    pub spins: Option<[Vec<Vec<i8>>; 2]>,
    pub burn_in: usize,
}

/// A chain that may or may not be a tempering ensemble; yields the
/// configuration at the target temperature after each sweep.
enum Sampler {
    Plain(ChainState),
    Tempered(tempering::Ensemble),
}

impl Sampler {
    fn new(
        lattice: &LatticeSpec,
        params: ModelParams,
        settings: &McmcSettings,
        replica: u32,
    ) -> Result<Self> {
        match &settings.ladder {
            None => Ok(Sampler::Plain(ChainState::new(
                lattice.num_sites(),
                settings.seed,
                stream_id(replica, 0),
            ))),
            Some(ladder) => Ok(Sampler::Tempered(tempering::Ensemble::new(
                lattice,
                params,
                ladder,
                settings.seed,
                replica,
            )?)),
        }
    }

    fn sweep(&mut self, lattice: &LatticeSpec, disorder: &DisorderField, params: ModelParams) {
        match self {
            Sampler::Plain(c) => heat_bath_sweep(c, lattice, disorder, params),
            Sampler::Tempered(e) => e.sweep(lattice, disorder, params.h),
        }
    }

    fn target(&self) -> &ChainState {
        match self {
            Sampler::Plain(c) => c,
            Sampler::Tempered(e) => e.target(),
        }
    }
}

/// Runs two replicas (streams 1 and 2 of `settings.seed`) for `settings.sweeps`
/// sweeps, recording after `burn_in`.
pub fn run_two_replicas(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
    settings: &McmcSettings,
) -> Result<TwoReplicaRun> {
    settings.validate()?;
    disorder.check_len(lattice.num_sites())?;
    let mut a = Sampler::new(lattice, params, settings, 1)?;
    let mut b = Sampler::new(lattice, params, settings, 2)?;
    let measurements = settings.sweeps - settings.burn_in;
    let mut run = TwoReplicaRun {
        sweep: Vec::with_capacity(measurements),
        r12: Vec::with_capacity(measurements),
        hn: [Vec::with_capacity(measurements), Vec::with_capacity(measurements)],
        energy: [Vec::with_capacity(measurements), Vec::with_capacity(measurements)],
        spins: settings.record_spins.then(|| [Vec::new(), Vec::new()]),
        burn_in: settings.burn_in,
    };
    let nsites = lattice.num_sites() as f64;
    for sweep in 0..settings.sweeps {
        a.sweep(lattice, disorder, params);
        b.sweep(lattice, disorder, params);
        if sweep < settings.burn_in {
            continue;
        }
        let (sa, sb) = (a.target(), b.target());
        let overlap: i32 = sa
            .spins
            .iter()
            .zip(&sb.spins)
            .map(|(&x, &y)| i32::from(x * y))
            .sum();
        run.sweep.push(sweep as u64);
        run.r12.push(f64::from(overlap) / nsites);
        for (k, s) in [sa, sb].into_iter().enumerate() {
            run.hn[k].push(s.hn(disorder));
            run.energy[k].push(s.energy(lattice, disorder, params));
            if let Some(snaps) = run.spins.as_mut() {
                snaps[k].push(s.spins.clone());
            }
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapEstimates {
    pub r12: McmcEstimate,
    pub r12_sq: McmcEstimate,
}

impl TwoReplicaRun {
    pub fn overlap_estimates(&self) -> Result<OverlapEstimates> {
        let sq: Vec<f64> = self.r12.iter().map(|r| r * r).collect();
        Ok(OverlapEstimates {
            r12: estimate_with_burn_in(&self.r12, self.burn_in)?,
            r12_sq: estimate_with_burn_in(&sq, self.burn_in)?,
        })
    }

    /// Gibbs summary from the recorded snapshots, pooling both replicas per
    /// sweep. `F` and `psi` are NaN; standard errors are attached.
    pub fn summary(&self, disorder: &DisorderField) -> Result<GibbsSummary> {
        let spins = self
            .spins
            .as_ref()
            .ok_or_else(|| RfimError::invalid("run did not record spin snapshots"))?;
        let n = disorder.len();
        let len = self.r12.len();
        let mut magnetization = vec![0.0; n];
        let mut m_se = vec![0.0; n];
        let mut series = vec![0.0; len];
        for x in 0..n {
            for t in 0..len {
                series[t] = 0.5 * f64::from(spins[0][t][x] + spins[1][t][x]);
            }
            let e = estimate(&series)?;
            magnetization[x] = e.mean;
            m_se[x] = e.std_error;
        }
        let mut values = vec![1.0; n * n];
        let mut c_se = vec![0.0; n * n];
        for x in 0..n {
            for y in x + 1..n {
                for t in 0..len {
                    series[t] = 0.5
                        * f64::from(
                            spins[0][t][x] * spins[0][t][y] + spins[1][t][x] * spins[1][t][y],
                        );
                }
                let e = estimate(&series)?;
                values[x * n + y] = e.mean;
                values[y * n + x] = e.mean;
                c_se[x * n + y] = e.std_error;
                c_se[y * n + x] = e.std_error;
            }
        }
        let h_n = disorder
            .values
            .iter()
            .zip(&magnetization)
            .map(|(g, m)| g * m)
            .sum::<f64>()
            / n as f64;
        Ok(GibbsSummary {
            log_partition: f64::NAN,
            psi: f64::NAN,
            magnetization,
            correlation: Correlation::Dense { n, values },
            h_n,
            source: SummarySource::Mcmc,
            errors: Some(SummaryErrors {
                magnetization: m_se,
                correlation: c_se,
            }),
        })
    }
}

/// Estimated Gibbs summary of one realization via a two-replica run.
pub fn mcmc_summary(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
    settings: &McmcSettings,
) -> Result<(GibbsSummary, TwoReplicaRun)> {
    let mut settings = settings.clone();
    settings.record_spins = true;
    let run = run_two_replicas(lattice, disorder, params, &settings)?;
    Ok((run.summary(disorder)?, run))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SeriesFormat {
    #[default]
    Jsonl,
    Text,
}

#[derive(Serialize)]
struct SeriesRow {
    sweep: u64,
    #[serde(rename = "R12")]
    r12: f64,
    #[serde(rename = "H_n")]
    hn: f64,
    energy: f64,
    #[serde(rename = "H_n_2")]
    hn_2: f64,
    energy_2: f64,
}

/// Dumps one record per measurement sweep. `H_n`/`energy` belong to the
/// first replica, `H_n_2`/`energy_2` to the second.
pub fn write_series<W: Write>(run: &TwoReplicaRun, format: SeriesFormat, mut out: W) -> Result<()> {
    if format == SeriesFormat::Text {
        writeln!(out, "# sweep R12 H_n energy H_n_2 energy_2")?;
    }
    for t in 0..run.r12.len() {
        let row = SeriesRow {
            sweep: run.sweep[t],
            r12: run.r12[t],
            hn: run.hn[0][t],
            energy: run.energy[0][t],
            hn_2: run.hn[1][t],
            energy_2: run.energy[1][t],
        };
        match format {
            SeriesFormat::Jsonl => {
                serde_json::to_writer(&mut out, &row)?;
                writeln!(out)?;
            }
            SeriesFormat::Text => writeln!(
                out,
                "{} {:?} {:?} {:?} {:?} {:?}",
                row.sweep, row.r12, row.hn, row.energy, row.hn_2, row.energy_2
            )?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::sample_disorder;
    use crate::gibbs::enumerate_gibbs;

    #[test]
    fn single_site_magnetization() {
        let l = LatticeSpec::new(1, 1).unwrap();
        let g = DisorderField::explicit(vec![0.6]);
        let p = ModelParams::new(1.0, 0.8).unwrap();
        let mut c = ChainState::new(1, 3, 0);
        let series: Vec<f64> = (0..1_000_000)
            .map(|_| {
                heat_bath_sweep(&mut c, &l, &g, p);
                f64::from(c.spins[0])
            })
            .collect();
        let e = estimate(&series).unwrap();
        let want = (0.8f64 * 0.6).tanh();
        assert!((e.mean - want).abs() < 3.0 * e.std_error, "{e:?} vs {want}");
    }

    #[test]
    fn zero_beta_sites_are_independent() {
        let l = LatticeSpec::new(2, 2).unwrap();
        let g = sample_disorder(&l, 1, 0);
        let p = ModelParams::new(0.0, 1.0).unwrap();
        let mut c = ChainState::new(4, 9, 0);
        let mut up = [0u32; 4];
        let sweeps = 200_000;
        for _ in 0..sweeps {
            heat_bath_sweep(&mut c, &l, &g, p);
            for x in 0..4 {
                up[x] += u32::from(c.spins[x] == 1);
            }
        }
        for x in 0..4 {
            let p_up = 1.0 / (1.0 + (-2.0 * g.values[x]).exp());
            let freq = f64::from(up[x]) / sweeps as f64;
            let se = (p_up * (1.0 - p_up) / sweeps as f64).sqrt();
            assert!((freq - p_up).abs() < 4.0 * se, "site {x}: {freq} vs {p_up}");
        }
    }

    #[test]
    fn square_matches_enumeration() {
        let l = LatticeSpec::new(2, 2).unwrap();
        let g = sample_disorder(&l, 5, 0);
        let p = ModelParams::new(0.7, 1.0).unwrap();
        let exact = enumerate_gibbs(&l, &g, p).unwrap();
        let mut c = ChainState::new(4, 12, 0);
        let mut series: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(1_000_000)).collect();
        for _ in 0..1_000_000 {
            heat_bath_sweep(&mut c, &l, &g, p);
            for x in 0..4 {
                series[x].push(f64::from(c.spins[x]));
            }
        }
        for x in 0..4 {
            let e = estimate(&series[x]).unwrap();
            assert!(
                (e.mean - exact.magnetization[x]).abs() < 3.0 * e.std_error,
                "site {x}: {e:?} vs {}",
                exact.magnetization[x]
            );
        }
    }

    #[test]
    fn two_replicas_overlap() {
        let l = LatticeSpec::new(2, 2).unwrap();
        let g = sample_disorder(&l, 5, 3);
        let p = ModelParams::new(0.5, 1.0).unwrap();
        let exact = enumerate_gibbs(&l, &g, p).unwrap();
        let r12_exact = exact.magnetization.iter().map(|m| m * m).sum::<f64>() / 4.0;
        let run = run_two_replicas(&l, &g, p, &McmcSettings::new(400_000, 1000, 77)).unwrap();
        assert!(run.r12.iter().all(|r| (-1.0..=1.0).contains(r)));
        let e = run.overlap_estimates().unwrap();
        assert!((e.r12.mean - r12_exact).abs() < 3.0 * e.r12.std_error);

        // nearly free spins: E R12 ~ 0, E R12^2 ~ 1/|V|
        let p = ModelParams::new(0.0, 1e-6).unwrap();
        let run = run_two_replicas(&l, &g, p, &McmcSettings::new(200_000, 100, 4)).unwrap();
        let e = run.overlap_estimates().unwrap();
        assert!(e.r12.mean.abs() < 3.0 * e.r12.std_error);
        assert!((e.r12_sq.mean - 0.25).abs() < 3.0 * e.r12_sq.std_error);
        assert!(e.r12.mean < 1.0);
    }

    #[test]
    fn deterministic_replay() {
        let l = LatticeSpec::new(2, 3).unwrap();
        let g = sample_disorder(&l, 1, 1);
        let p = ModelParams::new(0.4, 0.9).unwrap();
        let s = McmcSettings::new(2000, 100, 31);
        let a = run_two_replicas(&l, &g, p, &s).unwrap();
        let b = run_two_replicas(&l, &g, p, &s).unwrap();
        assert_eq!(a, b);
        let mut out_a = Vec::new();
        let mut out_b = Vec::new();
        write_series(&a, SeriesFormat::Jsonl, &mut out_a).unwrap();
        write_series(&b, SeriesFormat::Jsonl, &mut out_b).unwrap();
        assert_eq!(out_a, out_b);
        let c = run_two_replicas(&l, &g, p, &McmcSettings::new(2000, 100, 32)).unwrap();
        assert_ne!(a.r12, c.r12);
    }

    #[test]
    fn hn_is_bounded_and_arguments_checked() {
        let l = LatticeSpec::new(1, 8).unwrap();
        let g = sample_disorder(&l, 2, 0);
        let p = ModelParams::new(1.0, 1.0).unwrap();
        let run = run_two_replicas(&l, &g, p, &McmcSettings::new(500, 10, 1)).unwrap();
        let gmax = g.values.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(run.hn.iter().flatten().all(|h| h.abs() <= gmax));
        assert!(run_two_replicas(&l, &g, p, &McmcSettings::new(10, 10, 1)).is_err());
    }

    #[test]
    fn series_formats() {
        let l = LatticeSpec::new(1, 4).unwrap();
        let g = sample_disorder(&l, 2, 0);
        let p = ModelParams::new(1.0, 1.0).unwrap();
        let run = run_two_replicas(&l, &g, p, &McmcSettings::new(150, 0, 1)).unwrap();
        let mut text = Vec::new();
        write_series(&run, SeriesFormat::Text, &mut text).unwrap();
        let text = String::from_utf8(text).unwrap();
        assert_eq!(text.lines().count(), 151);
        let mut jsonl = Vec::new();
        write_series(&run, SeriesFormat::Jsonl, &mut jsonl).unwrap();
        let first: serde_json::Value =
            serde_json::from_str(std::str::from_utf8(&jsonl).unwrap().lines().next().unwrap())
                .unwrap();
        for key in ["sweep", "R12", "H_n", "energy"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
    }
}
