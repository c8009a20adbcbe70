//! Replica exchange over an inverse-temperature ladder with a common field.
//!
//! Each rung keeps its own random stream; configurations move between rungs.
//! Swapping the configurations at `beta_i` and `beta_j` is accepted with
//! probability `min(1, exp((beta_i - beta_j) (B_j - B_i)))`, where `B` is the
//! bond sum. The field term is identical on every rung and cancels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{estimate_with_burn_in, heat_bath_sweep, stream_id, ChainState, McmcEstimate, McmcSettings};
use crate::disorder::DisorderField;
use crate::error::{Result, RfimError};
use crate::gibbs::ModelParams;
use crate::lattice::LatticeSpec;

const SWAP_RUNG: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Ensemble {
    betas: Vec<f64>,
    chains: Vec<ChainState>,
    swap_rng: ChaCha8Rng,
    target: usize,
    pub(crate) attempts: Vec<u64>,
    pub(crate) accepts: Vec<u64>,
}

fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(RfimError::invalid("tempering ladder is empty"));
    }
    if let Some(b) = ladder.iter().find(|b| !b.is_finite() || **b < 0.0) {
        return Err(RfimError::invalid(format!("ladder beta {b} must be finite and >= 0")));
    }
    Ok(())
}

impl Ensemble {
    pub(crate) fn new(
        lattice: &LatticeSpec,
        params: ModelParams,
        ladder: &[f64],
        seed: u64,
        replica: u32,
    ) -> Result<Self> {
        let target = ladder
            .iter()
            .position(|&b| (b - params.beta).abs() <= 1e-12 * params.beta.max(1.0))
            .ok_or_else(|| {
                RfimError::invalid(format!("ladder does not contain beta = {}", params.beta))
            })?;
        let mut e = Self::untargeted(lattice, ladder, seed, replica)?;
        e.target = target;
        Ok(e)
    }

    fn untargeted(lattice: &LatticeSpec, ladder: &[f64], seed: u64, replica: u32) -> Result<Self> {
        validate_ladder(ladder)?;
        let chains = (0..ladder.len())
            .map(|r| ChainState::new(lattice.num_sites(), seed, stream_id(replica, r as u32)))
            .collect();
        let mut swap_rng = ChaCha8Rng::seed_from_u64(seed);
        swap_rng.set_stream(stream_id(replica, SWAP_RUNG));
        let pairs = ladder.len().saturating_sub(1);
        Ok(Ensemble {
            betas: ladder.to_vec(),
            chains,
            swap_rng,
            target: 0,
            attempts: vec![0; pairs],
            accepts: vec![0; pairs],
        })
    }

    pub(crate) fn sweep(&mut self, lattice: &LatticeSpec, disorder: &DisorderField, h: f64) {
        for (chain, &beta) in self.chains.iter_mut().zip(&self.betas) {
            heat_bath_sweep(chain, lattice, disorder, ModelParams { beta, h });
        }
        for i in 0..self.betas.len().saturating_sub(1) {
            let bi = self.chains[i].bond_sum(lattice);
            let bj = self.chains[i + 1].bond_sum(lattice);
            let log_ratio = (self.betas[i] - self.betas[i + 1]) * (bj - bi);
            self.attempts[i] += 1;
            let accept = log_ratio >= 0.0 || self.swap_rng.random::<f64>() < log_ratio.exp();
            if accept {
                self.accepts[i] += 1;
                let (lo, hi) = self.chains.split_at_mut(i + 1);
                std::mem::swap(&mut lo[i].spins, &mut hi[0].spins);
            }
        }
    }

    pub(crate) fn target(&self) -> &ChainState {
        &self.chains[self.target]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RungSeries {
    pub beta: f64,
    /// Negative log weight at this rung's `beta`.
    pub energy: Vec<f64>,
    pub hn: Vec<f64>,
    pub spins: Option<Vec<Vec<i8>>>,
}

impl RungSeries {
    pub fn magnetization_estimates(&self, burn_in: usize) -> Result<Vec<McmcEstimate>> {
        let spins = self
            .spins
            .as_ref()
            .ok_or_else(|| RfimError::invalid("run did not record spin snapshots"))?;
        let n = spins.first().map_or(0, Vec::len);
        (0..n)
            .map(|x| {
                let s: Vec<f64> = spins.iter().map(|c| f64::from(c[x])).collect();
                estimate_with_burn_in(&s, burn_in)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperingRun {
    pub rungs: Vec<RungSeries>,
    /// Per adjacent pair `(i, i + 1)`.
    pub swap_attempts: Vec<u64>,
    pub swap_accepts: Vec<u64>,
    pub burn_in: usize,
}

impl TemperingRun {
    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.swap_attempts
            .iter()
            .zip(&self.swap_accepts)
            .map(|(&a, &k)| if a == 0 { 0.0 } else { k as f64 / a as f64 })
            .collect()
    }
}

/// Replica exchange on `ladder` at field strength `h`. Rung `r` uses stream
/// `stream_id(0, r)`, so a one-rung ladder reproduces a plain heat-bath chain
/// on stream 0 exactly.
pub fn parallel_tempering(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    ladder: &[f64],
    h: f64,
    settings: &McmcSettings,
) -> Result<TemperingRun> {
    settings.validate()?;
    disorder.check_len(lattice.num_sites())?;
    ModelParams::new(0.0, h)?;
    let mut ens = Ensemble::untargeted(lattice, ladder, settings.seed, 0)?;
    let mut rungs: Vec<RungSeries> = ladder
        .iter()
        .map(|&beta| RungSeries {
            beta,
            energy: Vec::new(),
            hn: Vec::new(),
            spins: settings.record_spins.then(Vec::new),
        })
        .collect();
    for sweep in 0..settings.sweeps {
        ens.sweep(lattice, disorder, h);
        if sweep < settings.burn_in {
            continue;
        }
        for (rung, chain) in rungs.iter_mut().zip(&ens.chains) {
            let params = ModelParams { beta: rung.beta, h };
            rung.energy.push(chain.energy(lattice, disorder, params));
            rung.hn.push(chain.hn(disorder));
            if let Some(s) = rung.spins.as_mut() {
                s.push(chain.spins.clone());
            }
        }
    }
    Ok(TemperingRun {
        rungs,
        swap_attempts: ens.attempts,
        swap_accepts: ens.accepts,
        burn_in: settings.burn_in,
    })
}
