use crate::disorder::DisorderField;
use crate::error::{Result, RfimError};
use crate::lattice::{Bond, LatticeSpec};

use super::{Correlation, GibbsSummary, ModelParams, SummarySource};

pub const DEFAULT_ENUMERATION_CAP: usize = 22;

/// All spin moments of the Gibbs measure on a small system.
///
/// Configurations are indexed by bit masks with bit `s` set when `s_s = -1`.
/// After a Walsh–Hadamard transform of the normalized weights, entry `S` of
/// `moments` is `<prod_{s in S} s_s>`.
#[derive(Debug, Clone)]
pub struct ExactGibbs {
    num_sites: usize,
    log_z: f64,
    moments: Vec<f64>,
}

impl ExactGibbs {
    pub fn new(
        lattice: &LatticeSpec,
        disorder: &DisorderField,
        params: ModelParams,
    ) -> Result<Self> {
        Self::with_bonds(lattice.num_sites(), lattice.bonds(), disorder, params)
    }

    /// Enumerates with an arbitrary bond set on `num_sites` sites.
    pub fn with_bonds(
        num_sites: usize,
        bonds: &[Bond],
        disorder: &DisorderField,
        params: ModelParams,
    ) -> Result<Self> {
        Self::with_bonds_capped(num_sites, bonds, disorder, params, DEFAULT_ENUMERATION_CAP)
    }

    fn with_bonds_capped(
        num_sites: usize,
        bonds: &[Bond],
        disorder: &DisorderField,
        params: ModelParams,
        cap: usize,
    ) -> Result<Self> {
        let mut weights = log_weights(num_sites, bonds, disorder, params, cap)?;
        let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for w in &mut weights {
            *w = (*w - max).exp();
        }
        walsh_hadamard(&mut weights);
        let z = weights[0];
        for w in &mut weights {
            *w /= z;
        }
        weights[0] = 1.0;
        Ok(ExactGibbs {
            num_sites,
            log_z: max + z.ln(),
            moments: weights,
        })
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    /// `<prod_{s in mask} s_s>`.
    pub fn moment_mask(&self, mask: usize) -> f64 {
        self.moments[mask]
    }

    /// `<s_{x_1} ... s_{x_k}>` for a multiset of sites.
    pub fn moment(&self, sites: &[usize]) -> Result<f64> {
        let mut mask = 0usize;
        for &s in sites {
            if s >= self.num_sites {
                return Err(RfimError::invalid(format!(
                    "site {s} out of range for {} sites",
                    self.num_sites
                )));
            }
            mask ^= 1 << s;
        }
        Ok(self.moments[mask])
    }

    pub fn magnetization(&self, x: usize) -> f64 {
        self.moments[1 << x]
    }

    pub fn correlation(&self, x: usize, y: usize) -> f64 {
        self.moments[(1 << x) ^ (1 << y)]
    }

    pub fn summary(&self, disorder: &DisorderField) -> GibbsSummary {
        let n = self.num_sites;
        let magnetization: Vec<f64> = (0..n).map(|x| self.magnetization(x)).collect();
        let mut values = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                values[x * n + y] = self.correlation(x, y);
            }
        }
        let h_n = if n == 0 {
            0.0
        } else {
            disorder
                .values
                .iter()
                .zip(&magnetization)
                .map(|(g, m)| g * m)
                .sum::<f64>()
                / n as f64
        };
        GibbsSummary {
            log_partition: self.log_z,
            psi: self.log_z / n as f64,
            magnetization,
            correlation: Correlation::Dense { n, values },
            h_n,
            source: SummarySource::ExactEnumeration,
            errors: None,
        }
    }
}

/// Log Boltzmann weight of every configuration, visited in Gray-code order
/// so each step flips one spin and updates the energy from its neighbors.
fn log_weights(
    num_sites: usize,
    bonds: &[Bond],
    disorder: &DisorderField,
    params: ModelParams,
    cap: usize,
) -> Result<Vec<f64>> {
    if num_sites > cap {
        return Err(RfimError::Capacity {
            what: "enumeration sites",
            requested: num_sites as u128,
            cap: cap as u128,
        });
    }
    disorder.check_len(num_sites)?;
    let mut neighbors = vec![Vec::new(); num_sites];
    for &(x, y) in bonds {
        if x >= num_sites || y >= num_sites {
            return Err(RfimError::invalid(format!("bond ({x}, {y}) out of range")));
        }
        neighbors[x].push(y);
        neighbors[y].push(x);
    }
    let field: Vec<f64> = disorder.values.iter().map(|g| params.h * g).collect();

    let total = 1usize << num_sites;
    let mut out = vec![0.0; total];
    let mut spins = vec![1.0f64; num_sites];
    let mut energy = params.beta * bonds.len() as f64 + field.iter().sum::<f64>();
    let mut state = 0usize;
    out[0] = energy;
    for i in 1..total {
        let k = i.trailing_zeros() as usize;
        let local = params.beta * neighbors[k].iter().map(|&y| spins[y]).sum::<f64>() + field[k];
        energy -= 2.0 * spins[k] * local;
        spins[k] = -spins[k];
        state ^= 1 << k;
        out[state] = energy;
    }
    Ok(out)
}

fn walsh_hadamard(v: &mut [f64]) {
    let n = v.len();
    let mut half = 1;
    while half < n {
        for block in v.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half *= 2;
    }
}

pub(crate) fn log_partition_with_bonds(
    num_sites: usize,
    bonds: &[Bond],
    disorder: &DisorderField,
    params: ModelParams,
) -> Result<f64> {
    let lw = log_weights(num_sites, bonds, disorder, params, DEFAULT_ENUMERATION_CAP)?;
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = lw.iter().map(|w| (w - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Exact summary by enumerating all `2^|V|` configurations.
pub fn enumerate_gibbs(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
) -> Result<GibbsSummary> {
    enumerate_gibbs_with_cap(lattice, disorder, params, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_gibbs_with_cap(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
    cap: usize,
) -> Result<GibbsSummary> {
    let exact =
        ExactGibbs::with_bonds_capped(lattice.num_sites(), lattice.bonds(), disorder, params, cap)?;
    Ok(exact.summary(disorder))
}

/// Exact `<s_{x_1} ... s_{x_k}>`; repeated sites cancel in pairs.
pub fn gibbs_moment(
    lattice: &LatticeSpec,
    disorder: &DisorderField,
    params: ModelParams,
    sites: &[usize],
) -> Result<f64> {
    ExactGibbs::new(lattice, disorder, params)?.moment(sites)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::sample_disorder;

    fn params(beta: f64, h: f64) -> ModelParams {
        ModelParams::new(beta, h).unwrap()
    }

    /// Direct sum over configurations, energies recomputed from scratch.
    fn naive_moment(l: &LatticeSpec, g: &[f64], p: ModelParams, sites: &[usize]) -> (f64, f64) {
        let n = l.num_sites();
        let energies: Vec<(f64, f64)> = (0..1usize << n)
            .map(|c| {
                let s = |i: usize| if c >> i & 1 == 1 { -1.0 } else { 1.0 };
                let e = p.beta * l.bonds().iter().map(|&(x, y)| s(x) * s(y)).sum::<f64>()
                    + p.h * (0..n).map(|x| g[x] * s(x)).sum::<f64>();
                (e, sites.iter().map(|&x| s(x)).product())
            })
            .collect();
        let max = energies.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = energies.iter().map(|e| (e.0 - max).exp()).sum();
        let num: f64 = energies.iter().map(|e| (e.0 - max).exp() * e.1).sum();
        (max + z.ln(), num / z)
    }

    #[test]
    fn single_site_closed_form() {
        let l = LatticeSpec::new(1, 1).unwrap();
        let g = DisorderField::explicit(vec![0.7]);
        let s = enumerate_gibbs(&l, &g, params(1.0, 1.0)).unwrap();
        assert!((s.log_partition - (2.0 * 0.7f64.cosh()).ln()).abs() < 1e-14);
        assert!((s.magnetization[0] - 0.7f64.tanh()).abs() < 1e-14);
        assert!((s.h_n - 0.7 * 0.7f64.tanh()).abs() < 1e-14);
    }

    #[test]
    fn two_spin_closed_form() {
        let l = LatticeSpec::new(1, 2).unwrap();
        let g = DisorderField::zeros(2);
        let s = enumerate_gibbs(&l, &g, params(1.0, 1.0)).unwrap();
        let e = std::f64::consts::E;
        assert!((s.log_partition - (2.0 * e + 2.0 / e).ln()).abs() < 1e-14);
        assert!(s.magnetization.iter().all(|m| m.abs() < 1e-15));
        assert!((s.correlation_at(0, 1) - 1f64.tanh()).abs() < 1e-14);
        assert!((s.correlation_at(0, 1) - 0.761594).abs() < 1e-6);
    }

    #[test]
    fn product_measure_at_zero_beta() {
        let l = LatticeSpec::new(2, 3).unwrap();
        let g = sample_disorder(&l, 3, 0);
        let p = params(0.0, 0.8);
        let s = enumerate_gibbs(&l, &g, p).unwrap();
        let f: f64 = g.values.iter().map(|x| (2.0 * (p.h * x).cosh()).ln()).sum();
        assert!((s.log_partition - f).abs() < 1e-12);
        for x in 0..9 {
            let mx = (p.h * g.values[x]).tanh();
            assert!((s.magnetization[x] - mx).abs() < 1e-13);
            for y in 0..9 {
                let want = if x == y { 1.0 } else { mx * (p.h * g.values[y]).tanh() };
                assert!((s.correlation_at(x, y) - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn moments_match_brute_force() {
        let l = LatticeSpec::new(1, 3).unwrap();
        let g = DisorderField::explicit(vec![0.3, -1.1, 0.6]);
        let p = params(0.9, 1.3);
        let ex = ExactGibbs::new(&l, &g, p).unwrap();
        assert_eq!(ex.moment(&[]).unwrap(), 1.0);
        assert!((ex.moment(&[1, 1]).unwrap() - 1.0).abs() < 1e-14);
        let (f, m3) = naive_moment(&l, &g.values, p, &[0, 1, 2]);
        assert!((ex.moment(&[0, 1, 2]).unwrap() - m3).abs() < 1e-12);
        assert!((ex.log_partition() - f).abs() < 1e-12);
        let (_, m1) = naive_moment(&l, &g.values, p, &[2]);
        assert!((ex.moment(&[2, 0, 0]).unwrap() - m1).abs() < 1e-12);
        assert!(ex.moment(&[3]).is_err());
    }

    #[test]
    fn no_overflow_at_strong_coupling() {
        let l = LatticeSpec::new(2, 3).unwrap();
        let g = sample_disorder(&l, 5, 1);
        let s = enumerate_gibbs(&l, &g, params(50.0, 50.0)).unwrap();
        assert!(s.log_partition.is_finite());
        assert!(s.magnetization.iter().all(|m| m.is_finite() && m.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn capacity() {
        let l = LatticeSpec::new(2, 5).unwrap();
        let g = DisorderField::zeros(25);
        assert!(matches!(
            enumerate_gibbs(&l, &g, params(1.0, 1.0)),
            Err(RfimError::Capacity { .. })
        ));
        let l = LatticeSpec::new(2, 3).unwrap();
        assert!(matches!(
            enumerate_gibbs_with_cap(&l, &DisorderField::zeros(9), params(1.0, 1.0), 8),
            Err(RfimError::Capacity { .. })
        ));
        assert!(enumerate_gibbs(&l, &DisorderField::zeros(4), params(1.0, 1.0)).is_err());
    }

    #[test]
    fn walsh_small() {
        let mut v = vec![1.0, 2.0, 3.0, 4.0];
        walsh_hadamard(&mut v);
        assert_eq!(v, vec![10.0, -2.0, -4.0, 0.0]);
    }
}
