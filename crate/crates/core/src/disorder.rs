//! Quenched Gaussian fields and Gauss–Hermite grids for exact disorder averages.
//!
//! Field values come from a counter-based stream: the value at a site is a
//! pure function of `(seed, realization_id, site)`. The ChaCha block cipher is
//! keyed by the seed, the realization id selects the stream, and the site
//! index selects the word position, so fields can be generated in any order
//! or in parallel and still match bit-for-bit.

use std::io::{BufRead, Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, RfimError};
use crate::lattice::LatticeSpec;

/// Default cap on the number of tensor-product quadrature nodes.
pub const DEFAULT_MAX_NODES: usize = 4_000_000;
/// Default cap on the number of sites a quadrature grid may span.
pub const DEFAULT_MAX_QUADRATURE_SITES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisorderOrigin {
    Sampled { seed: u64, realization_id: u64 },
    /// Supplied directly, e.g. a quadrature node or a hand-written test field.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisorderField {
    pub origin: DisorderOrigin,
    pub values: Vec<f64>,
}

impl DisorderField {
    pub fn explicit(values: Vec<f64>) -> Self {
        DisorderField {
            origin: DisorderOrigin::Explicit,
            values,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self::explicit(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        match self.origin {
            DisorderOrigin::Sampled { seed, .. } => Some(seed),
            DisorderOrigin::Explicit => None,
        }
    }

    pub fn realization_id(&self) -> Option<u64> {
        match self.origin {
            DisorderOrigin::Sampled { realization_id, .. } => Some(realization_id),
            DisorderOrigin::Explicit => None,
        }
    }

    /// Field with every value negated; `F` is invariant under this map.
    pub fn negated(&self) -> Self {
        DisorderField {
            origin: self.origin,
            values: self.values.iter().map(|g| -g).collect(),
        }
    }

    pub fn check_len(&self, sites: usize) -> Result<()> {
        if self.values.len() != sites {
            return Err(RfimError::invalid(format!(
                "disorder has {} values but lattice has {sites} sites",
                self.values.len()
            )));
        }
        Ok(())
    }
}

fn stream(seed: u64, realization_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(realization_id);
    rng
}

/// Maps 64 random bits to the open interval (0, 1).
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Disorder value at a single site, independent of every other site.
pub fn disorder_value(seed: u64, realization_id: u64, site: usize) -> f64 {
    let mut rng = stream(seed, realization_id);
    rng.set_word_pos(2 * site as u128);
    standard_normal().inverse_cdf(open_unit(rng.next_u64()))
}

/// Draws one realization of i.i.d. standard Gaussian fields on `lattice`.
pub fn sample_disorder(lattice: &LatticeSpec, seed: u64, realization_id: u64) -> DisorderField {
    let normal = standard_normal();
    let mut rng = stream(seed, realization_id);
    let values = (0..lattice.num_sites())
        .map(|_| normal.inverse_cdf(open_unit(rng.next_u64())))
        .collect();
    DisorderField {
        origin: DisorderOrigin::Sampled {
            seed,
            realization_id,
        },
        values,
    }
}

/// One-dimensional probabilists' Gauss–Hermite rule for the standard normal
/// measure, via the eigen-decomposition of the Jacobi matrix. Weights sum to 1.
pub fn hermite_rule(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(RfimError::invalid("quadrature order must be >= 1"));
    }
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let off = (k as f64).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // The rule is symmetric about 0; averaging mirrored entries makes odd
    // moments vanish to rounding.
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order {
        let j = order - 1 - i;
        nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
        weights[i] = 0.5 * (pairs[i].1 + pairs[j].1);
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((nodes, weights))
}

/// Trapezoidal rule for the standard normal measure on
/// `[-half_width, half_width]` with spacing `step`. For integrands analytic in
/// the strip `|Im g| < a` the error decays like `exp(-2 pi a / step)`, far
/// faster than Gauss–Hermite when `a` is small. Weights sum to 1.
pub fn trapezoid_rule(step: f64, half_width: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(step > 0.0 && half_width > 0.0 && half_width / step < 1e7) {
        return Err(RfimError::invalid("trapezoid rule needs step > 0 and half_width > 0"));
    }
    let k = (half_width / step).floor() as i64;
    let nodes: Vec<f64> = (-k..=k).map(|i| i as f64 * step).collect();
    let mut weights: Vec<f64> = nodes.iter().map(|x| (-0.5 * x * x).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((nodes, weights))
}

/// Half width used by [`trapezoid_grid`]; the normal tail beyond it is below 1e-18.
pub const TRAPEZOID_HALF_WIDTH: f64 = 9.0;

/// Trapezoid spacing for integrands built from `tanh(h g)` and
/// `log cosh(h g)`, whose nearest complex singularity sits at `|Im g| = pi / (2 h)`.
/// The leading error term is about `exp(-pi^2 / (h step))`, below 1e-16; the
/// margin absorbs the larger residues of high powers of `tanh`.
pub fn trapezoid_step_for(h: f64) -> f64 {
    (0.25 / h).min(0.3)
}

/// Tensor-product grid over all sites of a lattice.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    /// One-dimensional nodes per site.
    pub order: usize,
    pub sites: usize,
    rule_nodes: Vec<f64>,
    rule_weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.order.pow(self.sites as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node `index` as a disorder vector and its weight; the first site varies slowest.
    pub fn node(&self, index: usize) -> (Vec<f64>, f64) {
        let mut values = vec![0.0; self.sites];
        let mut weight = 1.0;
        let mut rem = index;
        for s in (0..self.sites).rev() {
            let k = rem % self.order;
            rem /= self.order;
            values[s] = self.rule_nodes[k];
            weight *= self.rule_weights[k];
        }
        (values, weight)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }
}

pub fn gauss_hermite_grid(lattice: &LatticeSpec, order: usize) -> Result<QuadratureGrid> {
    gauss_hermite_grid_with_caps(
        lattice,
        order,
        DEFAULT_MAX_NODES,
        DEFAULT_MAX_QUADRATURE_SITES,
    )
}

pub fn gauss_hermite_grid_with_caps(
    lattice: &LatticeSpec,
    order: usize,
    max_nodes: usize,
    max_sites: usize,
) -> Result<QuadratureGrid> {
    check_grid_caps(lattice, order, max_nodes, max_sites)?;
    let (rule_nodes, rule_weights) = hermite_rule(order)?;
    Ok(QuadratureGrid {
        order,
        sites: lattice.num_sites(),
        rule_nodes,
        rule_weights,
    })
}

fn check_grid_caps(lattice: &LatticeSpec, order: usize, max_nodes: usize, max_sites: usize) -> Result<()> {
    let sites = lattice.num_sites();
    if sites > max_sites {
        return Err(RfimError::Capacity {
            what: "quadrature sites",
            requested: sites as u128,
            cap: max_sites as u128,
        });
    }
    let count = (order as u128).checked_pow(sites as u32).unwrap_or(u128::MAX);
    if count > max_nodes as u128 {
        return Err(RfimError::Capacity {
            what: "quadrature nodes",
            requested: count,
            cap: max_nodes as u128,
        });
    }
    Ok(())
}

/// Tensor grid of the trapezoidal rule with spacing `step` over `[-9, 9]`.
pub fn trapezoid_grid(lattice: &LatticeSpec, step: f64) -> Result<QuadratureGrid> {
    let (rule_nodes, rule_weights) = trapezoid_rule(step, TRAPEZOID_HALF_WIDTH)?;
    let order = rule_nodes.len();
    check_grid_caps(lattice, order, DEFAULT_MAX_NODES, DEFAULT_MAX_QUADRATURE_SITES)?;
    Ok(QuadratureGrid {
        order,
        sites: lattice.num_sites(),
        rule_nodes,
        rule_weights,
    })
}

/// Deterministic `E[f(g)]` over the tensor grid, for vector-valued `f`.
///
/// Node evaluations may run in parallel; the weighted sum is accumulated in
/// node order so the result does not depend on the thread schedule.
pub fn disorder_average_many<F>(grid: &QuadratureGrid, functional: F) -> Result<Vec<f64>>
where
    F: Fn(&DisorderField) -> Result<Vec<f64>> + Sync,
{
    const CHUNK: usize = 1 << 16;
    let mut acc: Vec<f64> = Vec::new();
    let mut width = None;
    for start in (0..grid.len()).step_by(CHUNK) {
        let evals: Vec<(f64, Vec<f64>)> = (start..grid.len().min(start + CHUNK))
            .into_par_iter()
            .map(|i| {
                let (values, w) = grid.node(i);
                functional(&DisorderField::explicit(values)).map(|v| (w, v))
            })
            .collect::<Result<_>>()?;
        for (w, v) in &evals {
            let expected = *width.get_or_insert(v.len());
            if v.len() != expected {
                return Err(RfimError::invalid("functional returned vectors of varying length"));
            }
            acc.resize(expected, 0.0);
            for (a, x) in acc.iter_mut().zip(v) {
                *a += w * x;
            }
        }
    }
    Ok(acc)
}

/// Deterministic `E[f(g)]` for a scalar functional of the disorder.
pub fn disorder_average<F>(lattice: &LatticeSpec, order: usize, functional: F) -> Result<f64>
where
    F: Fn(&DisorderField) -> Result<f64> + Sync,
{
    let grid = gauss_hermite_grid(lattice, order)?;
    let v = disorder_average_many(&grid, |g| functional(g).map(|x| vec![x]))?;
    Ok(v[0])
}

const BINARY_MAGIC: &[u8; 8] = b"RFIMDIS1";

/// Writes a field as text: a header line with its tag, then one value per line.
pub fn write_text<W: Write>(field: &DisorderField, mut out: W) -> Result<()> {
    match field.origin {
        DisorderOrigin::Sampled {
            seed,
            realization_id,
        } => writeln!(
            out,
            "# rfim-disorder seed={seed} realization_id={realization_id} sites={}",
            field.len()
        )?,
        DisorderOrigin::Explicit => {
            writeln!(out, "# rfim-disorder explicit sites={}", field.len())?
        }
    }
    for v in &field.values {
        // `{:?}` prints the shortest representation that round-trips exactly.
        writeln!(out, "{v:?}")?;
    }
    Ok(())
}

pub fn read_text<R: BufRead>(input: R) -> Result<DisorderField> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| RfimError::invalid("empty disorder file"))??;
    let rest = header
        .strip_prefix("# rfim-disorder ")
        .ok_or_else(|| RfimError::invalid("missing rfim-disorder header"))?;
    let mut seed = None;
    let mut rid = None;
    let mut sites = None;
    for tok in rest.split_whitespace() {
        match tok.split_once('=') {
            Some(("seed", v)) => seed = v.parse::<u64>().ok(),
            Some(("realization_id", v)) => rid = v.parse::<u64>().ok(),
            Some(("sites", v)) => sites = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let mut values = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(
            t.parse::<f64>()
                .map_err(|e| RfimError::invalid(format!("bad disorder value {t:?}: {e}")))?,
        );
    }
    if let Some(n) = sites {
        if n != values.len() {
            return Err(RfimError::invalid(format!(
                "header says {n} sites, file has {}",
                values.len()
            )));
        }
    }
    let origin = match (seed, rid) {
        (Some(seed), Some(realization_id)) => DisorderOrigin::Sampled {
            seed,
            realization_id,
        },
        _ => DisorderOrigin::Explicit,
    };
    Ok(DisorderField { origin, values })
}

/// Binary layout: magic `RFIMDIS1`, flag byte (1 = sampled), seed, realization
/// id and count as little-endian u64, then the values as little-endian f64.
pub fn write_binary<W: Write>(field: &DisorderField, mut out: W) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    let (flag, seed, rid) = match field.origin {
        DisorderOrigin::Sampled {
            seed,
            realization_id,
        } => (1u8, seed, realization_id),
        DisorderOrigin::Explicit => (0u8, 0, 0),
    };
    out.write_all(&[flag])?;
    out.write_all(&seed.to_le_bytes())?;
    out.write_all(&rid.to_le_bytes())?;
    out.write_all(&(field.len() as u64).to_le_bytes())?;
    for v in &field.values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<DisorderField> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(RfimError::invalid("not an rfim binary disorder file"));
    }
    let mut flag = [0u8; 1];
    input.read_exact(&mut flag)?;
    let mut word = [0u8; 8];
    let mut next_u64 = |input: &mut R| -> Result<u64> {
        input.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let seed = next_u64(&mut input)?;
    let realization_id = next_u64(&mut input)?;
    let count = next_u64(&mut input)? as usize;
    let mut values = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        values.push(f64::from_bits(next_u64(&mut input)?));
    }
    let origin = if flag[0] == 1 {
        DisorderOrigin::Sampled {
            seed,
            realization_id,
        }
    } else {
        DisorderOrigin::Explicit
    };
    Ok(DisorderField { origin, values })
}
