//! Finite boxes `[1, n]^d` of the integer lattice with free boundary.
//!
//! Sites are indexed row-major (last coordinate fastest). Disorder values are
//! bound to these indices, so the ordering is part of the reproducibility
//! contract and must not change.

use crate::error::{Result, RfimError};

/// Default cap on `n^d`.
pub const DEFAULT_MAX_SITES: usize = 1 << 22;

pub type Bond = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpec {
    d: usize,
    n: usize,
    sites: Vec<Vec<usize>>,
    bonds: Vec<Bond>,
    neighbors: Vec<Vec<usize>>,
}

impl LatticeSpec {
    /// Builds `V_n` in dimension `d` using the default site cap.
    pub fn new(d: usize, n: usize) -> Result<Self> {
        Self::with_cap(d, n, DEFAULT_MAX_SITES)
    }

    pub fn with_cap(d: usize, n: usize, max_sites: usize) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(RfimError::invalid(format!(
                "lattice needs d >= 1 and n >= 1 (got d={d}, n={n})"
            )));
        }
        let count = site_count(d, n).filter(|&c| c <= max_sites);
        let count = count.ok_or(RfimError::Capacity {
            what: "lattice sites",
            requested: (n as u128).checked_pow(d as u32).unwrap_or(u128::MAX),
            cap: max_sites as u128,
        })?;

        let strides: Vec<usize> = (0..d).map(|k| n.pow((d - 1 - k) as u32)).collect();
        let mut sites = Vec::with_capacity(count);
        let mut bonds = Vec::with_capacity(d * count);
        let mut neighbors = vec![Vec::with_capacity(2 * d); count];
        for idx in 0..count {
            let coords: Vec<usize> = strides.iter().map(|&s| (idx / s) % n + 1).collect();
            for (k, &c) in coords.iter().enumerate() {
                if c < n {
                    let j = idx + strides[k];
                    bonds.push((idx, j));
                    neighbors[idx].push(j);
                    neighbors[j].push(idx);
                }
            }
            sites.push(coords);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(LatticeSpec {
            d,
            n,
            sites,
            bonds,
            neighbors,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    /// Coordinates of every site, each in `1..=n`.
    pub fn sites(&self) -> &[Vec<usize>] {
        &self.sites
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.neighbors[site]
    }

    pub fn index_of(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.d || coords.iter().any(|&c| c == 0 || c > self.n) {
            return None;
        }
        Some(coords.iter().fold(0, |acc, &c| acc * self.n + (c - 1)))
    }

    /// Splits this box (side `m * n`) into `m^d` translates of `V_n`.
    pub fn block_partition(&self, n: usize, m: usize) -> Result<BlockPartition> {
        if n == 0 || m == 0 || n.checked_mul(m) != Some(self.n) {
            return Err(RfimError::invalid(format!(
                "lattice side {} is not m*n = {m}*{n}",
                self.n
            )));
        }
        let block_of = |idx: usize| -> usize {
            self.sites[idx]
                .iter()
                .fold(0, |acc, &c| acc * m + (c - 1) / n)
        };
        let num_blocks = m.pow(self.d as u32);
        let mut blocks = vec![Vec::new(); num_blocks];
        let assignment: Vec<usize> = (0..self.num_sites()).map(block_of).collect();
        for (idx, &b) in assignment.iter().enumerate() {
            blocks[b].push(idx);
        }
        let (cut_bonds, internal_bonds) = self
            .bonds
            .iter()
            .partition(|&&(x, y)| assignment[x] != assignment[y]);
        Ok(BlockPartition {
            m,
            n,
            blocks,
            assignment,
            cut_bonds,
            internal_bonds,
        })
    }
}

fn site_count(d: usize, n: usize) -> Option<usize> {
    n.checked_pow(u32::try_from(d).ok()?)
}

/// Expected bond count `d * n^(d-1) * (n-1)`.
pub fn expected_bond_count(d: usize, n: usize) -> usize {
    d * n.pow(d as u32 - 1) * (n - 1)
}

#[derive(Debug, Clone)]
pub struct BlockPartition {
    pub m: usize,
    pub n: usize,
    /// Site indices of each block, blocks ordered row-major by block coordinate.
    pub blocks: Vec<Vec<usize>>,
    /// Block id of every site.
    pub assignment: Vec<usize>,
    pub cut_bonds: Vec<Bond>,
    pub internal_bonds: Vec<Bond>,
}

impl BlockPartition {
    /// Upper bound `d * n^(d-1) * m^d` on the number of cut bonds.
    pub fn cut_bound(&self, d: usize) -> usize {
        d * self.n.pow(d as u32 - 1) * self.m.pow(d as u32)
    }
}
