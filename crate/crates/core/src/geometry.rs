//! Equal-size coordinate partitions and the block norms they induce.
//!
//! A partition of `[d]` into `n` blocks of size `d / n` defines the block norm
//! `‖x‖ = Σ_j ‖x_{B_j}‖₂`, which is the L2 norm for `n = 1` and the L1 norm for
//! `n = d`. Its dual is `max_j ‖x_{B_j}‖₂`.
//!
//! Coordinates are 0-based throughout the crate.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};

/// An immutable partition of `0..d` into `n` nonempty blocks. The random and
/// contiguous constructors give equal sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    d: usize,
    block_of: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Blocks of consecutive indices: `{0..d/n}, {d/n..2d/n}, ...`.
    pub fn contiguous(d: usize, n: usize) -> Result<Self> {
        check_divides(d, n)?;
        let size = d / n;
        Self::from_block_of((0..d).map(|i| i / size).collect())
    }

    /// Builds a partition from a block id per coordinate. Block ids must be
    /// `0..n` with every block nonempty.
    pub fn from_block_of(block_of: Vec<usize>) -> Result<Self> {
        let d = block_of.len();
        if d == 0 {
            return Err(invalid("partition of an empty index set"));
        }
        let n = block_of.iter().max().map_or(0, |&m| m + 1);
        let mut blocks = vec![Vec::new(); n];
        for (i, &b) in block_of.iter().enumerate() {
            blocks[b].push(i);
        }
        if blocks.iter().any(Vec::is_empty) {
            return Err(invalid("block ids must be 0..n with every block nonempty"));
        }
        Ok(Partition {
            d,
            block_of,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Size of the largest block.
    pub fn block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn block_of(&self) -> &[usize] {
        &self.block_of
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// `‖x_{B_j}‖₂` for every block.
    pub fn block_l2_norms(&self, x: &[f64]) -> Vec<f64> {
        let mut sq = vec![0.0; self.blocks.len()];
        for (i, &xi) in x.iter().enumerate() {
            sq[self.block_of[i]] += xi * xi;
        }
        sq.into_iter().map(f64::sqrt).collect()
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = crate::error::Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Partition::from_block_of(v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.block_of
    }
}

fn check_divides(d: usize, n: usize) -> Result<()> {
    if d == 0 || n == 0 || !d.is_multiple_of(n) {
        return Err(invalid(format!(
            "block count {n} must divide dimension {d}"
        )));
    }
    Ok(())
}

/// Uniformly random equal-size partition: shuffle `0..d`, then cut the
/// permutation into `n` consecutive runs of length `d / n`.
pub fn random_equal_partition<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    rng: &mut R,
) -> Result<Partition> {
    check_divides(d, n)?;
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    let size = d / n;
    let mut block_of = vec![0; d];
    for (pos, &i) in perm.iter().enumerate() {
        block_of[i] = pos / size;
    }
    Partition::from_block_of(block_of)
}

/// `Σ_j ‖x_{B_j}‖₂`.
pub fn block_norm(x: &[f64], p: &Partition) -> Result<f64> {
    check_len(x.len(), p.dim(), "block_norm")?;
    Ok(p.block_l2_norms(x).iter().sum())
}

/// `max_j ‖x_{B_j}‖₂`.
pub fn dual_block_norm(x: &[f64], p: &Partition) -> Result<f64> {
    check_len(x.len(), p.dim(), "dual_block_norm")?;
    Ok(p.block_l2_norms(x).into_iter().fold(0.0, f64::max))
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub(crate) fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}
