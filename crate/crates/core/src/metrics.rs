//! Rand Index and Adjusted Rand Index, counted through the contingency table.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::biclusters::Partition;
use crate::error::{Result, SubicError};

/// Pair counts shared by both indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    /// Pairs co-clustered in both partitions.
    pub together_both: u64,
    /// Pairs co-clustered in the first partition.
    pub together_a: u64,
    /// Pairs co-clustered in the second partition.
    pub together_b: u64,
    pub total: u64,
}

fn choose2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

pub fn pair_counts(a: &Partition, b: &Partition) -> Result<PairCounts> {
    if a.m() != b.m() {
        return Err(SubicError::DimensionMismatch(format!(
            "partitions over {} and {} items",
            a.m(),
            b.m()
        )));
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    for (&la, &lb) in a.labels().iter().zip(b.labels()) {
        *table.entry((la, lb)).or_default() += 1;
    }
    let together_both = table.values().map(|&c| choose2(c)).sum();
    let together_a = a.sizes().iter().map(|&c| choose2(c as u64)).sum();
    let together_b = b.sizes().iter().map(|&c| choose2(c as u64)).sum();
    Ok(PairCounts {
        together_both,
        together_a,
        together_b,
        total: choose2(a.m() as u64),
    })
}

/// Fraction of item pairs on which the two partitions agree.
pub fn rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    let c = pair_counts(a, b)?;
    if c.total == 0 {
        return Ok(1.0);
    }
    let agree = c.total + 2 * c.together_both - c.together_a - c.together_b;
    Ok(agree as f64 / c.total as f64)
}

/// Chance-corrected Rand Index.
///
/// When the index is degenerate (both partitions all singletons, or both a
/// single cluster) the result is 1 for equal partitions and 0 otherwise.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    let c = pair_counts(a, b)?;
    let index = c.together_both as f64;
    let (sa, sb) = (c.together_a as f64, c.together_b as f64);
    let expected = if c.total == 0 { 0.0 } else { sa * sb / c.total as f64 };
    let max = 0.5 * (sa + sb);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// Labels each cell `(i, j)` of an n x p matrix (row-major) by its
/// (row cluster, column cluster) pair.
pub fn cell_partition(rows: &Partition, cols: &Partition) -> Partition {
    let kc = cols.k();
    let ids: Vec<usize> = rows
        .labels()
        .iter()
        .flat_map(|&r| cols.labels().iter().map(move |&c| r * kc + c))
        .collect();
    Partition::from_labels(&ids)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub ri: f64,
    pub ari: f64,
}

impl Agreement {
    pub fn between(a: &Partition, b: &Partition) -> Result<Self> {
        Ok(Agreement {
            ri: rand_index(a, b)?,
            ari: adjusted_rand_index(a, b)?,
        })
    }
}

/// Cell, row and column agreement between an estimated and a true checkerboard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiclusterScores {
    pub cell: Agreement,
    pub rows: Agreement,
    pub cols: Agreement,
}

pub fn score_biclusters(
    est_rows: &Partition,
    est_cols: &Partition,
    true_rows: &Partition,
    true_cols: &Partition,
) -> Result<BiclusterScores> {
    Ok(BiclusterScores {
        cell: Agreement::between(&cell_partition(est_rows, est_cols), &cell_partition(true_rows, true_cols))?,
        rows: Agreement::between(est_rows, true_rows)?,
        cols: Agreement::between(est_cols, true_cols)?,
    })
}
