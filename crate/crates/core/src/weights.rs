//! Sparse Gaussian-kernel fusion weights over column pairs (`w`) and row
//! pairs (`h`).
//!
//! Each weight is the sum of an unsupervised kernel on the data distance and,
//! when supervision is on, a kernel on a target-derived dissimilarity:
//!
//! * columns: `exp(-phi |X.i - X.j|^2) + exp(-phi |corr(X.i, Y) - corr(X.j, Y)|)`
//! * rows: `exp(-phi |Xi. - Xj.|^2) + exp(-phi sqrt|Yi - Yj|)`
//!
//! Only pairs in the symmetrized k-nearest-neighbour graph of the axis carry a
//! weight. Totals are then rescaled to `1/sqrt(p)` (columns) and `1/sqrt(n)`
//! (rows).

use std::collections::BTreeSet;
use std::io::Write;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::config::FitConfig;
use crate::data::{write_matrix_csv, DataMatrix, TargetVector};
use crate::error::{Result, SubicError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPair {
    pub i: usize,
    pub j: usize,
    /// Unsupervised kernel part, after normalization.
    pub unsup: f64,
    /// Supervised kernel part, after normalization.
    pub sup: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    /// Column pairs `(i, j)`, `i < j`, sorted.
    pub col_pairs: Vec<WeightedPair>,
    /// Row pairs `(i, j)`, `i < j`, sorted.
    pub row_pairs: Vec<WeightedPair>,
    pub n: usize,
    pub p: usize,
    pub phi: f64,
    pub knn: usize,
    pub supervised: bool,
    /// Column weight total before normalization.
    pub col_sum: f64,
    /// Row weight total before normalization.
    pub row_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis2 {
    Rows,
    Columns,
}

impl WeightSet {
    pub fn pairs(&self, axis: Axis2) -> &[WeightedPair] {
        match axis {
            Axis2::Rows => &self.row_pairs,
            Axis2::Columns => &self.col_pairs,
        }
    }

    /// Dumps the weight graph as `axis,i,j,w_unsup,w_sup,w_total`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let header: Vec<String> = ["axis", "i", "j", "w_unsup", "w_sup", "w_total"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows: Vec<Vec<String>> = [("col", &self.col_pairs), ("row", &self.row_pairs)]
            .iter()
            .flat_map(|(axis, pairs)| {
                pairs.iter().map(move |pr| {
                    vec![
                        axis.to_string(),
                        pr.i.to_string(),
                        pr.j.to_string(),
                        format!("{:?}", pr.unsup),
                        format!("{:?}", pr.sup),
                        format!("{:?}", pr.weight),
                    ]
                })
            })
            .collect();
        write_matrix_csv(out, &header, &rows)
    }
}

/// Pearson correlation; zero when either input has no variance.
pub fn pearson_corr(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SubicError::DimensionMismatch(format!(
            "correlation of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(SubicError::TooSmall("correlation needs at least 2 observations".into()));
    }
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (da, db) = (x - ma, y - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Symmetrized k-nearest-neighbour pair set of a distance matrix.
///
/// `{i, j}` is kept when either endpoint lists the other among its `k`
/// nearest; equal distances resolve to the lower index.
pub fn knn_mask(dist: &Array2<f64>, k: usize) -> Result<BTreeSet<(usize, usize)>> {
    if k < 1 {
        return Err(SubicError::InvalidConfig("knn must be >= 1".into()));
    }
    let m = dist.nrows();
    if dist.ncols() != m {
        return Err(SubicError::DimensionMismatch(format!(
            "distance matrix is {}x{}",
            m,
            dist.ncols()
        )));
    }
    let mut pairs = BTreeSet::new();
    if k + 1 >= m {
        for i in 0..m {
            for j in i + 1..m {
                pairs.insert((i, j));
            }
        }
        return Ok(pairs);
    }
    for i in 0..m {
        let mut others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| dist[[i, a]].total_cmp(&dist[[i, b]]).then(a.cmp(&b)));
        for &j in &others[..k] {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    Ok(pairs)
}

/// Squared Euclidean distances between the rows of `m`.
pub(crate) fn sq_distances(m: ArrayView2Rows) -> Array2<f64> {
    let r = m.nrows();
    let mut d = Array2::zeros((r, r));
    for i in 0..r {
        for j in i + 1..r {
            let v: f64 = m
                .row(i)
                .iter()
                .zip(m.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

type ArrayView2Rows<'a> = ndarray::ArrayView2<'a, f64>;

/// Builds the row and column weight graphs for a centered data matrix.
pub fn build_weights(x: &DataMatrix, y: &TargetVector, cfg: &FitConfig) -> Result<WeightSet> {
    cfg.validate()?;
    if y.len() != x.n() {
        return Err(SubicError::DimensionMismatch(format!(
            "target has {} entries, matrix has {} rows",
            y.len(),
            x.n()
        )));
    }
    let (n, p) = (x.n(), x.p());

    let col_dist = sq_distances(x.values.t());
    let col_corr: Vec<f64> = x
        .values
        .axis_iter(Axis(1))
        .map(|col| pearson_corr(col, y.values.view()))
        .collect::<Result<_>>()?;
    let (col_pairs, col_sum) = axis_weights(&col_dist, cfg, p, |i, j| {
        (col_corr[i] - col_corr[j]).abs()
    })?;

    let row_dist = sq_distances(x.values.view());
    let yv = &y.values;
    let (row_pairs, row_sum) = axis_weights(&row_dist, cfg, n, |i, j| (yv[i] - yv[j]).abs().sqrt())?;

    Ok(WeightSet {
        col_pairs,
        row_pairs,
        n,
        p,
        phi: cfg.phi,
        knn: cfg.knn,
        supervised: cfg.supervised,
        col_sum,
        row_sum,
    })
}

fn axis_weights(
    sq_dist: &Array2<f64>,
    cfg: &FitConfig,
    m: usize,
    target_dissim: impl Fn(usize, usize) -> f64,
) -> Result<(Vec<WeightedPair>, f64)> {
    let mask = knn_mask(sq_dist, cfg.knn.min(m - 1))?;
    let phi = cfg.phi;
    // Unsupervised kernels are shifted by the smallest in-graph distance
    // before exponentiating. The shift cancels under normalization and keeps
    // large distances from underflowing every weight to zero.
    let shift = if cfg.supervised {
        0.0
    } else {
        mask.iter()
            .map(|&(i, j)| sq_dist[[i, j]])
            .fold(f64::INFINITY, f64::min)
    };
    let mut pairs: Vec<WeightedPair> = mask
        .iter()
        .map(|&(i, j)| {
            let unsup = (-phi * (sq_dist[[i, j]] - shift)).exp();
            let sup = if cfg.supervised {
                (-phi * target_dissim(i, j)).exp()
            } else {
                0.0
            };
            WeightedPair { i, j, unsup, sup, weight: unsup + sup }
        })
        .collect();
    let raw_sum: f64 = pairs.iter().map(|pr| pr.weight).sum();
    // total as the unshifted formula would give it
    let total = raw_sum * (-phi * shift).exp();
    if raw_sum > 0.0 {
        let scale = 1.0 / ((m as f64).sqrt() * raw_sum);
        for pr in &mut pairs {
            pr.unsup *= scale;
            pr.sup *= scale;
            pr.weight *= scale;
        }
    }
    Ok((pairs, total))
}
