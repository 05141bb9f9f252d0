//! Reading row clusters, column clusters and checkerboard blocks off a
//! converged centroid matrix.

use std::io::Write;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::config::FitConfig;
use crate::data::{write_matrix_csv, DataMatrix, TargetVector};
use crate::error::{Result, SubicError};
use crate::solver::FitResult;
use crate::weights::Axis2;

/// Assignment of `m` items to `k` contiguous cluster ids.
///
/// Labels are canonical: cluster ids appear in order of their smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", try_from = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Relabels arbitrary ids into canonical form.
    pub fn from_labels<T: Eq + std::hash::Hash + Copy>(labels: &[T]) -> Self {
        let mut seen = std::collections::HashMap::new();
        let labels: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = seen.len();
                *seen.entry(*l).or_insert(next)
            })
            .collect();
        Partition { k: seen.len(), labels }
    }

    pub fn single(m: usize) -> Self {
        Partition {
            labels: vec![0; m],
            k: usize::from(m > 0),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Members of every cluster, in item order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = String;

    fn try_from(v: Vec<usize>) -> std::result::Result<Self, Self::Error> {
        Ok(Partition::from_labels(&v))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(m: usize) -> Self {
        UnionFind { parent: (0..m).collect() }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so roots are smallest members
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of the graph joining items whose centroids differ by
/// at most `eps` in root-mean-square distance.
pub fn group_centroids(t: &Array2<f64>, axis: Axis2, eps: f64) -> Partition {
    let ax = match axis {
        Axis2::Rows => Axis(0),
        Axis2::Columns => Axis(1),
    };
    let m = t.len_of(ax);
    let len = t.len_of(Axis(1 - ax.index())).max(1) as f64;
    let limit = eps * eps * len;
    let mut uf = UnionFind::new(m);
    for a in 0..m {
        let va = t.index_axis(ax, a);
        for b in a + 1..m {
            if uf.find(a) == uf.find(b) {
                continue;
            }
            let vb = t.index_axis(ax, b);
            let d2: f64 = va.iter().zip(vb.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            if d2 <= limit {
                uf.union(a, b);
            }
        }
    }
    let roots: Vec<usize> = (0..m).map(|i| uf.find(i)).collect();
    Partition::from_labels(&roots)
}

/// The fitted checkerboard model: partitions, block means and the pieces the
/// predictor needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiclusterModel {
    pub config: FitConfig,
    pub column_names: Vec<String>,
    pub row_ids: Vec<String>,
    pub column_means: Vec<f64>,
    pub column_scales: Vec<f64>,
    pub row_labels: Partition,
    pub col_labels: Partition,
    /// `block_means[r][c]` on the centered scale.
    pub block_means: Vec<Vec<f64>>,
    pub y_means: Vec<f64>,
    pub priors: Vec<f64>,
    pub sigma2: f64,
    /// Variance of all centered entries; the floor for `sigma2`.
    pub x_variance: f64,
    pub group_tol: f64,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
}

impl BiclusterModel {
    pub fn n_biclusters(&self) -> usize {
        self.row_labels.k() * self.col_labels.k()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: BiclusterModel = serde_json::from_str(s)?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let (kr, kc) = (self.row_labels.k(), self.col_labels.k());
        let bad = self.block_means.len() != kr
            || self.block_means.iter().any(|r| r.len() != kc)
            || self.y_means.len() != kr
            || self.priors.len() != kr
            || self.column_means.len() != self.col_labels.m()
            || self.column_scales.len() != self.col_labels.m();
        if bad {
            return Err(SubicError::DimensionMismatch("inconsistent model document".into()));
        }
        Ok(())
    }

    /// `row_id,cluster` lines.
    pub fn write_row_assignments<W: Write>(&self, out: W) -> Result<()> {
        assignments(out, "row_id", &self.row_ids, &self.row_labels)
    }

    /// `column_name,cluster` lines.
    pub fn write_col_assignments<W: Write>(&self, out: W) -> Result<()> {
        assignments(out, "column_name", &self.column_names, &self.col_labels)
    }
}

fn assignments<W: Write>(out: W, key: &str, names: &[String], part: &Partition) -> Result<()> {
    let header = vec![key.to_string(), "cluster".to_string()];
    let rows: Vec<Vec<String>> = names
        .iter()
        .zip(part.labels())
        .map(|(n, l)| vec![n.clone(), l.to_string()])
        .collect();
    write_matrix_csv(out, &header, &rows)
}

/// Default grouping tolerance: 1e-3 times the RMS of the centered data.
pub fn default_group_tol(x: &DataMatrix) -> f64 {
    let rms = x.rms();
    if rms > 0.0 {
        1e-3 * rms
    } else {
        1e-12
    }
}

/// Turns a solver result into a checkerboard model. Block means are taken
/// from the data, not from the shrunken centroids.
pub fn extract(fit: &FitResult, x: &DataMatrix, y: &TargetVector, cfg: &FitConfig) -> Result<BiclusterModel> {
    if fit.t.dim() != x.values.dim() || y.len() != x.n() {
        return Err(SubicError::DimensionMismatch(format!(
            "fit is {:?}, data {:?}, target {}",
            fit.t.dim(),
            x.values.dim(),
            y.len()
        )));
    }
    let eps = cfg.group_tol.unwrap_or_else(|| default_group_tol(x));
    let rows = group_centroids(&fit.t, Axis2::Rows, eps);
    let cols = group_centroids(&fit.t, Axis2::Columns, eps);
    let (n, p) = (x.n(), x.p());

    let mut sums = vec![vec![0.0; cols.k()]; rows.k()];
    let mut counts = vec![vec![0usize; cols.k()]; rows.k()];
    for ((i, j), v) in x.values.indexed_iter() {
        let (r, c) = (rows.labels()[i], cols.labels()[j]);
        sums[r][c] += v;
        counts[r][c] += 1;
    }
    let block_means = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| s.iter().zip(c).map(|(s, &c)| s / c as f64).collect())
        .collect();

    let mut y_sum = vec![0.0; rows.k()];
    for (i, &r) in rows.labels().iter().enumerate() {
        y_sum[r] += y.values[i];
    }
    let sizes = rows.sizes();
    let y_means = y_sum.iter().zip(&sizes).map(|(s, &c)| s / c as f64).collect();
    let priors = sizes.iter().map(|&c| c as f64 / n as f64).collect();

    let total = (n * p) as f64;
    let sigma2 = x
        .values
        .iter()
        .zip(fit.t.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / total;
    let mean = x.values.sum() / total;
    let x_variance = x.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / total;

    Ok(BiclusterModel {
        config: cfg.clone(),
        column_names: x.column_names.clone(),
        row_ids: x.row_ids.clone(),
        column_means: x.column_means.to_vec(),
        column_scales: x.column_scales.to_vec(),
        row_labels: rows,
        col_labels: cols,
        block_means,
        y_means,
        priors,
        sigma2,
        x_variance,
        group_tol: eps,
        converged: fit.converged,
        iterations: fit.iterations,
        objective: fit.state.objective,
    })
}
