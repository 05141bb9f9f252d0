//! Checkerboard datasets with a target coupled to the row clusters.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::biclusters::Partition;
use crate::data::{DataMatrix, TargetVector};
use crate::error::{Result, SubicError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimDesign {
    pub n: usize,
    pub p: usize,
    pub row_clusters: usize,
    pub col_clusters: usize,
    pub sigma: f64,
    pub sigma_y: f64,
    pub block_mean_scale: f64,
    pub y_mean_scale: f64,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for SimDesign {
    fn default() -> Self {
        SimDesign {
            n: 80,
            p: 80,
            row_clusters: 4,
            col_clusters: 4,
            sigma: 1.5,
            sigma_y: 1.0,
            block_mean_scale: 4.0,
            y_mean_scale: 5.0,
            shuffle: true,
            seed: 0,
        }
    }
}

impl SimDesign {
    /// An `r x c` design on an `n x p` matrix, other settings default.
    pub fn checkerboard(n: usize, p: usize, r: usize, c: usize, sigma: f64, seed: u64) -> Self {
        SimDesign {
            n,
            p,
            row_clusters: r,
            col_clusters: c,
            sigma,
            seed,
            ..SimDesign::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.row_clusters < 1 || self.col_clusters < 1 {
            return Err(SubicError::InvalidConfig("need at least one row and one column cluster".into()));
        }
        if self.row_clusters > self.n || self.col_clusters > self.p {
            return Err(SubicError::InvalidConfig(format!(
                "design {}x{} does not fit a {}x{} matrix",
                self.row_clusters, self.col_clusters, self.n, self.p
            )));
        }
        if !(self.sigma >= 0.0) || !(self.sigma_y >= 0.0) {
            return Err(SubicError::InvalidConfig("noise levels must be >= 0".into()));
        }
        Ok(())
    }

    /// Standardized block means `G[a][b]` in [-1, 1].
    ///
    /// Column block `b` belongs to pattern `u = b / 2` and is negated for odd
    /// `b`. A pattern is the `r` evenly spaced target levels, cyclically
    /// shifted by `u mod r` and scaled by `1 / (1 + u div r)`. For `r >= 3` a
    /// cyclic shift of evenly spaced levels never differs from another shift
    /// (or its negation) by a constant, so column blocks stay distinct after
    /// column centering. With `r = 2` a shift equals a negation, so only the
    /// amplitude varies. Block 0 rises with the target means and block 1 falls
    /// with them.
    pub fn mean_grid(&self) -> Array2<f64> {
        let (r, c) = (self.row_clusters, self.col_clusters);
        let lev = levels(r);
        let shifts = if r >= 3 { r } else { 1 };
        Array2::from_shape_fn((r, c), |(a, b)| {
            let u = b / 2;
            let amp = 1.0 / (1 + u / shifts) as f64;
            let v = amp * lev[(a + u % shifts) % r];
            if b % 2 == 0 {
                v
            } else {
                -v
            }
        })
    }

    /// Standardized target means per row cluster, increasing.
    pub fn target_levels(&self) -> Vec<f64> {
        levels(self.row_clusters)
    }
}

fn levels(count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![0.0; count.max(1)];
    }
    (0..count)
        .map(|l| -1.0 + 2.0 * l as f64 / (count - 1) as f64)
        .collect()
}

/// Contiguous group labels for `m` items in `k` groups, remainder spread
/// over the first groups.
pub fn contiguous_groups(m: usize, k: usize) -> Vec<usize> {
    let (base, extra) = (m / k, m % k);
    (0..k)
        .flat_map(|g| std::iter::repeat_n(g, base + usize::from(g < extra)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SimData {
    pub x: DataMatrix,
    pub y: TargetVector,
    pub truth_rows: Partition,
    pub truth_cols: Partition,
}

pub fn generate(design: &SimDesign) -> Result<SimData> {
    design.validate()?;
    let row_groups = contiguous_groups(design.n, design.row_clusters);
    let col_groups = contiguous_groups(design.p, design.col_clusters);
    let grid = design.mean_grid() * design.block_mean_scale;
    let ylev: Vec<f64> = design
        .target_levels()
        .iter()
        .map(|g| g * design.y_mean_scale)
        .collect();
    let means = Array2::from_shape_fn((design.n, design.p), |(i, j)| grid[[row_groups[i], col_groups[j]]]);
    let y_means = Array1::from_iter(row_groups.iter().map(|&a| ylev[a]));
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
    build(design.sigma, design.sigma_y, design.shuffle, &means, &y_means, &row_groups, &col_groups, &mut rng)
}

#[allow(clippy::too_many_arguments)]
fn build(
    sigma: f64,
    sigma_y: f64,
    shuffle: bool,
    means: &Array2<f64>,
    y_means: &Array1<f64>,
    row_groups: &[usize],
    col_groups: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<SimData> {
    let (n, p) = means.dim();
    let mut noisy = means.clone();
    for v in noisy.iter_mut() {
        let e: f64 = StandardNormal.sample(rng);
        *v += sigma * e;
    }
    let mut y = y_means.clone();
    for v in y.iter_mut() {
        let e: f64 = StandardNormal.sample(rng);
        *v += sigma_y * e;
    }
    let mut row_order: Vec<usize> = (0..n).collect();
    let mut col_order: Vec<usize> = (0..p).collect();
    if shuffle {
        row_order.shuffle(rng);
        col_order.shuffle(rng);
    }
    let x = Array2::from_shape_fn((n, p), |(i, j)| noisy[[row_order[i], col_order[j]]]);
    let y = Array1::from_iter(row_order.iter().map(|&i| y[i]));
    let truth_rows: Vec<usize> = row_order.iter().map(|&i| row_groups[i]).collect();
    let truth_cols: Vec<usize> = col_order.iter().map(|&j| col_groups[j]).collect();
    Ok(SimData {
        x: DataMatrix::new(x)?,
        y: TargetVector::new(y, "y")?,
        truth_rows: Partition::from_labels(&truth_rows),
        truth_cols: Partition::from_labels(&truth_cols),
    })
}

/// Approximate 20 x 20 layout with ten segments.
///
/// Four row groups carry target levels `+4, -4, +6, -6`. Columns form four
/// blocks: an outer block on each side with a flat mean (no relation to the
/// target), one block whose means follow the target and one whose means
/// oppose it. Crossed with the row groups this gives 16 true biclusters.
/// Segment sizes and means are this crate's choice.
pub fn fig2_preset(sigma: f64, seed: u64) -> Result<SimData> {
    let row_sizes = [6, 4, 5, 5];
    let col_sizes = [4, 6, 6, 4];
    let y_levels = [4.0, -4.0, 6.0, -6.0];
    let row_groups: Vec<usize> = row_sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &s)| std::iter::repeat_n(g, s))
        .collect();
    let col_groups: Vec<usize> = col_sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &s)| std::iter::repeat_n(g, s))
        .collect();
    let block = |a: usize, b: usize| match b {
        1 => 0.5 * y_levels[a],
        2 => -0.5 * y_levels[a],
        _ => 0.0,
    };
    let means = Array2::from_shape_fn((20, 20), |(i, j)| block(row_groups[i], col_groups[j]));
    let y_means = Array1::from_iter(row_groups.iter().map(|&a| y_levels[a]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build(sigma, 1.0, false, &means, &y_means, &row_groups, &col_groups, &mut rng)
}
