//! Split Bregman / ADMM solver for the elastic-net fused biclustering objective
//!
//! ```text
//! F(T) = 1/2 |X - T|_F^2
//!      + lambda1 [ sum w_ij |T.i - T.j|_2^2 + sum h_ij |Ti. - Tj.|_2^2 ]
//!      + lambda2 [ sum w_ij |T.i - T.j|_1   + sum h_ij |Ti. - Tj.|_1   ]
//! ```
//!
//! The l1 terms are split off through the constraints `w_ij (T.i - T.j) = V_ij`
//! and `h_ij (Ti. - Tj.) = S_ij`. Each iteration solves the smooth
//! T-subproblem exactly, shrinks the split variables, and takes a dual ascent
//! step on the multipliers `M`, `N`.
//!
//! Stationarity of the T-subproblem is the Sylvester equation `A T + T B = C`
//! with
//!
//! ```text
//! A = I/2 + 2 lambda1 L_h + mu2 L_h2      (n x n)
//! B = I/2 + 2 lambda1 L_w + mu1 L_w2      (p x p)
//! C = X + sum_w w_ij (mu1 V_ij - M_ij)(e_i - e_j)^T
//!       + sum_h h_ij (e_i - e_j)(mu2 S_ij - N_ij)^T
//! ```
//!
//! where `L_w`/`L_h` are the weighted graph Laplacians and `L_w2`/`L_h2` the
//! Laplacians of the squared weights. `A` and `B` are symmetric with spectra
//! bounded below by 1/2, so the solve runs in their eigenbases and never
//! divides by less than one.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1, Axis, Zip};

use crate::config::FitConfig;
use crate::data::{write_matrix_csv, DataMatrix, TargetVector};
use crate::error::{Result, SubicError};
use crate::weights::{build_weights, WeightSet, WeightedPair};

/// Elementwise `sgn(v) max(0, |v| - lam)`.
pub fn soft_threshold(v: ArrayView1<f64>, lam: f64) -> Array1<f64> {
    v.mapv(|x| shrink(x, lam))
}

#[inline]
fn shrink(x: f64, lam: f64) -> f64 {
    let a = x.abs() - lam;
    if a > 0.0 {
        a.copysign(x)
    } else {
        0.0
    }
}

/// Laplacian of a weighted pair graph, with edge weights raised to
/// `weight_power` (1 or 2).
pub fn fused_laplacian(pairs: &[WeightedPair], m: usize, weight_power: u32) -> Result<Array2<f64>> {
    if !(1..=2).contains(&weight_power) {
        return Err(SubicError::InvalidConfig(format!(
            "weight power must be 1 or 2, got {weight_power}"
        )));
    }
    let mut lap = Array2::zeros((m, m));
    for pr in pairs {
        if pr.i >= m || pr.j >= m {
            return Err(SubicError::DimensionMismatch(format!(
                "pair ({}, {}) out of range for dimension {m}",
                pr.i, pr.j
            )));
        }
        let c = pr.weight.powi(weight_power as i32);
        lap[[pr.i, pr.j]] -= c;
        lap[[pr.j, pr.i]] -= c;
        lap[[pr.i, pr.i]] += c;
        lap[[pr.j, pr.j]] += c;
    }
    Ok(lap)
}

/// Value of the full objective; sums run over the stored pairs only.
pub fn objective_value(x: &Array2<f64>, t: &Array2<f64>, w: &WeightSet, lambda1: f64, lambda2: f64) -> f64 {
    let fit = 0.5 * Zip::from(x).and(t).fold(0.0, |acc, a, b| acc + (a - b) * (a - b));
    let (mut sq, mut abs) = (0.0, 0.0);
    for pr in &w.col_pairs {
        let (s2, s1) = diff_norms(t.column(pr.i), t.column(pr.j));
        sq += pr.weight * s2;
        abs += pr.weight * s1;
    }
    for pr in &w.row_pairs {
        let (s2, s1) = diff_norms(t.row(pr.i), t.row(pr.j));
        sq += pr.weight * s2;
        abs += pr.weight * s1;
    }
    let mut f = fit;
    // keep 0 * inf style surprises out of the penalty-free case
    if lambda1 != 0.0 {
        f += lambda1 * sq;
    }
    if lambda2 != 0.0 {
        f += lambda2 * abs;
    }
    f
}

fn diff_norms(a: ArrayView1<f64>, b: ArrayView1<f64>) -> (f64, f64) {
    a.iter().zip(b.iter()).fold((0.0, 0.0), |(s2, s1), (x, y)| {
        let d = x - y;
        (s2 + d * d, s1 + d.abs())
    })
}

/// Split variables and multipliers. Row `k` of `v`/`m` belongs to column
/// pair `k` of the weight set (length n); row `k` of `s`/`n` to row pair `k`
/// (length p).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVars {
    pub v: Array2<f64>,
    pub s: Array2<f64>,
    pub m: Array2<f64>,
    pub n: Array2<f64>,
}

impl SplitVars {
    pub fn zeros(w: &WeightSet) -> Self {
        SplitVars {
            v: Array2::zeros((w.col_pairs.len(), w.n)),
            s: Array2::zeros((w.row_pairs.len(), w.p)),
            m: Array2::zeros((w.col_pairs.len(), w.n)),
            n: Array2::zeros((w.row_pairs.len(), w.p)),
        }
    }

    /// Split variables set to the scaled pair differences of `t`, multipliers zero.
    pub fn feasible_at(t: &Array2<f64>, w: &WeightSet) -> Self {
        let mut vars = SplitVars::zeros(w);
        for (k, pr) in w.col_pairs.iter().enumerate() {
            let mut row = vars.v.row_mut(k);
            scaled_diff(t.column(pr.i), t.column(pr.j), pr.weight, &mut row);
        }
        for (k, pr) in w.row_pairs.iter().enumerate() {
            let mut row = vars.s.row_mut(k);
            scaled_diff(t.row(pr.i), t.row(pr.j), pr.weight, &mut row);
        }
        vars
    }
}

fn scaled_diff(a: ArrayView1<f64>, b: ArrayView1<f64>, w: f64, out: &mut ArrayViewMut1<f64>) {
    Zip::from(out).and(a).and(b).for_each(|o, &x, &y| *o = w * (x - y));
}

/// Eigendecomposed `A` and `B` of the T-subproblem for fixed weights,
/// `lambda1`, `mu1`, `mu2`.
#[derive(Debug, Clone)]
pub struct SylvesterSystem {
    row_vecs: Array2<f64>,
    row_vals: Array1<f64>,
    col_vecs: Array2<f64>,
    col_vals: Array1<f64>,
}

impl SylvesterSystem {
    pub fn new(w: &WeightSet, lambda1: f64, mu1: f64, mu2: f64) -> Result<Self> {
        let a = half_identity_plus(
            &fused_laplacian(&w.row_pairs, w.n, 1)?,
            2.0 * lambda1,
            &fused_laplacian(&w.row_pairs, w.n, 2)?,
            mu2,
        );
        let b = half_identity_plus(
            &fused_laplacian(&w.col_pairs, w.p, 1)?,
            2.0 * lambda1,
            &fused_laplacian(&w.col_pairs, w.p, 2)?,
            mu1,
        );
        let (row_vals, row_vecs) = sym_eigen(&a)?;
        let (col_vals, col_vecs) = sym_eigen(&b)?;
        Ok(SylvesterSystem {
            row_vecs,
            row_vals,
            col_vecs,
            col_vals,
        })
    }

    /// Solves `A T + T B = C`.
    pub fn solve(&self, c: &Array2<f64>) -> Result<Array2<f64>> {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(SubicError::Numeric("non-finite right-hand side in T-update".into()));
        }
        let mut core = self.row_vecs.t().dot(c).dot(&self.col_vecs);
        for (a, mut row) in self.row_vals.iter().zip(core.axis_iter_mut(Axis(0))) {
            for (b, v) in self.col_vals.iter().zip(row.iter_mut()) {
                *v /= a + b;
            }
        }
        Ok(self.row_vecs.dot(&core).dot(&self.col_vecs.t()))
    }
}

fn half_identity_plus(l1: &Array2<f64>, c1: f64, l2: &Array2<f64>, c2: f64) -> Array2<f64> {
    let mut a = l1 * c1 + l2 * c2;
    a.diag_mut().mapv_inplace(|d| d + 0.5);
    a
}

fn sym_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let m = a.nrows();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SubicError::Numeric("non-finite entries in system matrix".into()));
    }
    let dm = DMatrix::from_fn(m, m, |i, j| a[[i, j]]);
    let eig = SymmetricEigen::new(dm);
    let vals = Array1::from_iter(eig.eigenvalues.iter().copied());
    let vecs = Array2::from_shape_fn((m, m), |(i, j)| eig.eigenvectors[(i, j)]);
    Ok((vals, vecs))
}

/// Right-hand side `C` of the T-subproblem.
pub fn t_update_rhs(x: &Array2<f64>, w: &WeightSet, mu1: f64, mu2: f64, vars: &SplitVars) -> Array2<f64> {
    let mut c = x.clone();
    let mut buf_n = Array1::zeros(w.n);
    for (k, pr) in w.col_pairs.iter().enumerate() {
        Zip::from(&mut buf_n)
            .and(vars.v.row(k))
            .and(vars.m.row(k))
            .for_each(|o, &v, &m| *o = pr.weight * (mu1 * v - m));
        c.column_mut(pr.i).zip_mut_with(&buf_n, |a, b| *a += b);
        c.column_mut(pr.j).zip_mut_with(&buf_n, |a, b| *a -= b);
    }
    let mut buf_p = Array1::zeros(w.p);
    for (k, pr) in w.row_pairs.iter().enumerate() {
        Zip::from(&mut buf_p)
            .and(vars.s.row(k))
            .and(vars.n.row(k))
            .for_each(|o, &s, &n| *o = pr.weight * (mu2 * s - n));
        c.row_mut(pr.i).zip_mut_with(&buf_p, |a, b| *a += b);
        c.row_mut(pr.j).zip_mut_with(&buf_p, |a, b| *a -= b);
    }
    c
}

/// Exact minimizer of the T-subproblem for the given split variables.
pub fn t_update(
    x: &Array2<f64>,
    w: &WeightSet,
    lambda1: f64,
    mu1: f64,
    mu2: f64,
    vars: &SplitVars,
) -> Result<Array2<f64>> {
    let system = SylvesterSystem::new(w, lambda1, mu1, mu2)?;
    system.solve(&t_update_rhs(x, w, mu1, mu2, vars))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: Array2<f64>,
    pub vars: SplitVars,
    pub iter: usize,
    /// Largest unscaled constraint violation `|D - V/w|_inf`, relative to `1 + |X|_inf`.
    pub primal_residual: f64,
    /// `|mu D^T(w dV)|_inf` over both axes, relative to `1 + |X|_inf`.
    pub dual_residual: f64,
    pub objective: f64,
    /// Absolute penalty parameters in force at the last iteration.
    pub mu1: f64,
    pub mu2: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub t: Array2<f64>,
    pub state: SolverState,
    pub converged: bool,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub residual_trace: Vec<(f64, f64)>,
    pub weights: WeightSet,
}

impl FitResult {
    /// Emits `iteration,objective,primal,dual`.
    pub fn write_trace<W: Write>(&self, out: W) -> Result<()> {
        let header: Vec<String> = ["iteration", "objective", "primal", "dual"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows: Vec<Vec<String>> = self
            .objective_trace
            .iter()
            .zip(&self.residual_trace)
            .enumerate()
            .map(|(k, (f, (p, d)))| vec![(k + 1).to_string(), format!("{f:?}"), format!("{p:?}"), format!("{d:?}")])
            .collect();
        write_matrix_csv(out, &header, &rows)
    }
}

/// Iterations between residual-balancing checks, and the last iteration at
/// which mu may still change.
const ADAPT_EVERY: usize = 10;
const ADAPT_UNTIL: usize = 2000;
const ADAPT_RATIO: f64 = 10.0;
const ADAPT_FACTOR: f64 = 2.0;

/// Holds the data and weights of one problem and caches the T-subproblem
/// eigendecompositions across fits (e.g. a sweep over `lambda2`).
pub struct Solver<'a> {
    x: &'a Array2<f64>,
    weights: WeightSet,
    cache: HashMap<[u64; 3], SylvesterSystem>,
    col_scale: f64,
    row_scale: f64,
}

impl<'a> Solver<'a> {
    pub fn new(x: &'a Array2<f64>, weights: WeightSet) -> Result<Self> {
        if x.dim() != (weights.n, weights.p) {
            return Err(SubicError::DimensionMismatch(format!(
                "matrix is {:?}, weights built for {}x{}",
                x.dim(),
                weights.n,
                weights.p
            )));
        }
        let col_scale = inverse_mean_square(&weights.col_pairs);
        let row_scale = inverse_mean_square(&weights.row_pairs);
        Ok(Solver {
            x,
            weights,
            cache: HashMap::new(),
            col_scale,
            row_scale,
        })
    }

    pub fn weights(&self) -> &WeightSet {
        &self.weights
    }

    fn system(&mut self, lambda1: f64, mu1: f64, mu2: f64) -> Result<&SylvesterSystem> {
        let key = [lambda1.to_bits(), mu1.to_bits(), mu2.to_bits()];
        if !self.cache.contains_key(&key) {
            if self.cache.len() >= 64 {
                self.cache.clear();
            }
            let sys = SylvesterSystem::new(&self.weights, lambda1, mu1, mu2)?;
            self.cache.insert(key, sys);
        }
        Ok(&self.cache[&key])
    }

    pub fn fit(&mut self, cfg: &FitConfig) -> Result<FitResult> {
        cfg.validate()?;
        let x = self.x;
        let lambda1 = cfg.effective_lambda1();
        let lambda2 = cfg.lambda2;
        let mut mu1 = cfg.mu1 * self.col_scale;
        let mut mu2 = cfg.mu2 * self.row_scale;
        let (step1, step2) = (cfg.delta1 / cfg.mu1, cfg.delta2 / cfg.mu2);
        let x_scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));

        let mut t = x.clone();
        let mut vars = SplitVars::feasible_at(&t, &self.weights);
        let mut objective_trace = Vec::new();
        let mut residual_trace = Vec::new();
        let mut converged = false;
        let mut iter = 0;
        let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);

        while iter < cfg.max_iter {
            iter += 1;
            let rhs = t_update_rhs(x, &self.weights, mu1, mu2, &vars);
            t = self.system(lambda1, mu1, mu2)?.solve(&rhs)?;

            let w = &self.weights;
            let col = shrink_and_ascend(
                &w.col_pairs,
                |pr, out| scaled_diff(t.column(pr.i), t.column(pr.j), pr.weight, out),
                &mut vars.v,
                &mut vars.m,
                lambda2,
                mu1,
                step1 * mu1,
            );
            let row = shrink_and_ascend(
                &w.row_pairs,
                |pr, out| scaled_diff(t.row(pr.i), t.row(pr.j), pr.weight, out),
                &mut vars.s,
                &mut vars.n,
                lambda2,
                mu2,
                step2 * mu2,
            );
            let dual_col = dual_norm(&w.col_pairs, &col.dv, mu1, Axis(1), w.n, w.p);
            let dual_row = dual_norm(&w.row_pairs, &row.dv, mu2, Axis(0), w.n, w.p);
            primal = col.primal.max(row.primal) / x_scale;
            dual = mat_inf(&(&dual_col + &dual_row)) / x_scale;

            let objective = objective_value(x, &t, w, lambda1, lambda2);
            if !objective.is_finite() || !primal.is_finite() || !dual.is_finite() {
                return Err(SubicError::Numeric(format!(
                    "solver diverged at iteration {iter} (objective {objective}, primal {primal}, dual {dual})"
                )));
            }
            objective_trace.push(objective);
            residual_trace.push((primal, dual));

            if primal <= cfg.tol && dual <= cfg.tol {
                converged = true;
                break;
            }

            if cfg.adaptive_mu && iter % ADAPT_EVERY == 0 && iter <= ADAPT_UNTIL {
                let d_col = mat_inf(&dual_col) / x_scale;
                let d_row = mat_inf(&dual_row) / x_scale;
                mu1 = rebalance(mu1, col.primal / x_scale, d_col);
                mu2 = rebalance(mu2, row.primal / x_scale, d_row);
            }
        }

        let objective = *objective_trace.last().unwrap_or(&f64::NAN);
        let state = SolverState {
            t: t.clone(),
            vars,
            iter,
            primal_residual: primal,
            dual_residual: dual,
            objective,
            mu1,
            mu2,
        };
        Ok(FitResult {
            t,
            state,
            converged,
            iterations: iter,
            objective_trace,
            residual_trace,
            weights: self.weights.clone(),
        })
    }
}

fn inverse_mean_square(pairs: &[WeightedPair]) -> f64 {
    let ms = pairs.iter().map(|pr| pr.weight * pr.weight).sum::<f64>() / pairs.len().max(1) as f64;
    if ms > 0.0 && ms.is_finite() {
        1.0 / ms
    } else {
        1.0
    }
}

fn rebalance(mu: f64, primal: f64, dual: f64) -> f64 {
    if primal > ADAPT_RATIO * dual {
        mu * ADAPT_FACTOR
    } else if dual > ADAPT_RATIO * primal {
        mu / ADAPT_FACTOR
    } else {
        mu
    }
}

struct AxisStep {
    dv: Array2<f64>,
    primal: f64,
}

/// Soft-thresholds the split variables of one axis and advances their
/// multipliers. Returns the change in the split variables and the largest
/// unscaled constraint violation.
fn shrink_and_ascend(
    pairs: &[WeightedPair],
    diff: impl Fn(&WeightedPair, &mut ArrayViewMut1<f64>),
    split: &mut Array2<f64>,
    mult: &mut Array2<f64>,
    lambda2: f64,
    mu: f64,
    delta: f64,
) -> AxisStep {
    let len = split.ncols();
    let mut d = Array1::zeros(len);
    let mut dv = Array2::zeros(split.dim());
    let mut primal = 0.0f64;
    let thresh = lambda2 / mu;
    for (k, pr) in pairs.iter().enumerate() {
        diff(pr, &mut d.view_mut());
        let mut v = split.row_mut(k);
        let mut m = mult.row_mut(k);
        let mut change = dv.row_mut(k);
        for c in 0..len {
            let new_v = shrink(d[c] + m[c] / mu, thresh);
            let gap = d[c] - new_v;
            change[c] = new_v - v[c];
            v[c] = new_v;
            m[c] += delta * gap;
            if pr.weight > 0.0 {
                primal = primal.max(gap.abs() / pr.weight);
            }
        }
    }
    AxisStep { dv, primal }
}

/// `mu sum_k w_k (e_i - e_j) dV_k` placed on the given axis of an n x p matrix.
fn dual_norm(pairs: &[WeightedPair], dv: &Array2<f64>, mu: f64, along: Axis, n: usize, p: usize) -> Array2<f64> {
    let mut g = Array2::zeros((n, p));
    for (k, pr) in pairs.iter().enumerate() {
        let scaled = dv.row(k).mapv(|v| mu * pr.weight * v);
        g.index_axis_mut(along, pr.i).zip_mut_with(&scaled, |a, b| *a += b);
        g.index_axis_mut(along, pr.j).zip_mut_with(&scaled, |a, b| *a -= b);
    }
    g
}

fn mat_inf(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Builds weights and runs the solver on a centered matrix.
pub fn fit(x: &DataMatrix, y: &TargetVector, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let weights = build_weights(x, y, cfg)?;
    Solver::new(&x.values, weights)?.fit(cfg)
}
