//! Independent reference computations used by the integration and acceptance
//! tests. Nothing here calls into the solver path it is used to check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subic::weights::WeightSet;

/// Column-major vectorization index of entry (r, c) of an n x p matrix.
fn idx(r: usize, c: usize, n: usize) -> usize {
    c * n + r
}

pub fn vec_of(t: &Array2<f64>) -> DVector<f64> {
    let (n, p) = t.dim();
    DVector::from_fn(n * p, |k, _| t[[k % n, k / n]])
}

pub fn mat_of(v: &DVector<f64>, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |(r, c)| v[idx(r, c, n)])
}

/// Hessian of `1/2 |X - T|^2 + lambda1 (sum w |T.i - T.j|^2 + sum h |Ti. - Tj.|^2)`
/// in vectorized coordinates, assembled entry by entry from the pair sums.
pub fn dense_hessian(w: &WeightSet, lambda1: f64) -> DMatrix<f64> {
    let (n, p) = (w.n, w.p);
    let mut h = DMatrix::identity(n * p, n * p);
    let mut add_pair = |a: usize, b: usize, c: f64| {
        h[(a, a)] += c;
        h[(b, b)] += c;
        h[(a, b)] -= c;
        h[(b, a)] -= c;
    };
    for pr in &w.col_pairs {
        for r in 0..n {
            add_pair(idx(r, pr.i, n), idx(r, pr.j, n), 2.0 * lambda1 * pr.weight);
        }
    }
    for pr in &w.row_pairs {
        for c in 0..p {
            add_pair(idx(pr.i, c, n), idx(pr.j, c, n), 2.0 * lambda1 * pr.weight);
        }
    }
    h
}

/// Stacked weighted difference operator: one row per (pair, coordinate).
pub fn diff_operator(w: &WeightSet) -> DMatrix<f64> {
    let (n, p) = (w.n, w.p);
    let rows = w.col_pairs.len() * n + w.row_pairs.len() * p;
    let mut k = DMatrix::zeros(rows, n * p);
    let mut row = 0;
    for pr in &w.col_pairs {
        for r in 0..n {
            k[(row, idx(r, pr.i, n))] = pr.weight;
            k[(row, idx(r, pr.j, n))] = -pr.weight;
            row += 1;
        }
    }
    for pr in &w.row_pairs {
        for c in 0..p {
            k[(row, idx(pr.i, c, n))] = pr.weight;
            k[(row, idx(pr.j, c, n))] = -pr.weight;
            row += 1;
        }
    }
    k
}

/// Objective transcribed directly from its definition, using explicit loops.
pub fn reference_objective(x: &Array2<f64>, t: &Array2<f64>, w: &WeightSet, lambda1: f64, lambda2: f64) -> f64 {
    let (n, p) = x.dim();
    let mut fit = 0.0;
    for r in 0..n {
        for c in 0..p {
            fit += (x[[r, c]] - t[[r, c]]).powi(2);
        }
    }
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    for pr in &w.col_pairs {
        let mut l2 = 0.0;
        let mut l1 = 0.0;
        for r in 0..n {
            let d = t[[r, pr.i]] - t[[r, pr.j]];
            l2 += d * d;
            l1 += d.abs();
        }
        p1 += pr.weight * l2;
        p2 += pr.weight * l1;
    }
    for pr in &w.row_pairs {
        let mut l2 = 0.0;
        let mut l1 = 0.0;
        for c in 0..p {
            let d = t[[pr.i, c]] - t[[pr.j, c]];
            l2 += d * d;
            l1 += d.abs();
        }
        p1 += pr.weight * l2;
        p2 += pr.weight * l1;
    }
    0.5 * fit + lambda1 * p1 + lambda2 * p2
}

/// Convex biclustering objective: squared loss plus l1 fusion of rows and
/// columns with the unsupervised weights only.
pub fn cobra_objective(x: &Array2<f64>, t: &Array2<f64>, w: &WeightSet, gamma: f64) -> f64 {
    let (n, p) = x.dim();
    let loss: f64 = x.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 2.0;
    let cols: f64 = w
        .col_pairs
        .iter()
        .map(|pr| pr.unsup * (0..n).map(|r| (t[[r, pr.i]] - t[[r, pr.j]]).abs()).sum::<f64>())
        .sum();
    let rows: f64 = w
        .row_pairs
        .iter()
        .map(|pr| pr.unsup * (0..p).map(|c| (t[[pr.i, c]] - t[[pr.j, c]]).abs()).sum::<f64>())
        .sum();
    loss + gamma * (cols + rows)
}

pub struct OracleSolution {
    pub t: Array2<f64>,
    pub objective: f64,
    pub gap: f64,
}

/// Minimizes the full objective by accelerated projected gradient on its
/// box-constrained dual, recovering the primal point from the dual iterate.
/// Stops once the duality gap is below `rel_gap` relative to the objective.
pub fn dual_prox_gradient(
    x: &Array2<f64>,
    w: &WeightSet,
    lambda1: f64,
    lambda2: f64,
    rel_gap: f64,
    max_iter: usize,
) -> OracleSolution {
    let (n, p) = x.dim();
    let h = dense_hessian(w, lambda1);
    let h_inv = h.clone().try_inverse().expect("hessian is positive definite");
    let k = diff_operator(w);
    let xv = vec_of(x);
    let half_xx = 0.5 * xv.dot(&xv);
    let lip = {
        let m = &k * &h_inv * k.transpose();
        m.symmetric_eigenvalues().max().max(1e-12)
    };
    let step = 1.0 / lip;
    let m = k.nrows();
    let mut z = DVector::zeros(m);
    let mut z_prev = z.clone();
    let mut mom = z.clone();
    let mut tk = 1.0f64;
    let primal_of = |z: &DVector<f64>| -> DVector<f64> { &h_inv * (&xv - k.transpose() * z) };
    let primal_obj = |tv: &DVector<f64>| -> f64 {
        0.5 * tv.dot(&(&h * tv)) - xv.dot(tv) + half_xx + lambda2 * (&k * tv).abs().sum()
    };
    let dual_obj = |z: &DVector<f64>| -> f64 {
        let r = &xv - k.transpose() * z;
        -0.5 * r.dot(&(&h_inv * &r)) + half_xx
    };
    let mut best = (f64::INFINITY, DVector::zeros(n * p), f64::INFINITY);
    for it in 0..max_iter {
        let tv = primal_of(&mom);
        let grad = -(&k * tv);
        let mut next = &mom - grad * step;
        next.apply(|v| *v = v.clamp(-lambda2, lambda2));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        mom = &next + (&next - &z_prev) * ((tk - 1.0) / t_next);
        tk = t_next;
        z_prev = next.clone();
        z = next;
        if it % 50 == 0 || it + 1 == max_iter {
            let tv = primal_of(&z);
            let f = primal_obj(&tv);
            let gap = f - dual_obj(&z);
            if f < best.0 {
                best = (f, tv, gap);
            }
            if gap <= rel_gap * f.abs().max(1.0) {
                break;
            }
        }
    }
    OracleSolution {
        t: mat_of(&best.1, n, p),
        objective: best.0,
        gap: best.2,
    }
}

/// Objective of the T-subproblem with fixed split variables, transcribed term by term.
#[allow(clippy::too_many_arguments)]
pub fn step3_objective(
    x: &Array2<f64>,
    t: &Array2<f64>,
    w: &WeightSet,
    lambda1: f64,
    mu1: f64,
    mu2: f64,
    vars: &subic::solver::SplitVars,
) -> f64 {
    let (n, p) = x.dim();
    let mut f = reference_objective(x, t, w, lambda1, 0.0);
    for (k, pr) in w.col_pairs.iter().enumerate() {
        for r in 0..n {
            let g = pr.weight * (t[[r, pr.i]] - t[[r, pr.j]]) - vars.v[[k, r]];
            f += vars.m[[k, r]] * g + 0.5 * mu1 * g * g;
        }
    }
    for (k, pr) in w.row_pairs.iter().enumerate() {
        for c in 0..p {
            let g = pr.weight * (t[[pr.i, c]] - t[[pr.j, c]]) - vars.s[[k, c]];
            f += vars.n[[k, c]] * g + 0.5 * mu2 * g * g;
        }
    }
    f
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&Array2<f64>) -> f64, t: &Array2<f64>, h: f64) -> Array2<f64> {
    let mut g = Array2::zeros(t.dim());
    let mut probe = t.clone();
    for idx in 0..t.len() {
        let (r, c) = (idx / t.ncols(), idx % t.ncols());
        let orig = probe[[r, c]];
        probe[[r, c]] = orig + h;
        let up = f(&probe);
        probe[[r, c]] = orig - h;
        let down = f(&probe);
        probe[[r, c]] = orig;
        g[[r, c]] = (up - down) / (2.0 * h);
    }
    g
}

/// Brute-force pair enumeration: (agreeing pairs, total, together in both,
/// together in a, together in b).
pub fn brute_pairs(a: &[usize], b: &[usize]) -> (u64, u64, u64, u64, u64) {
    let m = a.len();
    let (mut agree, mut total, mut both, mut ta, mut tb) = (0, 0, 0, 0, 0);
    for i in 0..m {
        for j in i + 1..m {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            total += 1;
            if sa == sb {
                agree += 1;
            }
            if sa && sb {
                both += 1;
            }
            if sa {
                ta += 1;
            }
            if sb {
                tb += 1;
            }
        }
    }
    (agree, total, both, ta, tb)
}

pub fn brute_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let (agree, total, ..) = brute_pairs(a, b);
    if total == 0 {
        1.0
    } else {
        agree as f64 / total as f64
    }
}

/// ARI from brute-force pair counts with the Hubert–Arabie formula.
pub fn brute_adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let (_, total, both, ta, tb) = brute_pairs(a, b);
    let (index, sa, sb) = (both as f64, ta as f64, tb as f64);
    let expected = if total == 0 { 0.0 } else { sa * sb / total as f64 };
    let max = 0.5 * (sa + sb);
    if max - expected == 0.0 {
        let same = (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])));
        return if same { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}

pub fn random_matrix(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.0))
}

/// Low-noise two-block instance: rows split in half, columns split in half,
/// block means +-2, plus a target following the row split.
pub fn two_block_instance(n: usize, p: usize, noise: f64, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, p), |(i, j)| {
        let s = if (i < n / 2) == (j < p / 2) { 2.0 } else { -2.0 };
        s + noise * rng.random_range(-1.0..1.0)
    });
    let y = (0..n)
        .map(|i| if i < n / 2 { 5.0 } else { -5.0 } + rng.random_range(-0.5..0.5))
        .collect();
    (x, y)
}
