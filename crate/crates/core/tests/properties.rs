mod common;

use common::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

use subic::biclusters::default_group_tol;
use subic::data::write_csv;
use subic::metrics::{adjusted_rand_index, rand_index};
use subic::predict::posterior_weights;
use subic::simulate::{generate, SimDesign};
use subic::solver::Solver;
use subic::weights::{knn_mask, Axis2, WeightSet};
use subic::{
    build_weights, center_columns, extract, fit, group_centroids, load_csv, objective_value, predict, DataMatrix,
    FitConfig, Partition, Scenario, TargetVector,
};

fn matrix_strategy(max_n: usize, max_p: usize) -> impl Strategy<Value = Array2<f64>> {
    (2..=max_n, 2..=max_p).prop_flat_map(|(n, p)| {
        proptest::collection::vec(-1e3f64..1e3, n * p).prop_map(move |v| Array2::from_shape_vec((n, p), v).unwrap())
    })
}

fn labels_strategy(max_m: usize, max_k: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1..=max_m).prop_flat_map(move |m| {
        (
            proptest::collection::vec(0..max_k, m),
            proptest::collection::vec(0..max_k, m),
        )
    })
}

fn target(v: &[f64]) -> TargetVector {
    TargetVector::new(Array1::from(v.to_vec()), "y").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn centering_is_idempotent(x in matrix_strategy(8, 6)) {
        let once = center_columns(&DataMatrix::new(x).unwrap());
        let twice = center_columns(&once);
        for (a, b) in once.values.iter().zip(twice.values.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()) + 1e-9);
        }
        for (a, b) in once.column_means.iter().zip(twice.column_means.iter()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn csv_round_trip(x in matrix_strategy(6, 5), seed in 0u64..1000) {
        let n = x.nrows();
        let y: Vec<f64> = random_matrix(n, 1, seed).iter().map(|v| v * 100.0).collect();
        let dm = DataMatrix::new(x.clone()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&path, &dm, &target(&y), &[]).unwrap();
        let (back, by) = load_csv(&path, "y").unwrap();
        for (a, b) in x.iter().zip(back.values.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
        for (a, b) in y.iter().zip(by.values.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
        prop_assert_eq!(back.column_names, dm.column_names);
    }

    #[test]
    fn column_weights_ignore_positive_target_scale(seed in 0u64..500, c in 0.01f64..100.0) {
        let x = center_columns(&DataMatrix::new(random_matrix(9, 7, seed)).unwrap());
        let y: Vec<f64> = random_matrix(9, 1, seed + 7).iter().copied().collect();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let cfg = FitConfig::default();
        let a = build_weights(&x, &target(&y), &cfg).unwrap();
        let b = build_weights(&x, &target(&ys), &cfg).unwrap();
        for (pa, pb) in a.col_pairs.iter().zip(&b.col_pairs) {
            prop_assert_eq!((pa.i, pa.j), (pb.i, pb.j));
            prop_assert!((pa.sup - pb.sup).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_sums(seed in 0u64..500, knn in 1usize..8, supervised in any::<bool>()) {
        let x = center_columns(&DataMatrix::new(random_matrix(10, 6, seed)).unwrap());
        let y: Vec<f64> = (0..10).map(|i| (i % 3) as f64).collect();
        let cfg = FitConfig { knn, supervised, ..FitConfig::default() };
        let w = build_weights(&x, &target(&y), &cfg).unwrap();
        let cs: f64 = w.col_pairs.iter().map(|p| p.weight).sum();
        let rs: f64 = w.row_pairs.iter().map(|p| p.weight).sum();
        prop_assert!((cs - 1.0 / 6f64.sqrt()).abs() < 1e-9);
        prop_assert!((rs - 1.0 / 10f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn unsupervised_weights_match_direct_computation(seed in 0u64..500, knn in 1usize..6) {
        let x = center_columns(&DataMatrix::new(random_matrix(8, 6, seed)).unwrap());
        let cfg = FitConfig { knn, supervised: false, ..FitConfig::default() };
        let w = build_weights(&x, &target(&[0.0; 8]), &cfg).unwrap();
        let expect = |m: &Array2<f64>| -> Vec<(usize, usize, f64)> {
            // brute-force kNN union with lower-index tie break, then kernel and normalization
            let r = m.nrows();
            let d = |i: usize, j: usize| m.row(i).iter().zip(m.row(j).iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let mut keep = std::collections::BTreeSet::new();
            for i in 0..r {
                let mut o: Vec<usize> = (0..r).filter(|&j| j != i).collect();
                o.sort_by(|&a, &b| d(i, a).partial_cmp(&d(i, b)).unwrap().then(a.cmp(&b)));
                for &j in o.iter().take(knn.min(r - 1)) {
                    keep.insert((i.min(j), i.max(j)));
                }
            }
            let raw: Vec<(usize, usize, f64)> = keep.iter().map(|&(i, j)| (i, j, (-0.5 * d(i, j)).exp())).collect();
            let total: f64 = raw.iter().map(|t| t.2).sum();
            raw.into_iter().map(|(i, j, v)| (i, j, v / total / (r as f64).sqrt())).collect()
        };
        let check = |pairs: &[subic::weights::WeightedPair], want: Vec<(usize, usize, f64)>| {
            assert_eq!(pairs.len(), want.len());
            for (pr, (i, j, v)) in pairs.iter().zip(want) {
                assert_eq!((pr.i, pr.j), (i, j));
                // direct exponentials may underflow; only compare where they do not
                if v.is_normal() {
                    assert!((pr.weight - v).abs() <= 1e-9 * v, "{} vs {v}", pr.weight);
                }
                assert_eq!(pr.sup, 0.0);
            }
        };
        check(&w.row_pairs, expect(&x.values));
        check(&w.col_pairs, expect(&x.values.t().to_owned()));
    }

    #[test]
    fn row_permutation_permutes_row_pairs(seed in 0u64..300) {
        let raw = random_matrix(7, 5, seed);
        let y: Vec<f64> = random_matrix(7, 1, seed + 3).iter().copied().collect();
        let perm: Vec<usize> = vec![3, 0, 6, 1, 5, 2, 4];
        let xp = Array2::from_shape_fn((7, 5), |(i, j)| raw[[perm[i], j]]);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let cfg = FitConfig { knn: 3, ..FitConfig::default() };
        let a = build_weights(&center_columns(&DataMatrix::new(raw).unwrap()), &target(&y), &cfg).unwrap();
        let b = build_weights(&center_columns(&DataMatrix::new(xp).unwrap()), &target(&yp), &cfg).unwrap();
        let map = |w: &WeightSet, relabel: &dyn Fn(usize) -> usize| -> Vec<(usize, usize, u64)> {
            let mut v: Vec<_> = w.row_pairs.iter().map(|p| {
                let (i, j) = (relabel(p.i), relabel(p.j));
                (i.min(j), i.max(j), (p.weight * 1e12).round() as u64)
            }).collect();
            v.sort();
            v
        };
        prop_assert_eq!(map(&a, &|i| i), map(&b, &|i| perm[i]));
    }

    #[test]
    fn metrics_match_brute_force((a, b) in labels_strategy(12, 4)) {
        let (pa, pb) = (Partition::from_labels(&a), Partition::from_labels(&b));
        prop_assert_eq!(rand_index(&pa, &pb).unwrap(), brute_rand_index(&a, &b));
        let ari = adjusted_rand_index(&pa, &pb).unwrap();
        prop_assert!((ari - brute_adjusted_rand_index(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn metrics_symmetric_and_relabel_invariant((a, b) in labels_strategy(15, 5), shift in 1usize..9) {
        let (pa, pb) = (Partition::from_labels(&a), Partition::from_labels(&b));
        let relabeled: Vec<usize> = a.iter().map(|l| (l + shift) * 7 % 11).collect();
        let pr = Partition::from_labels(&relabeled);
        prop_assert_eq!(rand_index(&pa, &pb).unwrap(), rand_index(&pb, &pa).unwrap());
        prop_assert_eq!(adjusted_rand_index(&pa, &pb).unwrap(), adjusted_rand_index(&pb, &pa).unwrap());
        prop_assert_eq!(rand_index(&pr, &pb).unwrap(), rand_index(&pa, &pb).unwrap());
        prop_assert_eq!(adjusted_rand_index(&pr, &pb).unwrap(), adjusted_rand_index(&pa, &pb).unwrap());
        prop_assert_eq!(rand_index(&pa, &pa).unwrap(), 1.0);
        prop_assert_eq!(adjusted_rand_index(&pa, &pa).unwrap(), 1.0);
    }

    #[test]
    fn grouping_is_permutation_equivariant(seed in 0u64..500, eps in 0.0f64..0.8) {
        let t = random_matrix(9, 3, seed).mapv(|v| (v * 2.0).round() / 2.0);
        let perm: Vec<usize> = vec![8, 2, 5, 0, 7, 1, 4, 6, 3];
        let tp = Array2::from_shape_fn((9, 3), |(i, j)| t[[perm[i], j]]);
        let a = group_centroids(&t, Axis2::Rows, eps);
        let b = group_centroids(&tp, Axis2::Rows, eps);
        let mapped: Vec<usize> = perm.iter().map(|&i| a.labels()[i]).collect();
        prop_assert_eq!(Partition::from_labels(&mapped), b);
    }

    #[test]
    fn grouping_count_monotone_in_eps(seed in 0u64..500, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
        let t = random_matrix(6, 10, seed);
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = group_centroids(&t, Axis2::Columns, lo);
        let b = group_centroids(&t, Axis2::Columns, hi);
        prop_assert!(b.k() <= a.k());
    }

    #[test]
    fn posterior_shift_invariance(l in proptest::collection::vec(-50.0f64..50.0, 1..6), c in -1e3f64..1e3) {
        let shifted: Vec<f64> = l.iter().map(|v| v + c).collect();
        let (a, b) = (posterior_weights(&l), posterior_weights(&shifted));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cobra_scenario_objective_matches_reference(seed in 0u64..1000, gamma in 0.0f64..50.0) {
        let x = center_columns(&DataMatrix::new(random_matrix(7, 5, seed)).unwrap());
        let mut cfg = FitConfig::with_lambdas(3.0, gamma);
        cfg.apply_scenario(Scenario::Cobra);
        let w = build_weights(&x, &target(&[1.0, 0.0, 2.0, 4.0, 1.0, 0.0, 3.0]), &cfg).unwrap();
        let t = random_matrix(7, 5, seed + 1) * 4.0;
        let f = objective_value(&x.values, &t, &w, cfg.effective_lambda1(), cfg.lambda2);
        let g = cobra_objective(&x.values, &t, &w, gamma);
        prop_assert!((f - g).abs() <= 1e-12 * g.abs().max(1.0));
    }
}

#[test]
fn knn_mask_is_symmetric_union() {
    let x = random_matrix(12, 4, 2);
    let d = Array2::from_shape_fn((12, 12), |(i, j)| {
        x.row(i).iter().zip(x.row(j).iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    });
    let mask = knn_mask(&d, 2).unwrap();
    for i in 0..12 {
        let degree = mask.iter().filter(|&&(a, b)| a == i || b == i).count();
        assert!(degree >= 2);
    }
    assert!(mask.iter().all(|&(a, b)| a < b));
}

#[test]
fn primal_feasibility_at_convergence() {
    let (x, y) = two_block_instance(12, 9, 0.5, 4);
    let dm = DataMatrix::new(x.clone()).unwrap();
    let mut cfg = FitConfig::with_lambdas(2.0, 4.0);
    cfg.tol = 1e-7;
    cfg.max_iter = 20000;
    let f = fit(&dm, &target(&y), &cfg).unwrap();
    assert!(f.converged);
    let xinf = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let w = &f.weights;
    let mut worst = 0.0f64;
    for (k, pr) in w.col_pairs.iter().enumerate() {
        for r in 0..12 {
            worst = worst.max((pr.weight * (f.t[[r, pr.i]] - f.t[[r, pr.j]]) - f.state.vars.v[[k, r]]).abs());
        }
    }
    for (k, pr) in w.row_pairs.iter().enumerate() {
        for c in 0..9 {
            worst = worst.max((pr.weight * (f.t[[pr.i, c]] - f.t[[pr.j, c]]) - f.state.vars.s[[k, c]]).abs());
        }
    }
    assert!(worst <= cfg.tol * (1.0 + xinf), "violation {worst}");
}

#[test]
fn objective_trace_nonincreasing_after_warmup() {
    for seed in 0..3 {
        let sim = generate(&SimDesign::checkerboard(30, 24, 2, 4, 1.5, seed)).unwrap();
        let x = center_columns(&sim.x);
        let mut cfg = FitConfig::with_lambdas(100.0, 100.0);
        cfg.adaptive_mu = false;
        let w = build_weights(&x, &sim.y, &cfg).unwrap();
        let f = Solver::new(&x.values, w).unwrap().fit(&cfg).unwrap();
        let tr = &f.objective_trace;
        for k in 6..tr.len() {
            let slack = 1e-6 * (1.0 + tr[k - 1].abs());
            assert!(tr[k] <= tr[k - 1] + slack, "seed {seed} iter {k}: {} -> {}", tr[k - 1], tr[k]);
        }
    }
}

#[test]
fn blocks_partition_every_entry() {
    let sim = generate(&SimDesign::checkerboard(20, 16, 2, 2, 0.5, 1)).unwrap();
    let x = center_columns(&sim.x);
    let cfg = FitConfig::with_lambdas(1e3, 1e3);
    let f = fit(&x, &sim.y, &cfg).unwrap();
    let m = extract(&f, &x, &sim.y, &cfg).unwrap();
    assert_eq!(m.n_biclusters(), m.row_labels.k() * m.col_labels.k());
    let mut counts = vec![0usize; m.n_biclusters()];
    for &r in m.row_labels.labels() {
        for &c in m.col_labels.labels() {
            counts[r * m.col_labels.k() + c] += 1;
        }
    }
    assert_eq!(counts.iter().sum::<usize>(), 20 * 16);
    assert!(counts.iter().all(|&c| c > 0));
}

#[test]
fn shuffling_does_not_change_recovery() {
    let mut d = SimDesign::checkerboard(40, 40, 2, 4, 1.5, 8);
    let score = |d: &SimDesign| {
        let sim = generate(d).unwrap();
        let x = center_columns(&sim.x);
        let cfg = FitConfig::with_lambdas(1e4, 1e4);
        let m = extract(&fit(&x, &sim.y, &cfg).unwrap(), &x, &sim.y, &cfg).unwrap();
        subic::metrics::score_biclusters(&m.row_labels, &m.col_labels, &sim.truth_rows, &sim.truth_cols).unwrap()
    };
    let shuffled = score(&d);
    d.shuffle = false;
    let ordered = score(&d);
    assert_eq!(shuffled.cell.ri, ordered.cell.ri);
    assert_eq!(shuffled.rows.ari, ordered.rows.ari);
}

#[test]
fn prediction_is_a_convex_combination() {
    let sim = generate(&SimDesign::checkerboard(40, 20, 4, 2, 1.5, 2)).unwrap();
    let x = center_columns(&sim.x);
    let cfg = FitConfig::with_lambdas(1e3, 1e3);
    let m = extract(&fit(&x, &sim.y, &cfg).unwrap(), &x, &sim.y, &cfg).unwrap();
    let lo = m.y_means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m.y_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for seed in 0..20 {
        let raw: Vec<f64> = random_matrix(1, 20, seed).iter().map(|v| v * 8.0).collect();
        let p = predict(&raw, &m).unwrap();
        assert!(p.y_hat >= lo - 1e-9 && p.y_hat <= hi + 1e-9);
    }
}

#[test]
fn single_row_cluster_predicts_grand_mean() {
    let (x, y) = two_block_instance(10, 6, 0.3, 0);
    let dm = center_columns(&DataMatrix::new(x).unwrap());
    let tv = target(&y);
    let cfg = FitConfig::with_lambdas(1e6, 1e6);
    let m = extract(&fit(&dm, &tv, &cfg).unwrap(), &dm, &tv, &cfg).unwrap();
    assert_eq!(m.row_labels.k(), 1);
    let p = predict(&[0.5; 6], &m).unwrap();
    assert_eq!(p.y_hat, tv.mean());
}

#[test]
fn default_tolerance_scales_with_data() {
    let x = DataMatrix::new(random_matrix(5, 5, 1)).unwrap();
    let big = DataMatrix::new(random_matrix(5, 5, 1) * 1000.0).unwrap();
    let (a, b) = (default_group_tol(&x), default_group_tol(&big));
    assert!((b / a - 1000.0).abs() < 1e-9);
}
