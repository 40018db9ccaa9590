use std::collections::HashSet;

use fenode::evaluation::{adjusted_rand_index, auc_score, f1_scores, hungarian, normalized_mutual_info};
use fenode::factorization::{gmf_fit, gmf_gradient, gmf_loss, reconstruct, Embedding, FitOptions};
use fenode::fe_distance::{
    fe_directed, fe_directed_naive, fe_distance, path_enumeration_oracle, sp_distance, ct_distance, symmetrize,
    DissimilarityMatrix, FeParams, Horizon,
};
use fenode::graph::{preprocess, split_edges_for_link_prediction, transition_matrix, Graph};
use fenode::ndarray::Array2;
use fenode::similarity::{nearest_rank, pos_neg_from_similarity, to_similarity, PosNegWeights, SimilarityMatrix};
use fenode::synthetic::{erdos_renyi, signed_adjacency};
use proptest::prelude::*;

/// Connected weighted graph: a random tree plus extra edges.
fn connected_graph(max_nodes: usize) -> impl Strategy<Value = Graph> {
    (3..=max_nodes).prop_flat_map(|n| {
        let parents = (1..n).map(|v| 0..v).collect::<Vec<_>>();
        let weights = proptest::collection::vec(0.5f64..3.0, n - 1);
        let extra = proptest::collection::vec((0..n, 0..n, 0.5f64..3.0), 0..n);
        (Just(n), parents, weights, extra).prop_map(|(n, parents, weights, extra)| {
            let tree = parents.into_iter().enumerate().map(|(k, p)| (p, k + 1, weights[k]));
            let extra = extra.into_iter().filter(|&(a, b, _)| a != b);
            Graph::from_edges(n, tree.chain(extra)).unwrap()
        })
    })
}

/// Any small edge list, possibly with self-loops and several components.
fn messy_graph() -> impl Strategy<Value = Graph> {
    (2usize..12).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n, 0.1f64..5.0), 1..20)
            .prop_map(move |edges| Graph::from_edges(n, edges).unwrap())
    })
}

fn unweighted(g: &Graph) -> Graph {
    Graph::from_edges(g.node_count(), g.edges().iter().map(|&(a, b, _)| (a, b, 1.0))).unwrap()
}

fn all_nodes(g: &Graph) -> Vec<usize> {
    (0..g.node_count()).collect()
}

fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() }).fold(0.0, f64::max)
}

fn weights_from(values: Vec<f64>, n: usize) -> PosNegWeights {
    let plus = Array2::from_shape_vec((n, n), values.iter().map(|v| v.exp()).collect()).unwrap();
    PosNegWeights::new(plus, Array2::ones((n, n))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn preprocess_is_idempotent(g in messy_graph()) {
        if let Ok(once) = preprocess(&g) {
            prop_assert!(once.is_connected());
            prop_assert!(!once.has_self_loops());
            prop_assert_eq!(preprocess(&once).unwrap(), once);
        }
    }

    #[test]
    fn transition_rows_are_stochastic(g in connected_graph(12)) {
        let p = transition_matrix(&g).unwrap().to_dense();
        for row in p.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn fe_matches_path_enumeration(g in connected_graph(6), eta in 0.05f64..3.0, l in 1usize..6) {
        let params = FeParams::new(eta).with_horizon(Horizon::Steps(l)).exact();
        let phi = fe_directed(&g, &params, &all_nodes(&g)).unwrap();
        for s in 0..g.node_count() {
            for t in 0..g.node_count() {
                let oracle = path_enumeration_oracle(&g, eta, s, t, l).unwrap();
                let got = phi.values[[s, t]];
                prop_assert!(got == oracle || (got - oracle).abs() <= 1e-9 * oracle.abs().max(1.0),
                    "({s},{t}): {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn log_sum_exp_matches_naive_recurrence(g in connected_graph(10), eta in 0.05f64..5.0, l in 1usize..15) {
        let params = FeParams::new(eta).with_horizon(Horizon::Steps(l)).exact();
        let targets = all_nodes(&g);
        let fast = fe_directed(&g, &params, &targets).unwrap();
        let naive = fe_directed_naive(&g, &params, &targets).unwrap();
        prop_assert!(max_abs(&fast.values, &naive.values) < 1e-9);
    }

    #[test]
    fn dropping_small_terms_changes_little(g in connected_graph(10), eta in 0.1f64..3.0) {
        let params = FeParams::new(eta).with_horizon(Horizon::Steps(20));
        let targets = all_nodes(&g);
        let dropped = fe_directed(&g, &params, &targets).unwrap();
        let exact = fe_directed(&g, &params.exact(), &targets).unwrap();
        // Each step leaves out at most (deg - 1) e^-7 relative mass.
        prop_assert!(max_abs(&dropped.values, &exact.values) < 20.0 * 10.0 * (-7.0f64).exp() / eta);
        prop_assert!(dropped.values.iter().zip(&exact.values).all(|(d, e)| d >= e || d == e));
    }

    #[test]
    fn columns_do_not_depend_on_other_targets(g in connected_graph(10), pick in any::<proptest::sample::Index>()) {
        let params = FeParams::new(0.7).with_horizon(Horizon::Steps(8));
        let n = g.node_count();
        let t = pick.index(n);
        let full = fe_directed(&g, &params, &all_nodes(&g)).unwrap();
        let single = fe_directed(&g, &params, &[t]).unwrap();
        for s in 0..n {
            prop_assert_eq!(single.values[[s, 0]], full.values[[s, t]]);
        }
    }

    #[test]
    fn fe_is_monotone_in_horizon(g in connected_graph(10), eta in 0.05f64..3.0) {
        let targets = all_nodes(&g);
        let mut previous: Option<Array2<f64>> = None;
        for l in 1..12 {
            let phi = fe_directed(&g, &FeParams::new(eta).with_horizon(Horizon::Steps(l)).exact(), &targets)
                .unwrap()
                .values;
            if let Some(p) = &previous {
                prop_assert!(p.iter().zip(&phi).all(|(a, b)| *b <= a + 1e-12));
            }
            previous = Some(phi);
        }
    }

    #[test]
    fn fe_is_a_metric_between_sp_and_ct(g in connected_graph(10), eta in 0.01f64..5.0) {
        let g = unweighted(&g);
        let n = g.node_count();
        let delta = fe_distance(&g, eta, 1e-12).unwrap().values;
        let sp = sp_distance(&g).unwrap().values;
        let ct = ct_distance(&g).unwrap().values;
        for i in 0..n {
            prop_assert_eq!(delta[[i, i]], 0.0);
            for j in 0..n {
                prop_assert_eq!(delta[[i, j]], delta[[j, i]]);
                prop_assert!(delta[[i, j]] >= sp[[i, j]] - 1e-9);
                prop_assert!(delta[[i, j]] <= ct[[i, j]] / 2.0 + 1e-7 * ct[[i, j]].max(1.0));
                for k in 0..n {
                    prop_assert!(delta[[i, k]] <= delta[[i, j]] + delta[[j, k]] + 1e-8);
                }
            }
        }
    }

    #[test]
    fn fe_decreases_with_eta(g in connected_graph(8), eta in 0.01f64..3.0, factor in 1.1f64..4.0) {
        let low = fe_distance(&g, eta, 1e-12).unwrap().values;
        let high = fe_distance(&g, eta * factor, 1e-12).unwrap().values;
        prop_assert!(low.iter().zip(&high).all(|(a, b)| *b <= a + 1e-9));
    }

    #[test]
    fn fe_is_invariant_under_node_relabeling(
        g in connected_graph(9),
        perm_seed in any::<u64>(),
        eta in 0.1f64..2.0,
    ) {
        let n = g.node_count();
        let mut perm: Vec<usize> = (0..n).collect();
        // Fisher-Yates driven by a simple LCG; any permutation will do.
        let mut state = perm_seed;
        for k in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(k, (state >> 33) as usize % (k + 1));
        }
        let relabeled = Graph::from_edges(n, g.edges().iter().map(|&(a, b, w)| (perm[a], perm[b], w))).unwrap();
        let d = fe_distance(&g, eta, 1e-12).unwrap().values;
        let dp = fe_distance(&relabeled, eta, 1e-12).unwrap().values;
        for i in 0..n {
            for j in 0..n {
                prop_assert!((d[[i, j]] - dp[[perm[i], perm[j]]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn similarity_is_affine_with_pinned_maximum(
        values in proptest::collection::vec(0.0f64..10.0, 36),
        percentile in 1.0f64..100.0,
        max_target in 0.5f64..10.0,
    ) {
        let n = 6;
        let mut m = Array2::from_shape_vec((n, n), values).unwrap();
        for i in 0..n {
            m[[i, i]] = 0.0;
            for j in 0..i {
                m[[i, j]] = m[[j, i]];
            }
        }
        let mut off: Vec<f64> = m.indexed_iter().filter(|((i, j), _)| i != j).map(|(_, &v)| v).collect();
        off.sort_by(f64::total_cmp);
                let b = nearest_rank(&off, percentile);
        prop_assume!(b > off[0]);
        let delta = DissimilarityMatrix::square(m.clone(), true);
        let s = to_similarity(&delta, percentile, max_target).unwrap();
        prop_assert_eq!(s.shift, b);
        let mut largest = f64::NEG_INFINITY;
        for ((i, j), &v) in s.values.indexed_iter() {
            if i != j {
                // Round trip back to the distance.
                prop_assert!((s.shift - v / s.scale - m[[i, j]]).abs() < 1e-9);
                largest = largest.max(v);
            }
        }
        prop_assert!((largest - max_target).abs() < 1e-9);
        // Nonnegative similarities are exactly the distances up to the shift.
        let nonneg = s.values.indexed_iter().filter(|((i, j), v)| i != j && **v >= 0.0).count();
        prop_assert_eq!(nonneg, off.iter().filter(|&&x| x <= s.shift).count());
        let w = pos_neg_from_similarity(&s).unwrap();
        let back = w.log_ratio();
        for ((i, j), &v) in s.values.indexed_iter() {
            // Very negative similarities make S+ subnormal or zero, where the
            // round trip loses precision.
            if i != j && w.s_plus[[i, j]].is_normal() {
                prop_assert!((back[[i, j]] - v).abs() <= 1e-12 * v.abs().max(1.0), "{} vs {v}", back[[i, j]]);
            }
        }
        let above = off.iter().filter(|&&x| x <= s.shift).count() as f64;
        prop_assert!(above / off.len() as f64 >= percentile / 100.0 - 1e-12);
    }

    #[test]
    fn nearest_rank_is_an_order_statistic(mut xs in proptest::collection::vec(-100.0f64..100.0, 1..40), p in 0.1f64..100.0) {
        xs.sort_by(f64::total_cmp);
        let r = nearest_rank(&xs, p);
        let at_most = xs.iter().filter(|&&x| x <= r).count() as f64;
        let below = xs.iter().filter(|&&x| x < r).count() as f64;
        let m = xs.len() as f64;
        prop_assert!(at_most >= p / 100.0 * m - 1e-9);
        prop_assert!(below < p / 100.0 * m + 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences(
        values in proptest::collection::vec(-3.0f64..3.0, 25),
        u in proptest::collection::vec(-1.0f64..1.0, 15),
        v in proptest::collection::vec(-1.0f64..1.0, 15),
        tied in any::<bool>(),
    ) {
        let w = weights_from(values, 5);
        let u = Array2::from_shape_vec((5, 3), u).unwrap();
        let e = if tied {
            Embedding::tied(u)
        } else {
            Embedding::untied(u, Array2::from_shape_vec((5, 3), v).unwrap())
        };
        let grad = gmf_gradient(&w, &e, tied).unwrap();
        let h = 1e-6;
        for idx in 0..15 {
            let (r, c) = (idx / 3, idx % 3);
            let mut plus = e.clone();
            let mut minus = e.clone();
            plus.u[[r, c]] += h;
            minus.u[[r, c]] -= h;
            let numeric = (gmf_loss(&w, &plus, tied).unwrap() - gmf_loss(&w, &minus, tied).unwrap()) / (2.0 * h);
            let analytic = grad.u[[r, c]];
            prop_assert!((numeric - analytic).abs() <= 1e-5 * analytic.abs().max(1.0), "{numeric} vs {analytic}");
        }
    }

    #[test]
    fn tied_fit_reconstructs_symmetrically(values in proptest::collection::vec(-2.0f64..2.0, 36), seed in any::<u64>()) {
        let mut m = Array2::from_shape_vec((6, 6), values).unwrap();
        for i in 0..6 {
            for j in 0..i {
                m[[i, j]] = m[[j, i]];
            }
        }
        let w = weights_from(m.iter().copied().collect(), 6);
        let fit = FitOptions { dim: 3, iterations: 50, seed, ..Default::default() };
        let e = gmf_fit(&w, &fit).unwrap();
        prop_assert!(e.is_tied());
        let r = reconstruct(&e);
        prop_assert!(max_abs(&r, &r.t().to_owned()) < 1e-12);
        prop_assert_eq!(e.loss_trace.len(), 51);
    }

    #[test]
    fn gradient_vanishes_at_exact_log_odds(u in proptest::collection::vec(-1.0f64..1.0, 12), v in proptest::collection::vec(-1.0f64..1.0, 12)) {
        let e = Embedding::untied(Array2::from_shape_vec((4, 3), u).unwrap(), Array2::from_shape_vec((4, 3), v).unwrap());
        let w = weights_from(reconstruct(&e).iter().copied().collect(), 4);
        let grad = gmf_gradient(&w, &e, false).unwrap();
        prop_assert!(grad.u.iter().chain(grad.v.as_ref().unwrap()).all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn f1_extremes(classes in proptest::collection::vec(0usize..4, 1..30)) {
        let truth: Vec<Vec<usize>> = classes.iter().map(|&c| vec![c]).collect();
        let wrong: Vec<Vec<usize>> = classes.iter().map(|&c| vec![(c + 1) % 4]).collect();
        let (micro, macro_f1) = f1_scores(&truth, &truth, 4);
        prop_assert_eq!(micro, 1.0);
        prop_assert!(macro_f1 <= 1.0);
        prop_assert_eq!(f1_scores(&truth, &wrong, 4).0, 0.0);
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps(
        scored in proptest::collection::vec((-5.0f64..5.0, any::<bool>()), 2..40),
        shift in -10.0f64..10.0,
        scale in 0.1f64..10.0,
    ) {
        let (scores, labels): (Vec<f64>, Vec<bool>) = scored.into_iter().unzip();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let base = auc_score(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| (scale * s + shift).atan()).collect();
        prop_assert!((auc_score(&mapped, &labels).unwrap() - base).abs() < 1e-12);
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        prop_assert!((auc_score(&scores, &flipped).unwrap() - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn nmi_and_ari_are_symmetric_and_label_blind(
        pairs in proptest::collection::vec((0usize..4, 0usize..4), 2..40),
        offset in 1usize..10,
    ) {
        let (a, b): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let nmi = normalized_mutual_info(&a, &b);
        let ari = adjusted_rand_index(&a, &b);
        prop_assert!((nmi - normalized_mutual_info(&b, &a)).abs() < 1e-12);
        prop_assert!((ari - adjusted_rand_index(&b, &a)).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&nmi));
        let renamed: Vec<usize> = a.iter().map(|x| 3 * x + offset).collect();
        prop_assert!((normalized_mutual_info(&renamed, &b) - nmi).abs() < 1e-12);
        prop_assert!((adjusted_rand_index(&renamed, &b) - ari).abs() < 1e-12);
        prop_assert!((adjusted_rand_index(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hungarian_matches_brute_force(rows in 1usize..5, extra in 0usize..3, values in proptest::collection::vec(-10.0f64..10.0, 35)) {
        let cols = rows + extra;
        let cost = Array2::from_shape_fn((rows, cols), |(i, j)| values[i * 7 + j]);
        let assignment = hungarian(&cost);
        let distinct: HashSet<usize> = assignment.iter().copied().collect();
        prop_assert_eq!(distinct.len(), rows);
        let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
        prop_assert!((total - brute_force_min(&cost, 0, &mut vec![false; cols])).abs() < 1e-9);
    }

    #[test]
    fn edge_split_invariants(g in connected_graph(14), fraction in 0.1f64..0.5, seed in any::<u64>()) {
        let Ok(split) = split_edges_for_link_prediction(&g, fraction, seed) else {
            return Ok(());
        };
        let train = &split.train_graph;
        let induced = &split.induced_graph;
        prop_assert!(train.is_connected());
        prop_assert_eq!(train.node_count(), induced.node_count());
        prop_assert_eq!(split.node_map.len(), train.node_count());
        for &(a, b) in &split.train_positive_pairs() {
            prop_assert!(g.has_edge(split.node_map[a], split.node_map[b]));
        }
        for &(a, b) in &split.test_positive_pairs {
            prop_assert!(a < b && induced.has_edge(a, b) && !train.has_edge(a, b));
        }
        prop_assert_eq!(split.negative_pairs_train.len(), train.edge_count());
        prop_assert_eq!(split.negative_pairs_test.len(), split.test_positive_pairs.len());
        let mut seen = HashSet::new();
        for &(a, b) in split.negative_pairs_train.iter().chain(&split.negative_pairs_test) {
            prop_assert!(a < b && !induced.has_edge(a, b));
            prop_assert!(seen.insert((a, b)));
        }
        prop_assert_eq!(induced.edge_count(), train.edge_count() + split.test_positive_pairs.len());
    }

    #[test]
    fn pos_neg_weights_skip_self_pairs(g in connected_graph(8)) {
        let delta = fe_distance(&g, 1.0, 1e-10).unwrap();
        let s = to_similarity(&delta, 70.0, 6.0).unwrap();
        let w = pos_neg_from_similarity(&s).unwrap();
        for i in 0..g.node_count() {
            prop_assert!(!w.is_included(i, i));
        }
        let sym = symmetrize(&fe_directed(&g, &FeParams::new(1.0).exact().with_tolerance(1e-10), &all_nodes(&g)).unwrap()).unwrap();
        prop_assert!(max_abs(&sym.values, &delta.values) < 1e-6);
    }
}

fn brute_force_min(cost: &Array2<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
    if row == cost.nrows() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for j in 0..cost.ncols() {
        if !used[j] {
            used[j] = true;
            best = best.min(cost[[row, j]] + brute_force_min(cost, row + 1, used));
            used[j] = false;
        }
    }
    best
}

#[test]
fn adam_improves_over_every_50_step_window() {
    for seed in 0..5 {
        let g = erdos_renyi(25, 0.1, seed).unwrap();
        let w = pos_neg_from_similarity(&SimilarityMatrix::external(signed_adjacency(&g, 5.0))).unwrap();
        let fit = FitOptions { dim: 8, symmetric: false, seed, ..Default::default() };
        let trace = gmf_fit(&w, &fit).unwrap().loss_trace;
        for k in 50..trace.len() {
            assert!(trace[k] > trace[k - 50], "seed {seed}: no gain over steps {}..{k}", k - 50);
        }
    }
}
