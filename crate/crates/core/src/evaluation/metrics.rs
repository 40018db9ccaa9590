//! Clustering agreement, classification F1 and ranking AUC.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Minimum-cost assignment of rows to distinct columns (`rows <= cols`), by
/// the Kuhn-Munkres algorithm with potentials. Returns the column of each row.
pub fn hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let (n, m) = cost.dim();
    assert!(n <= m, "hungarian needs rows <= cols");
    // 1-based arrays with a sentinel column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[[r0 - 1, j - 1]] - u[r0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

fn dense_relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let distinct: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    let index: std::collections::HashMap<usize, usize> =
        distinct.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    (labels.iter().map(|l| index[l]).collect(), distinct.len())
}

/// Contingency counts: rows are predicted clusters, columns true classes,
/// both renumbered densely in ascending order.
pub fn contingency(pred: &[usize], truth: &[usize]) -> Array2<f64> {
    let (p, np) = dense_relabel(pred);
    let (t, nt) = dense_relabel(truth);
    let mut table = Array2::zeros((np, nt));
    for (&a, &b) in p.iter().zip(&t) {
        table[[a, b]] += 1.0;
    }
    table
}

/// Best one-to-one cluster -> class mapping (by matched node count), as a
/// list of `(cluster row, class column)` pairs of the contingency table.
fn best_mapping(table: &Array2<f64>) -> Vec<(usize, usize)> {
    let (r, c) = table.dim();
    if r <= c {
        hungarian(&table.mapv(|x| -x)).into_iter().enumerate().collect()
    } else {
        let cols = hungarian(&table.t().mapv(|x| -x));
        cols.into_iter().enumerate().map(|(class, cluster)| (cluster, class)).collect()
    }
}

/// Accuracy under the best one-to-one mapping of clusters to classes.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let table = contingency(pred, truth);
    let matched: f64 = best_mapping(&table).iter().map(|&(a, b)| table[[a, b]]).sum();
    matched / pred.len() as f64
}

fn entropy(counts: impl Iterator<Item = f64>, n: f64) -> f64 {
    counts.filter(|&c| c > 0.0).map(|c| -(c / n) * (c / n).ln()).sum()
}

/// Mutual information normalized by the arithmetic mean of the two entropies.
pub fn normalized_mutual_info(pred: &[usize], truth: &[usize]) -> f64 {
    let table = contingency(pred, truth);
    let n = pred.len() as f64;
    let rows: Vec<f64> = table.rows().into_iter().map(|r| r.sum()).collect();
    let cols: Vec<f64> = table.columns().into_iter().map(|c| c.sum()).collect();
    let h_pred = entropy(rows.iter().copied(), n);
    let h_truth = entropy(cols.iter().copied(), n);
    if h_pred == 0.0 && h_truth == 0.0 {
        return 1.0;
    }
    let mut mi = 0.0;
    for ((i, j), &nij) in table.indexed_iter() {
        if nij > 0.0 {
            mi += (nij / n) * ((n * nij) / (rows[i] * cols[j])).ln();
        }
    }
    let denom = (h_pred + h_truth) / 2.0;
    (mi / denom).clamp(0.0, 1.0)
}

fn comb2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index.
pub fn adjusted_rand_index(pred: &[usize], truth: &[usize]) -> f64 {
    let table = contingency(pred, truth);
    let n = pred.len() as f64;
    let index: f64 = table.iter().map(|&x| comb2(x)).sum();
    let sum_rows: f64 = table.rows().into_iter().map(|r| comb2(r.sum())).sum();
    let sum_cols: f64 = table.columns().into_iter().map(|c| comb2(c.sum())).sum();
    let expected = sum_rows * sum_cols / comb2(n);
    let max_index = (sum_rows + sum_cols) / 2.0;
    if max_index == expected {
        return 1.0;
    }
    (index - expected) / (max_index - expected)
}

/// Support-weighted mean F1 over true classes after mapping each cluster to
/// its assigned class; clusters left unmatched predict no class.
pub fn weighted_f1_after_mapping(pred: &[usize], truth: &[usize]) -> f64 {
    let table = contingency(pred, truth);
    let n = pred.len() as f64;
    let mut predicted_count = vec![0.0; table.ncols()];
    let mut true_positive = vec![0.0; table.ncols()];
    for (cluster, class) in best_mapping(&table) {
        predicted_count[class] = table.row(cluster).sum();
        true_positive[class] = table[[cluster, class]];
    }
    table
        .columns()
        .into_iter()
        .enumerate()
        .map(|(class, col)| {
            let support = col.sum();
            let denom = predicted_count[class] + support;
            let f1 = if denom > 0.0 { 2.0 * true_positive[class] / denom } else { 0.0 };
            support * f1
        })
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringScores {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub weighted_f1: f64,
}

pub fn clustering_scores(pred: &[usize], truth: &[usize]) -> Result<ClusteringScores> {
    if pred.len() != truth.len() || pred.is_empty() {
        return validation("prediction and truth must be nonempty and of equal length");
    }
    Ok(ClusteringScores {
        acc: clustering_accuracy(pred, truth),
        nmi: normalized_mutual_info(pred, truth),
        ari: adjusted_rand_index(pred, truth),
        weighted_f1: weighted_f1_after_mapping(pred, truth),
    })
}

/// Micro- and macro-averaged F1 of predicted label sets. Macro averages over
/// labels that occur in the truth or the predictions.
pub fn f1_scores(truth: &[Vec<usize>], predicted: &[Vec<usize>], num_labels: usize) -> (f64, f64) {
    let mut tp = vec![0.0; num_labels];
    let mut n_pred = vec![0.0; num_labels];
    let mut n_true = vec![0.0; num_labels];
    for (t, p) in truth.iter().zip(predicted) {
        for &l in t {
            n_true[l] += 1.0;
        }
        for &l in p {
            n_pred[l] += 1.0;
            if t.contains(&l) {
                tp[l] += 1.0;
            }
        }
    }
    let total_tp: f64 = tp.iter().sum();
    let total: f64 = n_pred.iter().sum::<f64>() + n_true.iter().sum::<f64>();
    let micro = if total > 0.0 { 2.0 * total_tp / total } else { 0.0 };
    let per_label: Vec<f64> = (0..num_labels)
        .filter(|&l| n_pred[l] + n_true[l] > 0.0)
        .map(|l| 2.0 * tp[l] / (n_pred[l] + n_true[l]))
        .collect();
    let macro_f1 = if per_label.is_empty() {
        0.0
    } else {
        per_label.iter().sum::<f64>() / per_label.len() as f64
    };
    (micro, macro_f1)
}

/// Probability that a random positive scores above a random negative, with
/// ties counting one half (rank-sum form).
pub fn auc_score(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return validation("scores and labels differ in length");
    }
    if scores.iter().any(|s| s.is_nan()) {
        return validation("scores contain NaN");
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return validation("AUC needs both positive and negative examples");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Average 1-based rank of the tied block.
        let rank = (start + 1 + end) as f64 / 2.0;
        rank_sum += rank * order[start..end].iter().filter(|&&i| labels[i]).count() as f64;
        start = end;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn hungarian_small() {
        let cost = arr2(&[[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]);
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn hungarian_rectangular() {
        let cost = arr2(&[[5.0, 1.0, 9.0, 0.5], [1.0, 5.0, 9.0, 9.0]]);
        assert_eq!(hungarian(&cost), vec![3, 0]);
    }

    #[test]
    fn permuted_labels_score_perfectly() {
        let s = clustering_scores(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(s.acc, 1.0);
        assert!((s.nmi - 1.0).abs() < 1e-12);
        assert!((s.ari - 1.0).abs() < 1e-12);
        assert!((s.weighted_f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uninformative_partition() {
        let s = clustering_scores(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap();
        assert_eq!(s.nmi, 0.0);
        assert_eq!(s.ari, 0.0);
        assert_eq!(s.acc, 0.5);
    }

    #[test]
    fn crossed_partition_ari() {
        // Pair counting by hand: no pair is together in both partitions.
        // index = 0, rows = 2, cols = 2, expected = 4/6, max = 2.
        let ari = adjusted_rand_index(&[0, 1, 0, 1], &[0, 0, 1, 1]);
        assert!((ari - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn weighted_f1_with_extra_cluster() {
        // Cluster 2 cannot be mapped (two classes); its node counts as a miss.
        let f1 = weighted_f1_after_mapping(&[0, 0, 1, 2], &[0, 0, 1, 1]);
        // class 0: tp 2, pred 2, support 2 -> 1. class 1: mapped to one of
        // clusters 1/2 (tp 1, pred 1, support 2) -> 2/3.
        assert!((f1 - (2.0 * 1.0 + 2.0 * (2.0 / 3.0)) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn f1_micro_macro() {
        let truth = vec![vec![0], vec![1], vec![1], vec![2]];
        let pred = vec![vec![0], vec![1], vec![0], vec![2]];
        let (micro, macro_f1) = f1_scores(&truth, &pred, 3);
        assert!((micro - 0.75).abs() < 1e-12);
        // label 0: 2*1/(2+1); label 1: 2*1/(1+2); label 2: 1
        assert!((macro_f1 - (2.0 / 3.0 + 2.0 / 3.0 + 1.0) / 3.0).abs() < 1e-12);
        let wrong = vec![vec![1], vec![0], vec![0], vec![0]];
        assert_eq!(f1_scores(&truth, &wrong, 3).0, 0.0);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_score(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(auc_score(&[0.3; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert!(auc_score(&[0.1, 0.2], &[true, true]).is_err());
    }
}
