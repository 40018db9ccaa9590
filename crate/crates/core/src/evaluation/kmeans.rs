use ndarray::{Array2, ArrayView1};
use rand::Rng as _;

use crate::error::{validation, Result};
use crate::rng::{self, derive_seed};

const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squared distances.
    pub objective: f64,
    /// Objective after each assignment step of the winning run.
    pub history: Vec<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm from `runs` k-means++ starts; returns the run with the
/// smallest objective.
pub fn kmeans(points: &Array2<f64>, k: usize, runs: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 || k > n {
        return validation(format!("cannot form {k} clusters from {n} points"));
    }
    if runs == 0 {
        return validation("at least one k-means run is required");
    }
    if points.iter().any(|x| !x.is_finite()) {
        return validation("points must be finite");
    }
    let mut best: Option<KMeansResult> = None;
    for run in 0..runs {
        let result = single_run(points, k, derive_seed(seed, run as u64));
        if best.as_ref().is_none_or(|b| result.objective < b.objective) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one run"))
}

fn plus_plus_init(points: &Array2<f64>, k: usize, rng: &mut rng::Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn single_run(points: &Array2<f64>, k: usize, seed: u64) -> KMeansResult {
    let (n, dim) = points.dim();
    let mut rng = rng::seeded(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut objective = f64::INFINITY;

    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (best, d) = (0..k)
                .map(|c| (c, sq_dist(points.row(i), centroids.row(c))))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
            dists[i] = d;
        }
        // Empty clusters take the point currently farthest from its centroid.
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
                centroids.row_mut(c).assign(&points.row(i));
                dists[i] = 0.0;
                changed = true;
            }
        }
        let previous = objective;
        objective = dists.iter().sum();
        history.push(objective);
        // Ties between coincident centroids can cycle without improving.
        if !changed || objective >= previous {
            break;
        }
        let mut sums = Array2::<f64>::zeros((k, dim));
        for (i, &l) in labels.iter().enumerate() {
            let mut row = sums.row_mut(l);
            row += &points.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mean = sums.row(c).mapv(|x| x / counts[c] as f64);
                centroids.row_mut(c).assign(&mean);
            }
        }
    }
    KMeansResult { labels, centroids, objective, history }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn separates_two_points() {
        let pts = arr2(&[[0.0], [10.0]]);
        let r = kmeans(&pts, 2, 3, 0).unwrap();
        assert_ne!(r.labels[0], r.labels[1]);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn single_cluster_objective_is_total_scatter() {
        let pts = arr2(&[[0.0, 1.0], [2.0, 3.0], [4.0, -1.0], [1.0, 1.0]]);
        let r = kmeans(&pts, 1, 1, 5).unwrap();
        let mean = pts.mean_axis(ndarray::Axis(0)).unwrap();
        let scatter: f64 = pts.rows().into_iter().map(|p| sq_dist(p, mean.view())).sum();
        assert!((r.objective - scatter).abs() < 1e-12);
        assert!(r.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = rng::seeded(3);
        let pts = Array2::from_shape_simple_fn((200, 3), || rng.random::<f64>());
        for seed in 0..5 {
            let r = kmeans(&pts, 6, 1, seed).unwrap();
            assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", r.history);
        }
    }

    #[test]
    fn too_many_clusters() {
        assert!(kmeans(&arr2(&[[0.0]]), 2, 1, 0).is_err());
    }

    #[test]
    fn duplicate_points_fill_every_cluster() {
        let pts = arr2(&[[1.0], [1.0], [1.0], [2.0]]);
        let r = kmeans(&pts, 3, 1, 0).unwrap();
        let mut used = r.labels.clone();
        used.sort_unstable();
        used.dedup();
        assert_eq!(used.len(), 3);
    }
}
