//! L2-regularized logistic regression trained by full-batch gradient descent
//! with backtracking line search, and its one-vs-rest extension.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::graph::LabelSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegOptions {
    /// Penalty `l2/2 * |w|^2` added to the summed negative log-likelihood
    /// (the objective is divided by the sample count). The bias is free.
    pub l2: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm of the averaged objective is below this.
    pub tol: f64,
    /// Z-score the features with training statistics before fitting.
    pub standardize: bool,
}

impl Default for LogRegOptions {
    fn default() -> Self {
        LogRegOptions { l2: 1.0, max_iters: 500, tol: 1e-8, standardize: true }
    }
}

impl LogRegOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return validation(format!("l2 must be a nonnegative number, got {}", self.l2));
        }
        if self.max_iters == 0 {
            return validation("max_iters must be positive");
        }
        if !(self.tol > 0.0) {
            return validation(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLogReg {
    pub weights: Array1<f64>,
    /// Infinite for a constant classifier fitted on one-class data.
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    mean: Array1<f64>,
    scale: Array1<f64>,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    crate::factorization::sigmoid(z)
}

fn check_finite(x: ArrayView2<f64>) -> Result<()> {
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        let d = x.ncols().max(1);
        return validation(format!("non-finite feature at row {}, column {}", pos / d, pos % d));
    }
    Ok(())
}

fn column_stats(x: ArrayView2<f64>, standardize: bool) -> (Array1<f64>, Array1<f64>) {
    let d = x.ncols();
    if !standardize || x.nrows() == 0 {
        return (Array1::zeros(d), Array1::ones(d));
    }
    let mean = x.mean_axis(Axis(0)).unwrap();
    let mut scale = x.std_axis(Axis(0), 0.0);
    scale.mapv_inplace(|s| if s > 1e-12 { s } else { 1.0 });
    (mean, scale)
}

struct Problem<'a> {
    x: &'a Array2<f64>,
    y: Array1<f64>,
    l2: f64,
}

impl Problem<'_> {
    fn objective(&self, w: &Array1<f64>, b: f64) -> f64 {
        let z = self.x.dot(w) + b;
        let nll: f64 = z.iter().zip(self.y.iter()).map(|(&z, &y)| softplus(z) - y * z).sum();
        (nll + 0.5 * self.l2 * w.dot(w)) / self.y.len() as f64
    }

    fn gradient(&self, w: &Array1<f64>, b: f64) -> (Array1<f64>, f64) {
        let n = self.y.len() as f64;
        let z = self.x.dot(w) + b;
        let r = Array1::from_iter(z.iter().zip(self.y.iter()).map(|(&z, &y)| sigmoid(z) - y));
        let gw = (self.x.t().dot(&r) + self.l2 * w) / n;
        (gw, r.sum() / n)
    }
}

impl BinaryLogReg {
    pub fn fit(x: &Array2<f64>, y: &[bool], opts: &LogRegOptions) -> Result<Self> {
        opts.validate()?;
        if x.nrows() != y.len() {
            return validation(format!("{} feature rows but {} labels", x.nrows(), y.len()));
        }
        if y.is_empty() {
            return validation("no training examples");
        }
        check_finite(x.view())?;
        let (mean, scale) = column_stats(x.view(), opts.standardize);
        let d = x.ncols();
        let positives = y.iter().filter(|&&v| v).count();
        if positives == 0 || positives == y.len() {
            let bias = if positives == 0 { f64::NEG_INFINITY } else { f64::INFINITY };
            return Ok(BinaryLogReg {
                weights: Array1::zeros(d),
                bias,
                iterations: 0,
                converged: true,
                mean,
                scale,
            });
        }
        let xs = (x - &mean) / &scale;
        let problem = Problem {
            x: &xs,
            y: y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
            l2: opts.l2,
        };

        let mut w = Array1::zeros(d);
        let mut b = 0.0;
        let mut f = problem.objective(&w, b);
        let mut step = 1.0;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_iters {
            let (gw, gb) = problem.gradient(&w, b);
            let gnorm2 = gw.dot(&gw) + gb * gb;
            if gnorm2.sqrt() < opts.tol {
                converged = true;
                break;
            }
            iterations += 1;
            // Armijo backtracking, starting from twice the last accepted step.
            step *= 2.0;
            let (next_w, next_b, next_f) = loop {
                let cand_w = &w - &(step * &gw);
                let cand_b = b - step * gb;
                let cand_f = problem.objective(&cand_w, cand_b);
                if cand_f <= f - 0.5 * step * gnorm2 {
                    break (cand_w, cand_b, cand_f);
                }
                // Near the optimum the objective decrease drops below rounding
                // error; fall back to requiring a smaller gradient.
                if (cand_f - f).abs() <= 1e-13 * f.abs().max(1.0) {
                    let (cw, cb) = problem.gradient(&cand_w, cand_b);
                    if cw.dot(&cw) + cb * cb < gnorm2 {
                        break (cand_w, cand_b, cand_f);
                    }
                }
                step *= 0.5;
                if step < 1e-20 {
                    break (w.clone(), b, f);
                }
            };
            if step < 1e-20 {
                break;
            }
            w = next_w;
            b = next_b;
            f = next_f;
        }
        Ok(BinaryLogReg { weights: w, bias: b, iterations, converged, mean, scale })
    }

    pub fn is_constant(&self) -> bool {
        self.bias.is_infinite()
    }

    /// Linear scores `w . x + b` on the fitted feature scale.
    pub fn decision_function(&self, x: &Array2<f64>) -> Array1<f64> {
        if self.is_constant() {
            return Array1::from_elem(x.nrows(), self.bias);
        }
        let xs = (x - &self.mean) / &self.scale;
        xs.dot(&self.weights) + self.bias
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Array1<f64> {
        self.decision_function(x).mapv(sigmoid)
    }
}

/// One binary classifier per label.
#[derive(Debug, Clone, PartialEq)]
pub struct OneVsRest {
    pub classifiers: Vec<BinaryLogReg>,
}

pub fn fit_logreg_ovr(
    features: &Array2<f64>,
    labels: &LabelSet,
    opts: &LogRegOptions,
) -> Result<OneVsRest> {
    if features.nrows() != labels.node_count() {
        return validation(format!(
            "{} feature rows but {} labelled nodes",
            features.nrows(),
            labels.node_count()
        ));
    }
    check_finite(features.view())?;
    let classifiers = (0..labels.num_labels())
        .map(|label| {
            let y: Vec<bool> =
                (0..labels.node_count()).map(|i| labels.labels_of(i).contains(&label)).collect();
            BinaryLogReg::fit(features, &y, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OneVsRest { classifiers })
}

impl OneVsRest {
    /// `n x labels` matrix of decision values.
    pub fn scores(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.classifiers.len()));
        for (k, c) in self.classifiers.iter().enumerate() {
            out.column_mut(k).assign(&c.decision_function(x));
        }
        out
    }

    /// The `k[i]` best-scoring labels of each row (ties to the lower label id).
    pub fn predict_top_k(&self, x: &Array2<f64>, k: &[usize]) -> Vec<Vec<usize>> {
        let scores = self.scores(x);
        scores
            .rows()
            .into_iter()
            .zip(k)
            .map(|(row, &ki)| {
                let mut order: Vec<usize> = (0..row.len()).collect();
                order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                order.truncate(ki);
                order.sort_unstable();
                order
            })
            .collect()
    }
}
