//! Generalized skip-gram factorization and a truncated-SVD baseline.
//!
//! The objective is
//!
//! ```text
//! psi(U, V) = sum_ij  S+_ij log sigma(u_i . v_j) + S-_ij log sigma(-u_i . v_j)
//! ```
//!
//! whose stationary points satisfy `u_i . v_j = log(S+_ij / S-_ij)`. The
//! symmetric variant ties `V = U` and leaves the diagonal out of the sum.

use ndarray::{Array1, Array2, Zip};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::linalg;
use crate::optim::Adam;
use crate::rng;
use crate::similarity::PosNegWeights;

/// Node embeddings `U` (one row per node) with an optional separate context
/// matrix `V`. When `v` is `None` the context is tied to `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub u: Array2<f64>,
    pub v: Option<Array2<f64>>,
    /// Objective after each Adam step, starting with the initial value.
    pub loss_trace: Vec<f64>,
}

impl Embedding {
    pub fn tied(u: Array2<f64>) -> Self {
        Embedding { u, v: None, loss_trace: Vec::new() }
    }

    pub fn untied(u: Array2<f64>, v: Array2<f64>) -> Self {
        Embedding { u, v: Some(v), loss_trace: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_tied(&self) -> bool {
        self.v.is_none()
    }

    pub fn context(&self) -> &Array2<f64> {
        self.v.as_ref().unwrap_or(&self.u)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_trace.last().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub dim: usize,
    /// Tie `V = U` and skip the diagonal.
    pub symmetric: bool,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Initial entries are drawn from N(0, (init_scale / sqrt(dim))^2).
    pub init_scale: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            dim: 128,
            symmetric: true,
            learning_rate: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            iterations: 300,
            seed: 0,
            init_scale: 0.1,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return validation("embedding dimension must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.epsilon > 0.0) || !(self.init_scale > 0.0) {
            return validation("learning rate, epsilon and init scale must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return validation("Adam forgetting factors must lie in (0, 1)");
        }
        if self.iterations == 0 {
            return validation("iteration count must be positive");
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn check_shapes(w: &PosNegWeights, e: &Embedding, symmetric: bool) -> Result<()> {
    let (n, m) = w.dim();
    let ctx = e.context();
    if e.u.nrows() != n || ctx.nrows() != m || e.u.ncols() != ctx.ncols() {
        return validation(format!(
            "weights are {n}x{m} but embeddings are {}x{} and {}x{}",
            e.u.nrows(),
            e.u.ncols(),
            ctx.nrows(),
            ctx.ncols()
        ));
    }
    if symmetric && (n != m || !e.is_tied()) {
        return validation("the symmetric objective needs square weights and tied embeddings");
    }
    Ok(())
}

/// Value of the objective.
pub fn gmf_loss(w: &PosNegWeights, e: &Embedding, symmetric: bool) -> Result<f64> {
    check_shapes(w, e, symmetric)?;
    let scores = e.u.dot(&e.context().t());
    Ok(loss_from_scores(w, &scores, symmetric))
}

fn loss_from_scores(w: &PosNegWeights, scores: &Array2<f64>, symmetric: bool) -> f64 {
    let mut total = 0.0;
    for ((i, j), &x) in scores.indexed_iter() {
        if symmetric && i == j {
            continue;
        }
        let (sp, sm) = (w.s_plus[[i, j]], w.s_minus[[i, j]]);
        if sp > 0.0 {
            total += sp * log_sigmoid(x);
        }
        if sm > 0.0 {
            total += sm * log_sigmoid(-x);
        }
    }
    total
}

/// `d psi / d (u_i . v_j) = S+ (1 - sigma(x)) - S- sigma(x)`, zeroed where the
/// entry is outside the objective.
fn coefficients(w: &PosNegWeights, scores: &Array2<f64>, symmetric: bool) -> Array2<f64> {
    let mut g = Zip::from(scores)
        .and(&w.s_plus)
        .and(&w.s_minus)
        .par_map_collect(|&x, &sp, &sm| {
            let s = sigmoid(x);
            sp * (1.0 - s) - sm * s
        });
    if symmetric {
        g.diag_mut().fill(0.0);
    }
    g
}

/// Gradient of the objective with respect to `U` and, when untied, `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub u: Array2<f64>,
    pub v: Option<Array2<f64>>,
}

pub fn gmf_gradient(w: &PosNegWeights, e: &Embedding, symmetric: bool) -> Result<Gradient> {
    check_shapes(w, e, symmetric)?;
    let scores = e.u.dot(&e.context().t());
    Ok(gradient_from_scores(w, e, &scores, symmetric))
}

fn gradient_from_scores(w: &PosNegWeights, e: &Embedding, scores: &Array2<f64>, symmetric: bool) -> Gradient {
    let g = coefficients(w, scores, symmetric);
    match &e.v {
        // Each u_k appears both as a row factor and as a column factor.
        None => Gradient { u: (&g + &g.t()).dot(&e.u), v: None },
        Some(v) => Gradient { u: g.dot(v), v: Some(g.t().dot(&e.u)) },
    }
}

/// Maximizes the objective with full-batch Adam from a seeded Gaussian start.
pub fn gmf_fit(w: &PosNegWeights, opts: &FitOptions) -> Result<Embedding> {
    opts.validate()?;
    let (n, m) = w.dim();
    if opts.symmetric && n != m {
        return validation("the symmetric objective needs a square weight matrix");
    }
    let mut rng = rng::seeded(opts.seed);
    let std = opts.init_scale / (opts.dim as f64).sqrt();
    let normal = Normal::new(0.0, std).map_err(|e| Error::Validation(e.to_string()))?;
    let u = Array2::from_shape_simple_fn((n, opts.dim), || normal.sample(&mut rng));
    let mut emb = if opts.symmetric {
        Embedding::tied(u)
    } else {
        let v = Array2::from_shape_simple_fn((m, opts.dim), || normal.sample(&mut rng));
        Embedding::untied(u, v)
    };

    let make = |rows| Adam::new((rows, opts.dim), opts.learning_rate, opts.beta1, opts.beta2, opts.epsilon);
    let mut adam_u = make(n);
    let mut adam_v = emb.v.as_ref().map(|_| make(m));

    let mut trace = Vec::with_capacity(opts.iterations + 1);
    for iteration in 0..=opts.iterations {
        let scores = emb.u.dot(&emb.context().t());
        let loss = loss_from_scores(w, &scores, opts.symmetric);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("objective became {loss} at iteration {iteration}")));
        }
        trace.push(loss);
        if iteration == opts.iterations {
            break;
        }
        let grad = gradient_from_scores(w, &emb, &scores, opts.symmetric);
        adam_u.ascend(&mut emb.u, &grad.u);
        if let (Some(v), Some(gv), Some(opt)) = (emb.v.as_mut(), grad.v.as_ref(), adam_v.as_mut()) {
            opt.ascend(v, gv);
        }
    }
    emb.loss_trace = trace;
    Ok(emb)
}

/// `U V^T`.
pub fn reconstruct(e: &Embedding) -> Array2<f64> {
    e.u.dot(&e.context().t())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    pub seed: u64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions { seed: 0, tol: 1e-10, max_sweeps: 1000 }
    }
}

/// Rank-`d` factorization `U V^T` minimizing `||S - U V^T||_F`. `V` has
/// orthonormal columns and `U = S V`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub singular_values: Array1<f64>,
    pub sweeps: usize,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> Array2<f64> {
        self.u.dot(&self.v.t())
    }

    pub fn into_embedding(self) -> Embedding {
        Embedding::untied(self.u, self.v)
    }
}

pub fn truncated_svd(s: &Array2<f64>, d: usize) -> Result<TruncatedSvd> {
    truncated_svd_with(s, d, &SvdOptions::default())
}

/// Orthogonal iteration with Rayleigh-Ritz on the Gram matrix of the smaller
/// side of `s`, using a few extra columns to speed convergence.
pub fn truncated_svd_with(s: &Array2<f64>, d: usize, opts: &SvdOptions) -> Result<TruncatedSvd> {
    let (n, m) = s.dim();
    if d == 0 || d > n.min(m) {
        return validation(format!("rank {d} must lie in 1..={}", n.min(m)));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return validation("matrix has non-finite entries");
    }
    let wide = n < m;
    let gram = if wide { s.dot(&s.t()) } else { s.t().dot(s) };
    let side = gram.nrows();
    let block = (d + d.max(5)).min(side);

    let mut rng = rng::seeded(opts.seed);
    let mut q = Array2::from_shape_simple_fn((side, block), || {
        rand_distr::StandardNormal.sample(&mut rng)
    });
    linalg::orthonormalize_columns(&mut q, &mut rng);

    let mut values = Array1::zeros(block);
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut z = gram.dot(&q);
        linalg::orthonormalize_columns(&mut z, &mut rng);
        let projected = z.t().dot(&gram).dot(&z);
        let (vals, vecs) = linalg::symmetric_eigen(&projected);
        let next = z.dot(&vecs);
        values = vals;
        // Part of the new leading subspace outside the old one.
        let old = q.slice(ndarray::s![.., ..d]);
        let new = next.slice(ndarray::s![.., ..d]);
        let residual = &new - &old.dot(&old.t().dot(&new));
        let change = residual.iter().map(|x| x * x).sum::<f64>().sqrt();
        q = next;
        if change < opts.tol || block == side && sweeps > 1 {
            break;
        }
    }

    let basis = q.slice(ndarray::s![.., ..d]).to_owned();
    let singular_values = values.slice(ndarray::s![..d]).mapv(|x| x.max(0.0).sqrt());
    let (u, v) = if wide {
        // basis spans the left singular space.
        (basis.clone(), s.t().dot(&basis))
    } else {
        (s.dot(&basis), basis)
    };
    Ok(TruncatedSvd { u, v, singular_values, sweeps })
}
