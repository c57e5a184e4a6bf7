//! Exact-gradient t-SNE for small row sets.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::linalg::sq_dist;
use crate::projection::mds::classical_mds;

#[derive(Clone, Debug, PartialEq)]
pub struct TsneParams {
    pub dims: usize,
    pub perplexity: f64,
    pub seed: u64,
    pub n_iter: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
}

impl TsneParams {
    pub fn new(dims: usize, seed: u64) -> Self {
        Self { dims, perplexity: 30.0, seed, n_iter: 1000, early_exaggeration: 12.0, exaggeration_iters: 250 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsneResult {
    pub positions: Array2<f64>,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub perplexity: f64,
    pub warnings: Vec<String>,
}

/// Largest usable perplexity for `n` rows.
fn max_perplexity(n: usize) -> f64 {
    ((n as f64 - 1.0) / 3.0 * 0.99).max(1.0)
}

/// Row-conditional affinities matched to `perplexity` by bisection on the
/// precision, then symmetrized and normalized.
fn joint_probabilities(x: ArrayView2<'_, f64>, perplexity: f64) -> Array2<f64> {
    let n = x.nrows();
    let target = perplexity.ln();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d: Vec<f64> = (0..n).map(|j| sq_dist(x.row(i), x.row(j))).collect();
            let mut beta = 1.0;
            let (mut lo, mut hi) = (0.0, f64::INFINITY);
            let mut p = vec![0.0; n];
            for _ in 0..100 {
                let min_d = (0..n).filter(|&j| j != i).map(|j| d[j]).fold(f64::INFINITY, f64::min);
                let mut sum = 0.0;
                for j in 0..n {
                    p[j] = if j == i { 0.0 } else { (-(d[j] - min_d) * beta).exp() };
                    sum += p[j];
                }
                let mut entropy = 0.0;
                for j in 0..n {
                    p[j] /= sum;
                    if p[j] > 1e-300 {
                        entropy -= p[j] * p[j].ln();
                    }
                }
                let gap = entropy - target;
                if gap.abs() < 1e-5 {
                    break;
                }
                if gap > 0.0 {
                    lo = beta;
                    beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
            }
            p
        })
        .collect();
    let mut joint = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            joint[[i, j]] = ((rows[i][j] + rows[j][i]) / (2.0 * n as f64)).max(1e-12);
        }
        joint[[i, i]] = 0.0;
    }
    joint
}

/// Student-t affinities: unnormalized kernel and its sum.
fn kernel(y: &Array2<f64>) -> (Array2<f64>, f64) {
    let n = y.nrows();
    let mut num = Array2::zeros((n, n));
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 1.0 / (1.0 + sq_dist(y.row(i), y.row(j)));
            num[[i, j]] = v;
            num[[j, i]] = v;
            total += 2.0 * v;
        }
    }
    (num, total)
}

fn kl_divergence(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let (num, total) = kernel(y);
    let n = p.nrows();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let q = (num[[i, j]] / total).max(1e-12);
                kl += p[[i, j]] * (p[[i, j]] / q).ln();
            }
        }
    }
    kl
}

/// Exact t-SNE with PCA initialization, early exaggeration, momentum and
/// per-coordinate gains. Infeasible perplexities are clamped with a warning.
pub fn tsne_exact(x: ArrayView2<'_, f64>, params: &TsneParams) -> Result<TsneResult> {
    let n = x.nrows();
    if n < 4 {
        return Err(CoreError::TooFewRows { needed: 4, got: n });
    }
    if params.dims == 0 {
        return Err(CoreError::InvalidParameter("t-SNE needs at least one output dimension".into()));
    }
    let mut warnings = Vec::new();
    let mut perplexity = params.perplexity;
    let cap = max_perplexity(n);
    if !(perplexity > 0.0) || perplexity > cap {
        warnings.push(format!("perplexity {perplexity} is infeasible for {n} rows; using {cap:.4}"));
        perplexity = cap;
    }
    let p = joint_probabilities(x, perplexity);

    let dims = params.dims;
    let mut y = classical_mds(x, dims.min(n - 1))
        .map(|r| r.positions)
        .unwrap_or_else(|_| Array2::zeros((n, dims)));
    if y.ncols() < dims {
        let mut padded = Array2::zeros((n, dims));
        padded.slice_mut(ndarray::s![.., ..y.ncols()]).assign(&y);
        y = padded;
    }
    let spread = {
        let col = y.column(0);
        let mean = col.mean().unwrap_or(0.0);
        (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    if spread > 0.0 {
        y.mapv_inplace(|v| v / spread * 1e-4);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let jitter = Normal::new(0.0, 1e-6).expect("valid normal");
    y.mapv_inplace(|v| v + jitter.sample(&mut rng));

    let initial_kl = kl_divergence(&p, &y);
    let learning_rate = (n as f64 / params.early_exaggeration / 4.0).max(50.0);
    let mut velocity = Array2::<f64>::zeros((n, dims));
    let mut gains = Array2::<f64>::ones((n, dims));

    for iter in 0..params.n_iter {
        let exaggerate = iter < params.exaggeration_iters;
        let factor = if exaggerate { params.early_exaggeration } else { 1.0 };
        let momentum = if exaggerate { 0.5 } else { 0.8 };
        let (num, total) = kernel(&y);
        let grad_rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = vec![0.0; dims];
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let q = num[[i, j]] / total;
                    let coeff = 4.0 * (factor * p[[i, j]] - q) * num[[i, j]];
                    for (c, gc) in g.iter_mut().enumerate() {
                        *gc += coeff * (y[[i, c]] - y[[j, c]]);
                    }
                }
                g
            })
            .collect();
        for i in 0..n {
            for c in 0..dims {
                let grad = grad_rows[i][c];
                let gain = &mut gains[[i, c]];
                *gain = if (grad > 0.0) != (velocity[[i, c]] > 0.0) { *gain + 0.2 } else { *gain * 0.8 };
                *gain = gain.max(0.01);
                velocity[[i, c]] = momentum * velocity[[i, c]] - learning_rate * *gain * grad;
                y[[i, c]] += velocity[[i, c]];
            }
        }
        // keep the embedding centered
        let mean = y.mean_axis(ndarray::Axis(0)).expect("n > 0");
        y -= &mean;
    }
    let final_kl = kl_divergence(&p, &y);
    Ok(TsneResult { positions: y, initial_kl, final_kl, perplexity, warnings })
}
