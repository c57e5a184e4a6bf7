//! Non-negative matrix factorization by multiplicative updates.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::argmax;
use crate::text::SparseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmfParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the relative objective change falls below this.
    pub tol: f64,
}

impl NmfParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, seed, max_iter: 400, tol: 1e-6 }
    }
}

/// `V ≈ W H` with `W` documents × topics and `H` topics × terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmfModel {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    pub k: usize,
    pub seed: u64,
    /// Squared Frobenius loss at initialization and after every update.
    pub objective_trace: Vec<f64>,
}

impl NmfModel {
    /// Dominant topic per document (argmax of the W row, lowest index on ties).
    pub fn labels(&self) -> Vec<usize> {
        self.w.rows().into_iter().map(|r| argmax(r.iter().copied())).collect()
    }

    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&f64::NAN)
    }
}

/// Minimizes `‖V − WH‖²_F` with Lee–Seung multiplicative updates.
///
/// Initialization draws every entry uniformly from `[0, sqrt(mean(V)/K)]`
/// with a seeded generator, so different seeds give different solutions.
pub fn fit_nmf(v: &SparseMatrix, params: &NmfParams) -> Result<NmfModel> {
    let (n, m, k) = (v.n_rows, v.n_cols, params.k);
    if k < 2 || k > n.min(m) {
        return Err(CoreError::InvalidParameter(format!(
            "NMF needs 2 <= K <= min(n_docs, n_terms) = {}, got K = {k}",
            n.min(m)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let upper = (v.mean() / k as f64).sqrt();
    let upper = if upper > 0.0 { upper } else { 1.0 };
    let dist = Uniform::new_inclusive(0.0, upper).map_err(|e| CoreError::Numerical(e.to_string()))?;
    let mut w = Array2::from_shape_simple_fn((n, k), || dist.sample(&mut rng));
    let mut h = Array2::from_shape_simple_fn((k, m), || dist.sample(&mut rng));

    let mut trace = vec![objective(v, &w, &h)];
    for _ in 0..params.max_iter {
        update_h(v, &w, &mut h);
        update_w(v, &mut w, &h);
        let current = objective(v, &w, &h);
        let previous = *trace.last().expect("trace starts nonempty");
        trace.push(current);
        let change = (previous - current) / previous.max(f64::MIN_POSITIVE);
        if change < params.tol {
            break;
        }
    }
    Ok(NmfModel { w, h, k, seed: params.seed, objective_trace: trace })
}

fn multiplicative(value: &mut f64, numerator: f64, denominator: f64) {
    if denominator > 0.0 {
        *value *= numerator / denominator;
    }
}

// H <- H * (WᵀV) / (WᵀW H)
fn update_h(v: &SparseMatrix, w: &Array2<f64>, h: &mut Array2<f64>) {
    let k = h.nrows();
    let mut wt_v = Array2::<f64>::zeros(h.raw_dim());
    for i in 0..v.n_rows {
        for (j, value) in v.row(i) {
            for t in 0..k {
                wt_v[[t, j]] += w[[i, t]] * value;
            }
        }
    }
    let wt_w = w.t().dot(w);
    let denominator = wt_w.dot(&*h);
    for ((value, num), den) in h.iter_mut().zip(wt_v.iter()).zip(denominator.iter()) {
        multiplicative(value, *num, *den);
    }
}

// W <- W * (V Hᵀ) / (W H Hᵀ)
fn update_w(v: &SparseMatrix, w: &mut Array2<f64>, h: &Array2<f64>) {
    let k = h.nrows();
    let mut v_ht = Array2::<f64>::zeros(w.raw_dim());
    for i in 0..v.n_rows {
        for (j, value) in v.row(i) {
            for t in 0..k {
                v_ht[[i, t]] += value * h[[t, j]];
            }
        }
    }
    let h_ht = h.dot(&h.t());
    let denominator = w.dot(&h_ht);
    for ((value, num), den) in w.iter_mut().zip(v_ht.iter()).zip(denominator.iter()) {
        multiplicative(value, *num, *den);
    }
}

/// Squared Frobenius norm of `V − WH`, summed cell by cell.
pub fn objective(v: &SparseMatrix, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let m = v.n_cols;
    let per_row: Vec<f64> = (0..v.n_rows)
        .into_par_iter()
        .map(|i| {
            let mut recon = vec![0.0; m];
            for (t, wt) in w.row(i).iter().enumerate() {
                if *wt != 0.0 {
                    for (r, hv) in recon.iter_mut().zip(h.row(t).iter()) {
                        *r += wt * hv;
                    }
                }
            }
            for (j, value) in v.row(i) {
                recon[j] -= value;
            }
            recon.iter().map(|r| r * r).sum()
        })
        .collect();
    per_row.iter().sum()
}
