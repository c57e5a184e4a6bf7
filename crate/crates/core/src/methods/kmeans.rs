//! K-means with seeded k-means++ initialization and Lloyd iterations.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::sq_dist;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Converged once no center moves farther than this.
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, seed, max_iter: 300, tol: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Array2<f64>,
    pub labels: Vec<usize>,
    /// Euclidean distance of every item to its own centroid.
    pub distances: Vec<f64>,
    pub sse: f64,
    pub seed: u64,
    /// SSE after every assignment step; the last entry equals `sse`.
    pub sse_trace: Vec<f64>,
    pub iterations: usize,
}

pub fn fit_kmeans(x: ArrayView2<'_, f64>, params: &KMeansParams) -> Result<KMeansModel> {
    let n = x.nrows();
    let k = params.k;
    if k == 0 || k > n {
        return Err(CoreError::InvalidParameter(format!("K = {k} must be in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centers = kmeans_plus_plus(x, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut sq = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..params.max_iter {
        iterations += 1;
        trace.push(assign(x, &mut centers, &mut labels, &mut sq));
        let shift = update_centers(x, &mut centers, &labels);
        if shift <= params.tol {
            break;
        }
    }
    let sse = assign(x, &mut centers, &mut labels, &mut sq);
    trace.push(sse);
    Ok(KMeansModel {
        centroids: centers,
        labels,
        distances: sq.iter().map(|d| d.sqrt()).collect(),
        sse,
        seed: params.seed,
        sse_trace: trace,
        iterations,
    })
}

fn kmeans_plus_plus(x: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut centers = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&x.row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(first))).collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in closest.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&x.row(pick));
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(pick)));
        }
    }
    centers
}

/// Nearest-center assignment (ties to the lowest center) followed by empty
/// cluster repair. Returns the SSE of the resulting assignment.
///
/// An empty cluster takes over the point lying farthest from its own center
/// (among clusters with more than one member); that point's squared distance
/// drops to zero, so repair never increases the SSE.
fn assign(x: ArrayView2<'_, f64>, centers: &mut Array2<f64>, labels: &mut [usize], sq: &mut [f64]) -> f64 {
    let k = centers.nrows();
    let mut counts = vec![0usize; k];
    for i in 0..x.nrows() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d = sq_dist(x.row(i), centers.row(c));
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        labels[i] = best;
        sq[i] = best_d;
        counts[best] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let far = (0..x.nrows())
            .filter(|&i| counts[labels[i]] > 1)
            .fold(None::<usize>, |best, i| match best {
                Some(b) if sq[b] >= sq[i] => Some(b),
                _ => Some(i),
            });
        if let Some(i) = far {
            counts[labels[i]] -= 1;
            counts[empty] = 1;
            labels[i] = empty;
            sq[i] = 0.0;
            centers.row_mut(empty).assign(&x.row(i));
        }
    }
    sq.iter().sum()
}

/// Moves every center to the mean of its members; returns the largest move.
fn update_centers(x: ArrayView2<'_, f64>, centers: &mut Array2<f64>, labels: &[usize]) -> f64 {
    let mut sums = Array2::<f64>::zeros(centers.raw_dim());
    let mut counts = vec![0usize; centers.nrows()];
    for (i, &l) in labels.iter().enumerate() {
        sums.row_mut(l).zip_mut_with(&x.row(i), |s, v| *s += v);
        counts[l] += 1;
    }
    let mut shift: f64 = 0.0;
    for c in 0..centers.nrows() {
        if counts[c] == 0 {
            continue;
        }
        let mean = sums.row(c).mapv(|s| s / counts[c] as f64);
        shift = shift.max(sq_dist(mean.view(), centers.row(c)).sqrt());
        centers.row_mut(c).assign(&mean);
    }
    shift
}
