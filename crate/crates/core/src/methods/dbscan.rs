//! DBSCAN with exact neighborhood queries.

use std::collections::{HashMap, VecDeque};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::sq_dist;
use crate::methods::medoids_for_labels;
use crate::model::NOISE;

/// Dimensions up to which the grid index is used instead of brute force.
const GRID_MAX_DIMS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbscanModel {
    pub eps: f64,
    pub min_samples: usize,
    pub labels: Vec<i64>,
    pub core_flags: Vec<bool>,
    /// Medoid item per cluster, indexed by cluster id.
    pub medoids: Vec<usize>,
    pub noise_medoid: Option<usize>,
    pub n_clusters: usize,
}

/// Exact eps-neighborhoods: a uniform grid with cell size eps for low
/// dimensions, a linear scan otherwise.
enum NeighborIndex {
    Grid { cells: HashMap<Vec<i64>, Vec<usize>> },
    Brute,
}

impl NeighborIndex {
    fn new(x: ArrayView2<'_, f64>, eps: f64) -> Self {
        if x.ncols() > GRID_MAX_DIMS {
            return NeighborIndex::Brute;
        }
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for i in 0..x.nrows() {
            cells.entry(cell_of(x, i, eps)).or_default().push(i);
        }
        NeighborIndex::Grid { cells }
    }

    /// Items within `eps` of item `i` (itself included), ascending.
    fn neighbors(&self, x: ArrayView2<'_, f64>, i: usize, eps: f64) -> Vec<usize> {
        let eps2 = eps * eps;
        let mut out = match self {
            NeighborIndex::Brute => {
                (0..x.nrows()).filter(|&j| sq_dist(x.row(i), x.row(j)) <= eps2).collect::<Vec<_>>()
            }
            NeighborIndex::Grid { cells } => {
                let home = cell_of(x, i, eps);
                let mut found = Vec::new();
                let mut offset = vec![-1i64; home.len()];
                loop {
                    let key: Vec<i64> = home.iter().zip(&offset).map(|(h, o)| h + o).collect();
                    if let Some(bucket) = cells.get(&key) {
                        found.extend(bucket.iter().copied().filter(|&j| sq_dist(x.row(i), x.row(j)) <= eps2));
                    }
                    // odometer over {-1, 0, 1}^d
                    let mut d = 0;
                    while d < offset.len() && offset[d] == 1 {
                        offset[d] = -1;
                        d += 1;
                    }
                    if d == offset.len() {
                        break;
                    }
                    offset[d] += 1;
                }
                found
            }
        };
        out.sort_unstable();
        out
    }
}

fn cell_of(x: ArrayView2<'_, f64>, i: usize, eps: f64) -> Vec<i64> {
    x.row(i).iter().map(|v| (v / eps).floor() as i64).collect()
}

/// Core/border/noise expansion.
///
/// Items are scanned in ascending order and a border point belongs to the
/// first cluster that reaches it, so results are deterministic.
pub fn fit_dbscan(x: ArrayView2<'_, f64>, eps: f64, min_samples: usize) -> Result<DbscanModel> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CoreError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if min_samples == 0 {
        return Err(CoreError::InvalidParameter("min_samples must be at least 1".into()));
    }
    const UNVISITED: i64 = -2;
    let n = x.nrows();
    let index = NeighborIndex::new(x, eps);
    let neighborhoods: Vec<Vec<usize>> = (0..n).map(|i| index.neighbors(x, i, eps)).collect();
    let core_flags: Vec<bool> = neighborhoods.iter().map(|nb| nb.len() >= min_samples).collect();

    let mut labels = vec![UNVISITED; n];
    let mut cluster = 0i64;
    for start in 0..n {
        if labels[start] != UNVISITED {
            continue;
        }
        if !core_flags[start] {
            labels[start] = NOISE;
            continue;
        }
        labels[start] = cluster;
        let mut queue: VecDeque<usize> = neighborhoods[start].iter().copied().collect();
        while let Some(j) = queue.pop_front() {
            if labels[j] == NOISE {
                labels[j] = cluster;
                continue;
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster;
            if core_flags[j] {
                queue.extend(neighborhoods[j].iter().copied());
            }
        }
        cluster += 1;
    }

    let n_clusters = cluster as usize;
    let (medoids, noise_medoid) = medoids_for_labels(x, &labels, n_clusters);
    Ok(DbscanModel { eps, min_samples, labels, core_flags, medoids, noise_medoid, n_clusters })
}
