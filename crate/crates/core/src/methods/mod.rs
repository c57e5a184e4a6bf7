//! The four sweepable grouping methods.
//!
//! Every fit is a pure function of immutable inputs, so a sweep can run
//! fits on as many threads as it likes.

pub mod dbscan;
pub mod hdbscan;
pub mod kmeans;
pub mod nmf;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::dist;
use crate::model::{Method, NOISE};
use crate::text::SparseMatrix;

pub use dbscan::{fit_dbscan, DbscanModel};
pub use hdbscan::{fit_hdbscan, CondensedNode, HdbscanModel, HdbscanParams, MstEdge};
pub use kmeans::{fit_kmeans, KMeansModel, KMeansParams};
pub use nmf::{fit_nmf, NmfModel, NmfParams};

/// The shared input a fit reads from.
#[derive(Clone, Copy, Debug)]
pub enum MethodInput<'a> {
    Features(ArrayView2<'a, f64>),
    Documents(&'a SparseMatrix),
}

impl<'a> MethodInput<'a> {
    pub fn features(&self) -> Result<ArrayView2<'a, f64>> {
        match self {
            MethodInput::Features(x) => Ok(*x),
            MethodInput::Documents(_) => {
                Err(CoreError::InputMismatch("expected a numeric feature matrix".into()))
            }
        }
    }

    pub fn documents(&self) -> Result<&'a SparseMatrix> {
        match self {
            MethodInput::Documents(v) => Ok(v),
            MethodInput::Features(_) => {
                Err(CoreError::InputMismatch("expected a document-term matrix".into()))
            }
        }
    }
}

/// A fitted model of any family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum FittedModel {
    Nmf(NmfModel),
    Kmeans(KMeansModel),
    Dbscan(DbscanModel),
    Hdbscan(HdbscanModel),
}

impl FittedModel {
    pub fn method(&self) -> Method {
        match self {
            FittedModel::Nmf(_) => Method::Nmf,
            FittedModel::Kmeans(_) => Method::Kmeans,
            FittedModel::Dbscan(_) => Method::Dbscan,
            FittedModel::Hdbscan(_) => Method::Hdbscan,
        }
    }

    /// Group id per item; noise is -1.
    pub fn labels(&self) -> Vec<i64> {
        match self {
            FittedModel::Nmf(m) => m.labels().into_iter().map(|l| l as i64).collect(),
            FittedModel::Kmeans(m) => m.labels.iter().map(|&l| l as i64).collect(),
            FittedModel::Dbscan(m) => m.labels.clone(),
            FittedModel::Hdbscan(m) => m.labels.clone(),
        }
    }
}

/// A group's representative vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Representative {
    pub group_id: i64,
    pub vector: Vec<f64>,
    pub is_noise: bool,
}

/// Centroids for K-means, medoids for the density methods (noise medoid
/// last), topic-term rows for NMF.
pub fn group_representatives(model: &FittedModel, input: MethodInput<'_>) -> Result<Vec<Representative>> {
    let rep = |group_id: i64, vector: Vec<f64>| Representative { group_id, vector, is_noise: group_id == NOISE };
    match model {
        FittedModel::Nmf(m) => Ok(m
            .h
            .rows()
            .into_iter()
            .enumerate()
            .map(|(k, row)| rep(k as i64, row.to_vec()))
            .collect()),
        FittedModel::Kmeans(m) => Ok(m
            .centroids
            .rows()
            .into_iter()
            .enumerate()
            .map(|(k, row)| rep(k as i64, row.to_vec()))
            .collect()),
        FittedModel::Dbscan(DbscanModel { medoids, noise_medoid, .. })
        | FittedModel::Hdbscan(HdbscanModel { medoids, noise_medoid, .. }) => {
            let x = input.features()?;
            let mut out: Vec<Representative> = medoids
                .iter()
                .enumerate()
                .map(|(k, &item)| rep(k as i64, x.row(item).to_vec()))
                .collect();
            if let Some(item) = noise_medoid {
                out.push(rep(NOISE, x.row(*item).to_vec()));
            }
            Ok(out)
        }
    }
}

/// Member minimizing the summed distance to its co-members; ties go to the
/// lowest item index.
pub fn medoid(x: ArrayView2<'_, f64>, members: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &i in members {
        let total: f64 = members.iter().map(|&j| dist(x.row(i), x.row(j))).sum();
        match best {
            Some((_, b)) if total >= b => {}
            _ => best = Some((i, total)),
        }
    }
    best.map(|(i, _)| i)
}

/// Medoids of every non-noise cluster (ids `0..n_clusters`) plus the noise medoid.
pub(crate) fn medoids_for_labels(
    x: ArrayView2<'_, f64>,
    labels: &[i64],
    n_clusters: usize,
) -> (Vec<usize>, Option<usize>) {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    let mut noise = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == NOISE {
            noise.push(i);
        } else {
            members[l as usize].push(i);
        }
    }
    let medoids = members.iter().map(|m| medoid(x, m).expect("clusters are nonempty")).collect();
    (medoids, medoid(x, &noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn medoid_minimizes_total_distance() {
        let x = array![[0.0], [1.0], [2.0], [10.0]];
        assert_eq!(medoid(x.view(), &[0, 1, 2, 3]), Some(1));
        assert_eq!(medoid(x.view(), &[]), None);
    }

    #[test]
    fn kmeans_gives_one_centroid_per_cluster() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0], [20.0, 0.0], [20.0, 1.0]];
        let model = fit_kmeans(x.view(), &KMeansParams::new(3, 1)).unwrap();
        let reps = group_representatives(&FittedModel::Kmeans(model), MethodInput::Features(x.view())).unwrap();
        assert_eq!(reps.len(), 3);
    }

    #[test]
    fn dbscan_noise_medoid_comes_last() {
        let x = array![[0.0], [0.1], [0.2], [5.0], [5.1], [5.2], [20.0]];
        let model = fit_dbscan(x.view(), 0.5, 2).unwrap();
        let reps = group_representatives(&FittedModel::Dbscan(model), MethodInput::Features(x.view())).unwrap();
        assert_eq!(reps.len(), 3);
        assert!(reps[2].is_noise);
        assert_eq!(reps[2].vector, vec![20.0]);
    }
}
