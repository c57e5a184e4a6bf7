//! Recurrent archetypes: group representatives pooled over the whole sweep
//! and meta-clustered with HDBSCAN.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::sorted_symmetric_eigen;
use crate::methods::{fit_hdbscan, HdbscanParams};
use crate::model::{IterationResult, NOISE};

/// PCA is only applied to pooled vectors wider than this.
pub const PCA_MIN_FEATURES: usize = 10;
/// Share of variance the retained principal components must explain.
pub const PCA_VARIANCE: f64 = 0.95;
/// Upper bound on the meta-HDBSCAN core-distance rank.
pub const META_MIN_SAMPLES: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PooledRow {
    pub iteration_key: String,
    pub group_id: i64,
    pub is_noise: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub means: Vec<f64>,
    /// Column standard deviations; zero-variance columns are recorded as 1.
    pub stds: Vec<f64>,
    /// `n_features × retained_dims` projection, when PCA was applied.
    pub pca_basis: Option<Array2<f64>>,
    pub retained_dims: usize,
    /// Cumulative explained-variance ratio of the retained components.
    pub explained_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledMatrix {
    pub rows: Vec<PooledRow>,
    /// Representatives as produced by the methods.
    pub raw: Array2<f64>,
    /// Standardized, optionally PCA-reduced, L2-normalized rows.
    pub values: Array2<f64>,
    pub preprocessing: Preprocessing,
    pub n_iterations: usize,
}

impl PooledMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row_index(&self, iteration_key: &str, group_id: i64) -> Option<usize> {
        self.rows.iter().position(|r| r.iteration_key == iteration_key && r.group_id == group_id)
    }
}

/// One row per group of every iteration, noise groups included.
pub fn pool(iterations: &[IterationResult]) -> Result<PooledMatrix> {
    let mut rows = Vec::new();
    let mut vectors: Vec<&[f64]> = Vec::new();
    for it in iterations {
        for g in &it.groups {
            rows.push(PooledRow { iteration_key: it.iteration_key.clone(), group_id: g.group_id, is_noise: g.is_noise });
            vectors.push(&g.representative);
        }
    }
    let dim = vectors.first().map_or(0, |v| v.len());
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(CoreError::InvalidParameter("representatives differ in dimension".into()));
    }
    let raw = Array2::from_shape_fn((vectors.len(), dim), |(i, j)| vectors[i][j]);
    pool_vectors(rows, raw, iterations.len())
}

/// Preprocesses an already assembled pool.
pub fn pool_vectors(rows: Vec<PooledRow>, raw: Array2<f64>, n_iterations: usize) -> Result<PooledMatrix> {
    let n = raw.nrows();
    if n < 3 {
        return Err(CoreError::TooFewRows { needed: 3, got: n });
    }
    if rows.len() != n {
        return Err(CoreError::LengthMismatch { expected: n, actual: rows.len() });
    }
    let d = raw.ncols();
    let means = raw.mean_axis(Axis(0)).expect("n >= 3").to_vec();
    let stds: Vec<f64> = (0..d)
        .map(|j| {
            let s = raw.column(j).iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / n as f64;
            let s = s.sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let z = Array2::from_shape_fn((n, d), |(i, j)| (raw[[i, j]] - means[j]) / stds[j]);

    let (mut values, pca_basis, explained_variance) = if d > PCA_MIN_FEATURES {
        let (scores, basis, ratio) = pca(&z)?;
        (scores, Some(basis), ratio)
    } else {
        (z, None, 1.0)
    };
    for mut row in values.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let retained_dims = values.ncols();
    Ok(PooledMatrix {
        rows,
        raw,
        values,
        preprocessing: Preprocessing { means, stds, pca_basis, retained_dims, explained_variance },
        n_iterations,
    })
}

/// Principal component scores keeping the fewest components that explain
/// at least [`PCA_VARIANCE`] of the variance. `z` must be column-centered.
fn pca(z: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>, f64)> {
    let (n, d) = z.dim();
    // eigen-decompose whichever Gram matrix is smaller
    let (eigenvalues, basis) = if n < d {
        let (values, u) = sorted_symmetric_eigen(&z.dot(&z.t()))?;
        let mut basis = z.t().dot(&u);
        for (c, v) in values.iter().enumerate() {
            let sigma = v.max(0.0).sqrt();
            basis.column_mut(c).mapv_inplace(|x| if sigma > 0.0 { x / sigma } else { 0.0 });
        }
        (values, basis)
    } else {
        sorted_symmetric_eigen(&z.t().dot(z))?
    };
    let positive: Vec<f64> = eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = positive.iter().sum();
    if total <= 0.0 {
        return Ok((Array2::zeros((n, 1)), Array2::zeros((d, 1)), 1.0));
    }
    let mut cumulative = 0.0;
    let mut keep = 0;
    for v in &positive {
        cumulative += v;
        keep += 1;
        if cumulative / total >= PCA_VARIANCE - 1e-12 {
            break;
        }
    }
    let basis = basis.slice(ndarray::s![.., ..keep]).to_owned();
    Ok((z.dot(&basis), basis, cumulative / total))
}

/// `max(2, ⌊N_iterations / 2⌋)`.
pub fn default_threshold(n_iterations: usize) -> usize {
    (n_iterations / 2).max(2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeModel {
    pub threshold: usize,
    pub min_samples: usize,
    /// Archetype id per pooled row, -1 for idiosyncratic rows.
    pub labels: Vec<i64>,
    /// Meta-HDBSCAN membership probability per pooled row.
    pub probabilities: Vec<f64>,
    /// Mean preprocessed vector per archetype.
    pub centroids: Vec<Vec<f64>>,
    /// Archetypes whose member rows are all noise groups.
    pub noise_archetypes: Vec<i64>,
    /// Iterations holding at least one group of every archetype.
    pub complete_iterations: Vec<String>,
    /// Same, ignoring the noise archetypes.
    pub complete_iterations_ignoring_noise: Vec<String>,
}

impl ArchetypeModel {
    pub fn n_archetypes(&self) -> usize {
        self.centroids.len()
    }

    pub fn noise_pct(&self) -> f64 {
        let noise = self.labels.iter().filter(|&&l| l == NOISE).count();
        100.0 * noise as f64 / self.labels.len().max(1) as f64
    }

    pub fn complete(&self, ignore_noise: bool) -> &[String] {
        if ignore_noise {
            &self.complete_iterations_ignoring_noise
        } else {
            &self.complete_iterations
        }
    }
}

/// Meta-HDBSCAN over the pooled rows with `min_cluster_size = threshold`.
pub fn detect(pooled: &PooledMatrix, threshold: usize) -> Result<ArchetypeModel> {
    let n = pooled.n_rows();
    if threshold < 2 || threshold >= n {
        return Err(CoreError::InvalidParameter(format!(
            "archetype threshold must be in 2..{n}, got {threshold}"
        )));
    }
    let min_samples = threshold.min(META_MIN_SAMPLES);
    let fit = fit_hdbscan(pooled.values.view(), &HdbscanParams::new(threshold).with_min_samples(min_samples))?;

    let dims = pooled.values.ncols();
    let mut centroids = vec![vec![0.0; dims]; fit.n_clusters];
    let mut counts = vec![0usize; fit.n_clusters];
    let mut all_noise_rows = vec![true; fit.n_clusters];
    for (row, &label) in fit.labels.iter().enumerate() {
        if label == NOISE {
            continue;
        }
        let a = label as usize;
        counts[a] += 1;
        all_noise_rows[a] &= pooled.rows[row].is_noise;
        for (c, v) in centroids[a].iter_mut().zip(pooled.values.row(row)) {
            *c += v;
        }
    }
    for (c, &count) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= count as f64);
    }
    let noise_archetypes: Vec<i64> =
        (0..fit.n_clusters).filter(|&a| all_noise_rows[a]).map(|a| a as i64).collect();

    let mut present: BTreeMap<&str, BTreeSet<i64>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (row, &label) in pooled.rows.iter().zip(&fit.labels) {
        let key = row.iteration_key.as_str();
        if !present.contains_key(key) {
            order.push(key);
        }
        let set = present.entry(key).or_default();
        if label != NOISE {
            set.insert(label);
        }
    }
    let completeness = |required: BTreeSet<i64>| -> Vec<String> {
        if required.is_empty() {
            return Vec::new();
        }
        order.iter().filter(|k| required.is_subset(&present[*k])).map(|k| (*k).to_owned()).collect()
    };
    let all: BTreeSet<i64> = (0..fit.n_clusters as i64).collect();
    let without_noise: BTreeSet<i64> = all.iter().filter(|a| !noise_archetypes.contains(a)).copied().collect();

    Ok(ArchetypeModel {
        threshold,
        min_samples,
        complete_iterations: completeness(all),
        complete_iterations_ignoring_noise: completeness(without_noise),
        labels: fit.labels,
        probabilities: fit.probabilities,
        centroids,
        noise_archetypes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: usize,
    pub n_archetypes: usize,
    pub noise_pct: f64,
}

/// Thresholds `2 ..= N_iterations − 1` that are also below the row count.
pub fn sweep_thresholds(pooled: &PooledMatrix) -> Vec<usize> {
    let upper = pooled.n_iterations.saturating_sub(1).min(pooled.n_rows().saturating_sub(1));
    (2..=upper).collect()
}

/// Runs [`detect`] for every sweep threshold, in parallel, ordered by threshold.
pub fn threshold_sweep_models(pooled: &PooledMatrix) -> Result<Vec<ArchetypeModel>> {
    sweep_thresholds(pooled).into_par_iter().map(|t| detect(pooled, t)).collect()
}

pub fn sweep_curve(models: &[ArchetypeModel]) -> Vec<SweepPoint> {
    models
        .iter()
        .map(|m| SweepPoint { threshold: m.threshold, n_archetypes: m.n_archetypes(), noise_pct: m.noise_pct() })
        .collect()
}

pub fn threshold_sweep(pooled: &PooledMatrix) -> Result<Vec<SweepPoint>> {
    Ok(sweep_curve(&threshold_sweep_models(pooled)?))
}

/// Min-max scaling to [0, 1]; missing values map to 0 and a degenerate
/// range maps every present value to 0.5.
pub fn min_max_scale(values: &[Option<f64>]) -> Vec<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| match v {
            Some(v) if v.is_finite() => {
                if hi > lo {
                    (v - lo) / (hi - lo)
                } else {
                    0.5
                }
            }
            _ => 0.0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(keys: &[&str], per: usize) -> Vec<PooledRow> {
        keys.iter()
            .flat_map(|k| (0..per).map(move |g| PooledRow { iteration_key: (*k).into(), group_id: g as i64, is_noise: false }))
            .collect()
    }

    #[test]
    fn perfect_recurrence_gives_one_archetype_per_position() {
        let keys = ["1", "2", "3", "4", "5", "6"];
        let base = [[0.0, 10.0], [10.0, 0.0], [-10.0, -3.0]];
        let raw = Array2::from_shape_fn((18, 2), |(i, j)| base[i % 3][j]);
        let pooled = pool_vectors(rows(&keys, 3), raw, 6).unwrap();
        let model = detect(&pooled, default_threshold(6)).unwrap();
        assert_eq!(model.n_archetypes(), 3);
        assert_eq!(model.complete_iterations.len(), 6);
        for i in 0..18 {
            assert_eq!(model.labels[i], model.labels[i % 3]);
        }
    }

    #[test]
    fn preprocessing_normalizes_rows() {
        let raw = Array2::from_shape_fn((6, 12), |(i, j)| ((i * 3 + j * 7) % 11) as f64);
        let pooled = pool_vectors(rows(&["a", "b"], 3), raw, 2).unwrap();
        assert!(pooled.preprocessing.pca_basis.is_some());
        assert!(pooled.preprocessing.explained_variance >= 0.95);
        for row in pooled.values.rows() {
            assert!((row.dot(&row) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn threshold_rules() {
        assert_eq!(default_threshold(21), 10);
        assert_eq!(default_threshold(3), 2);
        let raw = Array2::from_shape_fn((4, 2), |(i, j)| (i + j) as f64);
        let pooled = pool_vectors(rows(&["a", "b"], 2), raw, 2).unwrap();
        assert!(detect(&pooled, 4).is_err());
        assert!(detect(&pooled, 1).is_err());
    }

    #[test]
    fn scaling_rules() {
        assert_eq!(min_max_scale(&[Some(1.0), Some(3.0), Some(2.0)]), vec![0.0, 1.0, 0.5]);
        assert_eq!(min_max_scale(&[Some(4.0), Some(4.0)]), vec![0.5, 0.5]);
        assert_eq!(min_max_scale(&[Some(1.0), None, Some(2.0)]), vec![0.0, 0.0, 1.0]);
    }
}
