//! Distance-based clustering quality: SSE, variance explained, silhouette,
//! Calinski–Harabasz and Davies–Bouldin.

use std::collections::BTreeMap;

use ndarray::{Array1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::{dist, sq_dist};
use crate::metrics::{
    MetricRecord, CALINSKI_HARABASZ, DAVIES_BOULDIN, K_DISCOVERED, NOISE_PCT, SILHOUETTE, SSE,
    VARIANCE_EXPLAINED_PCT,
};
use crate::model::{members_by_label, Family, NOISE};

/// Above this many items the silhouette is estimated on a stratified sample.
pub const SILHOUETTE_SAMPLE_LIMIT: usize = 20_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringMetricOptions {
    pub sample_limit: usize,
    pub sample_seed: u64,
}

impl Default for ClusteringMetricOptions {
    fn default() -> Self {
        Self { sample_limit: SILHOUETTE_SAMPLE_LIMIT, sample_seed: 0 }
    }
}

/// Per-item silhouette among non-noise items, computed from a distance callback.
///
/// Returns `None` when fewer than two non-noise groups exist. Noise items get
/// `None`; members of singleton groups get 0.
pub fn silhouette_with<F>(labels: &[i64], distance: F) -> Option<Vec<Option<f64>>>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let groups: Vec<(i64, Vec<usize>)> =
        members_by_label(labels).into_iter().filter(|(l, _)| *l != NOISE).collect();
    if groups.len() < 2 {
        return None;
    }
    let position: BTreeMap<i64, usize> = groups.iter().enumerate().map(|(p, (l, _))| (*l, p)).collect();
    let values = (0..labels.len())
        .into_par_iter()
        .map(|i| {
            let own = *position.get(&labels[i])?;
            if groups[own].1.len() == 1 {
                return Some(0.0);
            }
            let mut a = 0.0;
            let mut b = f64::INFINITY;
            for (p, (_, members)) in groups.iter().enumerate() {
                let total: f64 = members.iter().filter(|&&j| j != i).map(|&j| distance(i, j)).sum();
                if p == own {
                    a = total / (members.len() - 1) as f64;
                } else {
                    b = b.min(total / members.len() as f64);
                }
            }
            let scale = a.max(b);
            Some(if scale > 0.0 { (b - a) / scale } else { 0.0 })
        })
        .collect();
    Some(values)
}

/// Exact per-item Euclidean silhouette; see [`silhouette_with`].
pub fn silhouette_samples(x: ArrayView2<'_, f64>, labels: &[i64]) -> Option<Vec<Option<f64>>> {
    silhouette_with(labels, |i, j| dist(x.row(i), x.row(j)))
}

/// Mean silhouette over non-noise items and whether it was sampled.
///
/// When more than `options.sample_limit` non-noise items exist, a stratified
/// sample (proportional per group, fixed seed) is scored instead.
pub fn silhouette_mean<F>(labels: &[i64], distance: F, options: &ClusteringMetricOptions) -> (Option<f64>, bool)
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let clustered: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != NOISE).collect();
    let (subset, sampled) = if clustered.len() > options.sample_limit {
        (stratified_sample(labels, options.sample_limit, options.sample_seed), true)
    } else {
        (clustered, false)
    };
    let sub_labels: Vec<i64> = subset.iter().map(|&i| labels[i]).collect();
    let values = silhouette_with(&sub_labels, |a, b| distance(subset[a], subset[b]));
    let mean = values.and_then(|v| {
        let scored: Vec<f64> = v.into_iter().flatten().collect();
        (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64)
    });
    (mean, sampled)
}

fn stratified_sample(labels: &[i64], limit: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<(i64, Vec<usize>)> =
        members_by_label(labels).into_iter().filter(|(l, _)| *l != NOISE).collect();
    let total: usize = groups.iter().map(|(_, m)| m.len()).sum();
    let mut picked = Vec::with_capacity(limit);
    for (_, members) in groups {
        let quota = ((members.len() as f64 * limit as f64 / total as f64).round() as usize).clamp(1, members.len());
        let mut shuffled = members;
        shuffled.shuffle(&mut rng);
        picked.extend_from_slice(&shuffled[..quota]);
    }
    picked.sort_unstable();
    picked
}

fn centroid(x: ArrayView2<'_, f64>, members: &[usize]) -> Array1<f64> {
    let mut c = Array1::zeros(x.ncols());
    for &i in members {
        c += &x.row(i);
    }
    c / members.len().max(1) as f64
}

/// Calinski–Harabasz index over non-noise items; `None` when undefined.
pub fn calinski_harabasz(x: ArrayView2<'_, f64>, labels: &[i64]) -> Option<f64> {
    let groups: Vec<Vec<usize>> =
        members_by_label(labels).into_iter().filter(|(l, _)| *l != NOISE).map(|(_, m)| m).collect();
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    if k < 2 || n <= k {
        return None;
    }
    let all: Vec<usize> = groups.iter().flatten().copied().collect();
    let overall = centroid(x, &all);
    let mut between = 0.0;
    let mut within = 0.0;
    for members in &groups {
        let c = centroid(x, members);
        between += members.len() as f64 * sq_dist(c.view(), overall.view());
        within += members.iter().map(|&i| sq_dist(x.row(i), c.view())).sum::<f64>();
    }
    (within > 0.0).then(|| (between / (k - 1) as f64) / (within / (n - k) as f64))
}

/// Davies–Bouldin index over non-noise items; `None` when undefined.
pub fn davies_bouldin(x: ArrayView2<'_, f64>, labels: &[i64]) -> Option<f64> {
    let groups: Vec<Vec<usize>> =
        members_by_label(labels).into_iter().filter(|(l, _)| *l != NOISE).map(|(_, m)| m).collect();
    if groups.len() < 2 {
        return None;
    }
    let centroids: Vec<Array1<f64>> = groups.iter().map(|m| centroid(x, m)).collect();
    let scatter: Vec<f64> = groups
        .iter()
        .zip(&centroids)
        .map(|(m, c)| m.iter().map(|&i| dist(x.row(i), c.view())).sum::<f64>() / m.len() as f64)
        .collect();
    let mut total = 0.0;
    for i in 0..groups.len() {
        let mut worst: f64 = 0.0;
        for j in 0..groups.len() {
            if i == j {
                continue;
            }
            let separation = dist(centroids[i].view(), centroids[j].view());
            let spread = scatter[i] + scatter[j];
            let ratio = if separation > 0.0 {
                spread / separation
            } else if spread > 0.0 {
                return None;
            } else {
                0.0
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Some(total / groups.len() as f64)
}

/// The per-iteration record for K-means (`Partition`) or the density methods.
pub fn clustering_metrics(
    x: ArrayView2<'_, f64>,
    labels: &[i64],
    family: Family,
    options: &ClusteringMetricOptions,
) -> MetricRecord {
    let mut record = MetricRecord::for_family(family);
    let groups: Vec<Vec<usize>> =
        members_by_label(labels).into_iter().filter(|(l, _)| *l != NOISE).map(|(_, m)| m).collect();
    let clustered: Vec<usize> = groups.iter().flatten().copied().collect();

    if !clustered.is_empty() {
        let sse: f64 = groups
            .iter()
            .map(|m| {
                let c = centroid(x, m);
                m.iter().map(|&i| sq_dist(x.row(i), c.view())).sum::<f64>()
            })
            .sum();
        let overall = centroid(x, &clustered);
        let tss: f64 = clustered.iter().map(|&i| sq_dist(x.row(i), overall.view())).sum();
        record.set(SSE, Some(sse));
        let explained = if tss > 0.0 { Some((100.0 * (1.0 - sse / tss)).clamp(0.0, 100.0)) } else { None };
        record.set(VARIANCE_EXPLAINED_PCT, explained);
    }
    let (silhouette, sampled) = silhouette_mean(labels, |i, j| dist(x.row(i), x.row(j)), options);
    record.set(SILHOUETTE, silhouette);
    record.sampled = sampled;
    record.set(CALINSKI_HARABASZ, calinski_harabasz(x, labels));
    record.set(DAVIES_BOULDIN, davies_bouldin(x, labels));
    if family == Family::Density {
        let n = labels.len().max(1) as f64;
        let noise = labels.iter().filter(|&&l| l == NOISE).count() as f64;
        record.set(NOISE_PCT, Some(100.0 * noise / n));
        record.set(K_DISCOVERED, Some(groups.len() as f64));
    }
    record
}

/// Mean and max distance of a group's members to its representative.
pub fn distance_stats(x: ArrayView2<'_, f64>, members: &[usize], representative: &[f64]) -> (f64, f64) {
    if members.is_empty() {
        return (0.0, 0.0);
    }
    let rep = ndarray::ArrayView1::from(representative);
    let d: Vec<f64> = members.iter().map(|&i| dist(x.row(i), rep)).collect();
    let max = d.iter().copied().fold(0.0, f64::max);
    (d.iter().sum::<f64>() / d.len() as f64, max)
}
