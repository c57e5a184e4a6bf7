//! Per-item membership probability and outlier score, both in [0, 1].

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::dist;
use crate::methods::{FittedModel, MethodInput};
use crate::metrics::silhouette_samples;
use crate::model::{members_by_label, NOISE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRecord {
    pub item_id: String,
    pub membership: f64,
    pub outlier: f64,
}

/// Both indicators for every item of one iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Uncertainty {
    pub membership: Vec<f64>,
    pub outlier: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Uncertainty {
    pub fn records(&self, item_ids: &[String]) -> Vec<UncertaintyRecord> {
        item_ids
            .iter()
            .zip(self.membership.iter().zip(&self.outlier))
            .map(|(id, (&membership, &outlier))| UncertaintyRecord { item_id: id.clone(), membership, outlier })
            .collect()
    }
}

/// `(silhouette + 1) / 2` per item, silhouette taken among non-noise items.
///
/// Noise items get 0. With fewer than two non-noise groups every item gets
/// 0.5 and a warning is returned.
pub fn membership_silhouette(x: ArrayView2<'_, f64>, labels: &[i64]) -> (Vec<f64>, Option<String>) {
    match silhouette_samples(x, labels) {
        Some(values) => (values.into_iter().map(|s| s.map_or(0.0, |s| (s + 1.0) / 2.0)).collect(), None),
        None => (
            vec![0.5; labels.len()],
            Some("fewer than two non-noise groups; silhouette membership set to 0.5".into()),
        ),
    }
}

/// Dominant share of a topic mixture, `max(w) / Σw`. An all-zero row gives `1/K`.
pub fn membership_nmf(row: &[f64]) -> (f64, Option<String>) {
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return (1.0 / row.len().max(1) as f64, Some("document has an all-zero topic mixture".into()));
    }
    let max = row.iter().copied().fold(0.0, f64::max);
    ((max / total).clamp(0.0, 1.0), None)
}

/// `d_i / max_j d_j` within one group; all zeros if the max is zero.
pub fn outlier_distance_ratio(distances: &[f64]) -> Vec<f64> {
    let max = distances.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0.0; distances.len()];
    }
    distances.iter().map(|d| (d / max).clamp(0.0, 1.0)).collect()
}

/// Shannon entropy of the normalized row divided by `ln K`.
///
/// An all-zero row counts as maximally diffuse (1.0).
pub fn outlier_entropy(row: &[f64], k: usize) -> (f64, Option<String>) {
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return (1.0, Some("document has an all-zero topic mixture".into()));
    }
    if k < 2 {
        return (0.0, None);
    }
    let entropy: f64 = row
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.ln()
        })
        .sum();
    ((entropy / (k as f64).ln()).clamp(0.0, 1.0), None)
}

/// Per-group distance ratios where `distance(i)` is item `i`'s distance to
/// its own group representative.
fn grouped_ratios(labels: &[i64], distance: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; labels.len()];
    for (_, members) in members_by_label(labels) {
        let d: Vec<f64> = members.iter().map(|&i| distance(i)).collect();
        for (&i, r) in members.iter().zip(outlier_distance_ratio(&d)) {
            out[i] = r;
        }
    }
    out
}

/// Dispatches to the indicator pair of the model's method family.
pub fn uncertainty_for(model: &FittedModel, input: MethodInput<'_>) -> Result<Uncertainty> {
    let mut warnings = Vec::new();
    let (membership, outlier) = match model {
        FittedModel::Nmf(m) => {
            let mut membership = Vec::with_capacity(m.w.nrows());
            let mut outlier = Vec::with_capacity(m.w.nrows());
            let mut zero_rows = 0;
            for row in m.w.rows() {
                let row = row.to_vec();
                let (p, w1) = membership_nmf(&row);
                let (o, _) = outlier_entropy(&row, m.k);
                zero_rows += usize::from(w1.is_some());
                membership.push(p);
                outlier.push(o);
            }
            if zero_rows > 0 {
                warnings.push(format!("{zero_rows} documents have an all-zero topic mixture"));
            }
            (membership, outlier)
        }
        FittedModel::Kmeans(m) => {
            let x = input.features()?;
            let labels: Vec<i64> = m.labels.iter().map(|&l| l as i64).collect();
            let (membership, warning) = membership_silhouette(x, &labels);
            warnings.extend(warning);
            (membership, grouped_ratios(&labels, |i| m.distances[i]))
        }
        FittedModel::Dbscan(m) => {
            let x = input.features()?;
            let (membership, warning) = membership_silhouette(x, &m.labels);
            warnings.extend(warning);
            let representative = |i: usize| match m.labels[i] {
                NOISE => m.noise_medoid.expect("noise items imply a noise medoid"),
                l => m.medoids[l as usize],
            };
            (membership, grouped_ratios(&m.labels, |i| dist(x.row(i), x.row(representative(i)))))
        }
        FittedModel::Hdbscan(m) => (
            m.probabilities.iter().map(|p| p.clamp(0.0, 1.0)).collect(),
            m.glosh.iter().map(|g| g.clamp(0.0, 1.0)).collect(),
        ),
    };
    Ok(Uncertainty { membership, outlier, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn nmf_membership_examples() {
        assert!((membership_nmf(&[0.9, 0.1]).0 - 0.9).abs() < 1e-12);
        assert!((membership_nmf(&[1.0; 4]).0 - 0.25).abs() < 1e-12);
        assert!((membership_nmf(&[3.0, 1.0, 1.0]).0 - 0.6).abs() < 1e-12);
        let (v, warning) = membership_nmf(&[0.0, 0.0, 0.0]);
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        assert!(warning.is_some());
    }

    #[test]
    fn distance_ratio_examples() {
        assert_eq!(outlier_distance_ratio(&[1.0, 2.0, 4.0]), vec![0.25, 0.5, 1.0]);
        assert_eq!(outlier_distance_ratio(&[0.0]), vec![0.0]);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(outlier_entropy(&[0.0, 1.0, 0.0], 3).0, 0.0);
        assert!((outlier_entropy(&[2.0; 5], 5).0 - 1.0).abs() < 1e-12);
        assert!((outlier_entropy(&[0.5, 0.5, 0.0], 3).0 - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert_eq!(outlier_entropy(&[0.0; 3], 3), (1.0, Some("document has an all-zero topic mixture".into())));
    }

    #[test]
    fn silhouette_membership_handles_noise_and_single_group() {
        let x = array![[0.0], [0.1], [5.0], [5.1], [40.0]];
        let (m, warning) = membership_silhouette(x.view(), &[0, 0, 1, 1, NOISE]);
        assert!(warning.is_none());
        assert_eq!(m[4], 0.0);
        assert!(m[..4].iter().all(|v| *v > 0.9));
        let (m, warning) = membership_silhouette(x.view(), &[0, 0, 0, 0, NOISE]);
        assert!(warning.is_some());
        assert_eq!(m, vec![0.5; 5]);
    }
}
