//! Per-iteration metric records and per-group metrics.

pub mod clustering;
pub mod coherence;
pub mod topic;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::Family;

pub use clustering::{
    calinski_harabasz, clustering_metrics, davies_bouldin, distance_stats, silhouette_mean,
    silhouette_samples, silhouette_with, ClusteringMetricOptions, SILHOUETTE_SAMPLE_LIMIT,
};
pub use coherence::{coherence_cv, CoherenceResult, DEFAULT_WINDOW, NPMI_EPSILON};
pub use topic::{
    diversity, diversity_contribution, exclusivity_per_topic, top_terms, topic_metrics, TopicMetrics, TOP_TERMS,
};

/// Whether larger values of a metric are preferred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
    Info,
}

pub const RECONSTRUCTION_PCT: &str = "reconstruction_pct";
pub const FROBENIUS_NORM: &str = "frobenius_norm";
pub const DIVERSITY: &str = "diversity";
pub const MEAN_EXCLUSIVITY: &str = "mean_exclusivity";
pub const MEAN_COHERENCE_CV: &str = "mean_coherence_cv";
pub const DOCUMENT_SPARSITY: &str = "document_sparsity";
pub const TOPIC_SPARSITY: &str = "topic_sparsity";
pub const SILHOUETTE: &str = "silhouette";
pub const SSE: &str = "sse";
pub const VARIANCE_EXPLAINED_PCT: &str = "variance_explained_pct";
pub const CALINSKI_HARABASZ: &str = "calinski_harabasz";
pub const DAVIES_BOULDIN: &str = "davies_bouldin";
pub const NOISE_PCT: &str = "noise_pct";
pub const K_DISCOVERED: &str = "k_discovered";

/// The full metric list of a method family with each metric's direction.
pub fn direction_table(family: Family) -> Vec<(&'static str, Direction)> {
    use Direction::*;
    let clustering = vec![
        (SSE, LowerBetter),
        (VARIANCE_EXPLAINED_PCT, HigherBetter),
        (SILHOUETTE, HigherBetter),
        (CALINSKI_HARABASZ, HigherBetter),
        (DAVIES_BOULDIN, LowerBetter),
    ];
    match family {
        Family::Topic => vec![
            (RECONSTRUCTION_PCT, HigherBetter),
            (FROBENIUS_NORM, LowerBetter),
            (DIVERSITY, HigherBetter),
            (MEAN_EXCLUSIVITY, HigherBetter),
            (MEAN_COHERENCE_CV, HigherBetter),
            (DOCUMENT_SPARSITY, HigherBetter),
            (TOPIC_SPARSITY, HigherBetter),
            (SILHOUETTE, HigherBetter),
        ],
        Family::Partition => clustering,
        Family::Density => {
            let mut all = clustering;
            all.push((NOISE_PCT, LowerBetter));
            all.push((K_DISCOVERED, Info));
            all
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    /// `None` when the metric is undefined for this iteration.
    pub value: Option<f64>,
    pub direction: Direction,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub values: BTreeMap<String, MetricValue>,
    /// True when the silhouette was estimated on a stratified sample.
    #[serde(default)]
    pub sampled: bool,
}

impl MetricRecord {
    /// A record listing every metric of `family`, all missing.
    pub fn for_family(family: Family) -> Self {
        let values = direction_table(family)
            .into_iter()
            .map(|(name, direction)| (name.to_owned(), MetricValue { value: None, direction }))
            .collect();
        Self { values, sampled: false }
    }

    /// Sets a value, keeping the direction already declared for it (or `Info`).
    pub fn set(&mut self, name: &str, value: Option<f64>) {
        let value = value.filter(|v| v.is_finite());
        self.values
            .entry(name.to_owned())
            .and_modify(|m| m.value = value)
            .or_insert(MetricValue { value, direction: Direction::Info });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(|m| m.value)
    }

    pub fn direction(&self, name: &str) -> Option<Direction> {
        self.values.get(name).map(|m| m.direction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_record_lists_noise_and_k() {
        let r = MetricRecord::for_family(Family::Density);
        assert_eq!(r.values.len(), 7);
        assert_eq!(r.direction(K_DISCOVERED), Some(Direction::Info));
        assert_eq!(r.direction(NOISE_PCT), Some(Direction::LowerBetter));
    }

    #[test]
    fn set_keeps_direction_and_drops_non_finite() {
        let mut r = MetricRecord::for_family(Family::Partition);
        r.set(SSE, Some(3.0));
        r.set(SILHOUETTE, Some(f64::NAN));
        assert_eq!(r.get(SSE), Some(3.0));
        assert_eq!(r.direction(SSE), Some(Direction::LowerBetter));
        assert_eq!(r.get(SILHOUETTE), None);
    }
}
