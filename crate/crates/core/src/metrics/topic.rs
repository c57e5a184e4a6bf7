//! Topic-model quality: reconstruction, diversity, exclusivity, coherence,
//! sparsity and document silhouette.

use std::collections::{BTreeMap, HashMap, HashSet};

use ndarray::Array2;

use crate::error::Result;
use crate::linalg::{argmax, hoyer_sparseness};
use crate::methods::nmf::{objective, NmfModel};
use crate::metrics::clustering::silhouette_mean;
use crate::metrics::coherence::coherence_cv;
use crate::metrics::{
    ClusteringMetricOptions, MetricRecord, DIVERSITY, DOCUMENT_SPARSITY, FROBENIUS_NORM, MEAN_COHERENCE_CV,
    MEAN_EXCLUSIVITY, RECONSTRUCTION_PCT, SILHOUETTE, TOPIC_SPARSITY,
};
use crate::model::Family;
use crate::text::{Dictionary, SparseMatrix};

/// Length of the per-topic top-term lists used by every topic metric.
pub const TOP_TERMS: usize = 10;

/// Term indices of the `n` heaviest entries of every H row, ties by index.
pub fn top_terms(h: &Array2<f64>, n: usize) -> Vec<Vec<usize>> {
    h.rows()
        .into_iter()
        .map(|row| {
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            idx.truncate(n);
            idx
        })
        .collect()
}

/// Distinct terms across all top lists divided by the total list length.
pub fn diversity(top: &[Vec<usize>]) -> f64 {
    let total: usize = top.iter().map(Vec::len).sum();
    if total == 0 {
        return 0.0;
    }
    let distinct: HashSet<usize> = top.iter().flatten().copied().collect();
    distinct.len() as f64 / total as f64
}

/// Fraction of each topic's top terms that appear in no other topic's list.
pub fn diversity_contribution(top: &[Vec<usize>]) -> Vec<f64> {
    let mut owners: HashMap<usize, usize> = HashMap::new();
    for list in top {
        let unique: HashSet<usize> = list.iter().copied().collect();
        for t in unique {
            *owners.entry(t).or_insert(0) += 1;
        }
    }
    top.iter()
        .map(|list| {
            if list.is_empty() {
                return 0.0;
            }
            list.iter().filter(|t| owners[t] == 1).count() as f64 / list.len() as f64
        })
        .collect()
}

/// Mean over each topic's top terms of `H[k,t] / Σ_k' H[k',t]`.
pub fn exclusivity_per_topic(h: &Array2<f64>, top: &[Vec<usize>]) -> Vec<f64> {
    let k = h.nrows();
    let column_sums = h.sum_axis(ndarray::Axis(0));
    top.iter()
        .enumerate()
        .map(|(topic, list)| {
            if list.is_empty() {
                return 0.0;
            }
            list.iter()
                .map(|&t| {
                    let s = column_sums[t];
                    if s > 0.0 {
                        h[[topic, t]] / s
                    } else {
                        1.0 / k as f64
                    }
                })
                .sum::<f64>()
                / list.len() as f64
        })
        .collect()
}

/// Iteration-level record plus per-topic metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicMetrics {
    pub record: MetricRecord,
    /// One map per topic: `coherence_cv`, `exclusivity`, `diversity_contribution`.
    pub per_topic: Vec<BTreeMap<String, f64>>,
    pub warnings: Vec<String>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Computes every topic metric of one fitted NMF.
pub fn topic_metrics(
    v: &SparseMatrix,
    model: &NmfModel,
    docs: &[Vec<String>],
    dictionary: &Dictionary,
    window: usize,
    options: &ClusteringMetricOptions,
) -> Result<TopicMetrics> {
    let mut record = MetricRecord::for_family(Family::Topic);
    let residual = objective(v, &model.w, &model.h).max(0.0).sqrt();
    let norm = v.frobenius_sq().sqrt();
    record.set(FROBENIUS_NORM, Some(residual));
    record.set(RECONSTRUCTION_PCT, (norm > 0.0).then(|| 100.0 * (1.0 - residual / norm)));

    let top = top_terms(&model.h, TOP_TERMS);
    let exclusivity = exclusivity_per_topic(&model.h, &top);
    let contribution = diversity_contribution(&top);
    let term_lists: Vec<Vec<String>> =
        top.iter().map(|list| list.iter().map(|&t| dictionary.term(t).to_owned()).collect()).collect();
    let coherence = coherence_cv(&term_lists, docs, window)?;

    record.set(DIVERSITY, Some(diversity(&top)));
    record.set(MEAN_EXCLUSIVITY, mean(&exclusivity));
    record.set(MEAN_COHERENCE_CV, coherence.mean());
    let doc_sparsity: Vec<f64> =
        model.w.rows().into_iter().map(|r| hoyer_sparseness(&r.to_vec())).collect();
    let topic_sparsity: Vec<f64> =
        model.h.rows().into_iter().map(|r| hoyer_sparseness(&r.to_vec())).collect();
    record.set(DOCUMENT_SPARSITY, mean(&doc_sparsity));
    record.set(TOPIC_SPARSITY, mean(&topic_sparsity));

    let labels: Vec<i64> =
        model.w.rows().into_iter().map(|r| argmax(r.iter().copied()) as i64).collect();
    let dense = v.to_dense();
    let (silhouette, sampled) = silhouette_mean(
        &labels,
        |i, j| crate::linalg::dist(dense.row(i), dense.row(j)),
        options,
    );
    record.set(SILHOUETTE, silhouette);
    record.sampled = sampled;

    let per_topic = (0..model.k)
        .map(|k| {
            BTreeMap::from([
                ("coherence_cv".to_owned(), coherence.per_topic[k]),
                ("exclusivity".to_owned(), exclusivity[k]),
                ("diversity_contribution".to_owned(), contribution[k]),
            ])
        })
        .collect();
    Ok(TopicMetrics { record, per_topic, warnings: coherence.warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_lists_give_one_over_k() {
        let top = vec![(0..10).collect::<Vec<_>>(); 4];
        assert!((diversity(&top) - 0.25).abs() < 1e-15);
        assert_eq!(diversity_contribution(&top), vec![0.0; 4]);
    }

    #[test]
    fn disjoint_lists_give_one() {
        let top: Vec<Vec<usize>> = (0..3).map(|k| (k * 10..k * 10 + 10).collect()).collect();
        assert_eq!(diversity(&top), 1.0);
        assert_eq!(diversity_contribution(&top), vec![1.0; 3]);
    }

    #[test]
    fn exclusive_terms_score_one() {
        let h = array![[1.0, 2.0, 0.0, 0.0], [0.0, 0.0, 3.0, 1.0]];
        let top = top_terms(&h, 2);
        assert_eq!(top, vec![vec![1, 0], vec![2, 3]]);
        assert_eq!(exclusivity_per_topic(&h, &top), vec![1.0, 1.0]);
    }

    #[test]
    fn shared_term_halves_exclusivity() {
        let h = array![[1.0, 1.0], [1.0, 0.0]];
        let top = vec![vec![0], vec![0]];
        assert_eq!(exclusivity_per_topic(&h, &top), vec![0.5, 0.5]);
    }
}
