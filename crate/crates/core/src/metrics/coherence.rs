//! C_V topic coherence: boolean sliding windows, NPMI context vectors,
//! one-set segmentation and cosine similarity.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const DEFAULT_WINDOW: usize = 110;
pub const NPMI_EPSILON: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoherenceResult {
    pub per_topic: Vec<f64>,
    pub warnings: Vec<String>,
}

impl CoherenceResult {
    pub fn mean(&self) -> Option<f64> {
        (!self.per_topic.is_empty()).then(|| self.per_topic.iter().sum::<f64>() / self.per_topic.len() as f64)
    }
}

/// Window occurrence counts for a fixed set of terms.
struct WindowCounts {
    windows: u64,
    single: Vec<u64>,
    /// Row-major `m × m`, only the upper triangle (a < b) is filled.
    pair: Vec<u64>,
    m: usize,
}

impl WindowCounts {
    fn pair(&self, a: usize, b: usize) -> u64 {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        if a == b {
            self.single[a]
        } else {
            self.pair[a * self.m + b]
        }
    }
}

/// Slides a window of `window` tokens over every nonempty document (documents
/// shorter than the window count as one window) and counts, for each tracked term and
/// each tracked pair, how many windows contain it.
fn count_windows(docs: &[Vec<String>], terms: &HashMap<&str, usize>, window: usize) -> WindowCounts {
    let m = terms.len();
    let mut counts = WindowCounts { windows: 0, single: vec![0; m], pair: vec![0; m * m], m };
    let mut inside = vec![0u32; m];
    for doc in docs {
        if doc.is_empty() {
            continue;
        }
        let ids: Vec<Option<usize>> = doc.iter().map(|t| terms.get(t.as_str()).copied()).collect();
        let span = window.min(ids.len());
        let n_windows = if ids.len() <= window { 1 } else { ids.len() - window + 1 };
        inside.iter_mut().for_each(|c| *c = 0);
        for id in ids[..span].iter().flatten() {
            inside[*id] += 1;
        }
        // consecutive windows often hold the same term set; count runs
        let mut run = 0u64;
        let mut present: Vec<usize> = (0..m).filter(|&t| inside[t] > 0).collect();
        for start in 0..n_windows {
            if start > 0 {
                let mut changed = false;
                if let Some(out) = ids[start - 1] {
                    inside[out] -= 1;
                    changed |= inside[out] == 0;
                }
                if let Some(inn) = ids[start + window - 1] {
                    inside[inn] += 1;
                    changed |= inside[inn] == 1;
                }
                if changed {
                    flush(&mut counts, &present, run);
                    run = 0;
                    present = (0..m).filter(|&t| inside[t] > 0).collect();
                }
            }
            run += 1;
        }
        flush(&mut counts, &present, run);
        counts.windows += n_windows as u64;
    }
    counts
}

fn flush(counts: &mut WindowCounts, present: &[usize], run: u64) {
    if run == 0 {
        return;
    }
    for (p, &a) in present.iter().enumerate() {
        counts.single[a] += run;
        for &b in &present[p + 1..] {
            counts.pair[a * counts.m + b] += run;
        }
    }
}

/// Normalized PMI with additive smoothing; 0 when either term never occurs.
pub fn npmi(p_a: f64, p_b: f64, p_ab: f64) -> f64 {
    if p_a <= 0.0 || p_b <= 0.0 {
        return 0.0;
    }
    let joint = p_ab + NPMI_EPSILON;
    (joint / (p_a * p_b)).ln() / -joint.ln()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na > 0.0 && nb > 0.0 {
        dot / (na * nb)
    } else {
        0.0
    }
}

/// C_V coherence of every topic's top-term list against `docs`.
///
/// Each term's context vector holds its NPMI with every term of the topic
/// (itself included); the topic vector is their sum, and coherence is the
/// mean cosine between each context vector and the topic vector.
pub fn coherence_cv(top_terms: &[Vec<String>], docs: &[Vec<String>], window: usize) -> Result<CoherenceResult> {
    if window == 0 {
        return Err(CoreError::InvalidParameter("coherence window must be >= 1".into()));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    for term in top_terms.iter().flatten() {
        let next = index.len();
        index.entry(term.as_str()).or_insert(next);
    }
    let counts = count_windows(docs, &index, window);
    let total = counts.windows.max(1) as f64;
    let mut warnings = Vec::new();
    for (term, &id) in &index {
        if counts.single[id] == 0 {
            warnings.push(format!("term `{term}` occurs in no window; its NPMI row is zero"));
        }
    }
    warnings.sort();

    let per_topic = top_terms
        .iter()
        .map(|topic| {
            let ids: Vec<usize> = topic.iter().map(|t| index[t.as_str()]).collect();
            let context: Vec<Vec<f64>> = ids
                .iter()
                .map(|&a| {
                    ids.iter()
                        .map(|&b| {
                            let p_a = counts.single[a] as f64 / total;
                            let p_b = counts.single[b] as f64 / total;
                            npmi(p_a, p_b, counts.pair(a, b) as f64 / total)
                        })
                        .collect()
                })
                .collect();
            let mut topic_vector = vec![0.0; ids.len()];
            for row in &context {
                for (s, v) in topic_vector.iter_mut().zip(row) {
                    *s += v;
                }
            }
            if context.is_empty() {
                return 0.0;
            }
            context.iter().map(|row| cosine(row, &topic_vector)).sum::<f64>() / context.len() as f64
        })
        .collect();
    Ok(CoherenceResult { per_topic, warnings })
}
