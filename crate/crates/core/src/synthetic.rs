//! Seeded generators with ground truth, and the adjusted Rand index.

use std::collections::HashMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{ItemTable, NOISE};

fn default_seed() -> u64 {
    0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SyntheticSpec {
    /// Isotropic 2D Gaussian blobs centered on a regular polygon whose side
    /// is `separation · spread`.
    Blobs {
        n_items: usize,
        n_blobs: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default = "default_spread")]
        spread: f64,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    /// Two interleaving half circles plus uniformly scattered noise items.
    MoonsNoise {
        n_items: usize,
        noise_fraction: f64,
        #[serde(default = "default_jitter")]
        jitter: f64,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    /// Documents drawn from disjoint topic vocabularies plus shared fillers.
    PlantedTopics {
        n_docs: usize,
        n_topics: usize,
        #[serde(default = "default_terms_per_topic")]
        terms_per_topic: usize,
        #[serde(default = "default_doc_length")]
        doc_length: usize,
        #[serde(default = "default_fillers")]
        n_fillers: usize,
        #[serde(default = "default_filler_rate")]
        filler_rate: f64,
        /// Zipf exponent of term frequencies inside a topic.
        #[serde(default = "default_zipf")]
        zipf_exponent: f64,
        /// Draw every topic's documents as two labeled copies that share one vocabulary.
        #[serde(default)]
        duplicate_topics: bool,
        #[serde(default = "default_seed")]
        seed: u64,
    },
}

fn default_separation() -> f64 {
    20.0
}
fn default_spread() -> f64 {
    1.0
}
fn default_jitter() -> f64 {
    0.05
}
fn default_terms_per_topic() -> usize {
    25
}
fn default_doc_length() -> usize {
    50
}
fn default_fillers() -> usize {
    10
}
fn default_filler_rate() -> f64 {
    0.1
}
fn default_zipf() -> f64 {
    1.0
}

impl SyntheticSpec {
    pub fn blobs(n_items: usize, n_blobs: usize, separation: f64, spread: f64, seed: u64) -> Self {
        SyntheticSpec::Blobs { n_items, n_blobs, separation, spread, seed }
    }

    pub fn moons_noise(n_items: usize, noise_fraction: f64, seed: u64) -> Self {
        SyntheticSpec::MoonsNoise { n_items, noise_fraction, jitter: default_jitter(), seed }
    }

    pub fn planted_topics(n_docs: usize, n_topics: usize, seed: u64) -> Self {
        SyntheticSpec::PlantedTopics {
            n_docs,
            n_topics,
            terms_per_topic: default_terms_per_topic(),
            doc_length: default_doc_length(),
            n_fillers: default_fillers(),
            filler_rate: default_filler_rate(),
            zipf_exponent: default_zipf(),
            duplicate_topics: false,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub table: ItemTable,
    /// Generating blob, moon or topic per item; noise is -1.
    pub truth: Vec<i64>,
    /// Planted vocabulary per topic (empty for numeric kinds).
    pub vocabularies: Vec<Vec<String>>,
    pub fillers: Vec<String>,
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn truth_attribute(truth: &[i64]) -> Vec<String> {
    truth.iter().map(|t| t.to_string()).collect()
}

/// Lowercase alphabetic word for `index`, e.g. 0 → "a", 27 → "bb".
fn letters(mut index: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (index % 26) as u8);
        index /= 26;
        if index == 0 {
            break;
        }
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

pub fn topic_term(topic: usize, term: usize) -> String {
    format!("top{}term{}", letters(topic), letters(term))
}

pub fn filler_term(index: usize) -> String {
    format!("filler{}", letters(index))
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    match *spec {
        SyntheticSpec::Blobs { n_items, n_blobs, separation, spread, seed } => {
            blobs(n_items, n_blobs, separation, spread, seed)
        }
        SyntheticSpec::MoonsNoise { n_items, noise_fraction, jitter, seed } => {
            moons_noise(n_items, noise_fraction, jitter, seed)
        }
        SyntheticSpec::PlantedTopics {
            n_docs,
            n_topics,
            terms_per_topic,
            doc_length,
            n_fillers,
            filler_rate,
            zipf_exponent,
            duplicate_topics,
            seed,
        } => planted_topics(
            n_docs,
            n_topics,
            terms_per_topic,
            doc_length,
            n_fillers,
            filler_rate,
            zipf_exponent,
            duplicate_topics,
            seed,
        ),
    }
}

fn blobs(n: usize, k: usize, separation: f64, spread: f64, seed: u64) -> Result<SyntheticData> {
    if k == 0 || n < k.max(2) {
        return Err(CoreError::InvalidParameter(format!("cannot draw {k} blobs from {n} items")));
    }
    if !(separation > 0.0) || !(spread > 0.0) {
        return Err(CoreError::InvalidParameter("separation and spread must be positive".into()));
    }
    let side = separation * spread;
    let radius = if k == 1 { 0.0 } else { side / (2.0 * (std::f64::consts::PI / k as f64).sin()) };
    let centers: Vec<[f64; 2]> = (0..k)
        .map(|b| {
            let angle = 2.0 * std::f64::consts::PI * b as f64 / k as f64;
            [radius * angle.cos(), radius * angle.sin()]
        })
        .collect();
    let normal = Normal::new(0.0, spread).map_err(|e| CoreError::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth = Vec::with_capacity(n);
    for b in 0..k {
        let size = n / k + usize::from(b < n % k);
        truth.extend(std::iter::repeat_n(b as i64, size));
    }
    let values = Array2::from_shape_fn((n, 2), |(i, j)| centers[truth[i] as usize][j]);
    let values = values.mapv(|c| c + normal.sample(&mut rng));
    let table = ItemTable::numeric(ids(n), vec!["x".into(), "y".into()], values)
        .with_attribute("truth", truth_attribute(&truth));
    Ok(SyntheticData { table, truth, vocabularies: Vec::new(), fillers: Vec::new() })
}

fn moons_noise(n: usize, noise_fraction: f64, jitter: f64, seed: u64) -> Result<SyntheticData> {
    if !(0.0..1.0).contains(&noise_fraction) || jitter < 0.0 {
        return Err(CoreError::InvalidParameter("noise fraction must be in [0, 1) and jitter >= 0".into()));
    }
    let n_noise = (n as f64 * noise_fraction).round() as usize;
    let n_moons = n - n_noise;
    if n_moons < 2 {
        return Err(CoreError::InvalidParameter(format!("{n} items leave fewer than 2 moon items")));
    }
    let n_outer = n_moons - n_moons / 2;
    let n_inner = n_moons / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, jitter.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut points = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    let step = |count: usize, i: usize| if count > 1 { std::f64::consts::PI * i as f64 / (count - 1) as f64 } else { 0.0 };
    for i in 0..n_outer {
        let t = step(n_outer, i);
        points.push([t.cos(), t.sin()]);
        truth.push(0);
    }
    for i in 0..n_inner {
        let t = step(n_inner, i);
        points.push([1.0 - t.cos(), 0.5 - t.sin()]);
        truth.push(1);
    }
    if jitter > 0.0 {
        for p in &mut points {
            p[0] += normal.sample(&mut rng);
            p[1] += normal.sample(&mut rng);
        }
    }
    let ux = Uniform::new(-1.5, 2.5).expect("valid range");
    let uy = Uniform::new(-1.0, 1.5).expect("valid range");
    for _ in 0..n_noise {
        points.push([ux.sample(&mut rng), uy.sample(&mut rng)]);
        truth.push(NOISE);
    }
    let values = Array2::from_shape_fn((n, 2), |(i, j)| points[i][j]);
    let table = ItemTable::numeric(ids(n), vec!["x".into(), "y".into()], values)
        .with_attribute("truth", truth_attribute(&truth));
    Ok(SyntheticData { table, truth, vocabularies: Vec::new(), fillers: Vec::new() })
}

#[allow(clippy::too_many_arguments)]
fn planted_topics(
    n_docs: usize,
    n_topics: usize,
    terms_per_topic: usize,
    doc_length: usize,
    n_fillers: usize,
    filler_rate: f64,
    zipf_exponent: f64,
    duplicate_topics: bool,
    seed: u64,
) -> Result<SyntheticData> {
    let n_classes = if duplicate_topics { 2 * n_topics } else { n_topics };
    if n_topics == 0 || terms_per_topic == 0 || doc_length == 0 || n_docs < n_classes.max(2) {
        return Err(CoreError::InvalidParameter(format!(
            "cannot plant {n_classes} topic classes in {n_docs} documents"
        )));
    }
    if !(0.0..1.0).contains(&filler_rate) || (n_fillers == 0 && filler_rate > 0.0) {
        return Err(CoreError::InvalidParameter("filler rate must be in [0, 1) with at least one filler".into()));
    }
    let vocabularies: Vec<Vec<String>> =
        (0..n_topics).map(|t| (0..terms_per_topic).map(|j| topic_term(t, j)).collect()).collect();
    let fillers: Vec<String> = (0..n_fillers).map(filler_term).collect();
    let weights: Vec<f64> = (0..terms_per_topic).map(|j| 1.0 / ((j + 1) as f64).powf(zipf_exponent)).collect();
    let term_dist = WeightedIndex::new(&weights).map_err(|e| CoreError::InvalidParameter(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(n_docs);
    let mut truth = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let class = d % n_classes;
        let topic = class % n_topics;
        let words: Vec<&str> = (0..doc_length)
            .map(|_| {
                if filler_rate > 0.0 && rng.random::<f64>() < filler_rate {
                    fillers[rng.random_range(0..n_fillers)].as_str()
                } else {
                    vocabularies[topic][term_dist.sample(&mut rng)].as_str()
                }
            })
            .collect();
        docs.push(words.join(" "));
        truth.push(class as i64);
    }
    let table = ItemTable::text(ids(n_docs), docs).with_attribute("truth", truth_attribute(&truth));
    Ok(SyntheticData { table, truth, vocabularies, fillers })
}

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index by pair counting over the contingency table.
pub fn ari(a: &[i64], b: &[i64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CoreError::LengthMismatch { expected: a.len(), actual: b.len() });
    }
    let mut joint: HashMap<(i64, i64), u64> = HashMap::new();
    let mut rows: HashMap<i64, u64> = HashMap::new();
    let mut cols: HashMap<i64, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let index: f64 = joint.values().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max = (sum_rows + sum_cols) / 2.0;
    if (max - expected).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_balanced_and_reproducible() {
        let spec = SyntheticSpec::blobs(300, 3, 20.0, 1.0, 7);
        let a = generate(&spec).unwrap();
        for b in 0..3 {
            assert_eq!(a.truth.iter().filter(|&&t| t == b).count(), 100);
        }
        assert_eq!(a, generate(&spec).unwrap());
    }

    #[test]
    fn moons_have_the_requested_noise() {
        let d = generate(&SyntheticSpec::moons_noise(500, 0.1, 1)).unwrap();
        assert_eq!(d.truth.iter().filter(|&&t| t == NOISE).count(), 50);
    }

    #[test]
    fn planted_docs_use_their_vocabulary() {
        let d = generate(&SyntheticSpec::planted_topics(40, 4, 3)).unwrap();
        let docs = d.table.documents().unwrap();
        for (doc, &t) in docs.iter().zip(&d.truth) {
            for word in doc.split(' ') {
                assert!(d.vocabularies[t as usize].iter().any(|v| v == word) || d.fillers.iter().any(|f| f == word));
            }
        }
    }

    #[test]
    fn generated_words_are_alphabetic() {
        assert_eq!(letters(0), "a");
        assert_eq!(letters(27), "bb");
        assert!(topic_term(3, 30).chars().all(|c| c.is_ascii_lowercase()));
    }

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[0, 0, 1, 1], &[5, 5, 7, 7]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 1, 1, 2, 2], &[0; 6]).unwrap(), 0.0);
        // contingency {{2,1},{1,2}}: index 2, row and column sums 6, total 15
        let v = ari(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 0, 1, 1]).unwrap();
        let expected = (2.0 - 6.0 * 6.0 / 15.0) / (6.0 - 6.0 * 6.0 / 15.0);
        assert!((v - expected).abs() < 1e-15);
    }
}
