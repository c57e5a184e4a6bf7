//! Corpus preprocessing, TF-IDF and term-level summaries for word clouds.

use std::collections::{BTreeMap, HashMap, HashSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::strip_patterns;

pub type TokenizedDocs = Vec<Vec<String>>;

/// Preprocessing knobs for a text sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TextOptions {
    pub stopwords: Vec<String>,
    pub min_df: usize,
    pub strip_patterns: Vec<String>,
    pub n_bigrams: usize,
    /// Keep only this many unigrams, ranked by document frequency.
    pub max_unigrams: Option<usize>,
    /// Keep only this many compound terms, ranked by document frequency.
    pub max_bigrams: Option<usize>,
}

impl Default for TextOptions {
    fn default() -> Self {
        Self {
            stopwords: Vec::new(),
            min_df: 1,
            strip_patterns: Vec::new(),
            n_bigrams: 0,
            max_unigrams: None,
            max_bigrams: None,
        }
    }
}

/// Vocabulary with document frequencies, sorted alphabetically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    is_bigram: Vec<bool>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Dictionary {
    /// Builds the vocabulary from tokenized documents.
    ///
    /// Terms below `min_df` are dropped; optional caps keep the most frequent
    /// unigrams/compounds by document frequency (ties alphabetical).
    pub fn from_docs(
        docs: &[Vec<String>],
        min_df: usize,
        max_unigrams: Option<usize>,
        max_bigrams: Option<usize>,
    ) -> Result<Self> {
        let df = document_frequencies(docs);
        let mut unigrams = Vec::new();
        let mut bigrams = Vec::new();
        for (term, count) in df {
            if count < min_df.max(1) {
                continue;
            }
            if term.contains('_') {
                bigrams.push((term, count));
            } else {
                unigrams.push((term, count));
            }
        }
        let cap = |mut list: Vec<(String, usize)>, limit: Option<usize>| {
            if let Some(limit) = limit {
                list.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                list.truncate(limit);
            }
            list
        };
        let mut all = cap(unigrams, max_unigrams);
        all.extend(cap(bigrams, max_bigrams));
        if all.is_empty() {
            return Err(CoreError::EmptyVocabulary);
        }
        all.sort_by(|a, b| a.0.cmp(&b.0));
        let is_bigram = all.iter().map(|(t, _)| t.contains('_')).collect();
        let doc_freq = all.iter().map(|(_, c)| *c).collect();
        let terms = all.into_iter().map(|(t, _)| t).collect();
        Ok(Self::from_parts(terms, doc_freq, is_bigram))
    }

    pub fn from_parts(terms: Vec<String>, doc_freq: Vec<usize>, is_bigram: Vec<bool>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { terms, doc_freq, is_bigram, index }
    }

    /// Restores the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, index: usize) -> usize {
        self.doc_freq[index]
    }

    pub fn is_bigram(&self, index: usize) -> bool {
        self.is_bigram[index]
    }
}

fn document_frequencies(docs: &[Vec<String>]) -> BTreeMap<String, usize> {
    let mut df = BTreeMap::new();
    for doc in docs {
        let unique: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for term in unique {
            *df.entry(term.to_owned()).or_insert(0) += 1;
        }
    }
    df
}

/// Lowercase alphabetic tokens of length >= 2.
pub fn raw_tokens(doc: &str) -> impl Iterator<Item = String> + '_ {
    doc.split(|c: char| !c.is_alphabetic())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
}

/// Tokenizes a corpus, removes stopwords and drops terms below `min_df`.
pub fn tokenize(
    corpus: &[String],
    stopwords: &HashSet<String>,
    min_df: usize,
    strip: &[String],
) -> Result<(TokenizedDocs, Dictionary)> {
    if corpus.is_empty() {
        return Err(CoreError::EmptyCorpus);
    }
    let docs: TokenizedDocs = corpus
        .iter()
        .map(|doc| {
            let cleaned = strip_patterns(doc, strip);
            raw_tokens(&cleaned).filter(|t| !stopwords.contains(t)).collect()
        })
        .collect();
    let dictionary = Dictionary::from_docs(&docs, min_df, None, None)?;
    Ok((filter_to_dictionary(&docs, &dictionary), dictionary))
}

/// Drops tokens that are not in the dictionary.
pub fn filter_to_dictionary(docs: &[Vec<String>], dictionary: &Dictionary) -> TokenizedDocs {
    docs.iter()
        .map(|doc| doc.iter().filter(|t| dictionary.get(t).is_some()).cloned().collect())
        .collect()
}

/// Appends the `n_bigrams` most frequent adjacent pairs as `a_b` tokens.
///
/// Pairs are counted over the whole corpus (stopwords already removed) and
/// must occur at least twice to qualify; ties rank alphabetically. Every
/// occurrence adds one compound token to its document; unigrams are kept.
pub fn inject_bigrams(docs: &[Vec<String>], n_bigrams: usize) -> TokenizedDocs {
    if n_bigrams == 0 {
        return docs.to_vec();
    }
    let mut counts: HashMap<(&str, &str), usize> = HashMap::new();
    for doc in docs {
        for pair in doc.windows(2) {
            *counts.entry((pair[0].as_str(), pair[1].as_str())).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<((&str, &str), usize)> = counts.into_iter().filter(|(_, c)| *c >= 2).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(n_bigrams);
    let chosen: HashSet<(&str, &str)> = ranked.into_iter().map(|(p, _)| p).collect();

    docs.iter()
        .map(|doc| {
            let mut out = doc.clone();
            for pair in doc.windows(2) {
                if chosen.contains(&(pair[0].as_str(), pair[1].as_str())) {
                    out.push(format!("{}_{}", pair[0], pair[1]));
                }
            }
            out
        })
        .collect()
}

/// Document-term matrix in compressed sparse row form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for mut row in rows.into_iter() {
            row.sort_by_key(|(j, _)| *j);
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { n_rows: indptr.len() - 1, n_cols, indptr, indices, values }
    }

    pub fn from_dense(dense: &ndarray::Array2<f64>) -> Self {
        let rows = dense
            .rows()
            .into_iter()
            .map(|r| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect())
            .collect();
        Self::from_rows(dense.ncols(), rows)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut out = ndarray::Array2::zeros((self.n_rows, self.n_cols));
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn mean(&self) -> f64 {
        let cells = (self.n_rows * self.n_cols).max(1) as f64;
        self.values.iter().sum::<f64>() / cells
    }
}

/// TF-IDF weighted document-term matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfIdfMatrix {
    pub values: SparseMatrix,
    pub warnings: Vec<String>,
}

/// Raw counts weighted by smoothed idf `ln((1+n)/(1+df)) + 1`, rows L2-normalized.
///
/// Documents left without tokens become zero rows and produce a warning.
pub fn build_tfidf(docs: &[Vec<String>], dictionary: &Dictionary) -> TfIdfMatrix {
    let n_docs = docs.len() as f64;
    let idf: Vec<f64> = (0..dictionary.len())
        .map(|j| ((1.0 + n_docs) / (1.0 + dictionary.doc_freq(j) as f64)).ln() + 1.0)
        .collect();
    let mut warnings = Vec::new();
    let rows = docs
        .iter()
        .enumerate()
        .map(|(i, doc)| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for token in doc {
                if let Some(j) = dictionary.get(token) {
                    *counts.entry(j).or_insert(0.0) += 1.0;
                }
            }
            let mut row: Vec<(usize, f64)> = counts.into_iter().map(|(j, tf)| (j, tf * idf[j])).collect();
            let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|(_, v)| *v /= norm);
            } else {
                let msg = format!("document {i} has no tokens left after filtering");
                warn!("{msg}");
                warnings.push(msg);
            }
            row
        })
        .collect();
    TfIdfMatrix { values: SparseMatrix::from_rows(dictionary.len(), rows), warnings }
}

/// Everything the text sweeps share, built once per run.
#[derive(Clone, Debug)]
pub struct PreparedCorpus {
    pub docs: TokenizedDocs,
    pub dictionary: Dictionary,
    pub tfidf: TfIdfMatrix,
}

/// Tokenize, inject compounds, cap the vocabulary and weight it.
pub fn prepare_corpus(corpus: &[String], options: &TextOptions) -> Result<PreparedCorpus> {
    let stopwords: HashSet<String> = options.stopwords.iter().map(|s| s.to_lowercase()).collect();
    let (docs, _) = tokenize(corpus, &stopwords, options.min_df, &options.strip_patterns)?;
    let docs = inject_bigrams(&docs, options.n_bigrams);
    let dictionary =
        Dictionary::from_docs(&docs, options.min_df, options.max_unigrams, options.max_bigrams)?;
    let docs = filter_to_dictionary(&docs, &dictionary);
    let tfidf = build_tfidf(&docs, &dictionary);
    Ok(PreparedCorpus { docs, dictionary, tfidf })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudMode {
    Frequency,
    TopicWeight,
    WeightDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    pub term: String,
    pub weight: f64,
}

/// Word-cloud payload for one class label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermCloud {
    pub class_label: String,
    pub mode: CloudMode,
    pub entries: Vec<TermWeight>,
}

/// Per-class raw term counts.
///
/// `labels` gives one class label per document. When `label_set` is given,
/// every label must belong to it and the output follows its order; otherwise
/// classes are sorted by label.
pub fn class_term_frequencies(
    docs: &[Vec<String>],
    labels: &[String],
    label_set: Option<&[String]>,
) -> Result<Vec<TermCloud>> {
    if labels.len() != docs.len() {
        return Err(CoreError::LengthMismatch { expected: docs.len(), actual: labels.len() });
    }
    let order: Vec<String> = match label_set {
        Some(set) => {
            let known: HashSet<&String> = set.iter().collect();
            if let Some(bad) = labels.iter().find(|l| !known.contains(l)) {
                return Err(CoreError::UnknownLabel(bad.clone()));
            }
            set.to_vec()
        }
        None => {
            let mut set: Vec<String> = labels.to_vec();
            set.sort();
            set.dedup();
            set
        }
    };
    let mut counts: HashMap<&str, HashMap<&str, usize>> = HashMap::new();
    for (doc, label) in docs.iter().zip(labels) {
        let class = counts.entry(label.as_str()).or_default();
        for token in doc {
            *class.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    Ok(order
        .into_iter()
        .map(|label| {
            let mut entries: Vec<TermWeight> = counts
                .get(label.as_str())
                .map(|c| {
                    c.iter()
                        .map(|(t, n)| TermWeight { term: (*t).to_owned(), weight: *n as f64 })
                        .collect()
                })
                .unwrap_or_default();
            entries.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));
            TermCloud { class_label: label, mode: CloudMode::Frequency, entries }
        })
        .collect())
}

/// Indices of the `top_n` largest positive values, ties by ascending index.
pub fn top_indices(values: &[f64], top_n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&j| values[j] > 0.0).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(top_n);
    idx
}

/// The `top_n` heaviest terms of a topic-term row.
pub fn topic_weight_cloud(
    h_row: &[f64],
    dictionary: &Dictionary,
    top_n: usize,
    class_label: &str,
) -> Result<TermCloud> {
    if h_row.len() != dictionary.len() {
        return Err(CoreError::LengthMismatch { expected: dictionary.len(), actual: h_row.len() });
    }
    if h_row.iter().any(|v| *v < 0.0) {
        return Err(CoreError::OutOfRange("topic row has negative weights".into()));
    }
    let entries = top_indices(h_row, top_n.min(h_row.len()))
        .into_iter()
        .map(|j| TermWeight { term: dictionary.term(j).to_owned(), weight: h_row[j] })
        .collect();
    Ok(TermCloud { class_label: class_label.to_owned(), mode: CloudMode::TopicWeight, entries })
}

/// Term-level comparison of two topic rows (connector tooltip data).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDelta {
    pub cloud: TermCloud,
    pub from_terms: Vec<TermWeight>,
    pub lost: Vec<TermWeight>,
    pub gained: Vec<TermWeight>,
    pub to_terms: Vec<TermWeight>,
}

/// Per-term weight change `to - from`.
///
/// The cloud keeps the `top_n` terms by |change|; `lost` lists the most
/// negative changes and `gained` the most positive ones.
pub fn transition_term_delta(
    from: &[f64],
    to: &[f64],
    dictionary: &Dictionary,
    top_n: usize,
    class_label: &str,
) -> Result<TermDelta> {
    for row in [from, to] {
        if row.len() != dictionary.len() {
            return Err(CoreError::LengthMismatch { expected: dictionary.len(), actual: row.len() });
        }
    }
    let delta: Vec<f64> = to.iter().zip(from).map(|(t, f)| t - f).collect();
    let weights = |idx: Vec<usize>, source: &[f64]| -> Vec<TermWeight> {
        idx.into_iter()
            .map(|j| TermWeight { term: dictionary.term(j).to_owned(), weight: source[j] })
            .collect()
    };
    let magnitude: Vec<f64> = delta.iter().map(|d| d.abs()).collect();
    let negative: Vec<f64> = delta.iter().map(|d| -d).collect();
    Ok(TermDelta {
        cloud: TermCloud {
            class_label: class_label.to_owned(),
            mode: CloudMode::WeightDifference,
            entries: weights(top_indices(&magnitude, top_n), &delta),
        },
        from_terms: weights(top_indices(from, top_n), from),
        lost: weights(top_indices(&negative, top_n), &delta),
        gained: weights(top_indices(&delta, top_n), &delta),
        to_terms: weights(top_indices(to, top_n), to),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn stopwords_are_removed() {
        let stop: HashSet<String> = ["the".to_string()].into();
        let (docs, _) = tokenize(&s(&["The cat sat"]), &stop, 1, &[]).unwrap();
        assert_eq!(docs[0], s(&["cat", "sat"]));
    }

    #[test]
    fn min_df_drops_rare_terms() {
        let (docs, dict) = tokenize(&s(&["apple pear", "apple plum"]), &HashSet::new(), 2, &[]).unwrap();
        assert_eq!(dict.terms(), &s(&["apple"])[..]);
        assert_eq!(docs, vec![s(&["apple"]), s(&["apple"])]);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let err = tokenize(&s(&["a b", "c"]), &HashSet::new(), 1, &[]).unwrap_err();
        assert_eq!(err, CoreError::EmptyVocabulary);
    }

    #[test]
    fn tokenizer_splits_on_non_letters() {
        let tokens: Vec<String> = raw_tokens("Data-driven, 3D x-ray!").collect();
        assert_eq!(tokens, s(&["data", "driven", "ray"]));
    }

    #[test]
    fn frequent_pair_becomes_compound() {
        let docs = vec![
            s(&["machine", "learning", "model"]),
            s(&["deep", "machine", "learning"]),
            s(&["visual", "model"]),
        ];
        let out = inject_bigrams(&docs, 1);
        assert!(out[0].contains(&"machine_learning".to_string()));
        assert!(out[1].contains(&"machine_learning".to_string()));
        assert!(!out[2].iter().any(|t| t.contains('_')));
        assert_eq!(inject_bigrams(&docs, 0), docs);
    }

    #[test]
    fn vocabulary_caps_rank_by_document_frequency() {
        let docs = vec![
            s(&["aa", "bb", "cc", "aa_bb"]),
            s(&["aa", "bb", "aa_bb", "bb_cc"]),
            s(&["aa", "dd", "bb_cc", "cc_dd"]),
        ];
        let dict = Dictionary::from_docs(&docs, 1, Some(2), Some(1)).unwrap();
        assert_eq!(dict.terms(), &s(&["aa", "aa_bb", "bb"])[..]);
        assert!(dict.is_bigram(1));
    }

    #[test]
    fn uniform_term_has_idf_floor() {
        let docs = vec![s(&["aa", "bb"]), s(&["aa", "cc"])];
        let dict = Dictionary::from_docs(&docs, 1, None, None).unwrap();
        let tfidf = build_tfidf(&docs, &dict);
        // "aa" appears in every doc: idf = ln(3/3) + 1 = 1
        let dense = tfidf.values.to_dense();
        let idf_rare = (3.0f64 / 2.0).ln() + 1.0;
        let norm = (1.0 + idf_rare * idf_rare).sqrt();
        assert!((dense[[0, 0]] - 1.0 / norm).abs() < 1e-12);
        assert!((dense[[0, 1]] - idf_rare / norm).abs() < 1e-12);
        assert_eq!(dense[[0, 2]], 0.0);
    }

    #[test]
    fn empty_document_gives_zero_row_and_warning() {
        let docs = vec![s(&["aa"]), vec![]];
        let dict = Dictionary::from_docs(&docs, 1, None, None).unwrap();
        let tfidf = build_tfidf(&docs, &dict);
        assert_eq!(tfidf.values.row(1).count(), 0);
        assert_eq!(tfidf.warnings.len(), 1);
    }

    #[test]
    fn single_doc_class_counts() {
        let clouds = class_term_frequencies(&[s(&["aa", "aa", "bb"])], &s(&["x"]), None).unwrap();
        let e = &clouds[0].entries;
        assert_eq!((e[0].term.as_str(), e[0].weight), ("aa", 2.0));
        assert_eq!((e[1].term.as_str(), e[1].weight), ("bb", 1.0));
    }

    #[test]
    fn unknown_class_label_is_rejected() {
        let err = class_term_frequencies(&[s(&["aa"])], &s(&["z"]), Some(&s(&["x"]))).unwrap_err();
        assert_eq!(err, CoreError::UnknownLabel("z".into()));
    }

    #[test]
    fn topic_clouds_follow_tie_rule() {
        let dict = Dictionary::from_parts(s(&["a", "b", "c", "d", "e", "f"]), vec![1; 6], vec![false; 6]);
        let one_hot = topic_weight_cloud(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0], &dict, 5, "t").unwrap();
        assert_eq!(one_hot.entries.len(), 1);
        let uniform = topic_weight_cloud(&[0.5; 6], &dict, 5, "t").unwrap();
        let terms: Vec<&str> = uniform.entries.iter().map(|e| e.term.as_str()).collect();
        assert_eq!(terms, vec!["a", "b", "c", "d", "e"]);
        let clamped = topic_weight_cloud(&[0.5; 6], &dict, 50, "t").unwrap();
        assert_eq!(clamped.entries.len(), 6);
    }

    #[test]
    fn delta_sign_rule() {
        let dict = Dictionary::from_parts(s(&["a", "b"]), vec![1; 2], vec![false; 2]);
        let d = transition_term_delta(&[0.4, 0.1], &[0.1, 0.3], &dict, 10, "x").unwrap();
        assert_eq!(d.lost.len(), 1);
        assert_eq!(d.lost[0].term, "a");
        assert!((d.lost[0].weight + 0.3).abs() < 1e-12);
        assert_eq!(d.gained[0].term, "b");
        let same = transition_term_delta(&[0.4, 0.1], &[0.4, 0.1], &dict, 10, "x").unwrap();
        assert!(same.lost.is_empty() && same.gained.is_empty() && same.cloud.entries.is_empty());
    }
}
