//! One sweep iteration end to end, and the run-level analysis built on top
//! of the finished iterations.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::archetypes::{
    default_threshold, detect, min_max_scale, pool, sweep_curve, threshold_sweep_models, ArchetypeModel,
    PooledMatrix, SweepPoint,
};
use crate::error::{CoreError, Result};
use crate::methods::{
    fit_dbscan, fit_hdbscan, fit_kmeans, fit_nmf, group_representatives, FittedModel, HdbscanParams,
    KMeansParams, MethodInput, NmfParams,
};
use crate::metrics::{
    clustering_metrics, distance_stats, topic_metrics, ClusteringMetricOptions, DEFAULT_WINDOW,
};
use crate::model::{
    assemble_iteration, validate_table, GroupRecord, ItemTable, IterationResult, Method, Standardization,
    TableData, TableKind, ValidationOptions, NOISE,
};
use crate::projection::{
    channel_violins, compute_layout, split_violins, Channel, ColorTable, EmbeddingLayout, ProjectionRegistry,
    ViolinGroup, ViolinStats,
};
use crate::text::{prepare_corpus, PreparedCorpus, TextOptions};
use crate::uncertainty::uncertainty_for;

/// The validated table plus the structures every iteration reads: the
/// standardized feature matrix, or the TF-IDF matrix and dictionary.
#[derive(Clone, Debug)]
pub struct SharedInput {
    pub table: ItemTable,
    pub corpus: Option<PreparedCorpus>,
    pub standardization: Option<Standardization>,
    pub warnings: Vec<String>,
}

impl SharedInput {
    pub fn prepare(raw: ItemTable, text: &TextOptions) -> Result<Self> {
        let validation = ValidationOptions { strip_patterns: text.strip_patterns.clone() };
        let validated = validate_table(raw, &validation)?;
        let mut warnings = validated.warnings;
        let corpus = match &validated.table.data {
            TableData::Text(docs) => {
                let corpus = prepare_corpus(docs, text)?;
                warnings.extend(corpus.tfidf.warnings.iter().cloned());
                Some(corpus)
            }
            TableData::Numeric { .. } => None,
        };
        Ok(Self { table: validated.table, corpus, standardization: validated.standardization, warnings })
    }

    pub fn kind(&self) -> TableKind {
        self.table.kind()
    }

    pub fn method_input(&self) -> MethodInput<'_> {
        match (&self.corpus, self.table.features()) {
            (Some(corpus), _) => MethodInput::Documents(&corpus.tfidf.values),
            (None, Some(x)) => MethodInput::Features(x.view()),
            (None, None) => unreachable!("a validated text table always carries a corpus"),
        }
    }

    /// Errors when `method` cannot run on this table kind.
    pub fn check_method(&self, method: Method) -> Result<()> {
        match (method, self.kind()) {
            (Method::Nmf, TableKind::Text) => Ok(()),
            (Method::Nmf, TableKind::Numeric) => {
                Err(CoreError::InputMismatch("nmf needs a text table".into()))
            }
            (_, TableKind::Numeric) => Ok(()),
            (m, TableKind::Text) => Err(CoreError::InputMismatch(format!("{m} needs a numeric table"))),
        }
    }
}

/// Parameters of one method configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodParams {
    Nmf(NmfParams),
    Kmeans(KMeansParams),
    Dbscan { eps: f64, min_samples: usize },
    Hdbscan(HdbscanParams),
}

impl MethodParams {
    pub fn method(&self) -> Method {
        match self {
            MethodParams::Nmf(_) => Method::Nmf,
            MethodParams::Kmeans(_) => Method::Kmeans,
            MethodParams::Dbscan { .. } => Method::Dbscan,
            MethodParams::Hdbscan(_) => Method::Hdbscan,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationSpec {
    pub key: String,
    pub param_value: f64,
    pub params: MethodParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub coherence_window: usize,
    pub metrics: ClusteringMetricOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { coherence_window: DEFAULT_WINDOW, metrics: ClusteringMetricOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct FittedIteration {
    pub result: IterationResult,
    pub model: FittedModel,
    pub warnings: Vec<String>,
}

pub fn fit_model(input: MethodInput<'_>, params: &MethodParams) -> Result<FittedModel> {
    Ok(match params {
        MethodParams::Nmf(p) => FittedModel::Nmf(fit_nmf(input.documents()?, p)?),
        MethodParams::Kmeans(p) => FittedModel::Kmeans(fit_kmeans(input.features()?, p)?),
        MethodParams::Dbscan { eps, min_samples } => {
            FittedModel::Dbscan(fit_dbscan(input.features()?, *eps, *min_samples)?)
        }
        MethodParams::Hdbscan(p) => FittedModel::Hdbscan(fit_hdbscan(input.features()?, p)?),
    })
}

/// Fits one configuration and derives its assignments, uncertainty, groups
/// and metric record.
pub fn fit_iteration(shared: &SharedInput, spec: &IterationSpec, options: &FitOptions) -> Result<FittedIteration> {
    shared.check_method(spec.params.method())?;
    let input = shared.method_input();
    let model = fit_model(input, &spec.params)?;
    let labels = model.labels();
    let uncertainty = uncertainty_for(&model, input)?;
    let mut warnings = uncertainty.warnings.clone();

    let mut members: HashMap<i64, Vec<usize>> = HashMap::new();
    for (i, &l) in labels.iter().enumerate() {
        members.entry(l).or_default().push(i);
    }
    let mut groups: Vec<GroupRecord> = group_representatives(&model, input)?
        .into_iter()
        .map(|rep| {
            let ids = members.remove(&rep.group_id).unwrap_or_default();
            GroupRecord::new(&spec.key, rep.group_id, ids, rep.vector)
        })
        .collect();

    let metrics = match (&model, input) {
        (FittedModel::Nmf(nmf), MethodInput::Documents(v)) => {
            let corpus = shared.corpus.as_ref().expect("documents imply a corpus");
            let topic = topic_metrics(v, nmf, &corpus.docs, &corpus.dictionary, options.coherence_window, &options.metrics)?;
            for (group, per_topic) in groups.iter_mut().zip(topic.per_topic) {
                group.metrics.extend(per_topic);
            }
            warnings.extend(topic.warnings);
            topic.record
        }
        (_, MethodInput::Features(x)) => {
            for group in groups.iter_mut().filter(|g| !g.member_ids.is_empty()) {
                let (mean, max) = distance_stats(x, &group.member_ids, &group.representative);
                group.metrics.insert("mean_distance".into(), mean);
                group.metrics.insert("max_distance".into(), max);
            }
            clustering_metrics(x, &labels, spec.params.method().family(), &options.metrics)
        }
        (_, MethodInput::Documents(_)) => unreachable!("only nmf reads documents"),
    };

    let result = assemble_iteration(
        &spec.key,
        spec.param_value,
        labels,
        uncertainty.membership,
        uncertainty.outlier,
        groups,
        metrics,
    )?;
    Ok(FittedIteration { result, model, warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Archetype threshold; `None` applies the half-the-iterations rule.
    pub threshold: Option<usize>,
    pub projection_methods: Vec<String>,
    pub projection_seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { threshold: None, projection_methods: vec!["mds".into(), "tsne".into()], projection_seed: 0 }
    }
}

/// Everything computed across the finished iterations of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunAnalysis {
    pub pooled: PooledMatrix,
    pub default_threshold: usize,
    /// Model at the active threshold.
    pub archetypes: ArchetypeModel,
    /// One model per sweep threshold, ascending.
    pub sweep_models: Vec<ArchetypeModel>,
    pub sweep_curve: Vec<SweepPoint>,
    pub colors: ColorTable,
    pub layouts: BTreeMap<String, EmbeddingLayout>,
    pub warnings: Vec<String>,
}

impl RunAnalysis {
    /// Archetype model at `threshold`, reusing the sweep when it covers it.
    pub fn model_at(&self, threshold: usize) -> Result<ArchetypeModel> {
        match self.sweep_models.iter().find(|m| m.threshold == threshold) {
            Some(m) => Ok(m.clone()),
            None if self.archetypes.threshold == threshold => Ok(self.archetypes.clone()),
            None => detect(&self.pooled, threshold),
        }
    }
}

/// Pools group representatives, detects archetypes, sweeps the threshold,
/// builds the shared color table and computes the requested layouts.
pub fn analyze(
    iterations: &[IterationResult],
    registry: &ProjectionRegistry,
    options: &AnalysisOptions,
) -> Result<RunAnalysis> {
    let pooled = pool(iterations)?;
    let default = default_threshold(iterations.len());
    let threshold = options.threshold.unwrap_or(default);
    let sweep_models = threshold_sweep_models(&pooled)?;
    let archetypes = match sweep_models.iter().find(|m| m.threshold == threshold) {
        Some(m) => m.clone(),
        None => detect(&pooled, threshold)?,
    };
    let mut color_models: Vec<&ArchetypeModel> = sweep_models.iter().collect();
    if !sweep_models.iter().any(|m| m.threshold == archetypes.threshold) {
        color_models.push(&archetypes);
    }
    let (colors, mut warnings) = ColorTable::build(&pooled, &color_models)?;
    let mut layouts = BTreeMap::new();
    for method in &options.projection_methods {
        let layout = compute_layout(registry, method, &pooled, options.projection_seed)?;
        warnings.extend(layout.warnings.iter().map(|w| format!("{method}: {w}")));
        layouts.insert(method.clone(), layout);
    }
    Ok(RunAnalysis {
        sweep_curve: sweep_curve(&sweep_models),
        pooled,
        default_threshold: default,
        archetypes,
        sweep_models,
        colors,
        layouts,
        warnings,
    })
}

/// Attribute names understood by [`size_attribute`] besides per-group metrics.
pub const SIZE_GROUP: &str = "group_size";
pub const SIZE_PROBABILITY: &str = "hdbscan_probability";

/// Per pooled row, a group-level attribute min-max scaled to [0, 1] for
/// dot sizes: the meta-HDBSCAN membership probability, the group size, or
/// any per-group metric.
pub fn size_attribute(
    iterations: &[IterationResult],
    pooled: &PooledMatrix,
    model: &ArchetypeModel,
    name: &str,
) -> Result<Vec<f64>> {
    if name == SIZE_PROBABILITY {
        let values: Vec<Option<f64>> = model.probabilities.iter().map(|&p| Some(p)).collect();
        return Ok(min_max_scale(&values));
    }
    let by_key: HashMap<&str, &IterationResult> =
        iterations.iter().map(|it| (it.iteration_key.as_str(), it)).collect();
    let mut known = false;
    let values: Vec<Option<f64>> = pooled
        .rows
        .iter()
        .map(|row| {
            let group = by_key.get(row.iteration_key.as_str()).and_then(|it| it.group(row.group_id))?;
            if name == SIZE_GROUP {
                known = true;
                return Some(group.size() as f64);
            }
            let value = group.metrics.get(name).copied();
            known |= value.is_some();
            value
        })
        .collect();
    if !known {
        return Err(CoreError::UnknownAttribute(name.to_owned()));
    }
    Ok(min_max_scale(&values))
}

/// Violin data for every group of the run, one shared bandwidth and width
/// scale per channel (split mode shares one scale across both channels).
pub fn run_violins(iterations: &[IterationResult], channel: Channel) -> Vec<ViolinStats> {
    let groups = |pick: fn(&IterationResult) -> &[f64]| -> Vec<ViolinGroup<'_>> {
        iterations
            .iter()
            .flat_map(|it| {
                let values = pick(it);
                it.groups.iter().map(move |g| ViolinGroup {
                    iteration_key: &it.iteration_key,
                    group_id: g.group_id,
                    is_noise: g.group_id == NOISE,
                    values: g.member_ids.iter().map(|&i| values[i]).collect(),
                })
            })
            .collect()
    };
    let membership = || groups(|it| &it.membership);
    let outlier = || groups(|it| &it.outlier);
    match channel {
        Channel::Membership => channel_violins(&membership(), Channel::Membership),
        Channel::Outlier => channel_violins(&outlier(), Channel::Outlier),
        Channel::Split => split_violins(&membership(), &outlier()),
    }
}
