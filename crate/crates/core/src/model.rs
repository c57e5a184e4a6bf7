//! Shared data model: input tables, grouping results and group records.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use log::warn;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::metrics::MetricRecord;

/// Group id used for items a density method leaves unassigned.
pub const NOISE: i64 = -1;

/// Which grouping algorithm produced a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nmf,
    Kmeans,
    Dbscan,
    Hdbscan,
}

/// Metric family; decides which quality metrics an iteration reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Topic,
    Partition,
    Density,
}

impl Method {
    pub fn family(self) -> Family {
        match self {
            Method::Nmf => Family::Topic,
            Method::Kmeans => Family::Partition,
            Method::Dbscan | Method::Hdbscan => Family::Density,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Nmf => "nmf",
            Method::Kmeans => "kmeans",
            Method::Dbscan => "dbscan",
            Method::Hdbscan => "hdbscan",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nmf" => Ok(Method::Nmf),
            "kmeans" | "k-means" => Ok(Method::Kmeans),
            "dbscan" => Ok(Method::Dbscan),
            "hdbscan" => Ok(Method::Hdbscan),
            other => Err(CoreError::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// Renders a sweep parameter value as an iteration key ("0.07", "20").
///
/// Values are rounded to ten decimals first so accumulated range steps such
/// as `0.05 * 3` print as `0.15`.
pub fn format_param(value: f64) -> String {
    let rounded = (value * 1e10).round() / 1e10;
    if rounded == rounded.trunc() && rounded.abs() < 1e15 {
        format!("{}", rounded as i64)
    } else {
        format!("{rounded}")
    }
}

/// Key used when the sweep varies the random seed.
pub fn seed_key(seed: u64) -> String {
    format!("seed-{seed}")
}

/// Label for a group inside an iteration: `<key>.<group>` or `<key>.noise`.
pub fn group_label(key: &str, group_id: i64) -> String {
    if group_id == NOISE {
        format!("{key}.noise")
    } else {
        format!("{key}.{group_id}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Numeric,
    Text,
}

/// Payload of an [`ItemTable`]; exactly one representation per table.
#[derive(Clone, Debug, PartialEq)]
pub enum TableData {
    Numeric { names: Vec<String>, values: Array2<f64> },
    Text(Vec<String>),
}

/// The immutable input shared by every iteration of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemTable {
    pub item_ids: Vec<String>,
    pub data: TableData,
    /// Per-item columns carried through to exports untouched.
    pub attributes: BTreeMap<String, Vec<String>>,
}

impl ItemTable {
    pub fn numeric(item_ids: Vec<String>, names: Vec<String>, values: Array2<f64>) -> Self {
        Self {
            item_ids,
            data: TableData::Numeric { names, values },
            attributes: BTreeMap::new(),
        }
    }

    pub fn text(item_ids: Vec<String>, documents: Vec<String>) -> Self {
        Self {
            item_ids,
            data: TableData::Text(documents),
            attributes: BTreeMap::new(),
        }
    }

    /// Numeric table with generated ids `0..n` and feature names `f0..`.
    pub fn from_matrix(values: Array2<f64>) -> Self {
        let ids = (0..values.nrows()).map(|i| i.to_string()).collect();
        let names = (0..values.ncols()).map(|j| format!("f{j}")).collect();
        Self::numeric(ids, names, values)
    }

    pub fn with_attribute(mut self, name: impl Into<String>, values: Vec<String>) -> Self {
        self.attributes.insert(name.into(), values);
        self
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn kind(&self) -> TableKind {
        match self.data {
            TableData::Numeric { .. } => TableKind::Numeric,
            TableData::Text(_) => TableKind::Text,
        }
    }

    pub fn features(&self) -> Option<&Array2<f64>> {
        match &self.data {
            TableData::Numeric { values, .. } => Some(values),
            TableData::Text(_) => None,
        }
    }

    pub fn documents(&self) -> Option<&[String]> {
        match &self.data {
            TableData::Text(docs) => Some(docs),
            TableData::Numeric { .. } => None,
        }
    }
}

/// Options applied while validating a raw table.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationOptions {
    /// Literal substrings removed from every document.
    #[serde(default)]
    pub strip_patterns: Vec<String>,
}

/// Column statistics used to standardize a numeric table.
///
/// Kept for provenance only; they are never applied to new data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub kept_columns: Vec<usize>,
    pub dropped_columns: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ValidatedTable {
    pub table: ItemTable,
    pub standardization: Option<Standardization>,
    pub warnings: Vec<String>,
}

/// Checks a raw table and prepares it for sweeping.
///
/// Numeric tables are standardized per column (population standard
/// deviation); constant columns are dropped with a warning. Text tables have
/// the configured artifact patterns stripped.
pub fn validate_table(raw: ItemTable, options: &ValidationOptions) -> Result<ValidatedTable> {
    let n = raw.n_items();
    if n == 0 {
        return Err(match raw.kind() {
            TableKind::Text => CoreError::EmptyCorpus,
            TableKind::Numeric => CoreError::InvalidTable("table has no items".into()),
        });
    }
    if n < 2 {
        return Err(CoreError::InvalidTable(format!("need at least 2 items, got {n}")));
    }
    let mut seen = HashSet::with_capacity(n);
    for id in &raw.item_ids {
        if !seen.insert(id.as_str()) {
            return Err(CoreError::DuplicateId(id.clone()));
        }
    }
    for (name, column) in &raw.attributes {
        if column.len() != n {
            return Err(CoreError::InvalidTable(format!(
                "attribute `{name}` has {} values for {n} items",
                column.len()
            )));
        }
    }

    let mut warnings = Vec::new();
    let ItemTable { item_ids, data, attributes } = raw;
    match data {
        TableData::Numeric { names, values } => {
            if values.nrows() != n {
                return Err(CoreError::LengthMismatch { expected: n, actual: values.nrows() });
            }
            if names.len() != values.ncols() {
                return Err(CoreError::InvalidTable(format!(
                    "{} feature names for {} columns",
                    names.len(),
                    values.ncols()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::InvalidTable("features contain non-finite values".into()));
            }
            let (standardized, kept_names, stats) = standardize(&values, &names, &mut warnings)?;
            Ok(ValidatedTable {
                table: ItemTable {
                    item_ids,
                    data: TableData::Numeric { names: kept_names, values: standardized },
                    attributes,
                },
                standardization: Some(stats),
                warnings,
            })
        }
        TableData::Text(documents) => {
            if documents.len() != n {
                return Err(CoreError::LengthMismatch { expected: n, actual: documents.len() });
            }
            let cleaned: Vec<String> = documents
                .into_iter()
                .map(|doc| strip_patterns(&doc, &options.strip_patterns))
                .collect();
            if cleaned.iter().all(|d| d.trim().is_empty()) {
                return Err(CoreError::EmptyCorpus);
            }
            Ok(ValidatedTable {
                table: ItemTable { item_ids, data: TableData::Text(cleaned), attributes },
                standardization: None,
                warnings,
            })
        }
    }
}

/// Removes every occurrence of each literal pattern.
pub fn strip_patterns(doc: &str, patterns: &[String]) -> String {
    let mut out = doc.to_owned();
    for pattern in patterns.iter().filter(|p| !p.is_empty()) {
        if out.contains(pattern.as_str()) {
            out = out.replace(pattern.as_str(), "");
        }
    }
    out
}

fn standardize(
    values: &Array2<f64>,
    names: &[String],
    warnings: &mut Vec<String>,
) -> Result<(Array2<f64>, Vec<String>, Standardization)> {
    let n = values.nrows() as f64;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for (j, column) in values.columns().into_iter().enumerate() {
        let mean = column.sum() / n;
        let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std <= f64::EPSILON * mean.abs().max(1.0) {
            let msg = format!("dropping constant feature column `{}`", names[j]);
            warn!("{msg}");
            warnings.push(msg);
            dropped.push(j);
        } else {
            kept.push(j);
            means.push(mean);
            stds.push(std);
        }
    }
    if kept.is_empty() {
        return Err(CoreError::AllConstant);
    }
    let mut out = Array2::zeros((values.nrows(), kept.len()));
    for (c, &j) in kept.iter().enumerate() {
        for i in 0..values.nrows() {
            out[[i, c]] = (values[[i, j]] - means[c]) / stds[c];
        }
    }
    let kept_names = kept.iter().map(|&j| names[j].clone()).collect();
    Ok((
        out,
        kept_names,
        Standardization { kept_columns: kept, dropped_columns: dropped, means, stds },
    ))
}

/// One group within an iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub group_id: i64,
    pub iteration_key: String,
    /// Item indices (positions in the [`ItemTable`]), ascending.
    pub member_ids: Vec<usize>,
    /// Centroid, medoid, or topic-term row.
    pub representative: Vec<f64>,
    pub is_noise: bool,
    pub metrics: BTreeMap<String, f64>,
}

impl GroupRecord {
    pub fn new(iteration_key: &str, group_id: i64, member_ids: Vec<usize>, representative: Vec<f64>) -> Self {
        Self {
            group_id,
            iteration_key: iteration_key.to_owned(),
            member_ids,
            representative,
            is_noise: group_id == NOISE,
            metrics: BTreeMap::new(),
        }
    }

    pub fn label(&self) -> String {
        group_label(&self.iteration_key, self.group_id)
    }

    pub fn size(&self) -> usize {
        self.member_ids.len()
    }
}

/// The full output of one parameter configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    pub iteration_key: String,
    pub param_value: f64,
    /// Group id per item (noise = -1).
    pub assignments: Vec<i64>,
    pub membership: Vec<f64>,
    pub outlier: Vec<f64>,
    /// Ordered groups, noise last.
    pub groups: Vec<GroupRecord>,
    pub metrics: MetricRecord,
}

impl IterationResult {
    pub fn n_items(&self) -> usize {
        self.assignments.len()
    }

    pub fn group(&self, group_id: i64) -> Option<&GroupRecord> {
        self.groups.iter().find(|g| g.group_id == group_id)
    }

    pub fn noise_group(&self) -> Option<&GroupRecord> {
        self.groups.last().filter(|g| g.is_noise)
    }
}

/// Builds an [`IterationResult`], checking that the parts agree.
///
/// Groups may arrive in any order; the noise group is moved last. Each group
/// gets a `prevalence` metric (`|group| / n_items`). Groups with no members
/// are accepted (an NMF topic can win no document) but the noise group must
/// not be empty.
pub fn assemble_iteration(
    iteration_key: &str,
    param_value: f64,
    assignments: Vec<i64>,
    membership: Vec<f64>,
    outlier: Vec<f64>,
    mut groups: Vec<GroupRecord>,
    metrics: MetricRecord,
) -> Result<IterationResult> {
    let n = assignments.len();
    if n == 0 {
        return Err(CoreError::Partition("no items assigned".into()));
    }
    for (name, values) in [("membership", &membership), ("outlier", &outlier)] {
        if values.len() != n {
            return Err(CoreError::LengthMismatch { expected: n, actual: values.len() });
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(CoreError::OutOfRange(format!("{name}[{i}] = {v} outside [0, 1]")));
        }
    }

    let mut owner: Vec<Option<i64>> = vec![None; n];
    let mut ids = HashSet::new();
    let mut dim = None;
    for group in &groups {
        if !ids.insert(group.group_id) {
            return Err(CoreError::Partition(format!("group id {} listed twice", group.group_id)));
        }
        if group.is_noise != (group.group_id == NOISE) {
            return Err(CoreError::Partition(format!(
                "group {} has inconsistent noise flag",
                group.group_id
            )));
        }
        if group.is_noise && group.member_ids.is_empty() {
            return Err(CoreError::Partition("noise group has no members".into()));
        }
        match dim {
            None => dim = Some(group.representative.len()),
            Some(d) if d != group.representative.len() => {
                return Err(CoreError::Partition(format!(
                    "representative of group {} has dimension {}, expected {d}",
                    group.group_id,
                    group.representative.len()
                )))
            }
            _ => {}
        }
        for &item in &group.member_ids {
            let slot = owner.get_mut(item).ok_or_else(|| {
                CoreError::Partition(format!("item {item} out of range for {n} items"))
            })?;
            if let Some(previous) = slot {
                return Err(CoreError::Partition(format!(
                    "item {item} assigned to groups {previous} and {}",
                    group.group_id
                )));
            }
            *slot = Some(group.group_id);
        }
    }
    for (item, (assigned, owned)) in assignments.iter().zip(&owner).enumerate() {
        match owned {
            None => return Err(CoreError::Partition(format!("item {item} belongs to no group"))),
            Some(g) if g != assigned => {
                return Err(CoreError::Partition(format!(
                    "item {item} assigned to {assigned} but listed in group {g}"
                )))
            }
            _ => {}
        }
    }

    // stable: non-noise groups keep their relative order
    groups.sort_by_key(|g| g.is_noise);
    for group in &mut groups {
        group.iteration_key = iteration_key.to_owned();
        group.member_ids.sort_unstable();
        group
            .metrics
            .insert("prevalence".into(), group.member_ids.len() as f64 / n as f64);
    }

    Ok(IterationResult {
        iteration_key: iteration_key.to_owned(),
        param_value,
        assignments,
        membership,
        outlier,
        groups,
        metrics,
    })
}

/// Splits per-item labels into member lists, ordered by group id with noise last.
pub fn members_by_label(labels: &[i64]) -> Vec<(i64, Vec<usize>)> {
    let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        map.entry(l).or_default().push(i);
    }
    let noise = map.remove(&NOISE);
    let mut out: Vec<(i64, Vec<usize>)> = map.into_iter().collect();
    out.extend(noise.map(|m| (NOISE, m)));
    out
}
