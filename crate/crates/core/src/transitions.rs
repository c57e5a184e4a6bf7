//! Item-overlap matrices between iterations and categorical class attributes
//! derived from them.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{group_label, IterationResult};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub from_key: String,
    pub to_key: String,
    /// Group ids of the source iteration in display order (noise last).
    pub from_groups: Vec<i64>,
    pub to_groups: Vec<i64>,
    /// `counts[i][j]` = items in `from_groups[i]` and `to_groups[j]`.
    pub counts: Vec<Vec<u64>>,
}

impl TransitionMatrix {
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.to_groups.len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.row_sums().iter().sum()
    }

    pub fn count(&self, from_group: i64, to_group: i64) -> Option<u64> {
        let i = self.from_groups.iter().position(|&g| g == from_group)?;
        let j = self.to_groups.iter().position(|&g| g == to_group)?;
        Some(self.counts[i][j])
    }
}

/// `counts(i, j) = |members(a_i) ∩ members(b_j)|`, noise rows and columns included.
pub fn overlap(a: &IterationResult, b: &IterationResult) -> Result<TransitionMatrix> {
    if a.n_items() != b.n_items() {
        return Err(CoreError::LengthMismatch { expected: a.n_items(), actual: b.n_items() });
    }
    let from_groups: Vec<i64> = a.groups.iter().map(|g| g.group_id).collect();
    let to_groups: Vec<i64> = b.groups.iter().map(|g| g.group_id).collect();
    let row_of: HashMap<i64, usize> = from_groups.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let col_of: HashMap<i64, usize> = to_groups.iter().enumerate().map(|(j, &g)| (g, j)).collect();
    let mut counts = vec![vec![0u64; to_groups.len()]; from_groups.len()];
    for (ga, gb) in a.assignments.iter().zip(&b.assignments) {
        let i = row_of.get(ga).ok_or_else(|| CoreError::UnknownGroup { key: a.iteration_key.clone(), group: *ga })?;
        let j = col_of.get(gb).ok_or_else(|| CoreError::UnknownGroup { key: b.iteration_key.clone(), group: *gb })?;
        counts[*i][*j] += 1;
    }
    Ok(TransitionMatrix { from_key: a.iteration_key.clone(), to_key: b.iteration_key.clone(), from_groups, to_groups, counts })
}

/// Where a class label takes its color from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColorRef {
    /// The run color of a group.
    Group { iteration_key: String, group_id: i64 },
    /// A fixed role color: `left_only`, `shared`, `right_only`.
    Role { role: String },
    /// Items outside the class of interest.
    Neutral,
}

pub const OTHER: &str = "other";
pub const LEFT_ONLY: &str = "left only";
pub const SHARED: &str = "shared";
pub const RIGHT_ONLY: &str = "right only";

/// A categorical per-item attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassAttribute {
    pub name: String,
    /// Label per item, in item order.
    pub values: Vec<String>,
    /// Declared label set in display order.
    pub labels: Vec<String>,
    pub palette: BTreeMap<String, ColorRef>,
}

impl ClassAttribute {
    pub fn count(&self, label: &str) -> usize {
        self.values.iter().filter(|v| v.as_str() == label).count()
    }
}

/// Every item labeled `<key>.<group>` (or `<key>.noise`).
pub fn class_full(it: &IterationResult) -> ClassAttribute {
    let key = &it.iteration_key;
    let values = it.assignments.iter().map(|&g| group_label(key, g)).collect();
    let labels: Vec<String> = it.groups.iter().map(|g| group_label(key, g.group_id)).collect();
    let palette = it
        .groups
        .iter()
        .map(|g| (group_label(key, g.group_id), ColorRef::Group { iteration_key: key.clone(), group_id: g.group_id }))
        .collect();
    ClassAttribute { name: key.clone(), values, labels, palette }
}

/// Members of `from_group` labeled `a.g→b.h` by their destination group in
/// `to`; every other item is `other`.
pub fn class_transition(from: &IterationResult, from_group: i64, to: &IterationResult) -> Result<ClassAttribute> {
    if from.group(from_group).is_none() {
        return Err(CoreError::UnknownGroup { key: from.iteration_key.clone(), group: from_group });
    }
    if from.n_items() != to.n_items() {
        return Err(CoreError::LengthMismatch { expected: from.n_items(), actual: to.n_items() });
    }
    let source = group_label(&from.iteration_key, from_group);
    let arrow = |h: i64| format!("{source}→{}", group_label(&to.iteration_key, h));
    let values = from
        .assignments
        .iter()
        .zip(&to.assignments)
        .map(|(&g, &h)| if g == from_group { arrow(h) } else { OTHER.to_owned() })
        .collect();
    let mut labels = Vec::new();
    let mut palette = BTreeMap::new();
    for g in &to.groups {
        let label = arrow(g.group_id);
        palette.insert(label.clone(), ColorRef::Group { iteration_key: to.iteration_key.clone(), group_id: g.group_id });
        labels.push(label);
    }
    labels.push(OTHER.to_owned());
    palette.insert(OTHER.to_owned(), ColorRef::Neutral);
    Ok(ClassAttribute { name: format!("{source}→{}", to.iteration_key), values, labels, palette })
}

/// `left only` / `shared` / `right only` over the union of two groups;
/// items in neither group are `other`.
pub fn class_connector_detail(
    from: &IterationResult,
    from_group: i64,
    to: &IterationResult,
    to_group: i64,
) -> Result<ClassAttribute> {
    if from.group(from_group).is_none() {
        return Err(CoreError::UnknownGroup { key: from.iteration_key.clone(), group: from_group });
    }
    if to.group(to_group).is_none() {
        return Err(CoreError::UnknownGroup { key: to.iteration_key.clone(), group: to_group });
    }
    if from.n_items() != to.n_items() {
        return Err(CoreError::LengthMismatch { expected: from.n_items(), actual: to.n_items() });
    }
    let values = from
        .assignments
        .iter()
        .zip(&to.assignments)
        .map(|(&g, &h)| {
            match (g == from_group, h == to_group) {
                (true, true) => SHARED,
                (true, false) => LEFT_ONLY,
                (false, true) => RIGHT_ONLY,
                (false, false) => OTHER,
            }
            .to_owned()
        })
        .collect();
    let labels: Vec<String> = [LEFT_ONLY, SHARED, RIGHT_ONLY, OTHER].map(str::to_owned).to_vec();
    let palette = labels
        .iter()
        .map(|l| {
            let color = if l == OTHER { ColorRef::Neutral } else { ColorRef::Role { role: l.replace(' ', "_") } };
            (l.clone(), color)
        })
        .collect();
    Ok(ClassAttribute {
        name: format!(
            "{}↔{}",
            group_label(&from.iteration_key, from_group),
            group_label(&to.iteration_key, to_group)
        ),
        values,
        labels,
        palette,
    })
}

/// Consecutive pairs among the visible iterations, in sweep order.
pub fn visible_pairs(keys: &[String], visible: &[bool]) -> Result<Vec<(String, String)>> {
    if keys.len() != visible.len() {
        return Err(CoreError::LengthMismatch { expected: keys.len(), actual: visible.len() });
    }
    let shown: Vec<&String> = keys.iter().zip(visible).filter(|(_, v)| **v).map(|(k, _)| k).collect();
    if shown.len() < 2 {
        return Err(CoreError::InvalidParameter(format!(
            "at least two visible iterations are needed, got {}",
            shown.len()
        )));
    }
    Ok(shown.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect())
}

/// Lazily computed transition matrices keyed by `(from, to)`.
#[derive(Debug, Default)]
pub struct TransitionCache {
    entries: RwLock<HashMap<(String, String), Arc<TransitionMatrix>>>,
}

impl TransitionCache {
    pub fn get_or_compute(&self, a: &IterationResult, b: &IterationResult) -> Result<Arc<TransitionMatrix>> {
        let key = (a.iteration_key.clone(), b.iteration_key.clone());
        if let Some(hit) = self.entries.read().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let computed = Arc::new(overlap(a, b)?);
        let mut entries = self.entries.write().expect("cache lock");
        Ok(entries.entry(key).or_insert(computed).clone())
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricRecord;
    use crate::model::{assemble_iteration, members_by_label, GroupRecord};

    fn iteration(key: &str, labels: Vec<i64>) -> IterationResult {
        let n = labels.len();
        let groups = members_by_label(&labels)
            .into_iter()
            .map(|(g, m)| GroupRecord::new(key, g, m, vec![0.0]))
            .collect();
        assemble_iteration(key, 0.0, labels, vec![1.0; n], vec![0.0; n], groups, MetricRecord::default()).unwrap()
    }

    #[test]
    fn identical_partitions_are_diagonal() {
        let a = iteration("1", vec![0, 0, 1, 1, 1, -1]);
        let m = overlap(&a, &a).unwrap();
        assert_eq!(m.counts, vec![vec![2, 0, 0], vec![0, 3, 0], vec![0, 0, 1]]);
        assert_eq!(m.total(), 6);
    }

    #[test]
    fn full_class_uses_group_labels() {
        let a = iteration("20", vec![0, 1, -1, 0]);
        let c = class_full(&a);
        assert_eq!(c.values, vec!["20.0", "20.1", "20.noise", "20.0"]);
        assert_eq!(c.labels, vec!["20.0", "20.1", "20.noise"]);
    }

    #[test]
    fn transition_class_counts_match_matrix_row() {
        let a = iteration("20", vec![0, 0, 0, 1, 1, 1]);
        let b = iteration("24", vec![0, 0, 1, 1, 1, 2]);
        let c = class_transition(&a, 0, &b).unwrap();
        assert_eq!(c.count("20.0→24.0"), 2);
        assert_eq!(c.count("20.0→24.1"), 1);
        assert_eq!(c.count(OTHER), 3);
        let m = overlap(&a, &b).unwrap();
        assert_eq!(m.count(0, 0), Some(2));
    }

    #[test]
    fn connector_detail_on_overlapping_groups() {
        // group 0 of `a` is items 1..=6, group 0 of `b` is items 4..=9
        let a = iteration("a", (0..10).map(|i| if (1..=6).contains(&i) { 0 } else { 1 }).collect());
        let b = iteration("b", (0..10).map(|i| if (4..=9).contains(&i) { 0 } else { 1 }).collect());
        let c = class_connector_detail(&a, 0, &b, 0).unwrap();
        let shared: Vec<usize> = (0..10).filter(|&i| c.values[i] == SHARED).collect();
        assert_eq!(shared, vec![4, 5, 6]);
        assert_eq!(c.count(LEFT_ONLY), 3);
        assert_eq!(c.count(RIGHT_ONLY), 3);
        assert_eq!(c.values[0], OTHER);
    }

    #[test]
    fn hiding_axes_changes_adjacency() {
        let keys: Vec<String> = ["100", "130", "150", "200"].map(String::from).to_vec();
        assert_eq!(visible_pairs(&keys, &[true; 4]).unwrap().len(), 3);
        let pairs = visible_pairs(&keys, &[true, false, true, true]).unwrap();
        assert_eq!(pairs[0], ("100".to_owned(), "150".to_owned()));
        assert!(visible_pairs(&keys, &[true, false, false, false]).is_err());
    }
}
