//! HDBSCAN: mutual-reachability MST, condensed tree, Excess-of-Mass selection,
//! persistence probabilities and GLOSH outlier scores.

use std::collections::{BTreeMap, VecDeque};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::dist;
use crate::methods::medoids_for_labels;
use crate::model::NOISE;

/// Distances below this are treated as this when converted to lambda = 1/d,
/// so duplicate points get a large finite density instead of infinity.
const MIN_DISTANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    /// Defaults to `min_cluster_size`.
    pub min_samples: Option<usize>,
}

impl HdbscanParams {
    pub fn new(min_cluster_size: usize) -> Self {
        Self { min_cluster_size, min_samples: None }
    }

    pub fn with_min_samples(mut self, min_samples: usize) -> Self {
        self.min_samples = Some(min_samples);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// One edge of the condensed tree. Ids below `n_items` are points; the
/// root cluster is `n_items` and later clusters count up from there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondensedNode {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HdbscanModel {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub labels: Vec<i64>,
    pub probabilities: Vec<f64>,
    pub glosh: Vec<f64>,
    pub core_distances: Vec<f64>,
    pub mst: Vec<MstEdge>,
    pub condensed_tree: Vec<CondensedNode>,
    /// Stability of every non-root condensed cluster.
    pub stabilities: BTreeMap<usize, f64>,
    /// Condensed cluster node behind each label `0..n_clusters`.
    pub selected_clusters: Vec<usize>,
    pub medoids: Vec<usize>,
    pub noise_medoid: Option<usize>,
    pub n_clusters: usize,
}

pub fn fit_hdbscan(x: ArrayView2<'_, f64>, params: &HdbscanParams) -> Result<HdbscanModel> {
    let mcs = params.min_cluster_size;
    if mcs < 2 {
        return Err(CoreError::InvalidParameter(format!("min_cluster_size must be >= 2, got {mcs}")));
    }
    let min_samples = params.min_samples.unwrap_or(mcs);
    if min_samples == 0 {
        return Err(CoreError::InvalidParameter("min_samples must be >= 1".into()));
    }
    let n = x.nrows();
    if n < 2 {
        return Ok(HdbscanModel {
            min_cluster_size: mcs,
            min_samples,
            labels: vec![NOISE; n],
            probabilities: vec![0.0; n],
            glosh: vec![0.0; n],
            core_distances: vec![0.0; n],
            mst: Vec::new(),
            condensed_tree: Vec::new(),
            stabilities: BTreeMap::new(),
            selected_clusters: Vec::new(),
            medoids: Vec::new(),
            noise_medoid: (n == 1).then_some(0),
            n_clusters: 0,
        });
    }

    let core = core_distances(x, min_samples);
    let mst = mutual_reachability_mst(x, &core);
    let linkage = single_linkage(&mst, n);
    let tree = condense(&linkage, n, mcs);
    let stabilities = stabilities(&tree, n);
    let selected = select_eom(&tree, &stabilities, n);
    let labels = label_points(&tree, &selected, n);
    let probabilities = membership_probabilities(&tree, &selected, &labels, n);
    let glosh = glosh_scores(&tree, n);

    let n_clusters = selected.len();
    let (medoids, noise_medoid) = medoids_for_labels(x, &labels, n_clusters);
    Ok(HdbscanModel {
        min_cluster_size: mcs,
        min_samples,
        labels,
        probabilities,
        glosh,
        core_distances: core,
        mst,
        condensed_tree: tree,
        stabilities: stabilities.into_iter().filter(|(c, _)| *c != n).collect(),
        selected_clusters: selected,
        medoids,
        noise_medoid,
        n_clusters,
    })
}

/// Distance to the `min_samples`-th nearest neighbor, counting the point itself.
pub fn core_distances(x: ArrayView2<'_, f64>, min_samples: usize) -> Vec<f64> {
    let n = x.nrows();
    let k = min_samples.clamp(1, n);
    (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).map(|j| dist(x.row(i), x.row(j))).collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

/// Exact minimum spanning tree over `max(core_a, core_b, d(a, b))` by Prim's
/// algorithm on the implicit complete graph. Edges come back sorted by weight.
pub fn mutual_reachability_mst(x: ArrayView2<'_, f64>, core: &[f64]) -> Vec<MstEdge> {
    let n = x.nrows();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_weight = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let mr = core[current].max(core[j]).max(dist(x.row(current), x.row(j)));
            if mr < best[j] {
                best[j] = mr;
                best_from[j] = current;
            }
            if best[j] < next_weight || next == usize::MAX {
                next = j;
                next_weight = best[j];
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge { a: best_from[next], b: next, weight: next_weight });
        current = next;
    }
    edges.sort_by(|e, f| e.weight.total_cmp(&f.weight));
    edges
}

#[derive(Clone, Copy, Debug)]
struct LinkageRow {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    next: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        let total = 2 * n - 1;
        Self { parent: (0..total).collect(), size: (0..total).map(|i| usize::from(i < n)).collect(), next: n }
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let up = self.parent[x];
            self.parent[x] = root;
            x = up;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let id = self.next;
        self.parent[a] = id;
        self.parent[b] = id;
        self.size[id] = self.size[a] + self.size[b];
        self.next += 1;
        id
    }
}

/// Single-linkage dendrogram; row `r` creates node `n + r`.
fn single_linkage(mst: &[MstEdge], n: usize) -> Vec<LinkageRow> {
    let mut uf = UnionFind::new(n);
    mst.iter()
        .map(|e| {
            let left = uf.find(e.a);
            let right = uf.find(e.b);
            let id = uf.union(left, right);
            LinkageRow { left, right, distance: e.weight, size: uf.size[id] }
        })
        .collect()
}

fn lambda_of(distance: f64) -> f64 {
    1.0 / distance.max(MIN_DISTANCE)
}

fn descendants(linkage: &[LinkageRow], n: usize, node: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([node]);
    while let Some(id) = queue.pop_front() {
        out.push(id);
        if id >= n {
            let row = linkage[id - n];
            queue.push_back(row.left);
            queue.push_back(row.right);
        }
    }
    out
}

fn condense(linkage: &[LinkageRow], n: usize, mcs: usize) -> Vec<CondensedNode> {
    let root = 2 * n - 2;
    let size_of = |id: usize| if id < n { 1 } else { linkage[id - n].size };
    let mut relabel = vec![0usize; root + 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut ignore = vec![false; root + 1];
    let mut tree = Vec::new();

    for node in descendants(linkage, n, root) {
        if ignore[node] || node < n {
            continue;
        }
        let row = linkage[node - n];
        let lambda = lambda_of(row.distance);
        let parent = relabel[node];
        let (left_size, right_size) = (size_of(row.left), size_of(row.right));
        let fall_out = |child: usize, tree: &mut Vec<CondensedNode>, ignore: &mut Vec<bool>| {
            for sub in descendants(linkage, n, child) {
                if sub < n {
                    tree.push(CondensedNode { parent, child: sub, lambda, size: 1 });
                }
                ignore[sub] = true;
            }
        };
        match (left_size >= mcs, right_size >= mcs) {
            (true, true) => {
                for (child, size) in [(row.left, left_size), (row.right, right_size)] {
                    relabel[child] = next_label;
                    tree.push(CondensedNode { parent, child: next_label, lambda, size });
                    next_label += 1;
                }
            }
            (false, false) => {
                fall_out(row.left, &mut tree, &mut ignore);
                fall_out(row.right, &mut tree, &mut ignore);
            }
            (true, false) => {
                relabel[row.left] = parent;
                fall_out(row.right, &mut tree, &mut ignore);
            }
            (false, true) => {
                relabel[row.right] = parent;
                fall_out(row.left, &mut tree, &mut ignore);
            }
        }
    }
    tree
}

fn birth_lambdas(tree: &[CondensedNode], n: usize) -> BTreeMap<usize, f64> {
    let mut births = BTreeMap::from([(n, 0.0)]);
    for e in tree.iter().filter(|e| e.child >= n) {
        births.insert(e.child, e.lambda);
    }
    births
}

/// `Σ (λ_child − λ_birth) · size` over every edge leaving a cluster.
fn stabilities(tree: &[CondensedNode], n: usize) -> BTreeMap<usize, f64> {
    let births = birth_lambdas(tree, n);
    let mut stability: BTreeMap<usize, f64> = births.keys().map(|&c| (c, 0.0)).collect();
    for e in tree {
        let birth = births[&e.parent];
        *stability.get_mut(&e.parent).expect("parent is a cluster") += (e.lambda - birth) * e.size as f64;
    }
    stability
}

/// Excess-of-Mass selection; the root is never selected.
fn select_eom(tree: &[CondensedNode], stability: &BTreeMap<usize, f64>, n: usize) -> Vec<usize> {
    let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in tree.iter().filter(|e| e.child >= n) {
        children.entry(e.parent).or_default().push(e.child);
    }
    let mut propagated = stability.clone();
    let mut selected: BTreeMap<usize, bool> = stability.keys().filter(|&&c| c != n).map(|&c| (c, true)).collect();
    let clusters: Vec<usize> = selected.keys().rev().copied().collect();
    for cluster in clusters {
        let kids = children.get(&cluster).cloned().unwrap_or_default();
        let child_total: f64 = kids.iter().map(|c| propagated[c]).sum();
        if child_total > propagated[&cluster] {
            selected.insert(cluster, false);
            propagated.insert(cluster, child_total);
        } else {
            let mut stack = kids;
            while let Some(c) = stack.pop() {
                selected.insert(c, false);
                if let Some(grand) = children.get(&c) {
                    stack.extend(grand.iter().copied());
                }
            }
        }
    }
    selected.into_iter().filter(|(_, keep)| *keep).map(|(c, _)| c).collect()
}

fn parent_map(tree: &[CondensedNode]) -> BTreeMap<usize, usize> {
    tree.iter().map(|e| (e.child, e.parent)).collect()
}

fn label_points(tree: &[CondensedNode], selected: &[usize], n: usize) -> Vec<i64> {
    let parents = parent_map(tree);
    let label_of: BTreeMap<usize, i64> = selected.iter().enumerate().map(|(i, &c)| (c, i as i64)).collect();
    (0..n)
        .map(|p| {
            let mut node = parents.get(&p).copied();
            while let Some(c) = node {
                if let Some(&label) = label_of.get(&c) {
                    return label;
                }
                node = parents.get(&c).copied();
            }
            NOISE
        })
        .collect()
}

/// `min(λ_point, λ_max) / λ_max`, with `λ_max` the largest lambda among the
/// selected cluster's direct children. Noise gets 0.
fn membership_probabilities(tree: &[CondensedNode], selected: &[usize], labels: &[i64], n: usize) -> Vec<f64> {
    let mut deaths: BTreeMap<usize, f64> = BTreeMap::new();
    for e in tree {
        let d = deaths.entry(e.parent).or_insert(0.0);
        *d = d.max(e.lambda);
    }
    let mut probabilities = vec![0.0; n];
    for e in tree.iter().filter(|e| e.child < n) {
        let label = labels[e.child];
        if label == NOISE {
            continue;
        }
        let max_lambda = deaths.get(&selected[label as usize]).copied().unwrap_or(0.0);
        probabilities[e.child] = if max_lambda <= 0.0 {
            1.0
        } else {
            (e.lambda.min(max_lambda) / max_lambda).clamp(0.0, 1.0)
        };
    }
    probabilities
}

/// GLOSH: `(λ_max − λ_point) / λ_max` where `λ_max` is the largest lambda in
/// the subtree of the cluster the point fell out of.
fn glosh_scores(tree: &[CondensedNode], n: usize) -> Vec<f64> {
    let mut deaths: BTreeMap<usize, f64> = BTreeMap::new();
    for e in tree {
        let d = deaths.entry(e.parent).or_insert(0.0);
        *d = d.max(e.lambda);
    }
    let mut cluster_edges: Vec<&CondensedNode> = tree.iter().filter(|e| e.child >= n).collect();
    cluster_edges.sort_by(|a, b| b.child.cmp(&a.child));
    for e in cluster_edges {
        let child = deaths.get(&e.child).copied().unwrap_or(0.0);
        let parent = deaths.entry(e.parent).or_insert(0.0);
        *parent = parent.max(child);
    }
    let mut scores = vec![0.0; n];
    for e in tree.iter().filter(|e| e.child < n) {
        let max_lambda = deaths.get(&e.parent).copied().unwrap_or(0.0);
        if max_lambda > 0.0 {
            scores[e.child] = ((max_lambda - e.lambda) / max_lambda).clamp(0.0, 1.0);
        }
    }
    scores
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn two_blobs() -> Array2<f64> {
        let mut rows = Vec::new();
        for i in 0..10 {
            let a = i as f64 * 0.628;
            rows.push([0.1 * a.cos(), 0.1 * a.sin()]);
            rows.push([10.0 + 0.1 * a.cos(), 0.1 * a.sin()]);
        }
        Array2::from_shape_fn((20, 2), |(i, j)| rows[i][j])
    }

    #[test]
    fn separated_blobs_become_two_clusters() {
        let x = two_blobs();
        let m = fit_hdbscan(x.view(), &HdbscanParams::new(5)).unwrap();
        assert_eq!(m.n_clusters, 2);
        for i in (0..20).step_by(2) {
            assert_eq!(m.labels[i], m.labels[0]);
            assert_eq!(m.labels[i + 1], m.labels[1]);
        }
        assert_ne!(m.labels[0], m.labels[1]);
        assert!(m.probabilities.iter().all(|p| *p > 0.9));
    }

    #[test]
    fn condensed_tree_is_a_hierarchy() {
        let x = two_blobs();
        let m = fit_hdbscan(x.view(), &HdbscanParams::new(3)).unwrap();
        let n = 20;
        let parents = parent_map(&m.condensed_tree);
        // every point appears exactly once as a child
        let point_edges = m.condensed_tree.iter().filter(|e| e.child < n).count();
        assert_eq!(point_edges, n);
        // single root: the only cluster without a parent
        let roots: Vec<usize> = m
            .condensed_tree
            .iter()
            .map(|e| e.parent)
            .filter(|p| !parents.contains_key(p))
            .collect();
        assert!(roots.iter().all(|&r| r == n));
        for e in m.condensed_tree.iter().filter(|e| e.child >= n) {
            let parent_size = if e.parent == n {
                n
            } else {
                m.condensed_tree.iter().find(|f| f.child == e.parent).unwrap().size
            };
            assert!(e.size <= parent_size);
        }
        assert!(m.stabilities.values().all(|s| *s >= 0.0));
    }

    #[test]
    fn too_few_points_is_all_noise() {
        let x = two_blobs();
        let m = fit_hdbscan(x.view(), &HdbscanParams::new(30)).unwrap();
        assert!(m.labels.iter().all(|&l| l == NOISE));
        assert!(m.probabilities.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn duplicates_do_not_produce_nan() {
        let mut x = Array2::zeros((12, 2));
        for i in 6..12 {
            x[[i, 0]] = 5.0;
        }
        let m = fit_hdbscan(x.view(), &HdbscanParams::new(3)).unwrap();
        assert_eq!(m.n_clusters, 2);
        assert!(m.glosh.iter().chain(&m.probabilities).all(|v| v.is_finite()));
    }

    #[test]
    fn mst_has_n_minus_one_sorted_edges() {
        let x = two_blobs();
        let core = core_distances(x.view(), 3);
        let mst = mutual_reachability_mst(x.view(), &core);
        assert_eq!(mst.len(), 19);
        assert!(mst.windows(2).all(|w| w[0].weight <= w[1].weight));
    }

    #[test]
    fn core_distance_counts_self() {
        let x = ndarray::array![[0.0], [1.0], [3.0]];
        assert_eq!(core_distances(x.view(), 1), vec![0.0, 0.0, 0.0]);
        assert_eq!(core_distances(x.view(), 2), vec![1.0, 1.0, 2.0]);
    }
}
