//! Brute-force reference implementations. Each one follows the textbook
//! definition directly and shares no code with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

pub type Point = Vec<f64>;

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn clusters(labels: &[i64]) -> BTreeMap<i64, Vec<usize>> {
    let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            map.entry(l).or_default().push(i);
        }
    }
    map
}

fn mean_point(points: &[Point], members: &[usize]) -> Point {
    let d = points[0].len();
    let mut m = vec![0.0; d];
    for &i in members {
        for c in 0..d {
            m[c] += points[i][c];
        }
    }
    m.iter().map(|v| v / members.len() as f64).collect()
}

/// s(i) = (b - a) / max(a, b) over non-noise items; singletons get 0.
pub fn silhouette(points: &[Point], labels: &[i64]) -> Option<Vec<Option<f64>>> {
    let groups = clusters(labels);
    if groups.len() < 2 {
        return None;
    }
    let mut out = vec![None; points.len()];
    for (i, &li) in labels.iter().enumerate() {
        if li < 0 {
            continue;
        }
        let own = &groups[&li];
        if own.len() == 1 {
            out[i] = Some(0.0);
            continue;
        }
        let a: f64 = own.iter().filter(|&&j| j != i).map(|&j| euclid(&points[i], &points[j])).sum::<f64>()
            / (own.len() - 1) as f64;
        let mut b = f64::INFINITY;
        for (&l, members) in &groups {
            if l == li {
                continue;
            }
            let d = members.iter().map(|&j| euclid(&points[i], &points[j])).sum::<f64>() / members.len() as f64;
            b = b.min(d);
        }
        out[i] = Some(if a.max(b) > 0.0 { (b - a) / a.max(b) } else { 0.0 });
    }
    Some(out)
}

pub fn mean_silhouette(points: &[Point], labels: &[i64]) -> Option<f64> {
    let s: Vec<f64> = silhouette(points, labels)?.into_iter().flatten().collect();
    Some(s.iter().sum::<f64>() / s.len() as f64)
}

/// DB = mean over clusters of max_{j != i} (S_i + S_j) / d(c_i, c_j).
pub fn davies_bouldin(points: &[Point], labels: &[i64]) -> Option<f64> {
    let groups: Vec<Vec<usize>> = clusters(labels).into_values().collect();
    if groups.len() < 2 {
        return None;
    }
    let centers: Vec<Point> = groups.iter().map(|g| mean_point(points, g)).collect();
    let scatter: Vec<f64> = groups
        .iter()
        .zip(&centers)
        .map(|(g, c)| g.iter().map(|&i| euclid(&points[i], c)).sum::<f64>() / g.len() as f64)
        .collect();
    let mut total = 0.0;
    for i in 0..groups.len() {
        let mut worst: f64 = 0.0;
        for j in 0..groups.len() {
            if i != j {
                worst = worst.max((scatter[i] + scatter[j]) / euclid(&centers[i], &centers[j]));
            }
        }
        total += worst;
    }
    Some(total / groups.len() as f64)
}

/// CH = [B / (k - 1)] / [W / (n - k)] over non-noise items.
pub fn calinski_harabasz(points: &[Point], labels: &[i64]) -> Option<f64> {
    let groups: Vec<Vec<usize>> = clusters(labels).into_values().collect();
    let all: Vec<usize> = groups.iter().flatten().copied().collect();
    let (n, k) = (all.len(), groups.len());
    if k < 2 || n <= k {
        return None;
    }
    let overall = mean_point(points, &all);
    let mut between = 0.0;
    let mut within = 0.0;
    for g in &groups {
        let c = mean_point(points, g);
        between += g.len() as f64 * euclid(&c, &overall).powi(2);
        within += g.iter().map(|&i| euclid(&points[i], &c).powi(2)).sum::<f64>();
    }
    if within == 0.0 {
        return None;
    }
    Some((between / (k - 1) as f64) / (within / (n - k) as f64))
}

/// ARI from explicit enumeration of all item pairs.
pub fn ari(a: &[i64], b: &[i64]) -> f64 {
    let (mut n11, mut n10, mut n01, mut n00) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => n11 += 1.0,
                (true, false) => n10 += 1.0,
                (false, true) => n01 += 1.0,
                (false, false) => n00 += 1.0,
            }
        }
    }
    let denom = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (n00 * n11 - n01 * n10) / denom
}

/// Linear-interpolation quantile via the (n - 1) p rank, written out from
/// order statistics without sharing any helper.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() as f64 - 1.0) * p;
    let below = h.floor();
    let i = below as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[i] * (1.0 - (h - below)) + v[i + 1] * (h - below)
}

/// Every window as an explicit token set; a document shorter than the
/// window is a single window, empty documents contribute none.
pub fn all_windows(docs: &[Vec<String>], window: usize) -> Vec<BTreeSet<String>> {
    let mut out = Vec::new();
    for doc in docs {
        if doc.is_empty() {
            continue;
        }
        if doc.len() <= window {
            out.push(doc.iter().cloned().collect());
            continue;
        }
        for start in 0..=(doc.len() - window) {
            out.push(doc[start..start + window].iter().cloned().collect());
        }
    }
    out
}

pub const EPS: f64 = 1e-12;

pub fn npmi(windows: &[BTreeSet<String>], a: &str, b: &str) -> f64 {
    let n = windows.len() as f64;
    let pa = windows.iter().filter(|w| w.contains(a)).count() as f64 / n;
    let pb = windows.iter().filter(|w| w.contains(b)).count() as f64 / n;
    let pab = windows.iter().filter(|w| w.contains(a) && w.contains(b)).count() as f64 / n;
    if pa == 0.0 || pb == 0.0 {
        return 0.0;
    }
    ((pab + EPS) / (pa * pb)).ln() / -(pab + EPS).ln()
}

/// C_V by direct enumeration: NPMI context vector per term against the
/// whole topic, cosine with the summed vector, averaged over terms.
pub fn coherence_cv(topic: &[&str], docs: &[Vec<String>], window: usize) -> f64 {
    let windows = all_windows(docs, window);
    let vectors: Vec<Vec<f64>> =
        topic.iter().map(|a| topic.iter().map(|b| npmi(&windows, a, b)).collect()).collect();
    let total: Vec<f64> = (0..topic.len()).map(|c| vectors.iter().map(|v| v[c]).sum()).collect();
    let cos = |u: &[f64], v: &[f64]| {
        let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nu == 0.0 || nv == 0.0 {
            0.0
        } else {
            dot / (nu * nv)
        }
    };
    vectors.iter().map(|v| cos(v, &total)).sum::<f64>() / topic.len() as f64
}

/// Core distance as the distance to the `k`-th nearest point, the point
/// itself counted first.
pub fn core_distances(points: &[Point], k: usize) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| euclid(p, q)).collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d[(k - 1).min(d.len() - 1)]
        })
        .collect()
}

pub fn mutual_reachability(points: &[Point], core: &[f64]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w[i][j] = euclid(&points[i], &points[j]).max(core[i]).max(core[j]);
            }
        }
    }
    w
}

/// Decodes a Prüfer sequence into the edge list of its labeled tree.
pub fn prufer_tree(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Minimum spanning-tree weight over all n^(n-2) labeled trees.
pub fn exhaustive_mst_weight(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    if n == 2 {
        return w[0][1];
    }
    let mut seq = vec![0usize; n - 2];
    let mut best = f64::INFINITY;
    loop {
        let weight: f64 = prufer_tree(&seq, n).iter().map(|&(a, b)| w[a][b]).sum();
        best = best.min(weight);
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == seq.len() {
                return best;
            }
            seq[pos] += 1;
            if seq[pos] < n {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
    }
}

/// Checks the cycle property against every non-tree edge: a spanning tree
/// is minimum iff no non-tree edge is lighter than the heaviest tree edge on
/// the path it closes.
pub fn satisfies_cycle_property(w: &[Vec<f64>], tree: &[(usize, usize)]) -> bool {
    let n = w.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in tree {
        adj[a].push(b);
        adj[b].push(a);
    }
    let in_tree: BTreeSet<(usize, usize)> = tree.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    for a in 0..n {
        for b in (a + 1)..n {
            if in_tree.contains(&(a, b)) {
                continue;
            }
            // heaviest edge on the tree path a → b, by depth-first search
            let mut stack = vec![(a, usize::MAX, 0.0f64)];
            let mut heaviest = None;
            while let Some((v, parent, max)) = stack.pop() {
                if v == b {
                    heaviest = Some(max);
                    break;
                }
                for &u in &adj[v] {
                    if u != parent {
                        stack.push((u, v, max.max(w[v][u])));
                    }
                }
            }
            if w[a][b] < heaviest.expect("tree spans every vertex") - 1e-15 {
                return false;
            }
        }
    }
    true
}

/// Classical MDS check: pairwise distances of a layout.
pub fn pairwise(points: &[Point]) -> Vec<Vec<f64>> {
    points.iter().map(|p| points.iter().map(|q| euclid(p, q)).collect()).collect()
}
