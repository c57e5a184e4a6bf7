mod support;

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sweepscope_core::linalg::{quantile_sorted, sorted_copy};
use sweepscope_core::methods::hdbscan::{core_distances, mutual_reachability_mst};
use sweepscope_core::metrics::{calinski_harabasz, coherence_cv, davies_bouldin, silhouette_samples};
use sweepscope_core::synthetic::ari;
use sweepscope_core::text::{build_tfidf, tokenize};

use support::Point;

const TOL: f64 = 1e-9;

/// Random points with a planted labeling; some labels may be noise.
fn instance(seed: u64, n: usize, k: usize, with_noise: bool) -> (Array2<f64>, Vec<Point>, Vec<i64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = 3;
    let labels: Vec<i64> = (0..n)
        .map(|i| if with_noise && rng.random::<f64>() < 0.15 { -1 } else { (i % k) as i64 })
        .collect();
    let x = Array2::from_shape_fn((n, dims), |(i, j)| {
        let center = if labels[i] >= 0 { labels[i] as f64 * 3.0 * (j as f64 + 1.0) } else { 0.0 };
        center + rng.random_range(-2.0..2.0)
    });
    let points = x.rows().into_iter().map(|r| r.to_vec()).collect();
    (x, points, labels)
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() < TOL * a.abs().max(1.0),
        (None, None) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn silhouette_matches_definition(seed in any::<u64>(), n in 6usize..80, k in 2usize..5, noise in any::<bool>()) {
        let (x, points, labels) = instance(seed, n, k, noise);
        let got = silhouette_samples(x.view(), &labels);
        let want = support::silhouette(&points, &labels);
        prop_assert_eq!(got.is_some(), want.is_some());
        if let (Some(got), Some(want)) = (got, want) {
            for (g, w) in got.iter().zip(&want) {
                prop_assert!(close(*g, *w), "{:?} vs {:?}", g, w);
            }
        }
    }

    #[test]
    fn davies_bouldin_matches_definition(seed in any::<u64>(), n in 6usize..80, k in 2usize..5, noise in any::<bool>()) {
        let (x, points, labels) = instance(seed, n, k, noise);
        prop_assert!(close(davies_bouldin(x.view(), &labels), support::davies_bouldin(&points, &labels)));
    }

    #[test]
    fn calinski_harabasz_matches_definition(seed in any::<u64>(), n in 6usize..80, k in 2usize..5, noise in any::<bool>()) {
        let (x, points, labels) = instance(seed, n, k, noise);
        prop_assert!(close(calinski_harabasz(x.view(), &labels), support::calinski_harabasz(&points, &labels)));
    }

    #[test]
    fn ari_matches_pair_enumeration(
        a in proptest::collection::vec(-1i64..4, 2..60),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<i64> = a.iter().map(|&l| if rng.random::<f64>() < 0.3 { rng.random_range(0..3) } else { l }).collect();
        let got = ari(&a, &b).unwrap();
        prop_assert!((got - support::ari(&a, &b)).abs() < TOL);
        prop_assert!((got - ari(&b, &a).unwrap()).abs() < TOL);
    }

    #[test]
    fn quantiles_match_order_statistics(values in proptest::collection::vec(-100.0f64..100.0, 1..50), p in 0.0f64..=1.0) {
        let got = quantile_sorted(&sorted_copy(&values), p);
        prop_assert!((got - support::quantile(&values, p)).abs() < TOL);
    }

    #[test]
    fn mst_matches_cycle_property(seed in any::<u64>(), n in 3usize..=12, min_samples in 1usize..4) {
        let (x, points, _) = instance(seed, n, 2, false);
        let core = core_distances(x.view(), min_samples);
        let core_oracle = support::core_distances(&points, min_samples);
        for (a, b) in core.iter().zip(&core_oracle) {
            prop_assert!((a - b).abs() < TOL);
        }
        let w = support::mutual_reachability(&points, &core_oracle);
        let mst = mutual_reachability_mst(x.view(), &core);
        prop_assert_eq!(mst.len(), n - 1);
        let tree: Vec<(usize, usize)> = mst.iter().map(|e| (e.a, e.b)).collect();
        for e in &mst {
            prop_assert!((e.weight - w[e.a][e.b]).abs() < TOL);
        }
        prop_assert!(support::satisfies_cycle_property(&w, &tree));
    }
}

#[test]
fn mst_weight_equals_exhaustive_minimum_on_eight_points() {
    for seed in 0..4 {
        let (x, points, _) = instance(seed, 8, 2, false);
        for min_samples in [1, 3] {
            let core = core_distances(x.view(), min_samples);
            let w = support::mutual_reachability(&points, &support::core_distances(&points, min_samples));
            let got: f64 = mutual_reachability_mst(x.view(), &core).iter().map(|e| e.weight).sum();
            let want = support::exhaustive_mst_weight(&w);
            assert!((got - want).abs() < TOL, "seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn prufer_decoding_yields_spanning_trees() {
    let tree = support::prufer_tree(&[3, 3, 3, 4], 6);
    assert_eq!(tree, vec![(0, 3), (1, 3), (2, 3), (3, 4), (4, 5)]);
}

fn corpus() -> Vec<Vec<String>> {
    [
        "apple banana cherry apple",
        "banana cherry date",
        "apple date elder fig",
        "cherry apple banana",
        "fig grape",
        "grape fig apple banana cherry",
        "date",
        "elder banana",
    ]
    .iter()
    .map(|d| d.split(' ').map(str::to_owned).collect())
    .collect()
}

#[test]
fn coherence_matches_window_enumeration() {
    let docs = corpus();
    let topics: Vec<Vec<&str>> = vec![
        vec!["apple", "banana", "cherry"],
        vec!["fig", "grape", "date", "elder"],
        vec!["banana", "elder"],
        vec!["apple", "grape", "date"],
    ];
    for window in 1..=3 {
        let lists: Vec<Vec<String>> = topics.iter().map(|t| t.iter().map(|s| s.to_string()).collect()).collect();
        let got = coherence_cv(&lists, &docs, window).unwrap();
        for (topic, value) in topics.iter().zip(&got.per_topic) {
            let want = support::coherence_cv(topic, &docs, window);
            assert!((value - want).abs() < TOL, "window {window} {topic:?}: {value} vs {want}");
        }
    }
}

#[test]
fn coherence_is_invariant_to_term_order() {
    let docs = corpus();
    let forward: Vec<String> = ["apple", "banana", "date", "fig"].iter().map(|s| s.to_string()).collect();
    let mut backward = forward.clone();
    backward.reverse();
    let a = coherence_cv(&[forward], &docs, 3).unwrap().per_topic[0];
    let b = coherence_cv(&[backward], &docs, 3).unwrap().per_topic[0];
    assert!((a - b).abs() < TOL);
}

#[test]
fn npmi_pair_values_match_enumeration() {
    let docs = corpus();
    let windows = support::all_windows(&docs, 2);
    // "date" and "fig" never share a two-token window
    let never = support::npmi(&windows, "date", "fig");
    assert!(never < -0.8, "{never}");
    let got = coherence_cv(&[vec!["date".into(), "fig".into()]], &docs, 2).unwrap();
    let want = support::coherence_cv(&["date", "fig"], &docs, 2);
    assert!((got.per_topic[0] - want).abs() < TOL);
}

#[test]
fn tfidf_matches_hand_computation() {
    // docs: "a b", "a c", "a a b"; df: a=3, b=2, c=1; n=3
    // idf(a) = ln(4/4)+1 = 1, idf(b) = ln(4/3)+1, idf(c) = ln(4/2)+1
    let corpus: Vec<String> = vec!["aa bb".into(), "aa cc".into(), "aa aa bb".into()];
    let (docs, dict) = tokenize(&corpus, &Default::default(), 1, &[]).unwrap();
    let m = build_tfidf(&docs, &dict).values.to_dense();
    let idf_b = (4.0f64 / 3.0).ln() + 1.0;
    let idf_c = 2.0f64.ln() + 1.0;
    let row = |v: [f64; 3]| {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v.map(|x| x / norm)
    };
    let expected = [row([1.0, idf_b, 0.0]), row([1.0, 0.0, idf_c]), row([2.0, idf_b, 0.0])];
    assert_eq!(dict.terms(), &["aa", "bb", "cc"]);
    for (i, want) in expected.iter().enumerate() {
        for j in 0..3 {
            assert!((m[[i, j]] - want[j]).abs() < TOL, "({i},{j}) {} vs {}", m[[i, j]], want[j]);
        }
    }
    // two-document corpus {"a b", "a c"}
    let (docs, dict) = tokenize(&["aa bb".to_string(), "aa cc".to_string()], &Default::default(), 1, &[]).unwrap();
    let m = build_tfidf(&docs, &dict).values.to_dense();
    let idf_rare = 1.5f64.ln() + 1.0;
    let norm = (1.0 + idf_rare * idf_rare).sqrt();
    assert!((m[[0, 0]] - 1.0 / norm).abs() < TOL);
    assert!((m[[0, 1]] - idf_rare / norm).abs() < TOL);
    assert_eq!(m[[0, 2]], 0.0);
    assert!((m[[1, 2]] - idf_rare / norm).abs() < TOL);
}
