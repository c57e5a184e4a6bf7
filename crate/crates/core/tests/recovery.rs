//! Ground-truth recovery on the seeded generators.

use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;

use sweepscope_core::archetypes::{detect, pool_vectors, sweep_thresholds, PooledRow};
use sweepscope_core::methods::{fit_hdbscan, HdbscanParams, KMeansParams, NmfParams};
use sweepscope_core::metrics::{DIVERSITY, K_DISCOVERED, NOISE_PCT, SILHOUETTE};
use sweepscope_core::model::{format_param, IterationResult};
use sweepscope_core::projection::ProjectionRegistry;
use sweepscope_core::run::{analyze, fit_iteration, AnalysisOptions, FitOptions, IterationSpec, MethodParams, SharedInput};
use sweepscope_core::synthetic::{ari, generate, SyntheticData, SyntheticSpec};
use sweepscope_core::text::TextOptions;

fn run(shared: &SharedInput, specs: &[IterationSpec]) -> Vec<IterationResult> {
    specs.iter().map(|s| fit_iteration(shared, s, &FitOptions::default()).unwrap().result).collect()
}

fn kmeans_specs(ks: impl IntoIterator<Item = usize>, seed: u64) -> Vec<IterationSpec> {
    ks.into_iter()
        .map(|k| IterationSpec {
            key: k.to_string(),
            param_value: k as f64,
            params: MethodParams::Kmeans(KMeansParams::new(k, seed)),
        })
        .collect()
}

fn blobs() -> (SyntheticData, SharedInput) {
    let data = generate(&SyntheticSpec::blobs(300, 3, 20.0, 1.0, 7)).unwrap();
    let shared = SharedInput::prepare(data.table.clone(), &TextOptions::default()).unwrap();
    (data, shared)
}

#[test]
fn kmeans_sweep_peaks_at_the_true_blob_count() {
    let (data, shared) = blobs();
    let iterations = run(&shared, &kmeans_specs(2..=8, 0));
    let silhouettes: Vec<f64> = iterations.iter().map(|it| it.metrics.get(SILHOUETTE).unwrap()).collect();
    let best = silhouettes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(silhouettes.iter().filter(|&&s| s == best).count(), 1);
    assert_eq!(iterations[silhouettes.iter().position(|&s| s == best).unwrap()].iteration_key, "3");
    assert_eq!(ari(&iterations[1].assignments, &data.truth).unwrap(), 1.0);
}

#[test]
fn blob_partitions_agree_across_thirty_seeds() {
    let (_, shared) = blobs();
    let iterations: Vec<IterationResult> =
        (1..=30).map(|seed| run(&shared, &kmeans_specs([3], seed)).remove(0)).collect();
    let silhouettes: Vec<f64> = iterations.iter().map(|it| it.metrics.get(SILHOUETTE).unwrap()).collect();
    let spread = silhouettes.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - silhouettes.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(spread < 0.01);
    for a in &iterations {
        for b in &iterations {
            assert_eq!(ari(&a.assignments, &b.assignments).unwrap(), 1.0);
        }
    }
}

#[test]
fn blob_sweep_archetypes_cover_every_blob() {
    let (data, shared) = blobs();
    let iterations = run(&shared, &kmeans_specs(2..=8, 0));
    let options = AnalysisOptions { projection_methods: vec![], ..Default::default() };
    let analysis = analyze(&iterations, &ProjectionRegistry::default(), &options).unwrap();
    assert_eq!(analysis.pooled.n_rows(), 35);
    assert_eq!(analysis.default_threshold, 3);
    let model = &analysis.archetypes;
    assert!(model.n_archetypes() >= 3);
    // the K=3 centroids are the blob means; each must sit in a distinct archetype
    let k3: Vec<i64> = (0..3).map(|g| model.labels[analysis.pooled.row_index("3", g).unwrap()]).collect();
    assert!(k3.iter().all(|&a| a >= 0));
    assert_eq!(k3.iter().collect::<BTreeSet<_>>().len(), 3);
    assert_eq!(ari(&iterations[1].assignments, &data.truth).unwrap(), 1.0);
}

#[test]
fn dbscan_eps_sweep_recovers_the_moons() {
    let data = generate(&SyntheticSpec::moons_noise(500, 0.1, 0)).unwrap();
    let shared = SharedInput::prepare(data.table.clone(), &TextOptions::default()).unwrap();
    let specs: Vec<IterationSpec> = (1..=20)
        .map(|i| {
            let eps = 0.05 * i as f64;
            IterationSpec { key: format_param(eps), param_value: eps, params: MethodParams::Dbscan { eps, min_samples: 5 } }
        })
        .collect();
    let iterations = run(&shared, &specs);
    assert!(iterations.iter().any(|it| {
        it.metrics.get(K_DISCOVERED) == Some(2.0) && ari(&it.assignments, &data.truth).unwrap() > 0.9
    }));
    // a point that is clustered at some eps stays clustered at every larger eps
    let noise: Vec<f64> = iterations.iter().map(|it| it.metrics.get(NOISE_PCT).unwrap()).collect();
    assert!(noise.windows(2).all(|w| w[1] <= w[0]), "{noise:?}");
}

#[test]
fn planted_topics_are_recovered_at_the_true_k() {
    let data = generate(&SyntheticSpec::planted_topics(400, 4, 11)).unwrap();
    let shared = SharedInput::prepare(data.table.clone(), &TextOptions::default()).unwrap();
    let spec = IterationSpec { key: "4".into(), param_value: 4.0, params: MethodParams::Nmf(NmfParams::new(4, 0)) };
    let fitted = fit_iteration(&shared, &spec, &FitOptions::default()).unwrap();
    let dictionary = &shared.corpus.as_ref().unwrap().dictionary;
    let h: Vec<&Vec<f64>> = fitted.result.groups.iter().map(|g| &g.representative).collect();
    let mut owner_of_vocab = Vec::new();
    for vocab in &data.vocabularies {
        let owners: BTreeSet<usize> = vocab
            .iter()
            .map(|term| {
                let j = dictionary.get(term).unwrap();
                (0..h.len()).max_by(|&a, &b| h[a][j].total_cmp(&h[b][j]).then(b.cmp(&a))).unwrap()
            })
            .collect();
        assert_eq!(owners.len(), 1, "vocabulary split across topics {owners:?}");
        owner_of_vocab.push(*owners.first().unwrap());
    }
    assert_eq!(owner_of_vocab.iter().collect::<BTreeSet<_>>().len(), 4);
    assert_eq!(ari(&fitted.result.assignments, &data.truth).unwrap(), 1.0);
}

#[test]
fn redundant_topics_lower_diversity() {
    let data = generate(&SyntheticSpec::planted_topics(400, 4, 11)).unwrap();
    let shared = SharedInput::prepare(data.table.clone(), &TextOptions::default()).unwrap();
    let diversity = |k: usize| {
        let spec = IterationSpec { key: k.to_string(), param_value: k as f64, params: MethodParams::Nmf(NmfParams::new(k, 0)) };
        fit_iteration(&shared, &spec, &FitOptions::default()).unwrap().result.metrics.get(DIVERSITY).unwrap()
    };
    assert!(diversity(4) > diversity(8));
}

#[test]
fn identical_iterations_form_one_archetype_per_group() {
    let vectors = [[0.0, 0.0, 5.0], [5.0, 0.0, 0.0], [0.0, 5.0, 0.0]];
    let n_iterations = 6;
    let mut rows = Vec::new();
    let mut raw = Array2::zeros((n_iterations * 3, 3));
    for it in 0..n_iterations {
        for (g, v) in vectors.iter().enumerate() {
            rows.push(PooledRow { iteration_key: it.to_string(), group_id: g as i64, is_noise: false });
            raw.row_mut(it * 3 + g).assign(&ndarray::arr1(v));
        }
    }
    let pooled = pool_vectors(rows, raw, n_iterations).unwrap();
    let model = detect(&pooled, 3).unwrap();
    assert_eq!(model.n_archetypes(), 3);
    assert_eq!(model.complete_iterations.len(), n_iterations);
}

#[test]
fn twenty_one_iterations_give_threshold_ten_and_nineteen_sweep_points() {
    let (_, shared) = blobs();
    let specs: Vec<IterationSpec> = (1..=21)
        .map(|seed| IterationSpec {
            key: format!("seed-{seed}"),
            param_value: seed as f64,
            params: MethodParams::Kmeans(KMeansParams::new(3, seed)),
        })
        .collect();
    let iterations = run(&shared, &specs);
    let options = AnalysisOptions { projection_methods: vec![], ..Default::default() };
    let analysis = analyze(&iterations, &ProjectionRegistry::default(), &options).unwrap();
    assert_eq!(analysis.default_threshold, 10);
    assert_eq!(analysis.archetypes.threshold, 10);
    assert_eq!(sweep_thresholds(&analysis.pooled), (2..=20).collect::<Vec<_>>());
    assert_eq!(analysis.sweep_curve.len(), 19);
}

fn read_points(text: &str) -> Array2<f64> {
    let rows: Vec<Vec<f64>> =
        text.lines().map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect()).collect();
    Array2::from_shape_fn((rows.len(), rows[0].len()), |(i, j)| rows[i][j])
}

/// Same partition up to renaming, noise fixed.
fn same_partition(a: &[i64], b: &[i64]) -> bool {
    let mut forward = HashMap::new();
    let mut backward = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        (x == -1) == (y == -1) && *forward.entry(x).or_insert(y) == y && *backward.entry(y).or_insert(x) == x
    })
}

#[test]
fn hdbscan_matches_reference_labels_on_pooled_blob_rows() {
    let x = read_points(include_str!("fixtures/blob_pool.csv"));
    let reference: HashMap<String, Vec<i64>> =
        serde_json::from_str(include_str!("fixtures/blob_pool_reference_labels.json")).unwrap();
    for (threshold, labels) in reference {
        let t: usize = threshold.parse().unwrap();
        let model = fit_hdbscan(x.view(), &HdbscanParams::new(t).with_min_samples(t.min(5))).unwrap();
        assert!(same_partition(&model.labels, &labels), "threshold {t}: {:?} vs {labels:?}", model.labels);
    }
}

#[derive(serde::Deserialize)]
struct Reference {
    labels: Vec<i64>,
    probabilities: Vec<f64>,
}

#[test]
fn hdbscan_matches_reference_on_noisy_moons() {
    let x = read_points(include_str!("fixtures/moons_small.csv"));
    let reference: HashMap<String, Reference> =
        serde_json::from_str(include_str!("fixtures/moons_small_reference.json")).unwrap();
    for (mcs, want) in reference {
        let model = fit_hdbscan(x.view(), &HdbscanParams::new(mcs.parse().unwrap())).unwrap();
        assert!(same_partition(&model.labels, &want.labels), "mcs {mcs}");
        for (got, want) in model.probabilities.iter().zip(&want.probabilities) {
            assert!((got - want).abs() < 1e-9, "mcs {mcs}: {got} vs {want}");
        }
    }
}
