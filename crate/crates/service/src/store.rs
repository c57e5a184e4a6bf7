//! A loaded run directory plus the small amount of mutable view state the
//! service keeps: archetype threshold, axis visibility and the class
//! registry.
//!
//! Writers are serialized by one mutex and publish a fresh snapshot with an
//! atomic pointer swap, so readers never observe a half-updated view.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use sweepscope_core::archetypes::{sweep_thresholds, ArchetypeModel};
use sweepscope_core::model::{IterationResult, ItemTable, TableKind};
use sweepscope_core::projection::{EmbeddingLayout, ProjectionRegistry};
use sweepscope_core::run::{analyze, AnalysisOptions, RunAnalysis};
use sweepscope_core::text::{prepare_corpus, PreparedCorpus};
use sweepscope_core::transitions::{visible_pairs, ClassAttribute, TransitionCache, TransitionMatrix};
use sweepscope_core::CoreError;

use crate::classes::{write_class_csv, ClassSpec};
use crate::config::InputConfig;
use crate::error::{Result, ServiceError};
use crate::loader::read_table;
use crate::persist::{
    embedding_files, read_iteration, read_json, read_manifest, read_table_meta, read_text_options, verify, ArchetypeSummary, ColorFile,
    RunManifest,
};

/// Mutable view state, replaced wholesale on every change.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewState {
    pub archetypes: ArchetypeModel,
    pub visible: Vec<bool>,
    pub pairs: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoredClass {
    pub id: String,
    pub spec: ClassSpec,
    pub attribute: ClassAttribute,
}

#[derive(Debug)]
pub struct RunStore {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub iterations: Vec<IterationResult>,
    index: HashMap<String, usize>,
    pub table: ItemTable,
    pub corpus: Option<PreparedCorpus>,
    pub analysis: RunAnalysis,
    pub layouts: BTreeMap<String, EmbeddingLayout>,
    pub transitions: TransitionCache,
    view: RwLock<Arc<ViewState>>,
    write: Mutex<()>,
    classes: RwLock<BTreeMap<String, Arc<StoredClass>>>,
}

/// Errors a view update can raise, kept apart so the HTTP layer can map
/// them to status codes.
#[derive(Debug, thiserror::Error)]
pub enum UpdateError {
    #[error("unknown iteration `{0}`")]
    UnknownKey(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Service(ServiceError),
}

impl From<ServiceError> for UpdateError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Core(core) => core.into(),
            other => UpdateError::Service(other),
        }
    }
}

impl From<CoreError> for UpdateError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::UnknownIteration(k) => UpdateError::UnknownKey(k),
            CoreError::UnknownGroup { .. } | CoreError::InvalidParameter(_) | CoreError::UnknownLabel(_) => {
                UpdateError::Invalid(e.to_string())
            }
            other => UpdateError::Service(ServiceError::Core(other)),
        }
    }
}

impl RunStore {
    /// Loads a finished run directory, verifying every hashed file.
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest = read_manifest(dir)?;
        verify(dir, &manifest)?;
        let iterations = manifest
            .iteration_keys
            .iter()
            .map(|key| read_iteration(dir, key))
            .collect::<Result<Vec<_>>>()?;
        if iterations.is_empty() {
            return Err(ServiceError::NoIterations);
        }
        let meta = read_table_meta(dir)?;
        let input = InputConfig {
            path: None,
            synthetic: None,
            id_column: "id".into(),
            text_column: (meta.kind == TableKind::Text).then(|| "text".to_owned()),
            attributes: meta.attributes,
        };
        let input_path = dir.join("run/input.csv");
        let file = std::fs::File::open(&input_path).map_err(ServiceError::io(&input_path))?;
        let table = read_table(file, &input)?;
        let corpus = match table.documents() {
            Some(docs) => Some(prepare_corpus(docs, &read_text_options(dir)?)?),
            None => None,
        };

        let stored: ArchetypeSummary = read_json(&dir.join("run/archetypes.json"))?;
        let options = AnalysisOptions {
            threshold: Some(stored.threshold),
            projection_methods: Vec::new(),
            projection_seed: manifest.config.projection.seed,
        };
        let mut analysis = analyze(&iterations, &ProjectionRegistry::default(), &options)?;
        let colors: ColorFile = read_json(&dir.join("run/colors.json"))?;
        analysis.colors = colors.table;
        let mut layouts = BTreeMap::new();
        for (method, path) in embedding_files(dir)? {
            layouts.insert(method, read_json(&path)?);
        }

        let keys: Vec<String> = iterations.iter().map(|it| it.iteration_key.clone()).collect();
        let visible = vec![true; keys.len()];
        let pairs = if keys.len() >= 2 { visible_pairs(&keys, &visible)? } else { Vec::new() };
        let view = ViewState { archetypes: analysis.archetypes.clone(), visible, pairs };
        let index = keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
        Ok(Self {
            dir: dir.to_owned(),
            manifest,
            iterations,
            index,
            table,
            corpus,
            analysis,
            layouts,
            transitions: TransitionCache::default(),
            view: RwLock::new(Arc::new(view)),
            write: Mutex::new(()),
            classes: RwLock::new(BTreeMap::new()),
        })
    }

    pub fn iteration(&self, key: &str) -> Option<&IterationResult> {
        self.index.get(key).map(|&i| &self.iterations[i])
    }

    pub fn keys(&self) -> Vec<String> {
        self.iterations.iter().map(|it| it.iteration_key.clone()).collect()
    }

    pub fn view(&self) -> Arc<ViewState> {
        self.view.read().expect("view lock").clone()
    }

    fn publish(&self, next: ViewState) -> Arc<ViewState> {
        let next = Arc::new(next);
        *self.view.write().expect("view lock") = next.clone();
        next
    }

    pub fn summary(&self, model: &ArchetypeModel) -> ArchetypeSummary {
        ArchetypeSummary::new(model, &self.analysis.colors, self.analysis.default_threshold)
    }

    /// Thresholds accepted by [`set_threshold`](Self::set_threshold): the
    /// sweep range plus the default.
    pub fn valid_threshold(&self, threshold: usize) -> bool {
        threshold == self.analysis.default_threshold || sweep_thresholds(&self.analysis.pooled).contains(&threshold)
    }

    pub fn set_threshold(&self, threshold: usize) -> Result<Arc<ViewState>, UpdateError> {
        if !self.valid_threshold(threshold) {
            let range = sweep_thresholds(&self.analysis.pooled);
            return Err(UpdateError::Invalid(format!(
                "threshold {threshold} outside {}..={} (default {})",
                range.first().copied().unwrap_or(self.analysis.default_threshold),
                range.last().copied().unwrap_or(self.analysis.default_threshold),
                self.analysis.default_threshold
            )));
        }
        let _guard = self.write.lock().expect("writer lock");
        let model = self.analysis.model_at(threshold)?;
        let current = self.view();
        Ok(self.publish(ViewState { archetypes: model, ..(*current).clone() }))
    }

    pub fn set_visible(&self, keys: &[String]) -> Result<Arc<ViewState>, UpdateError> {
        if let Some(bad) = keys.iter().find(|k| !self.index.contains_key(k.as_str())) {
            return Err(UpdateError::UnknownKey(bad.clone()));
        }
        let all = self.keys();
        let visible: Vec<bool> = all.iter().map(|k| keys.contains(k)).collect();
        let pairs = visible_pairs(&all, &visible)?;
        let _guard = self.write.lock().expect("writer lock");
        let current = self.view();
        Ok(self.publish(ViewState { visible, pairs, ..(*current).clone() }))
    }

    pub fn transition(&self, from: &str, to: &str) -> Result<Arc<TransitionMatrix>, UpdateError> {
        let a = self.iteration(from).ok_or_else(|| UpdateError::UnknownKey(from.to_owned()))?;
        let b = self.iteration(to).ok_or_else(|| UpdateError::UnknownKey(to.to_owned()))?;
        Ok(self.transitions.get_or_compute(a, b)?)
    }

    /// Materializes a class, registers it and writes its CSV under
    /// `run/classes/`.
    pub fn add_class(&self, spec: ClassSpec) -> Result<Arc<StoredClass>, UpdateError> {
        for key in spec.iteration_keys() {
            if self.iteration(key).is_none() {
                return Err(UpdateError::UnknownKey(key.to_owned()));
            }
        }
        let attribute = spec.build(|k| self.iteration(k))?;
        let id = spec.id();
        let path = self.class_path(&id);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(ServiceError::io(parent))?;
        }
        let file = std::fs::File::create(&path).map_err(ServiceError::io(&path))?;
        write_class_csv(std::io::BufWriter::new(file), &attribute, &self.table.item_ids, &self.table.attributes)?;
        let stored = Arc::new(StoredClass { id: id.clone(), spec, attribute });
        self.classes.write().expect("class lock").insert(id, stored.clone());
        Ok(stored)
    }

    pub fn class(&self, id: &str) -> Option<Arc<StoredClass>> {
        self.classes.read().expect("class lock").get(id).cloned()
    }

    pub fn class_path(&self, id: &str) -> PathBuf {
        self.dir.join("run/classes").join(format!("{id}.csv"))
    }
}
