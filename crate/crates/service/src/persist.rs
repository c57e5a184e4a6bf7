//! On-disk run layout.
//!
//! ```text
//! <out>/manifest.json
//! <out>/status.json
//! <out>/iterations/<key>/{assignments.csv, uncertainty.csv, groups.json, metrics.json}
//! <out>/run/{input.csv, table_meta.json, text_options.json, pooled.csv, archetypes.json, sweep_curve.json,
//!            colors.json, embedding-<method>.json, transitions/<a>__<b>.json, classes/<id>.csv}
//! ```
//!
//! Every file listed in the manifest is hashed; `run_hash` digests the
//! sorted inventory so two runs can be compared with one string.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sweepscope_core::archetypes::{ArchetypeModel, SweepPoint};
use sweepscope_core::metrics::MetricRecord;
use sweepscope_core::model::{GroupRecord, IterationResult, TableKind};
use sweepscope_core::projection::{hex, ColorTable};
use sweepscope_core::text::TextOptions;
use sweepscope_core::transitions::overlap;

use crate::config::RunConfig;
use crate::error::{Result, ServiceError};
use crate::loader::write_table;
use crate::runner::{IterationFailure, SweepRun};

pub const MANIFEST: &str = "manifest.json";
pub const STATUS: &str = "status.json";
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub engine_version: String,
    pub config: RunConfig,
    pub workers: usize,
    pub iteration_keys: Vec<String>,
    pub failures: Vec<IterationFailure>,
    pub files: Vec<FileEntry>,
    pub run_hash: String,
    pub warnings: Vec<String>,
    pub started_at: u64,
    pub finished_at: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Computing,
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStatus {
    pub state: RunState,
    #[serde(default)]
    pub message: Option<String>,
}

/// Metric record of one iteration as stored in `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration_key: String,
    pub param_value: f64,
    pub metrics: MetricRecord,
}

/// Archetype model plus the display data derived from the run color table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSummary {
    pub default_threshold: usize,
    pub threshold: usize,
    pub n_archetypes: usize,
    pub noise_pct: f64,
    pub model: ArchetypeModel,
    pub archetype_colors: Vec<String>,
    pub archetype_positions: Vec<[f64; 2]>,
}

impl ArchetypeSummary {
    pub fn new(model: &ArchetypeModel, colors: &ColorTable, default_threshold: usize) -> Self {
        Self {
            default_threshold,
            threshold: model.threshold,
            n_archetypes: model.n_archetypes(),
            noise_pct: model.noise_pct(),
            archetype_colors: colors.archetype_colors(model).into_iter().map(hex).collect(),
            archetype_positions: colors.archetype_positions(model),
            model: model.clone(),
        }
    }
}

/// How to read `run/input.csv` back.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMeta {
    pub kind: TableKind,
    pub attributes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub default_threshold: usize,
    pub points: Vec<SweepPoint>,
}

/// The run color table with each pooled row's color also given as hex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorFile {
    pub table: ColorTable,
    pub row_hex: Vec<String>,
}

pub fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(ServiceError::io(path))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn transition_file(a: &str, b: &str) -> String {
    format!("run/transitions/{a}__{b}.json")
}

pub fn write_status(dir: &Path, state: RunState, message: Option<String>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(ServiceError::io(dir))?;
    let path = dir.join(STATUS);
    std::fs::write(&path, to_json(&RunStatus { state, message })?).map_err(ServiceError::io(path))
}

pub fn read_status(dir: &Path) -> Option<RunStatus> {
    read_json(&dir.join(STATUS)).ok()
}

/// Collects files relative to the run directory and hashes them as written.
struct Writer {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl Writer {
    fn put(&mut self, relative: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(ServiceError::io(parent))?;
        }
        std::fs::write(&path, bytes).map_err(ServiceError::io(&path))?;
        self.files.push(FileEntry { path: relative.to_owned(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, relative: &str, value: &T) -> Result<()> {
        self.put(relative, &to_json(value)?)
    }

    fn csv(&mut self, relative: &str, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        out.write_record(header)?;
        for row in rows {
            out.write_record(&row)?;
        }
        let bytes = out.into_inner().map_err(|e| ServiceError::Input(e.to_string()))?;
        self.put(relative, &bytes)
    }
}

pub fn run_hash(files: &[FileEntry]) -> String {
    let mut digest = Sha256::new();
    for f in files {
        digest.update(format!("{} {}\n", f.path, f.sha256).as_bytes());
    }
    hex::encode(digest.finalize())
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Writes every artifact of a finished run and its manifest.
pub fn write_run(run: &SweepRun, started_at: u64) -> Result<RunManifest> {
    let dir = &run.config.output_dir;
    let mut w = Writer { root: dir.clone(), files: Vec::new() };
    let ids = &run.shared.table.item_ids;

    for it in &run.iterations {
        let base = format!("iterations/{}", it.iteration_key);
        w.csv(
            &format!("{base}/assignments.csv"),
            &header(&["item_id", "group_id"]),
            ids.iter().zip(&it.assignments).map(|(id, g)| vec![id.clone(), g.to_string()]),
        )?;
        w.csv(
            &format!("{base}/uncertainty.csv"),
            &header(&["item_id", "membership", "outlier"]),
            ids.iter()
                .zip(it.membership.iter().zip(&it.outlier))
                .map(|(id, (m, o))| vec![id.clone(), m.to_string(), o.to_string()]),
        )?;
        w.json(&format!("{base}/groups.json"), &it.groups)?;
        w.json(
            &format!("{base}/metrics.json"),
            &IterationMetrics {
                iteration_key: it.iteration_key.clone(),
                param_value: it.param_value,
                metrics: it.metrics.clone(),
            },
        )?;
    }

    let mut table_csv = Vec::new();
    write_table(&mut table_csv, &run.shared.table)?;
    w.put("run/input.csv", &table_csv)?;
    w.json(
        "run/table_meta.json",
        &TableMeta {
            kind: run.shared.table.kind(),
            attributes: run.shared.table.attributes.keys().cloned().collect(),
        },
    )?;
    w.json("run/text_options.json", &run.config.text_options()?)?;

    if let Some(analysis) = &run.analysis {
        let pooled = &analysis.pooled;
        let dims = pooled.values.ncols();
        let mut names = header(&["iteration_key", "group_id", "is_noise"]);
        names.extend((0..dims).map(|d| format!("v{d}")));
        w.csv(
            "run/pooled.csv",
            &names,
            pooled.rows.iter().zip(pooled.values.rows()).map(|(row, values)| {
                let mut record = vec![row.iteration_key.clone(), row.group_id.to_string(), row.is_noise.to_string()];
                record.extend(values.iter().map(|v| v.to_string()));
                record
            }),
        )?;
        w.json(
            "run/archetypes.json",
            &ArchetypeSummary::new(&analysis.archetypes, &analysis.colors, analysis.default_threshold),
        )?;
        w.json(
            "run/sweep_curve.json",
            &SweepCurve { default_threshold: analysis.default_threshold, points: analysis.sweep_curve.clone() },
        )?;
        w.json(
            "run/colors.json",
            &ColorFile {
                table: analysis.colors.clone(),
                row_hex: analysis.colors.row_colors.iter().map(|c| hex(*c)).collect(),
            },
        )?;
        for (method, layout) in &analysis.layouts {
            w.json(&format!("run/embedding-{method}.json"), layout)?;
        }
    }
    for pair in run.iterations.windows(2) {
        let matrix = overlap(&pair[0], &pair[1])?;
        w.json(&transition_file(&pair[0].iteration_key, &pair[1].iteration_key), &matrix)?;
    }

    w.files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = RunManifest {
        engine_version: ENGINE_VERSION.to_owned(),
        config: run.config.clone(),
        workers: run.config.effective_workers(),
        iteration_keys: run.iterations.iter().map(|it| it.iteration_key.clone()).collect(),
        failures: run.failures.clone(),
        run_hash: run_hash(&w.files),
        files: w.files,
        warnings: run.warnings.clone(),
        started_at,
        finished_at: now_secs(),
    };
    let path = dir.join(MANIFEST);
    std::fs::write(&path, to_json(&manifest)?).map_err(ServiceError::io(&path))?;
    write_status(dir, RunState::Complete, None)?;
    Ok(manifest)
}

/// Checks that every listed file exists with the recorded hash.
pub fn verify(dir: &Path, manifest: &RunManifest) -> Result<()> {
    for f in &manifest.files {
        let path = dir.join(&f.path);
        let bytes = std::fs::read(&path).map_err(ServiceError::io(&path))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(ServiceError::RunDir(dir.to_owned(), format!("{} does not match its hash", f.path)));
        }
    }
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    read_json(&dir.join(MANIFEST))
}

fn read_csv_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let file = std::fs::File::open(path).map_err(ServiceError::io(path))?;
    let mut reader = csv::Reader::from_reader(file);
    Ok(reader.records().collect::<Result<_, _>>()?)
}

fn parse<T: std::str::FromStr>(path: &Path, cell: &str) -> Result<T> {
    cell.parse().map_err(|_| ServiceError::RunDir(path.to_owned(), format!("bad value `{cell}`")))
}

/// Rebuilds one iteration from its four files.
pub fn read_iteration(dir: &Path, key: &str) -> Result<IterationResult> {
    let base = dir.join("iterations").join(key);
    let assignments_path = base.join("assignments.csv");
    let assignments = read_csv_rows(&assignments_path)?
        .iter()
        .map(|r| parse(&assignments_path, &r[1]))
        .collect::<Result<Vec<i64>>>()?;
    let uncertainty_path = base.join("uncertainty.csv");
    let mut membership = Vec::new();
    let mut outlier = Vec::new();
    for r in read_csv_rows(&uncertainty_path)? {
        membership.push(parse(&uncertainty_path, &r[1])?);
        outlier.push(parse(&uncertainty_path, &r[2])?);
    }
    let groups: Vec<GroupRecord> = read_json(&base.join("groups.json"))?;
    let metrics: IterationMetrics = read_json(&base.join("metrics.json"))?;
    Ok(IterationResult {
        iteration_key: key.to_owned(),
        param_value: metrics.param_value,
        assignments,
        membership,
        outlier,
        groups,
        metrics: metrics.metrics,
    })
}

pub fn read_table_meta(dir: &Path) -> Result<TableMeta> {
    read_json(&dir.join("run/table_meta.json"))
}

pub fn read_text_options(dir: &Path) -> Result<TextOptions> {
    read_json(&dir.join("run/text_options.json"))
}

/// Keyed lookup of the embedding files present in a run directory.
pub fn embedding_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let run = dir.join("run");
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(&run).map_err(ServiceError::io(&run))? {
        let path = entry.map_err(ServiceError::io(&run))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(method) = name.strip_prefix("embedding-").and_then(|n| n.strip_suffix(".json")) {
            out.insert(method.to_owned(), path.clone());
        }
    }
    Ok(out)
}
