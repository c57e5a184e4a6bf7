//! The CLI subcommands as plain functions.

use std::path::{Path, PathBuf};

use log::info;

use sweepscope_core::synthetic::{generate, SyntheticSpec};

use crate::classes::ClassSpec;
use crate::config::RunConfig;
use crate::error::{Result, ServiceError};
use crate::loader::{load_input, write_generated};
use crate::persist::{now_secs, to_json, write_run, write_status, ArchetypeSummary, RunManifest, RunState};
use crate::runner::run_sweep;
use crate::store::{RunStore, UpdateError};

/// Runs a config end to end and persists the results.
pub fn run(config: &RunConfig) -> Result<RunManifest> {
    let started = now_secs();
    let dir = &config.output_dir;
    write_status(dir, RunState::Computing, None)?;
    let outcome = load_input(&config.input).and_then(|table| run_sweep(config, table)).and_then(|run| {
        info!("{} iterations finished, {} failed", run.iterations.len(), run.failures.len());
        write_run(&run, started)
    });
    if let Err(e) = &outcome {
        write_status(dir, RunState::Failed, Some(e.to_string()))?;
    }
    outcome
}

pub fn run_file(path: &Path, workers: Option<usize>) -> Result<RunManifest> {
    let mut config = RunConfig::load(path)?;
    if workers.is_some() {
        config.workers = workers;
        config.validate()?;
    }
    run(&config)
}

fn update_error(e: UpdateError) -> ServiceError {
    match e {
        UpdateError::Service(inner) => inner,
        other => ServiceError::Rejected(other.to_string()),
    }
}

/// Parses a class spec given inline as JSON or as a path to a JSON file.
pub fn parse_class_spec(spec: &str) -> Result<ClassSpec> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_owned()
    } else {
        std::fs::read_to_string(spec).map_err(ServiceError::io(spec))?
    };
    Ok(serde_json::from_str(&text)?)
}

/// Materializes a class attribute and returns the CSV path under the run.
pub fn export_class(dir: &Path, spec: ClassSpec, out: Option<&Path>) -> Result<PathBuf> {
    let store = RunStore::open(dir)?;
    let class = store.add_class(spec).map_err(update_error)?;
    let written = store.class_path(&class.id);
    if let Some(out) = out {
        std::fs::copy(&written, out).map_err(ServiceError::io(out))?;
        return Ok(out.to_owned());
    }
    Ok(written)
}

/// Recomputes the archetype model at `threshold`, writes it next to the
/// original as `run/archetypes-threshold-<t>.json` and returns it.
pub fn recompute_archetypes(dir: &Path, threshold: usize) -> Result<(PathBuf, ArchetypeSummary)> {
    let store = RunStore::open(dir)?;
    let view = store.set_threshold(threshold).map_err(update_error)?;
    let summary = store.summary(&view.archetypes);
    let path = dir.join(format!("run/archetypes-threshold-{threshold}.json"));
    std::fs::write(&path, to_json(&summary)?).map_err(ServiceError::io(&path))?;
    Ok((path, summary))
}

/// Reads a generator spec from TOML (or JSON by extension).
pub fn read_synthetic_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = std::fs::read_to_string(path).map_err(ServiceError::io(path))?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| ServiceError::Config(e.to_string()))
    }
}

pub fn generate_table(spec: &SyntheticSpec, out: &Path) -> Result<usize> {
    let data = generate(spec)?;
    write_generated(out, &data)?;
    Ok(data.table.n_items())
}
