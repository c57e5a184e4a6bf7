//! Parallel sweep execution with per-iteration crash isolation.

use std::panic::{catch_unwind, AssertUnwindSafe};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sweepscope_core::model::{IterationResult, ItemTable};
use sweepscope_core::projection::ProjectionRegistry;
use sweepscope_core::run::{analyze, fit_iteration, AnalysisOptions, FitOptions, IterationSpec, RunAnalysis, SharedInput};

use crate::config::RunConfig;
use crate::error::{Result, ServiceError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationFailure {
    pub key: String,
    pub error: String,
}

/// A finished sweep: surviving iterations in parameter order plus the
/// run-level analysis.
#[derive(Debug)]
pub struct SweepRun {
    pub config: RunConfig,
    pub shared: SharedInput,
    pub iterations: Vec<IterationResult>,
    pub failures: Vec<IterationFailure>,
    pub analysis: Option<RunAnalysis>,
    pub warnings: Vec<String>,
}

/// Runs `task` over `items` on a pool of `workers` threads. Results come
/// back in input order; a panicking task yields an `Err` with its message.
pub fn run_isolated<T, R, F>(workers: usize, items: &[T], task: F) -> Result<Vec<Result<R, String>>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, String> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ServiceError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        items
            .par_iter()
            .map(|item| match catch_unwind(AssertUnwindSafe(|| task(item))) {
                Ok(result) => result,
                Err(panic) => Err(panic_message(panic.as_ref())),
            })
            .collect()
    }))
}

fn panic_message(panic: &(dyn std::any::Any + Send)) -> String {
    let text = panic
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| panic.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into());
    format!("panicked: {text}")
}

/// Prepares the shared input once, fits every configuration in parallel
/// and analyzes the survivors.
pub fn run_sweep(config: &RunConfig, table: ItemTable) -> Result<SweepRun> {
    let specs = config.iteration_specs()?;
    let shared = SharedInput::prepare(table, &config.text_options()?)?;
    shared.check_method(config.method)?;
    let workers = config.effective_workers();
    info!("running {} iterations on {workers} workers", specs.len());

    let options = FitOptions::default();
    let outcomes = run_isolated(workers, &specs, |spec: &IterationSpec| {
        fit_iteration(&shared, spec, &options).map_err(|e| e.to_string())
    })?;

    let mut iterations = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = shared.warnings.clone();
    for (spec, outcome) in specs.iter().zip(outcomes) {
        match outcome {
            Ok(fitted) => {
                warnings.extend(fitted.warnings.iter().map(|w| format!("{}: {w}", spec.key)));
                iterations.push(fitted.result);
            }
            Err(error) => {
                warn!("iteration {} failed: {error}", spec.key);
                failures.push(IterationFailure { key: spec.key.clone(), error });
            }
        }
    }
    if iterations.is_empty() {
        return Err(ServiceError::NoIterations);
    }

    let analysis_options = AnalysisOptions {
        threshold: config.archetypes.threshold,
        projection_methods: config.projection.methods.clone(),
        projection_seed: config.projection.seed,
    };
    let analysis = match analyze(&iterations, &ProjectionRegistry::default(), &analysis_options) {
        Ok(a) => {
            warnings.extend(a.warnings.iter().cloned());
            Some(a)
        }
        Err(e) => {
            warn!("run analysis skipped: {e}");
            warnings.push(format!("run analysis skipped: {e}"));
            None
        }
    };
    Ok(SweepRun { config: config.clone(), shared, iterations, failures, analysis, warnings })
}
