//! Display geometry for pooled groups: 1D axis order, 2D embeddings, colors
//! and violins.

pub mod colors;
pub mod mds;
pub mod tsne;
pub mod violin;

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::archetypes::{PooledMatrix, PooledRow};
use crate::error::{CoreError, Result};

pub use colors::{corner_blend, hex, ColorMode, ColorTable, Rgb, UnitSquare};
pub use mds::{classical_mds, classical_mds_from_distances, MdsResult};
pub use tsne::{tsne_exact, TsneParams, TsneResult};
pub use violin::{channel_violins, split_violins, Channel, ViolinGroup, ViolinStats, GRID_POINTS};

/// A projection of pooled rows to `dims` dimensions.
///
/// Further methods (UMAP and the like) plug in through this trait.
pub trait Projector: Send + Sync {
    fn project(&self, rows: ArrayView2<'_, f64>, dims: usize, seed: u64) -> Result<Projection>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub positions: Array2<f64>,
    pub warnings: Vec<String>,
}

pub struct MdsProjector;

impl Projector for MdsProjector {
    fn project(&self, rows: ArrayView2<'_, f64>, dims: usize, _seed: u64) -> Result<Projection> {
        let r = classical_mds(rows, dims)?;
        Ok(Projection { positions: r.positions, warnings: r.warnings })
    }
}

pub struct TsneProjector {
    pub perplexity: f64,
}

impl Default for TsneProjector {
    fn default() -> Self {
        Self { perplexity: 30.0 }
    }
}

impl Projector for TsneProjector {
    fn project(&self, rows: ArrayView2<'_, f64>, dims: usize, seed: u64) -> Result<Projection> {
        let params = TsneParams { perplexity: self.perplexity, ..TsneParams::new(dims, seed) };
        let r = tsne_exact(rows, &params)?;
        Ok(Projection { positions: r.positions, warnings: r.warnings })
    }
}

/// Named projection methods.
#[derive(Clone)]
pub struct ProjectionRegistry {
    plugins: BTreeMap<String, Arc<dyn Projector>>,
}

impl Default for ProjectionRegistry {
    fn default() -> Self {
        let mut registry = Self { plugins: BTreeMap::new() };
        registry.register("mds", Arc::new(MdsProjector));
        registry.register("tsne", Arc::new(TsneProjector::default()));
        registry
    }
}

impl ProjectionRegistry {
    pub fn register(&mut self, name: &str, projector: Arc<dyn Projector>) {
        self.plugins.insert(name.to_owned(), projector);
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn Projector>> {
        self.plugins.get(name).ok_or_else(|| CoreError::UnknownPlugin(name.to_owned()))
    }

    pub fn names(&self) -> Vec<String> {
        self.plugins.keys().cloned().collect()
    }
}

impl std::fmt::Debug for ProjectionRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProjectionRegistry").field("methods", &self.names()).finish()
    }
}

/// 1D and 2D positions of every pooled row under one projection method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingLayout {
    pub method: String,
    pub seed: u64,
    pub positions_1d: Vec<f64>,
    pub positions_2d: Vec<[f64; 2]>,
    /// Group ids of each iteration in axis order (noise last).
    pub axis_order: BTreeMap<String, Vec<i64>>,
    pub warnings: Vec<String>,
}

pub fn compute_layout(
    registry: &ProjectionRegistry,
    method: &str,
    pooled: &PooledMatrix,
    seed: u64,
) -> Result<EmbeddingLayout> {
    let projector = registry.get(method)?;
    let one = projector.project(pooled.values.view(), 1, seed)?;
    let two = projector.project(pooled.values.view(), 2, seed)?;
    let positions_1d: Vec<f64> = one.positions.column(0).to_vec();
    let positions_2d = two.positions.rows().into_iter().map(|r| [r[0], r[1]]).collect();
    let mut warnings = one.warnings;
    warnings.extend(two.warnings);
    Ok(EmbeddingLayout {
        method: method.to_owned(),
        seed,
        axis_order: order_1d(&pooled.rows, &positions_1d),
        positions_1d,
        positions_2d,
        warnings,
    })
}

/// Per iteration, group ids sorted by 1D position (ties by group id) with
/// the noise group pinned last.
pub fn order_1d(rows: &[PooledRow], positions_1d: &[f64]) -> BTreeMap<String, Vec<i64>> {
    let mut by_iteration: BTreeMap<String, Vec<(bool, f64, i64)>> = BTreeMap::new();
    for (row, &x) in rows.iter().zip(positions_1d) {
        by_iteration.entry(row.iteration_key.clone()).or_default().push((row.is_noise, x, row.group_id));
    }
    by_iteration
        .into_iter()
        .map(|(key, mut groups)| {
            groups.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
            (key, groups.into_iter().map(|(_, _, g)| g).collect())
        })
        .collect()
}
