//! Position-based colors: a shared MDS layout blended from four corner colors.

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::archetypes::{ArchetypeModel, PooledMatrix};
use crate::error::Result;
use crate::model::NOISE;
use crate::projection::mds::classical_mds;

pub type Rgb = [u8; 3];

pub const RED: Rgb = [255, 0, 0];
pub const YELLOW: Rgb = [255, 255, 0];
pub const BLUE: Rgb = [0, 0, 255];
pub const GREEN: Rgb = [0, 255, 0];
pub const MID_GRAY: Rgb = [128, 128, 128];

/// Bilinear blend of red (0,0), yellow (1,0), blue (0,1) and green (1,1).
pub fn corner_blend(u: f64, v: f64) -> Rgb {
    let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
    let weights = [(1.0 - u) * (1.0 - v), u * (1.0 - v), (1.0 - u) * v, u * v];
    let mut out = [0u8; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let value: f64 = [RED, YELLOW, BLUE, GREEN].iter().zip(weights).map(|(corner, w)| corner[c] as f64 * w).sum();
        *slot = value.round().clamp(0.0, 255.0) as u8;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorMode {
    ByItem,
    ByArchetype,
}

/// Normalization of a 2D layout onto the unit square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitSquare {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl UnitSquare {
    pub fn fit(points: &Array2<f64>) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for row in points.rows() {
            for a in 0..2 {
                min[a] = min[a].min(row[a]);
                max[a] = max[a].max(row[a]);
            }
        }
        Self { min, max }
    }

    pub fn is_degenerate(&self) -> bool {
        (0..2).all(|a| !(self.max[a] - self.min[a] > 1e-12))
    }

    /// Position in the unit square; a flat axis maps to 0.5.
    pub fn normalize(&self, p: [f64; 2]) -> [f64; 2] {
        let mut out = [0.5; 2];
        for a in 0..2 {
            let span = self.max[a] - self.min[a];
            if span > 1e-12 {
                out[a] = ((p[a] - self.min[a]) / span).clamp(0.0, 1.0);
            }
        }
        out
    }

    pub fn color(&self, p: [f64; 2]) -> Rgb {
        if self.is_degenerate() {
            return MID_GRAY;
        }
        let [u, v] = self.normalize(p);
        corner_blend(u, v)
    }
}

/// The run's single color table, computed once and never changed by
/// projection or threshold choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorTable {
    pub square: UnitSquare,
    /// MDS position of every pooled row.
    pub row_positions: Vec<[f64; 2]>,
    pub row_colors: Vec<Rgb>,
    /// MDS position of each archetype centroid, by threshold.
    pub centroid_positions: BTreeMap<usize, Vec<[f64; 2]>>,
}

impl ColorTable {
    /// Lays out the pooled rows together with the centroids of every given
    /// archetype model, then colors rows by position.
    pub fn build(pooled: &PooledMatrix, models: &[&ArchetypeModel]) -> Result<(Self, Vec<String>)> {
        let n = pooled.n_rows();
        let dims = pooled.values.ncols();
        let mut stacked = pooled.values.clone();
        let mut owners = Vec::new();
        for model in models {
            for (a, c) in model.centroids.iter().enumerate() {
                stacked.push(Axis(0), ndarray::ArrayView1::from(c)).expect("same width");
                owners.push((model.threshold, a));
            }
        }
        debug_assert_eq!(stacked.ncols(), dims);
        let mds = classical_mds(stacked.view(), 2)?;
        let pos = |i: usize| [mds.positions[[i, 0]], mds.positions[[i, 1]]];
        let square = UnitSquare::fit(&mds.positions);
        let row_positions: Vec<[f64; 2]> = (0..n).map(pos).collect();
        let row_colors = row_positions.iter().map(|p| square.color(*p)).collect();
        let mut centroid_positions: BTreeMap<usize, Vec<[f64; 2]>> = BTreeMap::new();
        for (k, (threshold, _)) in owners.iter().enumerate() {
            centroid_positions.entry(*threshold).or_default().push(pos(n + k));
        }
        Ok((Self { square, row_positions, row_colors, centroid_positions }, mds.warnings))
    }

    /// Layout position of each archetype centroid of `model`.
    ///
    /// Thresholds laid out at build time use their stored positions; any
    /// other model places a centroid at the mean of its members' positions,
    /// which is where the linear MDS map sends a mean of rows.
    pub fn archetype_positions(&self, model: &ArchetypeModel) -> Vec<[f64; 2]> {
        if let Some(stored) = self.centroid_positions.get(&model.threshold) {
            if stored.len() == model.n_archetypes() {
                return stored.clone();
            }
        }
        let mut sums = vec![[0.0; 2]; model.n_archetypes()];
        let mut counts = vec![0usize; model.n_archetypes()];
        for (row, &label) in model.labels.iter().enumerate() {
            if label != NOISE {
                let a = label as usize;
                sums[a][0] += self.row_positions[row][0];
                sums[a][1] += self.row_positions[row][1];
                counts[a] += 1;
            }
        }
        sums.iter().zip(&counts).map(|(s, &c)| [s[0] / c as f64, s[1] / c as f64]).collect()
    }

    pub fn archetype_colors(&self, model: &ArchetypeModel) -> Vec<Rgb> {
        self.archetype_positions(model).into_iter().map(|p| self.square.color(p)).collect()
    }

    /// Color per pooled row. In archetype mode rows take their archetype's
    /// color; idiosyncratic rows keep their own.
    pub fn colors(&self, model: &ArchetypeModel, mode: ColorMode) -> Vec<Rgb> {
        match mode {
            ColorMode::ByItem => self.row_colors.clone(),
            ColorMode::ByArchetype => {
                let archetype = self.archetype_colors(model);
                model
                    .labels
                    .iter()
                    .zip(&self.row_colors)
                    .map(|(&l, own)| if l == NOISE { *own } else { archetype[l as usize] })
                    .collect()
            }
        }
    }
}

/// Hex string such as `#ff8000`.
pub fn hex(color: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", color[0], color[1], color[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn corners_and_center() {
        assert_eq!(corner_blend(0.0, 0.0), RED);
        assert_eq!(corner_blend(1.0, 0.0), YELLOW);
        assert_eq!(corner_blend(0.0, 1.0), BLUE);
        assert_eq!(corner_blend(1.0, 1.0), GREEN);
        // (255+255+0+0)/4, (0+255+0+255)/4, (0+0+255+0)/4
        assert_eq!(corner_blend(0.5, 0.5), [128, 128, 64]);
    }

    #[test]
    fn degenerate_layout_is_gray() {
        let square = UnitSquare::fit(&array![[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(square.color([1.0, 1.0]), MID_GRAY);
    }

    #[test]
    fn layout_corners_get_corner_colors() {
        let square = UnitSquare::fit(&array![[0.0, 0.0], [2.0, 4.0], [1.0, 1.0]]);
        assert_eq!(square.color([0.0, 0.0]), RED);
        assert_eq!(square.color([2.0, 4.0]), GREEN);
        assert_eq!(hex(square.color([2.0, 0.0])), "#ffff00");
    }
}
