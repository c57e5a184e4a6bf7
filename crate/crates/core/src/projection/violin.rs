//! Violin data: Gaussian KDE on a fixed grid with one run-wide bandwidth and
//! one run-wide width scale.

use serde::{Deserialize, Serialize};

use crate::linalg::{quantile_sorted, sorted_copy, std_dev};

pub const GRID_POINTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Membership,
    Outlier,
    Split,
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "membership" => Ok(Channel::Membership),
            "outlier" => Ok(Channel::Outlier),
            "split" => Ok(Channel::Split),
            other => Err(format!("unknown violin channel `{other}`")),
        }
    }
}

/// Spacing of the density grid over [0, 1].
pub fn grid_step() -> f64 {
    1.0 / (GRID_POINTS - 1) as f64
}

pub fn grid() -> Vec<f64> {
    (0..GRID_POINTS).map(|i| i as f64 * grid_step()).collect()
}

/// Silverman's rule `0.9 · min(σ, IQR/1.34) · n^(-1/5)` over the pooled
/// values, never narrower than one grid step.
pub fn silverman_bandwidth(pooled: &[f64]) -> f64 {
    let floor = grid_step();
    if pooled.len() < 2 {
        return floor;
    }
    let sorted = sorted_copy(pooled);
    let sigma = std_dev(pooled);
    let iqr = (quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)) / 1.34;
    let spread = match (sigma > 0.0, iqr > 0.0) {
        (true, true) => sigma.min(iqr),
        (true, false) => sigma,
        (false, true) => iqr,
        (false, false) => 0.0,
    };
    (0.9 * spread * (pooled.len() as f64).powf(-0.2)).max(floor)
}

/// Gaussian KDE of `values` evaluated on [`grid`].
pub fn kde(values: &[f64], bandwidth: f64) -> Vec<f64> {
    if values.is_empty() {
        return vec![0.0; GRID_POINTS];
    }
    let norm = 1.0 / (values.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    grid()
        .into_iter()
        .map(|x| norm * values.iter().map(|v| (-0.5 * ((x - v) / bandwidth).powi(2)).exp()).sum::<f64>())
        .collect()
}

/// Input for one group's violin.
#[derive(Clone, Debug)]
pub struct ViolinGroup<'a> {
    pub iteration_key: &'a str,
    pub group_id: i64,
    pub is_noise: bool,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolinStats {
    pub iteration_key: String,
    pub group_id: i64,
    /// `membership` or `outlier`; split mode emits one of each per group.
    pub channel: Channel,
    pub density: Vec<f64>,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub n: usize,
    pub width_scale: f64,
    pub bandwidth: f64,
    pub render_as_bar: bool,
}

/// Violins for one channel over every group of a run. The bandwidth comes
/// from all non-noise values pooled; the width scale makes the widest
/// density across all groups exactly 1.
pub fn channel_violins(groups: &[ViolinGroup<'_>], channel: Channel) -> Vec<ViolinStats> {
    let pooled: Vec<f64> =
        groups.iter().filter(|g| !g.is_noise).flat_map(|g| g.values.iter().copied()).collect();
    let bandwidth = silverman_bandwidth(&pooled);
    let mut out: Vec<ViolinStats> = groups
        .iter()
        .map(|g| {
            let sorted = sorted_copy(&g.values);
            let q = |p: f64| (!sorted.is_empty()).then(|| quantile_sorted(&sorted, p));
            ViolinStats {
                iteration_key: g.iteration_key.to_owned(),
                group_id: g.group_id,
                channel,
                density: kde(&g.values, bandwidth),
                median: q(0.5),
                q1: q(0.25),
                q3: q(0.75),
                n: g.values.len(),
                width_scale: 1.0,
                bandwidth,
                render_as_bar: g.is_noise,
            }
        })
        .collect();
    apply_width_scale(&mut out);
    out
}

fn apply_width_scale(violins: &mut [ViolinStats]) {
    let peak = violins.iter().flat_map(|v| v.density.iter().copied()).fold(0.0, f64::max);
    let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
    for v in violins {
        v.width_scale = scale;
    }
}

/// Split mode: membership and outlier violins per group sharing one width
/// scale, so both halves are drawn to the same budget.
pub fn split_violins(membership: &[ViolinGroup<'_>], outlier: &[ViolinGroup<'_>]) -> Vec<ViolinStats> {
    let mut both = channel_violins(membership, Channel::Membership);
    both.extend(channel_violins(outlier, Channel::Outlier));
    apply_width_scale(&mut both);
    both
}
