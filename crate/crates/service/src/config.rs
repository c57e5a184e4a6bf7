//! Declarative run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sweepscope_core::methods::{HdbscanParams, KMeansParams, NmfParams};
use sweepscope_core::model::{format_param, seed_key, Method};
use sweepscope_core::run::{IterationSpec, MethodParams};
use sweepscope_core::synthetic::SyntheticSpec;
use sweepscope_core::text::TextOptions;

use crate::error::{Result, ServiceError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub input: InputConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub fixed: FixedParams,
    #[serde(default)]
    pub preprocessing: Preprocessing,
    /// Worker threads; defaults to one less than the number of cores.
    #[serde(default)]
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub projection: ProjectionConfig,
    #[serde(default)]
    pub archetypes: ArchetypeConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default = "default_id_column")]
    pub id_column: String,
    /// Column holding documents; its presence makes the table a corpus.
    pub text_column: Option<String>,
    /// Columns carried through to exports instead of being used as features.
    #[serde(default)]
    pub attributes: Vec<String>,
}

fn default_id_column() -> String {
    "id".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub range: Option<RangeSpec>,
    pub values: Option<Vec<f64>>,
    /// Secondary sweep: every parameter value is run once per seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

/// Inclusive `start..=stop` in steps of `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl RangeSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        let RangeSpec { start, stop, step } = *self;
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
            return Err(ServiceError::Config(format!("empty or invalid range {start}..{stop} step {step}")));
        }
        // tolerate float drift at the upper end (0.05 * 20 != 1.0 exactly)
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        let digits = decimals(step).max(decimals(start));
        let scale = 10f64.powi(digits as i32);
        Ok((0..count).map(|i| ((start + i as f64 * step) * scale).round() / scale).collect())
    }
}

/// Decimal places needed to print `v` (capped at 12).
fn decimals(v: f64) -> usize {
    let text = format_param(v);
    text.split_once('.').map_or(0, |(_, frac)| frac.len()).min(12)
}

/// Parameters held fixed across the sweep.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub eps: Option<f64>,
    pub min_samples: Option<usize>,
    pub min_cluster_size: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preprocessing {
    /// Plain-text stopword list, one term per line.
    pub stopwords_path: Option<PathBuf>,
    pub min_df: Option<usize>,
    pub n_bigrams: Option<usize>,
    pub max_unigrams: Option<usize>,
    pub max_bigrams: Option<usize>,
    #[serde(default)]
    pub strip_patterns: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionConfig {
    pub methods: Vec<String>,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self { methods: vec!["mds".into(), "tsne".into()], seed: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchetypeConfig {
    pub threshold: Option<usize>,
}

fn allowed_parameters(method: Method) -> &'static [&'static str] {
    match method {
        Method::Nmf | Method::Kmeans => &["k", "seed", "max_iter", "tol"],
        Method::Dbscan => &["eps", "min_samples"],
        Method::Hdbscan => &["min_cluster_size", "min_samples"],
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(ServiceError::io(path))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output_dir);
        if let Some(p) = self.input.path.as_mut() {
            join(p);
        }
        if let Some(p) = self.preprocessing.stopwords_path.as_mut() {
            join(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.path.is_some() == self.input.synthetic.is_some() {
            return Err(ServiceError::Config("input needs exactly one of `path` or `synthetic`".into()));
        }
        let allowed = allowed_parameters(self.method);
        let name = self.sweep.parameter.as_str();
        if !allowed.contains(&name) || name == "seed" {
            return Err(ServiceError::Config(format!(
                "parameter `{name}` cannot be swept for {}",
                self.method.name()
            )));
        }
        let fixed = [
            ("k", self.fixed.k.is_some()),
            ("seed", self.fixed.seed.is_some()),
            ("max_iter", self.fixed.max_iter.is_some()),
            ("tol", self.fixed.tol.is_some()),
            ("eps", self.fixed.eps.is_some()),
            ("min_samples", self.fixed.min_samples.is_some()),
            ("min_cluster_size", self.fixed.min_cluster_size.is_some()),
        ];
        for (param, set) in fixed {
            if set && !allowed.contains(&param) {
                return Err(ServiceError::Config(format!("`{param}` does not apply to {}", self.method.name())));
            }
            if set && param == name {
                return Err(ServiceError::Config(format!("`{param}` is both swept and fixed")));
            }
        }
        if !self.sweep.seeds.is_empty() {
            if !allowed.contains(&"seed") {
                return Err(ServiceError::Config(format!("{} takes no seed", self.method.name())));
            }
            if self.fixed.seed.is_some() {
                return Err(ServiceError::Config("give either a seed list or a fixed seed".into()));
            }
        }
        if self.method == Method::Dbscan && name != "eps" && self.fixed.eps.is_none() {
            return Err(ServiceError::Config("dbscan needs `eps`".into()));
        }
        if self.workers == Some(0) {
            return Err(ServiceError::Config("workers must be at least 1".into()));
        }
        self.iteration_specs().map(|_| ())
    }

    pub fn parameter_values(&self) -> Result<Vec<f64>> {
        let values = match (&self.sweep.range, &self.sweep.values) {
            (Some(range), None) => range.values()?,
            (None, Some(values)) => values.clone(),
            _ => return Err(ServiceError::Config("sweep needs exactly one of `range` or `values`".into())),
        };
        if values.is_empty() {
            return Err(ServiceError::Config("sweep range is empty".into()));
        }
        Ok(values)
    }

    /// One spec per configuration: parameter-major, then seed.
    pub fn iteration_specs(&self) -> Result<Vec<IterationSpec>> {
        let seeds: Vec<Option<u64>> = if self.sweep.seeds.is_empty() {
            vec![None]
        } else {
            self.sweep.seeds.iter().map(|&s| Some(s)).collect()
        };
        let mut specs = Vec::new();
        for value in self.parameter_values()? {
            for &seed in &seeds {
                let key = match seed {
                    Some(s) => format!("{}_{}", format_param(value), seed_key(s)),
                    None => format_param(value),
                };
                let params = self.params_for(value, seed.or(self.fixed.seed).unwrap_or(0))?;
                specs.push(IterationSpec { key, param_value: value, params });
            }
        }
        let mut keys: Vec<&str> = specs.iter().map(|s| s.key.as_str()).collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(ServiceError::Config("sweep values produce duplicate iteration keys".into()));
        }
        Ok(specs)
    }

    fn params_for(&self, value: f64, seed: u64) -> Result<MethodParams> {
        let name = self.sweep.parameter.as_str();
        let count = |fixed: Option<usize>, param: &str| -> Result<usize> {
            if name == param {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(ServiceError::Config(format!("`{param}` takes positive integers, got {value}")));
                }
                Ok(value as usize)
            } else {
                fixed.ok_or_else(|| ServiceError::Config(format!("`{param}` is neither swept nor fixed")))
            }
        };
        let f = &self.fixed;
        Ok(match self.method {
            Method::Kmeans => {
                let mut p = KMeansParams::new(count(f.k, "k")?, seed);
                p.max_iter = f.max_iter.unwrap_or(p.max_iter);
                p.tol = f.tol.unwrap_or(p.tol);
                MethodParams::Kmeans(p)
            }
            Method::Nmf => {
                let mut p = NmfParams::new(count(f.k, "k")?, seed);
                p.max_iter = f.max_iter.unwrap_or(p.max_iter);
                p.tol = f.tol.unwrap_or(p.tol);
                MethodParams::Nmf(p)
            }
            Method::Dbscan => {
                let eps = if name == "eps" { value } else { f.eps.unwrap_or_default() };
                MethodParams::Dbscan { eps, min_samples: count(f.min_samples.or(Some(5)), "min_samples")? }
            }
            Method::Hdbscan => {
                let mut p = HdbscanParams::new(count(f.min_cluster_size, "min_cluster_size")?);
                if name == "min_samples" || f.min_samples.is_some() {
                    p.min_samples = Some(count(f.min_samples, "min_samples")?);
                }
                MethodParams::Hdbscan(p)
            }
        })
    }

    pub fn text_options(&self) -> Result<TextOptions> {
        let p = &self.preprocessing;
        let defaults = TextOptions::default();
        let stopwords = match &p.stopwords_path {
            Some(path) => std::fs::read_to_string(path)
                .map_err(ServiceError::io(path))?
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
            None => Vec::new(),
        };
        Ok(TextOptions {
            stopwords,
            min_df: p.min_df.unwrap_or(defaults.min_df),
            strip_patterns: p.strip_patterns.clone(),
            n_bigrams: p.n_bigrams.unwrap_or(defaults.n_bigrams),
            max_unigrams: p.max_unigrams,
            max_bigrams: p.max_bigrams,
        })
    }

    /// Worker count actually used: the configured value or `max(1, cores - 1)`.
    pub fn effective_workers(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
            cores.saturating_sub(1).max(1)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(body: &str) -> Result<RunConfig> {
        let c = RunConfig::from_toml(body)?;
        c.validate()?;
        Ok(c)
    }

    const BASE: &str = r#"
        output_dir = "out"
        [input.synthetic]
        kind = "blobs"
        n_items = 30
        n_blobs = 3
    "#;

    #[test]
    fn integer_range_gives_ordered_keys() {
        let c = config(&format!("method = \"kmeans\"\n{BASE}\n[sweep]\nparameter = \"k\"\nrange = {{ start = 3, stop = 8, step = 1 }}")).unwrap();
        let keys: Vec<String> = c.iteration_specs().unwrap().into_iter().map(|s| s.key).collect();
        assert_eq!(keys, ["3", "4", "5", "6", "7", "8"]);
    }

    #[test]
    fn epsilon_range_has_twenty_values() {
        let c = config(&format!(
            "method = \"dbscan\"\n{BASE}\n[sweep]\nparameter = \"eps\"\nrange = {{ start = 0.05, stop = 1.0, step = 0.05 }}\n[fixed]\nmin_samples = 150"
        ))
        .unwrap();
        let specs = c.iteration_specs().unwrap();
        assert_eq!(specs.len(), 20);
        assert_eq!(specs[2].key, "0.15");
        assert_eq!(specs[19].key, "1");
        assert_eq!(specs[0].params, MethodParams::Dbscan { eps: 0.05, min_samples: 150 });
    }

    #[test]
    fn seed_list_multiplies_iterations() {
        let c = config(&format!("method = \"kmeans\"\n{BASE}\n[sweep]\nparameter = \"k\"\nvalues = [2, 3]\nseeds = [1, 2]")).unwrap();
        let keys: Vec<String> = c.iteration_specs().unwrap().into_iter().map(|s| s.key).collect();
        assert_eq!(keys, ["2_seed-1", "2_seed-2", "3_seed-1", "3_seed-2"]);
    }

    #[test]
    fn incompatible_parameters_are_rejected() {
        let eps_for_kmeans = format!("method = \"kmeans\"\n{BASE}\n[sweep]\nparameter = \"eps\"\nvalues = [0.1]");
        assert!(matches!(config(&eps_for_kmeans), Err(ServiceError::Config(_))));
        let fixed_eps = format!("method = \"kmeans\"\n{BASE}\n[sweep]\nparameter = \"k\"\nvalues = [2]\n[fixed]\neps = 0.3");
        assert!(matches!(config(&fixed_eps), Err(ServiceError::Config(_))));
        let empty = format!("method = \"kmeans\"\n{BASE}\n[sweep]\nparameter = \"k\"\nrange = {{ start = 5, stop = 2, step = 1 }}");
        assert!(matches!(config(&empty), Err(ServiceError::Config(_))));
        let fractional = format!("method = \"kmeans\"\n{BASE}\n[sweep]\nparameter = \"k\"\nvalues = [2.5]");
        assert!(matches!(config(&fractional), Err(ServiceError::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let body = format!("method = \"kmeans\"\nfoo = 1\n{BASE}\n[sweep]\nparameter = \"k\"\nvalues = [2]");
        assert!(config(&body).is_err());
    }
}
