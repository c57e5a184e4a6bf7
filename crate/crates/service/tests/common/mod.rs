#![allow(dead_code)]

use std::path::Path;

use sweepscope::config::RunConfig;

pub fn config(body: &str, out: &Path) -> RunConfig {
    let config = RunConfig::from_toml(&format!("output_dir = {:?}\n{body}", out.display().to_string())).unwrap();
    config.validate().unwrap();
    config
}

pub const BLOBS: &str = r#"
method = "kmeans"
[input.synthetic]
kind = "blobs"
n_items = 90
n_blobs = 3
seed = 7
[sweep]
parameter = "k"
range = { start = 2, stop = 6, step = 1 }
[fixed]
seed = 0
[projection]
methods = ["mds", "tsne"]
seed = 1
"#;

pub const MOONS: &str = r#"
method = "dbscan"
[input.synthetic]
kind = "moons_noise"
n_items = 200
noise_fraction = 0.1
seed = 2
[sweep]
parameter = "eps"
range = { start = 0.1, stop = 0.5, step = 0.1 }
[fixed]
min_samples = 5
[projection]
methods = ["mds"]
seed = 0
"#;

pub const TOPICS: &str = r#"
method = "nmf"
[input.synthetic]
kind = "planted_topics"
n_docs = 120
n_topics = 3
seed = 4
[sweep]
parameter = "k"
values = [2, 3, 4]
[fixed]
seed = 0
[projection]
methods = ["mds"]
seed = 0
"#;
