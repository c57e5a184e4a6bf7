//! Sweep orchestration for `sweepscope-core`: TOML run configs, parallel
//! execution, the on-disk artifact layout and the HTTP API.

pub mod classes;
pub mod commands;
pub mod config;
pub mod error;
pub mod http;
pub mod loader;
pub mod persist;
pub mod runner;
pub mod store;

pub use error::{Result, ServiceError};
