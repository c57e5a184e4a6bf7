//! Sweep engine: grouping methods, per-item uncertainty, quality metrics,
//! recurrent archetypes, transitions and display geometry.

pub mod archetypes;
pub mod error;
pub mod linalg;
pub mod methods;
pub mod metrics;
pub mod model;
pub mod projection;
pub mod run;
pub mod synthetic;
pub mod text;
pub mod transitions;
pub mod uncertainty;

pub use error::{CoreError, Result};
