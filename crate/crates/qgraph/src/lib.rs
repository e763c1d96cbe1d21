//! File formats, parallel sweep execution and the `qgraph` command line,
//! built on the numerical core in `qgraph-core`.

pub mod approx;
pub mod cli;
pub mod error;
pub mod fat_file;
pub mod graph_file;
pub mod json;
pub mod sweep_file;

pub use error::{Error, Result};
