//! Configuration, on-disk formats and static SVG plots.

pub mod artifacts;
pub mod config;
pub mod output;
pub mod svg;

pub use config::{parse_config, Format, Plots, RunConfig};
pub use output::{Header, Table};
