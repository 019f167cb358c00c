//! Configuration, CSV tables and SVG plots for the command-line front end.

pub mod config;
pub mod svg;
pub mod tables;

pub use config::{parse_config, ExperimentConfig};
pub use svg::{emit_svg_stepplot, PlotCurve, PlotSpec};
