//! Scenario files, experiment sweeps, CSV/SVG output and brute-force oracles
//! on top of `vfog-core`.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod io;
pub mod oracle;
pub mod svg;

pub use vfog_core as core;
