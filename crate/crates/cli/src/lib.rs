//! Experiment orchestration: seeded runs, k-sweeps, CSV emission, SVG plots
//! and the fast verification suite.

pub mod config;
pub mod plot;
pub mod runio;
pub mod sweep;
pub mod verify;

pub use config::RunConfig;
