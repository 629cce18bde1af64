//! Monte Carlo harness. Runs the multi-block tracking loop for every design
//! and writes the averaged curves consumed by the plotting scripts.

pub mod config;
pub mod csv;
pub mod run;

pub use config::{ExperimentConfig, Method, ResolvedConfig};
pub use csv::{emit_csv, format_csv, parse_csv};
pub use run::{run_experiment, CurvePoint, ExperimentOutput};
