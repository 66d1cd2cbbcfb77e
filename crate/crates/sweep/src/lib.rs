//! Parameter sweeps over the GKP readout simulator and their tabular output.

pub mod config;
pub mod error;
pub mod report;
pub mod sweep;
pub mod table;

pub use config::{ConfigError, SweepConfig};
pub use error::SweepError;
pub use sweep::{run_fig1a, run_fig1b, run_fig1c};
pub use table::{Strategy, SweepRow};
