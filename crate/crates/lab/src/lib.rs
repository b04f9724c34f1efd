//! Experiment orchestration behind the `lab` binary.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::ExperimentConfig;
pub use experiments::{Experiment, ExperimentRegistry, RunContext, Summary};
pub use output::{write_atomic, RunManifest, RunOutput};

/// Exit codes of the `lab` binary.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const ERROR: u8 = 1;
    pub const VERDICT_FAIL: u8 = 2;
}

pub const THREADS_ENV: &str = "LAB_THREADS";
