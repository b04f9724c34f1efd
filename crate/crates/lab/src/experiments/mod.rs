//! One strategy object per subcommand.

use std::collections::BTreeMap;

use anyhow::Result;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::output::RunOutput;

mod decay;
mod exponents;
mod homotopy;
mod signature;
mod spectrum;
pub mod verify;

pub use verify::{run_suite, SuiteOptions, SuiteReport};

pub struct RunContext<'a> {
    pub config: &'a ExperimentConfig,
    pub perturb_star: bool,
}

/// What a run prints: a human table and the `--json` form.
pub struct Summary {
    pub text: String,
    pub json: Value,
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    /// Whether the run can proceed without `--config`.
    fn config_optional(&self) -> bool {
        false
    }
    /// Writes artifacts and verdicts into `out`. Verdict failures are
    /// recorded, not returned as errors.
    fn run(&self, ctx: &RunContext, out: &mut RunOutput) -> Result<Summary>;
}

pub struct ExperimentRegistry {
    experiments: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn empty() -> Self {
        Self {
            experiments: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(spectrum::Spectrum));
        r.register(Box::new(decay::Decay));
        r.register(Box::new(homotopy::Homotopy));
        r.register(Box::new(exponents::Exponents));
        r.register(Box::new(signature::Signature));
        r.register(Box::new(verify::Verify));
        r
    }

    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.experiments.insert(e.name(), e);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.experiments.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Option<&dyn Experiment> {
        self.experiments.get(name).map(|e| e.as_ref())
    }
}

/// `"PASS"` / `"FAIL"`.
pub fn mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
