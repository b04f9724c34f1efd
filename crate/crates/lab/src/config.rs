//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sigop::metric::{
    exponents_lp_derivable, exponents_quasiconformal, ExponentLedger, MetricField, MetricRegistry,
    MetricSpec, DEFAULT_FLOOR,
};
use sigop::spectral::decay::DEFAULT_WINDOW;
use sigop::spectral::solver::SolverOptions;
use sigop::PeriodicGrid;

pub const MAX_RESOLUTION: usize = 256;

/// A single resolution or a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolutions {
    One(usize),
    Many(Vec<usize>),
}

impl Resolutions {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            Resolutions::One(r) => vec![*r],
            Resolutions::Many(v) => v.clone(),
        }
    }
}

/// Where the integrability exponents of a run come from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LedgerSource {
    /// Quasi-conformal atlas with chart derivatives in `L^p`.
    Quasiconformal { p: f64 },
    /// `L^p`-derivable atlas.
    LpDerivable { p: f64 },
    Explicit {
        p_m: f64,
        q_m: f64,
        p_m_plus: f64,
        q_m_plus: f64,
        #[serde(rename = "B", default)]
        floor: Option<f64>,
    },
    /// Every exponent equal to 2.
    Flat,
    /// `lp_derivable` with the metric's declared `p_int`; flat when it is
    /// infinite.
    #[default]
    FromMetric,
}

impl LedgerSource {
    pub fn resolve(&self, n: usize, metric: Option<&MetricField>) -> sigop::Result<ExponentLedger> {
        match self {
            LedgerSource::Quasiconformal { p } => exponents_quasiconformal(n, *p),
            LedgerSource::LpDerivable { p } => exponents_lp_derivable(n, *p),
            LedgerSource::Explicit {
                p_m,
                q_m,
                p_m_plus,
                q_m_plus,
                floor,
            } => ExponentLedger::new(
                n,
                *p_m,
                *q_m,
                *p_m_plus,
                *q_m_plus,
                floor.unwrap_or(DEFAULT_FLOOR),
            ),
            LedgerSource::Flat => Ok(ExponentLedger::flat(n)),
            LedgerSource::FromMetric => match metric.map(|g| g.p_int()) {
                Some(p) if p.is_finite() => exponents_lp_derivable(n, p),
                _ => Ok(ExponentLedger::flat(n)),
            },
        }
    }

    /// Distance of the structure's `p` above its admissibility threshold.
    pub fn threshold_distance(&self, n: usize) -> Option<f64> {
        match self {
            LedgerSource::Quasiconformal { p } => Some(p - n as f64),
            LedgerSource::LpDerivable { p } => Some(p - sigop::metric::ledger::lp_threshold(n)),
            _ => None,
        }
    }
}

fn default_steps() -> usize {
    10
}
fn default_count() -> usize {
    200
}
fn default_window() -> (f64, f64) {
    DEFAULT_WINDOW
}
fn default_metric() -> MetricSpec {
    MetricSpec::flat()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolutions>,
    #[serde(default = "default_metric")]
    pub metric: MetricSpec,
    /// Serialized `MetricField` to use instead of `metric`; relative paths
    /// resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_file: Option<PathBuf>,
    /// Endpoint `g₁` of a homotopy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_end: Option<MetricSpec>,
    #[serde(default)]
    pub ledger: LedgerSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger_end: Option<LedgerSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Number of singular values requested per solve.
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_window")]
    pub window: (f64, f64),
    /// Decay only: fit injected `μ_j = j^{-1/n(g)}` instead of solving.
    #[serde(default)]
    pub synthetic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub seed: u64,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map_or(1, |i| i + 1)
}

impl ExperimentConfig {
    pub fn minimal(n: usize) -> Self {
        serde_json::from_value(serde_json::json!({ "n": n })).expect("minimal config")
    }

    /// Reads, parses and validates; errors carry `path:line`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: Self = serde_json::from_str(&text).map_err(|e| {
            anyhow!(
                "{}:{}:{}: {}",
                path.display(),
                e.line(),
                e.column(),
                strip_position(&e)
            )
        })?;
        if let (Some(file), Some(dir)) = (&config.metric_file, path.parent()) {
            if file.is_relative() {
                config.metric_file = Some(dir.join(file));
            }
        }
        config
            .validate()
            .map_err(|(key, msg)| anyhow!("{}:{}: {msg}", path.display(), line_of(&text, key)))?;
        Ok(config)
    }

    /// Checks ranges; the error names the offending key.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if !(1..=4).contains(&self.n) {
            return Err(("n", format!("n = {} not in [1, 4]", self.n)));
        }
        if let Some(r) = &self.resolution {
            let list = r.to_vec();
            if list.is_empty() {
                return Err(("N", "empty resolution list".into()));
            }
            if let Some(bad) = list.iter().find(|&&x| !(4..=MAX_RESOLUTION).contains(&x)) {
                return Err(("N", format!("N = {bad} not in [4, {MAX_RESOLUTION}]")));
            }
        }
        if self.steps == 0 {
            return Err(("steps", "steps must be at least 1".into()));
        }
        if self.count == 0 {
            return Err(("count", "count must be at least 1".into()));
        }
        let (lo, hi) = self.window;
        if !(0.0..1.0).contains(&lo) || !(lo < hi && hi <= 1.0) {
            return Err((
                "window",
                format!("window [{lo}, {hi}] must satisfy 0 ≤ lo < hi ≤ 1"),
            ));
        }
        if let Some(file) = &self.metric_file {
            if !file.is_file() {
                return Err((
                    "metric_file",
                    format!("metric file {} does not exist", file.display()),
                ));
            }
        }
        let registry = MetricRegistry::with_defaults();
        for (key, spec) in [
            ("metric", Some(&self.metric)),
            ("metric_end", self.metric_end.as_ref()),
        ] {
            if let Some(spec) = spec {
                if !registry.names().contains(&spec.kind.as_str()) {
                    return Err((
                        key,
                        format!(
                            "unknown metric kind {:?}; known: {:?}",
                            spec.kind,
                            registry.names()
                        ),
                    ));
                }
            }
        }
        if let Some(e) = &self.experiment {
            if !crate::experiments::ExperimentRegistry::with_defaults()
                .names()
                .contains(&e.as_str())
            {
                return Err(("experiment", format!("unknown experiment {e:?}")));
            }
        }
        Ok(())
    }

    pub fn resolutions(&self) -> Result<Vec<usize>> {
        self.resolution
            .as_ref()
            .map(Resolutions::to_vec)
            .ok_or_else(|| anyhow!("config is missing \"N\""))
    }

    pub fn single_resolution(&self) -> Result<usize> {
        match self.resolutions()?.as_slice() {
            [r] => Ok(*r),
            list => bail!("this experiment takes a single N, got {list:?}"),
        }
    }

    /// The run's metric at resolution `res`: `metric_file` if given, else
    /// `metric`.
    pub fn metric_at(&self, res: usize) -> Result<MetricField> {
        let grid = PeriodicGrid::new(self.n, res)?;
        match &self.metric_file {
            Some(file) => {
                let g = MetricField::from_json(&std::fs::read_to_string(file)?)?;
                if *g.grid() != grid {
                    bail!(
                        "metric file {} does not live on T^{} with N = {res}",
                        file.display(),
                        self.n
                    );
                }
                Ok(g)
            }
            None => self.build(&self.metric, grid),
        }
    }

    /// Homotopy endpoint `g₁`.
    pub fn metric_end_at(&self, res: usize) -> Result<MetricField> {
        let spec = self
            .metric_end
            .as_ref()
            .ok_or_else(|| anyhow!("config is missing \"metric_end\""))?;
        self.build(spec, PeriodicGrid::new(self.n, res)?)
    }

    /// Unseeded random kinds take the run seed.
    fn build(&self, spec: &MetricSpec, grid: PeriodicGrid) -> Result<MetricField> {
        let mut spec = spec.clone();
        spec.seed = spec.seed.or(Some(self.seed));
        Ok(MetricRegistry::with_defaults().build(grid, &spec)?)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            seed: self.seed,
            ..self.solver.clone()
        }
    }

    /// Canonical re-serialization; whitespace and key order of the input do
    /// not enter, and neither does the output directory.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}
