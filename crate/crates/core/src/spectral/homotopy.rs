//! Spectra along the geometric-mean path between two metrics.

use serde::{Deserialize, Serialize};

use super::assembly::assemble_signature_operator;
use super::report::singular_values;
use super::solver::SolverOptions;
use crate::error::{Error, Result};
use crate::metric::{interpolate_exponents, interpolate_metrics, ExponentLedger, MetricField};

/// Largest admissible relative change of a fitted singular value between
/// adjacent path points.
pub const MAX_JUMP: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyRow {
    pub t: f64,
    pub n_g: f64,
    pub kernel_dim: usize,
    pub gap_ratio: f64,
    pub ambiguous: bool,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyReport {
    pub rows: Vec<HomotopyRow>,
    pub kernel_constant: bool,
    /// First `t` whose kernel dimension differs from the one at `t = 0`.
    pub kernel_jump_at: Option<f64>,
    pub max_jump: f64,
    /// 1-based index range of `μ_j` the jump statistic covers.
    pub window: (usize, usize),
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct HomotopySettings {
    /// Number of intervals; the path is sampled at `steps + 1` points.
    pub steps: usize,
    pub count: usize,
    pub window: (f64, f64),
    pub solver: SolverOptions,
}

impl Default for HomotopySettings {
    fn default() -> Self {
        Self {
            steps: 10,
            count: 100,
            window: super::decay::DEFAULT_WINDOW,
            solver: SolverOptions::default(),
        }
    }
}

/// Samples `t ↦ g_t` (pointwise geometric mean) and records kernel
/// dimension, singular values and the interpolated ledger. The ledger path
/// starts at `ledger0` for `t = 0`.
pub fn homotopy_run(
    g0: &MetricField,
    g1: &MetricField,
    ledger0: &ExponentLedger,
    ledger1: &ExponentLedger,
    settings: &HomotopySettings,
) -> Result<HomotopyReport> {
    if settings.steps == 0 {
        return Err(Error::Invalid("a homotopy needs at least one step".into()));
    }
    let mut rows = Vec::with_capacity(settings.steps + 1);
    for i in 0..=settings.steps {
        let t = i as f64 / settings.steps as f64;
        let metric = interpolate_metrics(g0, g1, t)?;
        let asm = assemble_signature_operator(&metric)?;
        let report = singular_values(&asm, settings.count, &settings.solver)?;
        // interpolate_exponents(a, b, t) reproduces `b` at t = 0.
        let ledger = interpolate_exponents(ledger1, ledger0, t)?;
        rows.push(HomotopyRow {
            t,
            n_g: ledger.n_g,
            kernel_dim: report.kernel_dim,
            gap_ratio: report.gap_ratio,
            ambiguous: report.ambiguous,
            mu: report.mu,
        });
    }
    let len = rows.iter().map(|r| r.mu.len()).min().unwrap_or(0);
    let lo = ((settings.window.0 * len as f64).ceil() as usize).max(1);
    let hi = ((settings.window.1 * len as f64).floor() as usize).min(len);
    let mut max_jump: f64 = 0.0;
    for pair in rows.windows(2) {
        for j in lo..=hi {
            let (a, b) = (pair[0].mu[j - 1], pair[1].mu[j - 1]);
            max_jump = max_jump.max((b - a).abs() / a.abs().max(f64::MIN_POSITIVE));
        }
    }
    let base = rows[0].kernel_dim;
    let kernel_jump_at = rows.iter().find(|r| r.kernel_dim != base).map(|r| r.t);
    let kernel_constant = kernel_jump_at.is_none() && rows.iter().all(|r| !r.ambiguous);
    Ok(HomotopyReport {
        pass: kernel_constant && max_jump < MAX_JUMP && hi >= lo,
        rows,
        kernel_constant,
        kernel_jump_at,
        max_jump,
        window: (lo, hi),
    })
}
