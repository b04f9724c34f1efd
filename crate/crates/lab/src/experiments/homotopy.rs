use anyhow::Result;
use serde_json::json;

use sigop::spectral::homotopy::{homotopy_run, HomotopySettings, MAX_JUMP};
use sigop::spectral::report::format_float;

use super::{mark, Experiment, RunContext, Summary};
use crate::output::RunOutput;

pub struct Homotopy;

impl Experiment for Homotopy {
    fn name(&self) -> &'static str {
        "homotopy"
    }

    fn run(&self, ctx: &RunContext, out: &mut RunOutput) -> Result<Summary> {
        let cfg = ctx.config;
        let res = cfg.single_resolution()?;
        let (g0, g1) = (cfg.metric_at(res)?, cfg.metric_end_at(res)?);
        let l0 = cfg.ledger.resolve(cfg.n, Some(&g0))?;
        let l1 = cfg
            .ledger_end
            .clone()
            .unwrap_or_default()
            .resolve(cfg.n, Some(&g1))?;
        let settings = HomotopySettings {
            steps: cfg.steps,
            count: cfg.count,
            window: cfg.window,
            solver: cfg.solver_options(),
        };
        let report = homotopy_run(&g0, &g1, &l0, &l1, &settings)?;

        let k = report.rows.iter().map(|r| r.mu.len()).min().unwrap_or(0);
        let mut csv = String::from("t,n_g,kernel_dim");
        for j in 1..=k {
            csv += &format!(",mu_{j}");
        }
        csv.push('\n');
        for row in &report.rows {
            csv += &format!(
                "{},{},{}",
                format_float(row.t),
                format_float(row.n_g),
                row.kernel_dim
            );
            for m in &row.mu[..k] {
                csv += &format!(",{}", format_float(*m));
            }
            csv.push('\n');
        }
        out.write("path.csv", csv)?;
        let verdict = json!({
            "kernel_constant": report.kernel_constant,
            "kernel_jump_at": report.kernel_jump_at,
            "max_jump": report.max_jump,
            "max_allowed_jump": MAX_JUMP,
            "window": report.window,
            "samples": report.rows.len(),
            "pass": report.pass,
        });
        out.write_json("verdict.json", &verdict)?;
        out.verdict("kernel_constant", report.kernel_constant);
        out.verdict("spectral_continuity", report.max_jump < MAX_JUMP);

        let mut text = format!("{:>8} {:>10} {:>6} {:>14}\n", "t", "n(g)", "ker", "mu_1");
        for row in &report.rows {
            text += &format!(
                "{:>8.4} {:>10.4} {:>6} {:>14.6e}\n",
                row.t,
                row.n_g,
                row.kernel_dim,
                row.mu.first().copied().unwrap_or(f64::NAN)
            );
        }
        text += &format!(
            "kernel constant: {}; max adjacent jump {:.4} on μ_{}..μ_{} (< {MAX_JUMP}): {}\n",
            mark(report.kernel_constant),
            report.max_jump,
            report.window.0,
            report.window.1,
            mark(report.max_jump < MAX_JUMP)
        );
        if let Some(t) = report.kernel_jump_at {
            text += &format!("kernel dimension jumps at t = {t}\n");
        }
        Ok(Summary {
            text,
            json: verdict,
        })
    }
}
