use anyhow::Result;

use sigop::grid::binomial;
use sigop::spectral::assembly::assemble_signature_operator;
use sigop::spectral::decay::{decay_fit, MIN_VALUES};
use sigop::spectral::report::singular_values;

use super::{mark, Experiment, RunContext, Summary};
use crate::output::RunOutput;

pub struct Spectrum;

impl Experiment for Spectrum {
    fn name(&self) -> &'static str {
        "spectrum"
    }

    fn run(&self, ctx: &RunContext, out: &mut RunOutput) -> Result<Summary> {
        let cfg = ctx.config;
        let res = cfg.single_resolution()?;
        let g = cfg.metric_at(res)?;
        let ledger = cfg.ledger.resolve(cfg.n, Some(&g))?;
        let asm = assemble_signature_operator(&g)?;
        let mut report = singular_values(&asm, cfg.count, &cfg.solver_options())?;
        report.n_g = Some(ledger.n_g);
        let expected = binomial(cfg.n, cfg.n / 2);
        report.verdicts.insert(
            "kernel".into(),
            report.kernel_dim == expected && !report.ambiguous,
        );
        // too few values for a meaningful fit on coarse grids
        if report.mu.len() >= MIN_VALUES {
            report.attach_fit(&decay_fit(&report.mu, cfg.window, ledger.n_g)?);
        }
        out.write("report.json", report.to_json()? + "\n")?;
        out.write("spectrum.csv", report.to_csv())?;
        for (k, v) in &report.verdicts {
            out.verdict(k, *v);
        }

        let mut text = format!(
            "T^{} N={} metric={} solver={}\nkernel_dim {} (expected {expected}), gap ratio {:.3e}: {}\n",
            cfg.n,
            res,
            report.descriptor,
            report.solver,
            report.kernel_dim,
            report.gap_ratio,
            mark(report.verdicts["kernel"]),
        );
        if let (Some(s), Some(b), Some(p)) = (report.slope, report.band, report.predicted) {
            text += &format!(
                "slope {s:.4} ± {b:.4} vs −1/n(g) = {p:.4} (n(g) = {:.4}): {}\n",
                ledger.n_g,
                mark(report.verdicts["decay"])
            );
        }
        text += &format!("{} singular values\n", report.mu.len());
        Ok(Summary {
            text,
            json: serde_json::to_value(&report)?,
        })
    }
}
