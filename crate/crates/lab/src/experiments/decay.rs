use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use sigop::spectral::assembly::assemble_signature_operator;
use sigop::spectral::decay::{decay_fit, DecayFit};
use sigop::spectral::report::{singular_values, SpectralReport};

use super::{mark, Experiment, RunContext, Summary};
use crate::output::RunOutput;

pub struct Decay;

#[derive(Debug, Serialize)]
struct DecayRow {
    #[serde(rename = "N")]
    resolution: usize,
    values: usize,
    kernel_dim: usize,
    fit: DecayFit,
}

#[derive(Debug, Serialize)]
struct Refinement {
    from: usize,
    to: usize,
    slope_change: f64,
}

#[derive(Debug, Serialize)]
struct DecaySummary {
    n: usize,
    n_g: f64,
    predicted: f64,
    synthetic: bool,
    rows: Vec<DecayRow>,
    refinement: Vec<Refinement>,
    /// Slopes move in one direction under refinement.
    monotone: bool,
    pass: bool,
}

impl Experiment for Decay {
    fn name(&self) -> &'static str {
        "decay"
    }

    fn run(&self, ctx: &RunContext, out: &mut RunOutput) -> Result<Summary> {
        let cfg = ctx.config;
        let resolutions = cfg.resolutions()?;
        if resolutions.len() < 2 {
            bail!("decay needs at least two resolutions, got {resolutions:?}");
        }
        let metrics = resolutions
            .iter()
            .map(|&r| cfg.metric_at(r))
            .collect::<Result<Vec<_>>>()?;
        let ledger = cfg.ledger.resolve(cfg.n, metrics.first())?;
        let opts = cfg.solver_options();

        let reports: Vec<Result<SpectralReport>> = metrics
            .par_iter()
            .zip(&resolutions)
            .map(|(g, &res)| {
                if cfg.synthetic {
                    let mu = (1..=cfg.count)
                        .map(|j| (j as f64).powf(-1.0 / ledger.n_g))
                        .collect();
                    return Ok(SpectralReport::from_values(cfg.n, res, "synthetic", mu));
                }
                let asm = assemble_signature_operator(g)?;
                singular_values(&asm, cfg.count, &opts)
                    .with_context(|| format!("solving at N = {res}"))
            })
            .collect();

        let mut rows = Vec::new();
        for (res, report) in resolutions.iter().zip(reports) {
            // artifacts of finished resolutions stay listed in the partial manifest
            let mut report = report?;
            let fit = decay_fit(&report.mu, cfg.window, ledger.n_g)
                .with_context(|| format!("fitting at N = {res}"))?;
            report.attach_fit(&fit);
            out.write(&format!("decay_N{res}.csv"), report.to_csv())?;
            out.verdict(&format!("decay_N{res}"), fit.pass);
            rows.push(DecayRow {
                resolution: *res,
                values: report.mu.len(),
                kernel_dim: report.kernel_dim,
                fit,
            });
        }
        let refinement: Vec<Refinement> = rows
            .windows(2)
            .map(|w| Refinement {
                from: w[0].resolution,
                to: w[1].resolution,
                slope_change: w[1].fit.slope - w[0].fit.slope,
            })
            .collect();
        let monotone = refinement.iter().all(|r| r.slope_change <= 0.0)
            || refinement.iter().all(|r| r.slope_change >= 0.0);
        let summary = DecaySummary {
            n: cfg.n,
            n_g: ledger.n_g,
            predicted: ledger.predicted_slope(),
            synthetic: cfg.synthetic,
            pass: rows.iter().all(|r| r.fit.pass),
            rows,
            refinement,
            monotone,
        };
        out.write_json("summary.json", &summary)?;

        let mut text = format!(
            "decay on T^{}: n(g) = {:.4}, predicted slope {:.4}{}\n{:>6} {:>8} {:>10} {:>10} {:>6}\n",
            cfg.n,
            ledger.n_g,
            summary.predicted,
            if cfg.synthetic { " (synthetic)" } else { "" },
            "N",
            "values",
            "slope",
            "±band",
            "verdict"
        );
        for r in &summary.rows {
            text += &format!(
                "{:>6} {:>8} {:>10.4} {:>10.4} {:>6}\n",
                r.resolution,
                r.values,
                r.fit.slope,
                r.fit.band,
                mark(r.fit.pass)
            );
        }
        text += &format!("refinement monotone: {}\n", summary.monotone);
        Ok(Summary {
            text,
            json: serde_json::to_value(&summary)?,
        })
    }
}
