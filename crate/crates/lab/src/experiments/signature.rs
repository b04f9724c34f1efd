use anyhow::Result;

use sigop::spectral::assembly::assemble_signature_operator;
use sigop::spectral::signature::signature_pairing;

use super::{mark, Experiment, RunContext, Summary};
use crate::output::RunOutput;

pub struct Signature;

impl Experiment for Signature {
    fn name(&self) -> &'static str {
        "signature"
    }

    fn run(&self, ctx: &RunContext, out: &mut RunOutput) -> Result<Summary> {
        let cfg = ctx.config;
        let res = cfg.single_resolution()?;
        let g = cfg.metric_at(res)?;
        let report = signature_pairing(&assemble_signature_operator(&g)?, &cfg.solver_options())?;
        out.write_json("signature.json", &report)?;
        // the intersection form of T⁴ is hyperbolic: signature 0
        let pass = report.signature == 0 && report.positive == 3 && report.negative == 3;
        out.verdict("signature", pass);
        let text = format!(
            "T^4 N={res} metric={}\nharmonic 2-forms {} (gap ratio {:.3e})\npairing eigenvalues {:?}\nsignature {} ({}+, {}−): {}\n",
            g.descriptor(),
            report.kernel.dim,
            report.kernel.gap_ratio,
            report.eigenvalues.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>(),
            report.signature,
            report.positive,
            report.negative,
            mark(pass)
        );
        Ok(Summary {
            text,
            json: serde_json::to_value(&report)?,
        })
    }
}
