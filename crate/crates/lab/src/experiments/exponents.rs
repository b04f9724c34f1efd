use anyhow::{bail, Result};
use serde_json::json;

use sigop::Error;

use super::{Experiment, RunContext, Summary};
use crate::config::LedgerSource;
use crate::output::RunOutput;

pub struct Exponents;

impl Experiment for Exponents {
    fn name(&self) -> &'static str {
        "exponents"
    }

    fn run(&self, ctx: &RunContext, out: &mut RunOutput) -> Result<Summary> {
        let cfg = ctx.config;
        if cfg.ledger == LedgerSource::FromMetric {
            bail!("exponents needs an explicit \"ledger\" (quasiconformal, lp_derivable, explicit or flat)");
        }
        let n = cfg.n;
        let ledger = match cfg.ledger.resolve(n, None) {
            Ok(l) => l,
            Err(Error::Inadmissible(msg)) => {
                out.verdict("admissible", false);
                let json =
                    json!({ "n": n, "source": cfg.ledger, "admissible": false, "violation": msg });
                out.write_json("exponents.json", &json)?;
                return Ok(Summary {
                    text: format!("inadmissible: {msg}\n"),
                    json,
                });
            }
            Err(e) => return Err(e.into()),
        };
        out.verdict("admissible", true);
        let json = json!({
            "n": n,
            "source": cfg.ledger,
            "admissible": true,
            "ledger": ledger,
            "margin": ledger.margin(),
            "threshold_distance": cfg.ledger.threshold_distance(n),
        });
        out.write_json("exponents.json", &json)?;

        let m = n / 2;
        let mut text = String::new();
        if let Some((p, q)) = ledger.below {
            text += &format!(
                "p_{} = {p:.6}   q_{} = {q:.6}\n",
                m as i64 - 1,
                m as i64 - 1
            );
        }
        text += &format!("p_{m} = {:.6}   q_{m} = {:.6}\n", ledger.p_m, ledger.q_m);
        text += &format!(
            "p_{} = {:.6}   q_{} = {:.6}\n",
            m + 1,
            ledger.p_m_plus,
            m + 1,
            ledger.q_m_plus
        );
        text += &format!("n(g) = {:.6}\n", ledger.n_g);
        text += &format!(
            "admissible: yes (1/p_m + 1/n − 1/q_(m+1) = {:.6})\n",
            ledger.margin()
        );
        if let Some(d) = cfg.ledger.threshold_distance(n) {
            text += &format!("distance above threshold: {d:.6}\n");
        }
        Ok(Summary { text, json })
    }
}
