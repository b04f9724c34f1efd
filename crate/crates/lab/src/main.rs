use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use sigop_lab::{exit, ExperimentConfig, ExperimentRegistry, RunContext, RunOutput, THREADS_ENV};

const DEFAULT_OUT: &str = "lab-out";

/// Numerical laboratory for signature operators on rough-metric tori.
#[derive(Debug, Parser)]
#[command(name = "lab", version)]
struct Cli {
    #[arg(value_parser = ["spectrum", "decay", "homotopy", "exponents", "signature", "verify"])]
    command: String,
    /// JSON experiment configuration (optional for `verify`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a machine-readable summary instead of the table.
    #[arg(long)]
    json: bool,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Scale the Hodge star by 1 + 1e-3 (verify only), to see the suite fail.
    #[arg(long)]
    perturb_star: bool,
}

/// Dense kernels run serially: their reduction order would otherwise follow
/// the pool size and break bit-for-bit reproducibility. `LAB_THREADS` caps
/// the job-level pool.
fn init_threads() -> Result<()> {
    faer::set_global_parallelism(faer::Parallelism::None);
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| anyhow!("{THREADS_ENV} = {raw:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    init_threads()?;
    let registry = ExperimentRegistry::with_defaults();
    let experiment = registry
        .get(&cli.command)
        .ok_or_else(|| anyhow!("unknown command {}", cli.command))?;
    if cli.perturb_star && cli.command != "verify" {
        bail!("--perturb-star only applies to verify");
    }
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if experiment.config_optional() => ExperimentConfig::minimal(1),
        None => bail!("{} needs --config <path>", cli.command),
    };
    if let Some(e) = &config.experiment {
        if *e != cli.command {
            bail!(
                "config declares experiment {e:?} but the command is {:?}",
                cli.command
            );
        }
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    let mut out = RunOutput::new(&out_dir, &cli.command, &config);
    let ctx = RunContext {
        config: &config,
        perturb_star: cli.perturb_star,
    };
    let summary = match experiment.run(&ctx, &mut out) {
        Ok(s) => s,
        Err(e) => {
            // the config was valid, so an aborted run still leaves a manifest
            out.write("config.json", config.canonical_json() + "\n")?;
            out.finish(false).context("writing partial manifest")?;
            return Err(e);
        }
    };
    out.write("config.json", config.canonical_json() + "\n")?;
    let manifest = out.finish(true)?;
    if cli.json {
        let doc = json!({ "command": cli.command, "manifest": manifest, "summary": summary.json });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        print!("{}", summary.text);
        println!(
            "artifacts in {} (config {})",
            out_dir.display(),
            &manifest.config_hash[..12]
        );
    }
    Ok(if manifest.passed() {
        exit::SUCCESS
    } else {
        exit::VERDICT_FAIL
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::SUCCESS,
                _ => exit::ERROR,
            };
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::ERROR)
        }
    }
}
