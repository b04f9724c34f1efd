//! The one-shot invariant suite behind `lab verify`.

use std::collections::BTreeMap;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use sigop::dec::hodge::tau_with_mass;
use sigop::dec::{
    coboundary, commutator_bound_check, duality_phase, mass_matrix, wedge_integral, FormField,
    StarPerturbation,
};
use sigop::functions::TrigPolynomial;
use sigop::grid::binomial;
use sigop::metric::ledger::lp_threshold;
use sigop::metric::{
    exponents_lp_derivable, exponents_quasiconformal, flat_metric, geometric_mean,
    random_rough_metric, MetricField,
};
use sigop::spectral::assembly::assemble_signature_operator;
use sigop::spectral::kernel::kernel_analysis;
use sigop::spectral::parametrix::parametrix_identity_check;
use sigop::spectral::solver::SolverOptions;
use sigop::PeriodicGrid;

use super::{mark, Experiment, RunContext, Summary};
use crate::output::RunOutput;

pub const TOLERANCE: f64 = 1e-10;
/// Relative size of the injected Hodge-star fault.
pub const STAR_FAULT: f64 = 1e-3;
const DIMENSIONS: [usize; 3] = [1, 2, 3];
const RESOLUTIONS: [usize; 2] = [8, 16];
const CASES: usize = 6;

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub seed: u64,
    pub perturb_star: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    /// Worst relative defect, or 0/1 for counting checks.
    pub worst: f64,
    pub cases: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub perturb_star: bool,
    pub checks: Vec<Check>,
    pub pass: bool,
}

#[derive(Default)]
struct Tally {
    worst: f64,
    cases: usize,
    failed: bool,
}

impl Tally {
    fn defect(&mut self, e: f64) {
        self.cases += 1;
        // NaN counts as failure
        if !(e <= TOLERANCE) {
            self.failed = true;
        }
        self.worst = self.worst.max(if e.is_nan() { f64::INFINITY } else { e });
    }

    fn boolean(&mut self, ok: bool) {
        self.defect(if ok { 0.0 } else { 1.0 });
    }
}

type Tallies = BTreeMap<&'static str, Tally>;

fn merge(into: &mut Tallies, from: Tallies) {
    for (k, t) in from {
        let e = into.entry(k).or_default();
        e.worst = e.worst.max(t.worst);
        e.cases += t.cases;
        e.failed |= t.failed;
    }
}

fn star_perturbation(opts: &SuiteOptions) -> StarPerturbation {
    if opts.perturb_star {
        StarPerturbation::Scale(STAR_FAULT)
    } else {
        StarPerturbation::None
    }
}

fn form_checks(
    g: &MetricField,
    opts: &SuiteOptions,
    rng: &mut ChaCha8Rng,
    t: &mut Tallies,
) -> sigop::Result<()> {
    let grid = *g.grid();
    let n = grid.dim();
    let masses = (0..=n)
        .map(|k| mass_matrix(g, k))
        .collect::<sigop::Result<Vec<_>>>()?;
    let p = star_perturbation(opts);
    let op_scale = (2.0 / grid.spacing()).powi(2);
    for case in 0..CASES {
        let k = case % (n + 1);
        let w = FormField::random(grid, k, rng)?;
        if k + 2 <= n {
            let dd = coboundary(&coboundary(&w)?)?;
            t.entry("d∘d = 0")
                .or_default()
                .defect(dd.flat_norm() / (op_scale * w.flat_norm()));
        }
        let tw = tau_with_mass(&masses[k], &w, p)?;
        let back = tau_with_mass(&masses[n - k], &tw, p)?;
        t.entry("τ² = id")
            .or_default()
            .defect(back.sub(&w)?.flat_norm() / w.flat_norm());
        let (a, b) = (masses[k].norm(&w)?, masses[n - k].norm(&tw)?);
        t.entry("τ isometry").or_default().defect((a - b).abs() / a);
        let beta = FormField::random(grid, k, rng)?;
        let lhs = masses[k].inner(&w, &beta)?;
        let rhs = duality_phase(n, k) * wedge_integral(&w, &tau_with_mass(&masses[k], &beta, p)?)?;
        t.entry("duality ⟨α,β⟩ = c∫α∧τβ")
            .or_default()
            .defect((lhs - rhs).norm() / (a * masses[k].norm(&beta)?));

        if k < n {
            let f = TrigPolynomial::random(n, 3, 2, rng);
            let r = commutator_bound_check(g, &f, &w)?;
            t.entry("commutator bound").or_default().boolean(r.holds);
        }
    }
    Ok(())
}

fn grid_checks(n: usize, res: usize, opts: &SuiteOptions) -> sigop::Result<Tallies> {
    let grid = PeriodicGrid::new(n, res)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((n as u64) << 32 | res as u64));
    let mut t = Tallies::new();
    let rough = random_rough_metric(grid, 7.0, opts.seed.wrapping_add(res as u64))?;
    for g in [flat_metric(grid), rough.clone()] {
        form_checks(&g, opts, &mut rng, &mut t)?;
    }
    if n >= 2 {
        for _ in 0..CASES {
            let w = FormField::random(grid, n / 2, &mut rng)?;
            t.entry("parametrix dtdω = dω")
                .or_default()
                .defect(parametrix_identity_check(grid, &w)?);
        }
    }
    // dense kernels on T³ stay affordable at N = 8 only
    if n < 3 || res <= 8 {
        for g in [flat_metric(grid), rough] {
            let k = kernel_analysis(&assemble_signature_operator(&g)?, &SolverOptions::default())?;
            t.entry("dim ker = C(n,m)")
                .or_default()
                .boolean(k.count.dim == binomial(n, n / 2) && !k.count.ambiguous);
        }
    }
    Ok(t)
}

fn calculus_checks(opts: &SuiteOptions) -> sigop::Result<Tallies> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut t = Tallies::new();
    for _ in 0..20 {
        let n = if rng.gen_bool(0.5) { 1 } else { 3 };
        let p = n as f64 + rng.gen_range(0.05..30.0);
        let closed = n as f64 * p / (p - n as f64);
        let e = (exponents_quasiconformal(n, p)?.n_g - closed).abs() / closed;
        t.entry("n(g) = np/(p−n)").or_default().defect(e);
    }
    for n in 2..=4 {
        let thr = lp_threshold(n);
        let ok = exponents_lp_derivable(n, thr).is_err()
            && exponents_lp_derivable(n, thr * (1.0 + 1e-12)).is_ok();
        t.entry("L^p threshold strict").or_default().boolean(ok);
    }
    for _ in 0..20 {
        let n = rng.gen_range(1..=4);
        let spd = |rng: &mut ChaCha8Rng| {
            let c = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            &c * c.transpose() + nalgebra::DMatrix::identity(n, n) * 0.5
        };
        let (a, b) = (spd(&mut rng), spd(&mut rng));
        let e0 = (geometric_mean(&a, &b, 0.0)? - &a).norm() / a.norm();
        let e1 = (geometric_mean(&a, &b, 1.0)? - &b).norm() / b.norm();
        t.entry("geometric mean endpoints")
            .or_default()
            .defect(e0.max(e1));
    }
    Ok(t)
}

/// Runs every check; `(n, N)` jobs run concurrently and merge in a fixed
/// order, so the report does not depend on scheduling.
pub fn run_suite(opts: SuiteOptions) -> Result<SuiteReport> {
    let jobs: Vec<(usize, usize)> = DIMENSIONS
        .iter()
        .flat_map(|&n| RESOLUTIONS.map(|r| (n, r)))
        .collect();
    let results: Vec<sigop::Result<Tallies>> = jobs
        .par_iter()
        .map(|&(n, r)| grid_checks(n, r, &opts))
        .collect();
    let mut all = calculus_checks(&opts)?;
    for r in results {
        merge(&mut all, r?);
    }
    let checks: Vec<Check> = all
        .into_iter()
        .map(|(name, t)| Check {
            name: name.into(),
            worst: t.worst,
            cases: t.cases,
            pass: !t.failed,
        })
        .collect();
    Ok(SuiteReport {
        seed: opts.seed,
        perturb_star: opts.perturb_star,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

impl SuiteReport {
    pub fn table(&self) -> String {
        let width = self
            .checks
            .iter()
            .map(|c| c.name.chars().count())
            .max()
            .unwrap_or(0);
        let mut text = String::new();
        for c in &self.checks {
            let pad = width - c.name.chars().count();
            text += &format!(
                "{}{}  {}  worst {:.2e} over {} cases\n",
                c.name,
                " ".repeat(pad),
                mark(c.pass),
                c.worst,
                c.cases
            );
        }
        text += &format!("overall: {}\n", mark(self.pass));
        text
    }
}

pub struct Verify;

impl Experiment for Verify {
    fn name(&self) -> &'static str {
        "verify"
    }

    fn config_optional(&self) -> bool {
        true
    }

    fn run(&self, ctx: &RunContext, out: &mut RunOutput) -> Result<Summary> {
        let report = run_suite(SuiteOptions {
            seed: ctx.config.seed,
            perturb_star: ctx.perturb_star,
        })?;
        for c in &report.checks {
            out.verdict(&c.name, c.pass);
        }
        out.write_json("verify.json", &report)?;
        Ok(Summary {
            text: report.table(),
            json: serde_json::to_value(&report)?,
        })
    }
}
