//! Singular values of the bounded transform of `D`, kernel classification
//! and the serialized spectral report.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assembly::{norm, Parity, SignatureOperatorAssembly};
use super::decay::DecayFit;
use super::solver::{OperatorKind, SolverOptions, SolverRegistry, SpectralProblem};
use crate::error::{Error, Result};

/// Eigenvalues of `D²` below this fraction of the largest one are kernel.
pub const KERNEL_THRESHOLD: f64 = 1e-8;
/// Largest admissible ratio `|D|_kernel_max / |D|_first`.
pub const GAP_TOLERANCE: f64 = 1e-3;
/// Weight of the exact-form block in the penalized odd-parity operator.
pub const EXACT_PENALTY: f64 = 100.0;
/// Low eigenvalues inspected when counting the kernel.
const KERNEL_PROBE: usize = 32;

/// Kernel count of `D²` on middle forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelCount {
    pub dim: usize,
    /// `|D|` on the largest kernel mode over `|D|` on the first nonzero one.
    pub gap_ratio: f64,
    pub ambiguous: bool,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n: usize,
    #[serde(rename = "N")]
    pub resolution: usize,
    pub descriptor: String,
    pub parity: Parity,
    pub solver: String,
    pub n_g: Option<f64>,
    /// Nonzero singular values, nonincreasing. Kernel modes are counted
    /// in `kernel_dim`, not listed.
    pub mu: Vec<f64>,
    pub kernel_dim: usize,
    pub gap_ratio: f64,
    pub ambiguous: bool,
    pub slope: Option<f64>,
    pub band: Option<f64>,
    pub predicted: Option<f64>,
    pub verdicts: BTreeMap<String, bool>,
}

impl SpectralReport {
    /// Report on given singular values; no operator involved.
    pub fn from_values(n: usize, resolution: usize, descriptor: &str, mut mu: Vec<f64>) -> Self {
        mu.sort_by(|a, b| b.total_cmp(a));
        Self {
            n,
            resolution,
            descriptor: descriptor.into(),
            parity: if n % 2 == 0 {
                Parity::Even
            } else {
                Parity::Odd
            },
            solver: "synthetic".into(),
            n_g: None,
            mu,
            kernel_dim: 0,
            gap_ratio: 0.0,
            ambiguous: false,
            slope: None,
            band: None,
            predicted: None,
            verdicts: BTreeMap::new(),
        }
    }

    pub fn attach_fit(&mut self, fit: &DecayFit) {
        self.n_g = Some(fit.n_g);
        self.slope = Some(fit.slope);
        self.band = Some(fit.band);
        self.predicted = Some(fit.predicted);
        self.verdicts.insert("decay".into(), fit.pass);
    }

    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `j,mu_j` rows, 17 significant digits, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,mu_j\n");
        for (j, m) in self.mu.iter().enumerate() {
            out.push_str(&format!("{},{}\n", j + 1, format_float(*m)));
        }
        out
    }
}

/// Fixed 17-significant-digit rendering shared by every CSV writer.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Power-iteration estimate of the top eigenvalue (a lower bound).
pub fn largest_eigenvalue(problem: &SpectralProblem, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<_> = (0..problem.dim())
        .map(|_| num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut est = 0.0;
    for _ in 0..100 {
        let nv = norm(&v);
        v.iter_mut().for_each(|a| *a /= nv);
        let w = problem.apply(&v);
        est = norm(&w);
        v = w;
    }
    est
}

fn top_eigenvalue(
    problem: &SpectralProblem,
    registry: &SolverRegistry,
    options: &SolverOptions,
) -> Result<f64> {
    if problem.assembly.metric().is_constant() {
        let all = registry
            .get("fourier")?
            .solve(problem, None, false, options)?
            .values;
        return Ok(*all.last().expect("nonempty spectrum"));
    }
    Ok(largest_eigenvalue(problem, options.seed))
}

/// Classifies the low spectrum of the Hodge Laplacian on middle forms.
pub fn kernel_count(values: &[f64], lambda_max: f64) -> KernelCount {
    let cut = KERNEL_THRESHOLD * lambda_max;
    let dim = values.iter().take_while(|&&v| v < cut).count();
    let (gap_ratio, ambiguous) = match (dim, values.get(dim)) {
        (0, _) => (0.0, false),
        (_, None) => (f64::INFINITY, true),
        (d, Some(&first)) => {
            let r = (values[d - 1].max(0.0) / first).sqrt();
            (r, r > GAP_TOLERANCE)
        }
    };
    KernelCount {
        dim,
        gap_ratio,
        ambiguous,
        lambda_max,
    }
}

/// Kernel of `D` on middle forms, from the harmonic part of the Hodge
/// Laplacian.
pub fn middle_kernel(
    asm: &SignatureOperatorAssembly,
    options: &SolverOptions,
) -> Result<KernelCount> {
    let registry = SolverRegistry::with_defaults();
    let problem = SpectralProblem::new(asm, asm.middle_degree(), OperatorKind::Hodge);
    let solver = registry.select(&options.mode, &problem)?;
    let want = KERNEL_PROBE.min(problem.dim());
    let values = solver.solve(&problem, Some(want), false, options)?.values;
    let lambda_max = top_eigenvalue(&problem, &registry, options)?;
    Ok(kernel_count(&values, lambda_max))
}

/// The `count` largest singular values of `(1+|D|)^{-1}` (even parity) or
/// `D(1+D²)^{-1}` (odd parity), off the kernel.
pub fn singular_values(
    asm: &SignatureOperatorAssembly,
    count: usize,
    options: &SolverOptions,
) -> Result<SpectralReport> {
    let grid = asm.grid();
    let m = asm.middle_degree();
    let registry = SolverRegistry::with_defaults();
    let kernel = middle_kernel(asm, options)?;
    let (kind, transform): (OperatorKind, fn(f64) -> f64) = match asm.parity() {
        Parity::Even => (OperatorKind::Hodge, |l| 1.0 / (1.0 + l.sqrt())),
        Parity::Odd => (OperatorKind::Up, |l| {
            let s = l.sqrt();
            s / (1.0 + s * s)
        }),
    };
    let mut problem = SpectralProblem::new(asm, m, kind);
    let mut solver = registry.select(&options.mode, &problem)?;
    if solver.name() == "lobpcg" && asm.parity() == Parity::Odd {
        // The closed forms are an enormous kernel of Up; lift them instead.
        problem = SpectralProblem::new(asm, m, OperatorKind::Penalized(EXACT_PENALTY));
        solver = registry.select(&options.mode, &problem)?;
    }
    // Odd parity: the closed forms sit in the kernel of Up and must be skipped.
    let skip = match (asm.parity(), problem.kind) {
        (Parity::Odd, OperatorKind::Up) => grid.num_sites() * grid.num_components(m) - up_rank(asm),
        _ => kernel.dim,
    };
    let want = (skip + count).min(problem.dim());
    let values = solver.solve(&problem, Some(want), false, options)?.values;
    let cut = KERNEL_THRESHOLD * kernel.lambda_max;
    let mut mu: Vec<f64> = values
        .iter()
        .skip(skip)
        .filter(|&&l| l >= cut)
        .map(|&l| transform(l))
        .collect();
    if mu.len() < count.min(values.len().saturating_sub(skip)) {
        return Err(Error::NoConvergence(format!(
            "only {} of {count} nonzero singular values resolved",
            mu.len()
        )));
    }
    mu.truncate(count);
    mu.sort_by(|a, b| b.total_cmp(a));
    let mut report =
        SpectralReport::from_values(grid.dim(), grid.resolution(), asm.metric().descriptor(), mu);
    report.parity = asm.parity();
    report.solver = solver.name().into();
    report.kernel_dim = kernel.dim;
    report.gap_ratio = kernel.gap_ratio;
    report.ambiguous = kernel.ambiguous;
    report
        .verdicts
        .insert("kernel_gap".into(), !kernel.ambiguous);
    Ok(report)
}

/// Rank of `d` on middle forms: the number of sites times components minus
/// closed forms. On the torus the closed `m`-forms are the exact ones plus
/// the harmonic ones, so the rank is the dimension of the exact
/// `(m+1)`-forms, computed from the Fourier symbol.
fn up_rank(asm: &SignatureOperatorAssembly) -> usize {
    let grid = asm.grid();
    let m = asm.middle_degree();
    let d = asm.differential();
    let (rows, cols) = (grid.num_components(m + 1), grid.num_components(m));
    (0..grid.num_sites())
        .map(|s| {
            let sym = nalgebra::DMatrix::from_row_slice(rows, cols, &d.symbol_matrix(m, s));
            sym.rank(1e-9 * d.symbols_at(s).iter().map(|b| b.norm()).fold(1.0, f64::max))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::metric::builders::{conformal_singular_metric, flat_metric};
    use crate::spectral::assembly::assemble_signature_operator;

    #[test]
    fn flat_kernels_are_betti_numbers() {
        for (n, res, betti) in [(1, 8, 1), (2, 8, 2), (3, 6, 3)] {
            let grid = PeriodicGrid::new(n, res).unwrap();
            let asm = assemble_signature_operator(&flat_metric(grid)).unwrap();
            let k = middle_kernel(&asm, &SolverOptions::default()).unwrap();
            assert_eq!(k.dim, betti);
            assert!(!k.ambiguous && k.gap_ratio < 1e-6, "{k:?}");
        }
    }

    #[test]
    fn flat_t1_singular_values() {
        // D = τd on 0-forms of T¹: |D| is the difference symbol modulus.
        let grid = PeriodicGrid::new(1, 4).unwrap();
        let asm = assemble_signature_operator(&flat_metric(grid)).unwrap();
        let r = singular_values(&asm, 3, &SolverOptions::default()).unwrap();
        let s = [8.0, 32f64.sqrt(), 32f64.sqrt()];
        let mut expected: Vec<f64> = s.iter().map(|s| s / (1.0 + s * s)).collect();
        expected.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in r.mu.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-13, "{a} {b}");
        }
        assert_eq!(r.kernel_dim, 1);
    }

    #[test]
    fn odd_dense_matches_fourier_on_flat() {
        let grid = PeriodicGrid::new(3, 4).unwrap();
        let asm = assemble_signature_operator(&flat_metric(grid)).unwrap();
        let mut opts = SolverOptions::default();
        let a = singular_values(&asm, 60, &opts).unwrap();
        opts.mode = "dense".into();
        let b = singular_values(&asm, 60, &opts).unwrap();
        assert_eq!(a.mu.len(), 60);
        for (x, y) in a.mu.iter().zip(&b.mu) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn rough_conformal_kernel() {
        let grid = PeriodicGrid::new(2, 8).unwrap();
        let g = conformal_singular_metric(grid, &[0.5, 0.5], 0.5, 1.0 + 1e-6, None).unwrap();
        let asm = assemble_signature_operator(&g).unwrap();
        let r = singular_values(&asm, 40, &SolverOptions::default()).unwrap();
        assert_eq!(r.kernel_dim, 2);
        assert!(r.passed());
        assert!(r.mu.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn csv_format() {
        let r = SpectralReport::from_values(2, 4, "synthetic", vec![0.5, 1.0]);
        assert_eq!(
            r.to_csv(),
            "j,mu_j\n1,1.0000000000000000e0\n2,5.0000000000000000e-1\n"
        );
    }
}
