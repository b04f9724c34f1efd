//! Harmonic middle forms: kernel dimension, a g-orthonormal basis, and the
//! rank of `R = 1 − P − Q` counted independently from the symbol of `d`.

use serde::{Deserialize, Serialize};

use super::assembly::{Parity, SignatureOperatorAssembly};
use super::report::{kernel_count, largest_eigenvalue, KernelCount};
use super::solver::{OperatorKind, SolverOptions, SolverRegistry, SpectralProblem};
use crate::dec::FormField;
use crate::error::{Error, Result};
use crate::grid::binomial;

const PROBE: usize = 32;

#[derive(Debug, Clone)]
pub struct KernelAnalysis {
    pub count: KernelCount,
    /// g-orthonormal harmonic middle forms.
    pub basis: Vec<FormField>,
    /// `C(n,m)`, the middle Betti number of the torus.
    pub expected: usize,
    /// Even `n`: `dim Ω^m − rank d_{m−1} − rank d_m`.
    pub finite_rank_r: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub dim: usize,
    pub expected: usize,
    pub gap_ratio: f64,
    pub ambiguous: bool,
    pub finite_rank_r: Option<usize>,
}

impl KernelAnalysis {
    pub fn summary(&self) -> KernelSummary {
        KernelSummary {
            dim: self.count.dim,
            expected: self.expected,
            gap_ratio: self.count.gap_ratio,
            ambiguous: self.count.ambiguous,
            finite_rank_r: self.finite_rank_r,
        }
    }

    /// Kernel matches the Betti number and, for even `n`, the rank of `R`.
    pub fn consistent(&self) -> bool {
        !self.count.ambiguous
            && self.count.dim == self.expected
            && self.finite_rank_r.map_or(true, |r| r == self.expected)
    }
}

/// Total rank of `d_k` summed over frequency blocks.
pub fn differential_rank(asm: &SignatureOperatorAssembly, k: usize) -> usize {
    let grid = asm.grid();
    let d = asm.differential();
    let (rows, cols) = (grid.num_components(k + 1), grid.num_components(k));
    (0..grid.num_sites())
        .map(|s| {
            let sym = nalgebra::DMatrix::from_row_slice(rows, cols, &d.symbol_matrix(k, s));
            let scale = d.symbols_at(s).iter().map(|b| b.norm()).fold(0.0, f64::max);
            if scale == 0.0 {
                0
            } else {
                sym.rank(1e-9 * scale)
            }
        })
        .sum()
}

pub fn kernel_analysis(
    asm: &SignatureOperatorAssembly,
    options: &SolverOptions,
) -> Result<KernelAnalysis> {
    let grid = *asm.grid();
    let m = asm.middle_degree();
    let registry = SolverRegistry::with_defaults();
    let problem = SpectralProblem::new(asm, m, OperatorKind::Hodge);
    let solver = registry.select(&options.mode, &problem)?;
    let want = PROBE.min(problem.dim());
    let pairs = solver.solve(&problem, Some(want), true, options)?;
    let lambda_max = if asm.metric().is_constant() {
        *registry
            .get("fourier")?
            .solve(&problem, None, false, options)?
            .values
            .last()
            .expect("nonempty")
    } else {
        largest_eigenvalue(&problem, options.seed)
    };
    let count = kernel_count(&pairs.values, lambda_max);
    let scale = grid.cell_volume().sqrt().recip();
    let basis = pairs
        .vectors
        .ok_or_else(|| Error::Invalid("solver returned no eigenvectors".into()))?
        .into_iter()
        .take(count.dim)
        .map(|u| {
            let mut alpha = asm.from_whitened(m, &u);
            alpha.iter_mut().for_each(|a| *a *= scale);
            FormField::from_vec(grid, m, alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    let finite_rank_r = match asm.parity() {
        Parity::Even => {
            Some(asm.len(m) - differential_rank(asm, m - 1) - differential_rank(asm, m))
        }
        Parity::Odd => None,
    };
    Ok(KernelAnalysis {
        count,
        basis,
        expected: binomial(grid.dim(), m),
        finite_rank_r,
    })
}

/// Signed spectrum of `D` in whitened coordinates, ascending: on middle
/// forms for odd `n`, on the whole graded space for even `n`. Dense only.
pub fn signed_spectrum(asm: &SignatureOperatorAssembly) -> Result<Vec<f64>> {
    let n = asm.dim();
    let m = asm.middle_degree();
    let (offsets, total) = match asm.parity() {
        Parity::Odd => (vec![0], asm.len(m)),
        Parity::Even => {
            let mut offs = Vec::with_capacity(n + 1);
            let mut acc = 0;
            for k in 0..=n {
                offs.push(acc);
                acc += asm.len(k);
            }
            (offs, acc)
        }
    };
    if total > super::solver::DENSE_LIMIT {
        return Err(Error::Invalid(format!(
            "signed spectrum is dense-only, {total} unknowns"
        )));
    }
    let zero = num_complex::Complex64::new(0.0, 0.0);
    let apply = |u: &[num_complex::Complex64]| -> Result<Vec<num_complex::Complex64>> {
        match asm.parity() {
            Parity::Odd => Ok(asm.to_whitened(m, &asm.odd_operator(&asm.from_whitened(m, u))?)),
            Parity::Even => {
                let mut out = vec![zero; total];
                for k in 0..=n {
                    let part = &u[offsets[k]..offsets[k] + asm.len(k)];
                    if k < n {
                        let up = asm.g(k, part);
                        out[offsets[k + 1]..offsets[k + 1] + up.len()]
                            .iter_mut()
                            .zip(up)
                            .for_each(|(a, b)| *a += b);
                    }
                    if k > 0 {
                        let down = asm.g_adjoint(k - 1, part);
                        out[offsets[k - 1]..offsets[k - 1] + down.len()]
                            .iter_mut()
                            .zip(down)
                            .for_each(|(a, b)| *a += b);
                    }
                }
                Ok(out)
            }
        }
    };
    let mut h = vec![zero; total * total];
    let mut e = vec![zero; total];
    for j in 0..total {
        e[j] = num_complex::Complex64::new(1.0, 0.0);
        let col = apply(&e)?;
        e[j] = zero;
        for i in 0..total {
            h[i * total + j] = col[i];
        }
    }
    Ok(super::solver::hermitian_eigen(total, &h, total, false).0)
}

/// `max_i |v_i + v_{N−1−i}| / max|v|` over the ascending signed spectrum.
pub fn spectral_symmetry_defect(asm: &SignatureOperatorAssembly) -> Result<f64> {
    let v = signed_spectrum(asm)?;
    let scale = v.iter().fold(f64::MIN_POSITIVE, |a, x| a.max(x.abs()));
    let len = v.len();
    Ok((0..len)
        .map(|i| (v[i] + v[len - 1 - i]).abs())
        .fold(0.0, f64::max)
        / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::metric::builders::{conformal_singular_metric, flat_metric, random_rough_metric};
    use crate::spectral::assembly::assemble_signature_operator;

    #[test]
    fn flat_kernels() {
        for (n, res) in [(2, 8), (3, 4), (4, 4)] {
            let grid = PeriodicGrid::new(n, res).unwrap();
            let asm = assemble_signature_operator(&flat_metric(grid)).unwrap();
            let k = kernel_analysis(&asm, &SolverOptions::default()).unwrap();
            assert!(k.consistent(), "n={n} {:?}", k.summary());
            assert_eq!(k.basis.len(), binomial(n, n / 2));
        }
    }

    #[test]
    fn rough_basis_is_g_orthonormal_and_harmonic() {
        let grid = PeriodicGrid::new(2, 8).unwrap();
        let g = conformal_singular_metric(grid, &[0.3, 0.6], 0.8, 1.0 + 1e-6, None).unwrap();
        let asm = assemble_signature_operator(&g).unwrap();
        let k = kernel_analysis(&asm, &SolverOptions::default()).unwrap();
        assert!(k.consistent(), "{:?}", k.summary());
        for (i, a) in k.basis.iter().enumerate() {
            assert!(asm.form_norm(2, &asm.d(1, a.data())) < 1e-6);
            for (j, b) in k.basis.iter().enumerate() {
                let ip = asm.inner(1, a.data(), b.data());
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((ip.re - target).abs() < 1e-10 && ip.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn spectra_are_symmetric() {
        // even n: the grading; n = 1: complex conjugation (odd N avoids the
        // unpaired Nyquist mode); n = 3: reflection-symmetric metrics only
        for (n, res) in [(2, 6), (1, 7)] {
            let grid = PeriodicGrid::new(n, res).unwrap();
            let asm =
                assemble_signature_operator(&random_rough_metric(grid, 7.0, 11).unwrap()).unwrap();
            assert!(spectral_symmetry_defect(&asm).unwrap() < 1e-9, "n={n}");
        }
        let grid = PeriodicGrid::new(3, 4).unwrap();
        let g = conformal_singular_metric(grid, &[0.5; 3], 0.3, 1.0 + 1e-6, None).unwrap();
        let asm = assemble_signature_operator(&g).unwrap();
        assert!(spectral_symmetry_defect(&asm).unwrap() < 1e-9);
    }

    #[test]
    fn anisotropic_t3_spectrum_is_asymmetric() {
        let grid = PeriodicGrid::new(3, 4).unwrap();
        let asm =
            assemble_signature_operator(&random_rough_metric(grid, 7.0, 11).unwrap()).unwrap();
        assert!(spectral_symmetry_defect(&asm).unwrap() > 1e-4);
    }

    #[test]
    fn random_metric_t3_kernel() {
        let grid = PeriodicGrid::new(3, 4).unwrap();
        let asm = assemble_signature_operator(&random_rough_metric(grid, 7.0, 3).unwrap()).unwrap();
        let k = kernel_analysis(&asm, &SolverOptions::default()).unwrap();
        assert!(k.consistent(), "{:?}", k.summary());
    }
}
