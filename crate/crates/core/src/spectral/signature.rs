//! Intersection form on harmonic middle forms of `T⁴`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::assembly::SignatureOperatorAssembly;
use super::kernel::{kernel_analysis, KernelSummary};
use super::solver::SolverOptions;
use crate::dec::wedge_integral;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureReport {
    pub kernel: KernelSummary,
    /// `[∫ h_i ∧ h̄_j]`, row-major.
    pub pairing: Vec<Vec<Complex64>>,
    pub eigenvalues: Vec<f64>,
    pub positive: usize,
    pub negative: usize,
    pub signature: i64,
}

pub fn signature_pairing(
    asm: &SignatureOperatorAssembly,
    options: &SolverOptions,
) -> Result<SignatureReport> {
    let grid = asm.grid();
    if grid.dim() != 4 {
        return Err(Error::Invalid(format!(
            "signature pairing needs n = 4, got n = {}",
            grid.dim()
        )));
    }
    let kernel = kernel_analysis(asm, options)?;
    if !kernel.consistent() {
        return Err(Error::Invalid(format!(
            "harmonic 2-forms: found {} (gap ratio {:.3e}), expected {}; refusing to report a signature",
            kernel.count.dim, kernel.count.gap_ratio, kernel.expected
        )));
    }
    let size = kernel.basis.len();
    let mut pairing = vec![vec![Complex64::new(0.0, 0.0); size]; size];
    for i in 0..size {
        for j in 0..size {
            pairing[i][j] = wedge_integral(&kernel.basis[i], &kernel.basis[j])?;
        }
    }
    let m = DMatrix::from_fn(size, size, |i, j| {
        0.5 * (pairing[i][j] + pairing[j][i].conj())
    });
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let tol = 1e-8 * eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let positive = eigenvalues.iter().filter(|&&v| v > tol).count();
    let negative = eigenvalues.iter().filter(|&&v| v < -tol).count();
    Ok(SignatureReport {
        kernel: kernel.summary(),
        pairing,
        eigenvalues,
        positive,
        negative,
        signature: positive as i64 - negative as i64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::metric::builders::{flat_metric, scaled_metric};
    use crate::spectral::assembly::assemble_signature_operator;

    #[test]
    fn flat_t4_is_split() {
        let grid = PeriodicGrid::new(4, 4).unwrap();
        let asm = assemble_signature_operator(&flat_metric(grid)).unwrap();
        let r = signature_pairing(&asm, &SolverOptions::default()).unwrap();
        assert_eq!((r.positive, r.negative, r.signature), (3, 3, 0));
        for v in &r.eigenvalues {
            assert!((v.abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn scaled_metric_keeps_signs() {
        let grid = PeriodicGrid::new(4, 4).unwrap();
        let asm = assemble_signature_operator(&scaled_metric(grid, 3.0).unwrap()).unwrap();
        let r = signature_pairing(&asm, &SolverOptions::default()).unwrap();
        assert_eq!(r.signature, 0);
        assert_eq!(r.positive, 3);
    }

    #[test]
    fn rejects_other_dimensions() {
        let grid = PeriodicGrid::new(2, 4).unwrap();
        let asm = assemble_signature_operator(&flat_metric(grid)).unwrap();
        assert!(signature_pairing(&asm, &SolverOptions::default()).is_err());
    }
}
