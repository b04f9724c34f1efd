use nalgebra::DMatrix;
use num_complex::Complex64;

use super::form::FormField;
use crate::error::{Error, Result};
use crate::grid::{multi_indices, PeriodicGrid};
use crate::metric::MetricField;

/// `k`-th compound matrix: the entry at `(I, J)` is `det a[I, J]`, with
/// multi-indices in lexicographic order. This is the induced map on `Λ^k`.
pub fn compound_matrix(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let basis = multi_indices(n, k);
    let axes = |m: u8| (0..n).filter(move |&i| m & (1 << i) != 0);
    DMatrix::from_fn(basis.len(), basis.len(), |r, c| {
        let rows: Vec<usize> = axes(basis[r]).collect();
        let cols: Vec<usize> = axes(basis[c]).collect();
        if k == 0 {
            return 1.0;
        }
        DMatrix::from_fn(k, k, |i, j| a[(rows[i], cols[j])]).determinant()
    })
}

/// Block-diagonal matrix of the metric inner product on degree-`k` forms:
/// one `C(n,k) × C(n,k)` block `λ^k(A^{-1}) √det A` per site. The cell
/// volume `h^n` is applied by [`MassMatrix::inner`], not stored.
#[derive(Debug, Clone)]
pub struct MassMatrix {
    grid: PeriodicGrid,
    degree: usize,
    size: usize,
    blocks: Vec<f64>,
    chol: Vec<f64>,
}

pub fn mass_matrix(metric: &MetricField, degree: usize) -> Result<MassMatrix> {
    let grid = *metric.grid();
    grid.check_degree(degree)?;
    let size = grid.num_components(degree);
    let mut blocks = Vec::with_capacity(grid.num_sites() * size * size);
    let mut chol = Vec::with_capacity(blocks.capacity());
    for site in 0..grid.num_sites() {
        let a = metric.matrix(site);
        let factor = a.clone().cholesky().ok_or_else(|| Error::NotSpd {
            site,
            reason: "Cholesky factorization failed".into(),
        })?;
        let det = factor.l().diagonal().product().powi(2);
        let block = compound_matrix(&factor.inverse(), degree) * det.sqrt();
        let block = (&block + block.transpose()) * 0.5;
        let l = block.clone().cholesky().ok_or_else(|| Error::NotSpd {
            site,
            reason: format!("degree-{degree} mass block is not positive definite"),
        })?;
        blocks.extend(block.transpose().iter());
        chol.extend(l.l().transpose().iter());
    }
    Ok(MassMatrix {
        grid,
        degree,
        size,
        blocks,
        chol,
    })
}

impl MassMatrix {
    pub fn identity(grid: PeriodicGrid, degree: usize) -> Self {
        let size = grid.num_components(degree);
        let eye: Vec<f64> = DMatrix::<f64>::identity(size, size)
            .iter()
            .copied()
            .collect();
        let blocks: Vec<f64> = (0..grid.num_sites())
            .flat_map(|_| eye.iter().copied())
            .collect();
        Self {
            grid,
            degree,
            size,
            chol: blocks.clone(),
            blocks,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn block_size(&self) -> usize {
        self.size
    }

    pub fn block(&self, site: usize) -> DMatrix<f64> {
        let s = self.size;
        DMatrix::from_row_slice(s, s, &self.blocks[site * s * s..(site + 1) * s * s])
    }

    /// Lower Cholesky factor `L` of the block at `site`.
    pub fn cholesky_block(&self, site: usize) -> DMatrix<f64> {
        let s = self.size;
        DMatrix::from_row_slice(s, s, self.row_chol(site))
    }

    fn row_block(&self, site: usize) -> &[f64] {
        let s = self.size;
        &self.blocks[site * s * s..(site + 1) * s * s]
    }

    fn row_chol(&self, site: usize) -> &[f64] {
        let s = self.size;
        &self.chol[site * s * s..(site + 1) * s * s]
    }

    /// `y = M x` blockwise.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.blockwise(x, |site, v, out| {
            let b = self.row_block(site);
            for r in 0..self.size {
                out[r] = (0..self.size).map(|c| v[c] * b[r * self.size + c]).sum();
            }
        })
    }

    /// `y = M^{-1} x` via the stored Cholesky factors.
    pub fn solve(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.chol_solve_lt(&self.chol_solve_l(x))
    }

    /// `y = L x` where `M = L Lᵀ` blockwise.
    pub fn chol_apply_l(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.blockwise(x, |site, v, out| {
            let l = self.row_chol(site);
            for r in 0..self.size {
                out[r] = (0..=r).map(|c| v[c] * l[r * self.size + c]).sum();
            }
        })
    }

    /// `y = Lᵀ x`.
    pub fn chol_apply_lt(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.blockwise(x, |site, v, out| {
            let l = self.row_chol(site);
            for r in 0..self.size {
                out[r] = (r..self.size).map(|c| v[c] * l[c * self.size + r]).sum();
            }
        })
    }

    /// `y = L^{-1} x` by forward substitution.
    pub fn chol_solve_l(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.blockwise(x, |site, v, out| {
            let l = self.row_chol(site);
            for r in 0..self.size {
                let mut acc = v[r];
                for c in 0..r {
                    acc -= out[c] * l[r * self.size + c];
                }
                out[r] = acc / l[r * self.size + r];
            }
        })
    }

    /// `y = L^{-T} x` by back substitution.
    pub fn chol_solve_lt(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.blockwise(x, |site, v, out| {
            let l = self.row_chol(site);
            for r in (0..self.size).rev() {
                let mut acc = v[r];
                for c in r + 1..self.size {
                    acc -= out[c] * l[c * self.size + r];
                }
                out[r] = acc / l[r * self.size + r];
            }
        })
    }

    fn blockwise(
        &self,
        x: &[Complex64],
        f: impl Fn(usize, &[Complex64], &mut [Complex64]),
    ) -> Vec<Complex64> {
        assert_eq!(
            x.len(),
            self.grid.num_sites() * self.size,
            "mass matrix operand length"
        );
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        for (site, (v, out)) in x
            .chunks_exact(self.size)
            .zip(y.chunks_exact_mut(self.size))
            .enumerate()
        {
            f(site, v, out);
        }
        y
    }

    /// `⟨α, β⟩_g = h^n Σ_x β(x)^H B(x) α(x)`, linear in `α`.
    pub fn inner(&self, alpha: &FormField, beta: &FormField) -> Result<Complex64> {
        self.check(alpha)?;
        self.check(beta)?;
        let ma = self.apply(alpha.data());
        let s: Complex64 = ma.iter().zip(beta.data()).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn norm(&self, alpha: &FormField) -> Result<f64> {
        Ok(self.inner(alpha, alpha)?.re.max(0.0).sqrt())
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_block_eigenvalue(&self) -> f64 {
        (0..self.grid.num_sites())
            .map(|s| crate::metric::spd::min_eigenvalue(&self.block(s)))
            .fold(f64::INFINITY, f64::min)
    }

    fn check(&self, w: &FormField) -> Result<()> {
        if w.grid() != &self.grid || w.degree() != self.degree {
            return Err(Error::DegreeMismatch(format!(
                "degree-{} mass matrix applied to degree-{} form",
                self.degree,
                w.degree()
            )));
        }
        Ok(())
    }
}
