//! Separable n-dimensional DFT on the lattice and the Fourier-multiplier
//! differentials built on it.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::dec::exterior::{coboundary_table, CoboundaryTerm};
use crate::grid::PeriodicGrid;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Unnormalized forward transform, inverse scaled by `1/N^n`.
#[derive(Clone)]
pub struct FourierTransform {
    grid: PeriodicGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierTransform")
            .field("grid", &self.grid)
            .finish()
    }
}

impl FourierTransform {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.resolution();
        Self {
            grid,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    fn lines(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.resolution();
        let total = self.grid.num_sites();
        assert_eq!(data.len(), total, "scalar field length");
        let mut line = vec![ZERO; n];
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        let mut stride = 1;
        for _ in 0..self.grid.dim() {
            let block = stride * n;
            for base in (0..total).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[start + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[start + j * stride] = *v;
                    }
                }
            }
            stride = block;
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.lines(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.lines(data, &self.inverse);
        let scale = 1.0 / self.grid.num_sites() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// Transforms every component of a site-major field with `comps`
    /// components; returns component-major spectra.
    pub fn forward_components(&self, data: &[Complex64], comps: usize) -> Vec<Vec<Complex64>> {
        (0..comps)
            .map(|c| {
                let mut field: Vec<Complex64> =
                    data.iter().skip(c).step_by(comps).copied().collect();
                self.forward(&mut field);
                field
            })
            .collect()
    }

    pub fn inverse_components(&self, mut spectra: Vec<Vec<Complex64>>) -> Vec<Complex64> {
        let comps = spectra.len();
        let sites = self.grid.num_sites();
        let mut out = vec![ZERO; sites * comps];
        for (c, field) in spectra.iter_mut().enumerate() {
            self.inverse(field);
            for (s, v) in field.iter().enumerate() {
                out[s * comps + c] = *v;
            }
        }
        out
    }
}

/// Which one-dimensional difference symbol a differential uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceKind {
    /// `(e^{iθ} − 1)/h`, the forward difference.
    Forward,
    /// `2i sin(θ/2)/h` with `θ ∈ [−π, π)`: the forward difference composed
    /// with a half-cell shift. Purely imaginary, so the operator is
    /// skew-adjoint up to the component pattern, and vanishes only at θ = 0.
    Centered,
}

pub fn difference_symbol(grid: &PeriodicGrid, kind: DifferenceKind, c: usize) -> Complex64 {
    let h = grid.spacing();
    let theta = 2.0 * std::f64::consts::PI * grid.frequency(c) as f64 / grid.resolution() as f64;
    match kind {
        DifferenceKind::Forward => (Complex64::new(0.0, theta).exp() - 1.0) / h,
        DifferenceKind::Centered => Complex64::new(0.0, 2.0 * (theta / 2.0).sin() / h),
    }
}

/// Exterior derivative acting as a Fourier multiplier.
#[derive(Debug, Clone)]
pub struct FourierDifferential {
    kind: DifferenceKind,
    fft: FourierTransform,
    /// `symbols[site * n + axis]` at the frequency indexed by `site`.
    symbols: Vec<Complex64>,
    tables: Vec<Vec<Vec<CoboundaryTerm>>>,
}

impl FourierDifferential {
    pub fn new(grid: PeriodicGrid, kind: DifferenceKind) -> Self {
        let n = grid.dim();
        let per_axis: Vec<Complex64> = (0..grid.resolution())
            .map(|c| difference_symbol(&grid, kind, c))
            .collect();
        let mut symbols = Vec::with_capacity(grid.num_sites() * n);
        for site in 0..grid.num_sites() {
            let c = grid.coords(site);
            symbols.extend((0..n).map(|i| per_axis[c[i]]));
        }
        let tables = (0..n).map(|k| coboundary_table(n, k)).collect();
        Self {
            kind,
            fft: FourierTransform::new(grid),
            symbols,
            tables,
        }
    }

    pub fn centered(grid: PeriodicGrid) -> Self {
        Self::new(grid, DifferenceKind::Centered)
    }

    pub fn forward(grid: PeriodicGrid) -> Self {
        Self::new(grid, DifferenceKind::Forward)
    }

    pub fn kind(&self) -> DifferenceKind {
        self.kind
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.fft.grid()
    }

    pub fn transform(&self) -> &FourierTransform {
        &self.fft
    }

    /// Per-axis symbols at frequency bin `site`.
    pub fn symbols_at(&self, site: usize) -> &[Complex64] {
        let n = self.grid().dim();
        &self.symbols[site * n..(site + 1) * n]
    }

    /// Symbol matrix of `d_k` at frequency bin `site`, row-major
    /// `C(n,k+1) × C(n,k)`.
    pub fn symbol_matrix(&self, k: usize, site: usize) -> Vec<Complex64> {
        let grid = self.grid();
        let (rows, cols) = (grid.num_components(k + 1), grid.num_components(k));
        let b = self.symbols_at(site);
        let mut m = vec![ZERO; rows * cols];
        for (j, terms) in self.tables[k].iter().enumerate() {
            for t in terms {
                m[j * cols + t.source] += b[t.axis] * t.sign;
            }
        }
        m
    }

    /// Degree-`k` spectra to degree-`k+1` spectra.
    pub fn apply_spectral(&self, k: usize, input: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let n = self.grid().dim();
        let sites = self.grid().num_sites();
        self.tables[k]
            .iter()
            .map(|terms| {
                (0..sites)
                    .map(|s| {
                        terms
                            .iter()
                            .map(|t| input[t.source][s] * self.symbols[s * n + t.axis] * t.sign)
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Euclidean adjoint of [`apply_spectral`](Self::apply_spectral).
    pub fn adjoint_spectral(&self, k: usize, input: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let n = self.grid().dim();
        let sites = self.grid().num_sites();
        let mut out = vec![vec![ZERO; sites]; self.grid().num_components(k)];
        for (j, terms) in self.tables[k].iter().enumerate() {
            for t in terms {
                let target = &mut out[t.source];
                for s in 0..sites {
                    target[s] += input[j][s] * self.symbols[s * n + t.axis].conj() * t.sign;
                }
            }
        }
        out
    }

    /// `d_k` on a site-major degree-`k` coefficient vector.
    pub fn apply(&self, k: usize, x: &[Complex64]) -> Vec<Complex64> {
        let grid = self.grid();
        let spectra = self.fft.forward_components(x, grid.num_components(k));
        self.fft
            .inverse_components(self.apply_spectral(k, &spectra))
    }

    /// `d_k^H` (Euclidean adjoint) on a site-major degree-`k+1` vector.
    pub fn apply_adjoint(&self, k: usize, y: &[Complex64]) -> Vec<Complex64> {
        let grid = self.grid();
        let spectra = self.fft.forward_components(y, grid.num_components(k + 1));
        self.fft
            .inverse_components(self.adjoint_spectral(k, &spectra))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dec::{coboundary, FormField};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
    }

    #[test]
    fn fft_roundtrip() {
        let grid = PeriodicGrid::new(3, 6).unwrap();
        let fft = FourierTransform::new(grid);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = FormField::random(grid, 0, &mut rng).unwrap().into_data();
        let mut y = x.clone();
        fft.forward(&mut y);
        fft.inverse(&mut y);
        let err: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn forward_symbol_matches_coboundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (n, res) in [(1, 8), (2, 6), (3, 4)] {
            let grid = PeriodicGrid::new(n, res).unwrap();
            let d = FourierDifferential::forward(grid);
            for k in 0..n {
                let w = FormField::random(grid, k, &mut rng).unwrap();
                let direct = coboundary(&w).unwrap();
                let spectral = d.apply(k, w.data());
                let err = direct
                    .data()
                    .iter()
                    .zip(&spectral)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(
                    err < 1e-10 * direct.max_abs().max(1.0),
                    "n={n} k={k} err={err}"
                );
            }
        }
    }

    #[test]
    fn centered_is_closed_and_adjoint_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = PeriodicGrid::new(3, 6).unwrap();
        let d = FourierDifferential::centered(grid);
        let w = FormField::random(grid, 0, &mut rng).unwrap();
        let dd = d.apply(1, &d.apply(0, w.data()));
        assert!(dd.iter().all(|v| v.norm() < 1e-10));
        let x = FormField::random(grid, 1, &mut rng).unwrap();
        let y = FormField::random(grid, 2, &mut rng).unwrap();
        let lhs = dot(&d.apply(1, x.data()), y.data());
        let rhs = dot(x.data(), &d.apply_adjoint(1, y.data()));
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm());
    }

    #[test]
    fn centered_symbol_vanishes_only_at_zero() {
        let grid = PeriodicGrid::new(1, 8).unwrap();
        for c in 0..8 {
            let b = difference_symbol(&grid, DifferenceKind::Centered, c);
            assert_eq!(b.re, 0.0);
            assert_eq!(b.norm() == 0.0, c == 0);
            let f = difference_symbol(&grid, DifferenceKind::Forward, c);
            assert!((b.norm() - f.norm()).abs() < 1e-12);
        }
    }
}
