use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, MAX_DIM};

/// A degree-`k` cochain: one complex coefficient per site and per basis
/// component `dx_I`, stored site-major (`data[site * C(n,k) + comp]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FormField {
    grid: PeriodicGrid,
    degree: usize,
    data: Vec<Complex64>,
}

impl FormField {
    pub fn zeros(grid: PeriodicGrid, degree: usize) -> Result<Self> {
        grid.check_degree(degree)?;
        Ok(Self {
            grid,
            degree,
            data: vec![Complex64::new(0.0, 0.0); grid.field_len(degree)],
        })
    }

    pub fn from_vec(grid: PeriodicGrid, degree: usize, data: Vec<Complex64>) -> Result<Self> {
        grid.check_degree(degree)?;
        if data.len() != grid.field_len(degree) {
            return Err(Error::Shape(format!(
                "degree-{degree} field needs {} coefficients, got {}",
                grid.field_len(degree),
                data.len()
            )));
        }
        Ok(Self { grid, degree, data })
    }

    pub fn from_real(grid: PeriodicGrid, degree: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(
            grid,
            degree,
            data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// Samples `f(position, component)` at every site.
    pub fn from_fn(
        grid: PeriodicGrid,
        degree: usize,
        mut f: impl FnMut(&[f64; MAX_DIM], usize) -> Complex64,
    ) -> Result<Self> {
        grid.check_degree(degree)?;
        let nc = grid.num_components(degree);
        let mut data = Vec::with_capacity(grid.field_len(degree));
        for site in 0..grid.num_sites() {
            let x = grid.position(site);
            for c in 0..nc {
                data.push(f(&x, c));
            }
        }
        Ok(Self { grid, degree, data })
    }

    /// Constant form `Σ_I coeffs[I] dx_I`.
    pub fn constant(grid: PeriodicGrid, degree: usize, coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.len() != grid.num_components(degree) {
            return Err(Error::Shape("constant coefficients per component".into()));
        }
        Self::from_fn(grid, degree, |_, c| coeffs[c])
    }

    /// Entries uniform in the unit square of the complex plane, centred.
    pub fn random(grid: PeriodicGrid, degree: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::from_fn(grid, degree, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    pub fn random_real(grid: PeriodicGrid, degree: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::from_fn(grid, degree, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_components(&self) -> usize {
        self.grid.num_components(self.degree)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn at(&self, site: usize) -> &[Complex64] {
        let nc = self.num_components();
        &self.data[site * nc..(site + 1) * nc]
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.degree != other.degree {
            return Err(Error::DegreeMismatch(format!(
                "degree {} vs {} (or different grids)",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(self.with_data(data))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(self.with_data(data))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let data = self.data.iter().map(|a| a * s).collect();
        self.with_data(data)
    }

    /// Pointwise multiplication by a sampled scalar function.
    pub fn multiply(&self, f: &[f64]) -> Result<Self> {
        if f.len() != self.grid.num_sites() {
            return Err(Error::Shape("scalar samples per site".into()));
        }
        let nc = self.num_components();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, a)| a * f[i / nc])
            .collect();
        Ok(self.with_data(data))
    }

    /// Euclidean (flat, unweighted) coefficient norm times `h^{n/2}`.
    pub fn flat_norm(&self) -> f64 {
        (self.data.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub(crate) fn with_data(&self, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            grid: self.grid,
            degree: self.degree,
            data,
        }
    }
}

/// `multiply` as a free function, matching the operator naming.
pub fn mult_operator(f: &[f64], omega: &FormField) -> Result<FormField> {
    omega.multiply(f)
}
