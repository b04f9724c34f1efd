//! The Fredholm module built from the signature operator on middle forms.
//!
//! Even `n`: with `X = dd*`, `Y = d*d` and `H = X + Y` on `Ω^m`,
//! `F = (X − Y) w(H)` for a normalization weight `w`. Odd `n`:
//! `F = (D + 1)(1 + D²)^{-1/2}`. Everything acts in whitened coordinates,
//! where multiplication by a function stays a diagonal multiplication.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assembly::{norm, Parity, SignatureOperatorAssembly};
use super::report::KERNEL_THRESHOLD;
use super::solver::{hermitian_eigen, OperatorKind, SpectralProblem};
use crate::error::{Error, Result};

/// Dense construction limit (unknowns) for non-constant metrics.
pub const FREDHOLM_DENSE_LIMIT: usize = 1024;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Weight turning `X − Y` into a bounded operator.
pub trait Normalization: Send + Sync {
    fn name(&self) -> &'static str;
    fn weight(&self, lambda: f64) -> f64;
    /// Eigenvalue of `F² − 1` on an eigenvector of `H` with eigenvalue `λ`.
    fn square_defect(&self, lambda: f64) -> f64;
}

/// `w = (1 + H)^{-1}`, so `F² − 1 = −(1 + 2H)(1 + H)^{-2}`.
pub struct Printed;

/// `w = (H + H²)^{-1/2}` (zero on the kernel), so `F² − 1 = −(1 + H)^{-1}`.
pub struct Bounded;

impl Normalization for Printed {
    fn name(&self) -> &'static str {
        "printed"
    }
    fn weight(&self, lambda: f64) -> f64 {
        1.0 / (1.0 + lambda)
    }
    fn square_defect(&self, lambda: f64) -> f64 {
        -(1.0 + 2.0 * lambda) / (1.0 + lambda).powi(2)
    }
}

impl Normalization for Bounded {
    fn name(&self) -> &'static str {
        "bounded"
    }
    fn weight(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            0.0
        } else {
            1.0 / (lambda * (1.0 + lambda)).sqrt()
        }
    }
    fn square_defect(&self, lambda: f64) -> f64 {
        -1.0 / (1.0 + lambda.max(0.0))
    }
}

pub struct NormalizationRegistry {
    entries: BTreeMap<&'static str, Box<dyn Normalization>>,
}

impl NormalizationRegistry {
    pub fn with_defaults() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register(Box::new(Printed));
        r.register(Box::new(Bounded));
        r
    }

    pub fn register(&mut self, n: Box<dyn Normalization>) {
        self.entries.insert(n.name(), n);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Normalization> {
        self.entries.get(name).map(|n| n.as_ref()).ok_or_else(|| {
            Error::Invalid(format!(
                "unknown normalization `{name}` (known: {})",
                self.names().join(", ")
            ))
        })
    }
}

enum Backend {
    /// Row-major dense matrix.
    Dense(Vec<Complex64>),
    /// One block per frequency bin; vectors are moved to Fourier space
    /// component by component.
    Fourier(Vec<DMatrix<Complex64>>),
}

/// `F` in whitened middle-degree coordinates, together with the spectrum
/// of the operator it was built from (`H` for even `n`, `D` for odd `n`).
pub struct FredholmOperator<'a> {
    asm: &'a SignatureOperatorAssembly,
    backend: Backend,
    /// Eigenvalues of `H` (even) or signed eigenvalues of `D` (odd).
    pub base_spectrum: Vec<f64>,
    pub normalization: String,
}

fn dense_matrix(
    dim: usize,
    mut apply: impl FnMut(&[Complex64]) -> Vec<Complex64>,
) -> Vec<Complex64> {
    let mut m = vec![ZERO; dim * dim];
    let mut e = vec![ZERO; dim];
    for j in 0..dim {
        e[j] = Complex64::new(1.0, 0.0);
        let col = apply(&e);
        e[j] = ZERO;
        for i in 0..dim {
            m[i * dim + j] = col[i];
        }
    }
    m
}

/// Sets eigenvalues of `H` below the kernel threshold to exactly zero.
fn snap_kernel(values: &mut [f64]) {
    let cut = KERNEL_THRESHOLD * values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    values
        .iter_mut()
        .filter(|v| v.abs() < cut)
        .for_each(|v| *v = 0.0);
}

fn to_nalgebra(dim: usize, m: &[Complex64]) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(dim, dim, m)
}

/// `V diag(f) Vᴴ`.
fn spectral_function(
    vectors: &[Vec<Complex64>],
    values: impl Iterator<Item = f64>,
) -> DMatrix<Complex64> {
    let dim = vectors[0].len();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for (v, f) in vectors.iter().zip(values) {
        if f == 0.0 {
            continue;
        }
        let col = DMatrix::from_column_slice(dim, 1, v);
        out += &col * col.adjoint() * Complex64::new(f, 0.0);
    }
    out
}

impl<'a> FredholmOperator<'a> {
    pub fn new(
        asm: &'a SignatureOperatorAssembly,
        normalization: &dyn Normalization,
    ) -> Result<Self> {
        match asm.parity() {
            Parity::Even if asm.metric().is_constant() => {
                Ok(Self::even_fourier(asm, normalization))
            }
            Parity::Even => Self::even_dense(asm, normalization),
            Parity::Odd => Self::odd_dense(asm),
        }
    }

    fn check_dense(asm: &SignatureOperatorAssembly) -> Result<usize> {
        let dim = asm.len(asm.middle_degree());
        if dim > FREDHOLM_DENSE_LIMIT {
            return Err(Error::Invalid(format!(
                "dense Fredholm construction limited to {FREDHOLM_DENSE_LIMIT} unknowns, got {dim}"
            )));
        }
        Ok(dim)
    }

    fn even_dense(asm: &'a SignatureOperatorAssembly, w: &dyn Normalization) -> Result<Self> {
        let dim = Self::check_dense(asm)?;
        let m = asm.middle_degree();
        let h = dense_matrix(dim, |u| {
            SpectralProblem::new(asm, m, OperatorKind::Hodge).apply(u)
        });
        let x = dense_matrix(dim, |u| asm.down(m, u));
        let (mut values, vectors) = hermitian_eigen(dim, &h, dim, true);
        let vectors = vectors.expect("vectors requested");
        snap_kernel(&mut values);
        let weight = spectral_function(&vectors, values.iter().map(|&l| w.weight(l)));
        let hm = to_nalgebra(dim, &h);
        let xm = to_nalgebra(dim, &x);
        let diff = &xm * Complex64::new(2.0, 0.0) - hm;
        let f = diff * weight;
        Ok(Self {
            asm,
            backend: Backend::Dense(f.transpose().iter().copied().collect()),
            base_spectrum: values,
            normalization: w.name().into(),
        })
    }

    fn even_fourier(asm: &'a SignatureOperatorAssembly, w: &dyn Normalization) -> Self {
        let grid = *asm.grid();
        let m = asm.middle_degree();
        let whitened = |j: usize, site: usize| -> DMatrix<Complex64> {
            let (rows, cols) = (grid.num_components(j + 1), grid.num_components(j));
            let sym =
                DMatrix::from_row_slice(rows, cols, &asm.differential().symbol_matrix(j, site));
            let l_out = asm
                .mass(j + 1)
                .cholesky_block(0)
                .map(|x| Complex64::new(x, 0.0));
            let l_in = asm
                .mass(j)
                .cholesky_block(0)
                .map(|x| Complex64::new(x, 0.0));
            l_out.transpose() * sym * l_in.transpose().try_inverse().expect("invertible factor")
        };
        let mut blocks = Vec::with_capacity(grid.num_sites());
        let mut spectrum = Vec::with_capacity(asm.len(m));
        for site in 0..grid.num_sites() {
            let gu = whitened(m, site);
            let gd = whitened(m - 1, site);
            let y = gu.adjoint() * &gu;
            let x = &gd * gd.adjoint();
            let h = &x + &y;
            let eig = SymmetricEigen::new(h.clone());
            spectrum.extend(eig.eigenvalues.iter().copied());
            let v = &eig.eigenvectors;
            let d =
                DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(w.weight(l), 0.0)));
            blocks.push((x - y) * (v * d * v.adjoint()));
        }
        spectrum.sort_by(f64::total_cmp);
        snap_kernel(&mut spectrum);
        Self {
            asm,
            backend: Backend::Fourier(blocks),
            base_spectrum: spectrum,
            normalization: w.name().into(),
        }
    }

    fn odd_dense(asm: &'a SignatureOperatorAssembly) -> Result<Self> {
        let dim = Self::check_dense(asm)?;
        let m = asm.middle_degree();
        let mut err = None;
        let dmat = dense_matrix(dim, |u| match asm.odd_operator(&asm.from_whitened(m, u)) {
            Ok(v) => asm.to_whitened(m, &v),
            Err(e) => {
                err = Some(e.to_string());
                vec![ZERO; dim]
            }
        });
        if let Some(e) = err {
            return Err(Error::Invalid(e));
        }
        let (values, vectors) = hermitian_eigen(dim, &dmat, dim, true);
        let f = spectral_function(
            &vectors.expect("vectors requested"),
            values.iter().map(|&l| (l + 1.0) / (1.0 + l * l).sqrt()),
        );
        Ok(Self {
            asm,
            backend: Backend::Dense(f.transpose().iter().copied().collect()),
            base_spectrum: values,
            normalization: "odd".into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.asm.len(self.asm.middle_degree())
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        match &self.backend {
            Backend::Dense(f) => {
                let dim = u.len();
                (0..dim)
                    .map(|i| {
                        f[i * dim..(i + 1) * dim]
                            .iter()
                            .zip(u)
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect()
            }
            Backend::Fourier(blocks) => {
                let fft = self.asm.differential().transform();
                let comps = self.asm.grid().num_components(self.asm.middle_degree());
                let spectra = fft.forward_components(u, comps);
                let mut out = vec![vec![ZERO; spectra[0].len()]; comps];
                for (site, b) in blocks.iter().enumerate() {
                    for i in 0..comps {
                        out[i][site] = (0..comps).map(|j| b[(i, j)] * spectra[j][site]).sum();
                    }
                }
                fft.inverse_components(out)
            }
        }
    }

    pub fn apply_adjoint(&self, u: &[Complex64]) -> Vec<Complex64> {
        match &self.backend {
            Backend::Dense(f) => {
                let dim = u.len();
                let mut out = vec![ZERO; dim];
                for i in 0..dim {
                    for j in 0..dim {
                        out[j] += f[i * dim + j].conj() * u[i];
                    }
                }
                out
            }
            Backend::Fourier(blocks) => {
                let fft = self.asm.differential().transform();
                let comps = self.asm.grid().num_components(self.asm.middle_degree());
                let spectra = fft.forward_components(u, comps);
                let mut out = vec![vec![ZERO; spectra[0].len()]; comps];
                for (site, b) in blocks.iter().enumerate() {
                    for i in 0..comps {
                        out[i][site] = (0..comps)
                            .map(|j| b[(j, i)].conj() * spectra[j][site])
                            .sum();
                    }
                }
                fft.inverse_components(out)
            }
        }
    }

    /// `τ` in whitened coordinates (middle degree, even `n`).
    fn tau_whitened(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let m = self.asm.middle_degree();
        Ok(self
            .asm
            .to_whitened(m, &self.asm.tau(m, &self.asm.from_whitened(m, u))?))
    }

    /// Eigenvalues of `F² − 1`, ascending, computed from `F` itself.
    pub fn square_minus_one_spectrum(&self) -> Vec<f64> {
        let mut values = match &self.backend {
            Backend::Dense(_) => {
                let dim = self.dim();
                let mut s = dense_matrix(dim, |u| self.apply(&self.apply(u)));
                (0..dim).for_each(|i| s[i * dim + i] -= 1.0);
                // F² − 1 is normal here; symmetrize against round-off.
                hermitian_eigen(dim, &s, dim, false).0
            }
            Backend::Fourier(blocks) => blocks
                .iter()
                .flat_map(|b| {
                    let s = b * b - DMatrix::<Complex64>::identity(b.nrows(), b.ncols());
                    let s = (&s + s.adjoint()) * Complex64::new(0.5, 0.0);
                    SymmetricEigen::new(s)
                        .eigenvalues
                        .iter()
                        .copied()
                        .collect::<Vec<_>>()
                })
                .collect(),
        };
        values.sort_by(f64::total_cmp);
        values
    }

    /// Largest `‖(F − F*)v‖/‖v‖` over random probes.
    pub fn adjoint_defect(&self, probes: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..probes)
            .map(|_| {
                let v = random_vector(self.dim(), &mut rng);
                let a = self.apply(&v);
                let b = self.apply_adjoint(&v);
                norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>()) / norm(&v)
            })
            .fold(0.0, f64::max)
    }

    /// Largest `‖(τF + Fτ)v‖/‖v‖` over random probes.
    pub fn anticommutation_defect(&self, probes: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let v = random_vector(self.dim(), &mut rng);
            let a = self.tau_whitened(&self.apply(&v))?;
            let b = self.apply(&self.tau_whitened(&v)?);
            worst = worst
                .max(norm(&a.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<_>>()) / norm(&v));
        }
        Ok(worst)
    }

    /// Power-iteration estimate of `‖[F, φ]‖` for a sampled function `φ`.
    pub fn commutator_norm(&self, phi: &[f64], seed: u64) -> Result<f64> {
        let sites = self.asm.grid().num_sites();
        if phi.len() != sites {
            return Err(Error::Shape(format!(
                "φ has {} samples, grid has {sites} sites",
                phi.len()
            )));
        }
        let comps = self.dim() / sites;
        let mult = |u: &[Complex64]| -> Vec<Complex64> {
            u.iter()
                .enumerate()
                .map(|(i, z)| z * phi[i / comps])
                .collect()
        };
        let comm = |u: &[Complex64]| -> Vec<Complex64> {
            let a = self.apply(&mult(u));
            let b = mult(&self.apply(u));
            a.iter().zip(&b).map(|(x, y)| x - y).collect()
        };
        let comm_adj = |u: &[Complex64]| -> Vec<Complex64> {
            let a = mult(&self.apply_adjoint(u));
            let b = self.apply_adjoint(&mult(u));
            a.iter().zip(&b).map(|(x, y)| x - y).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = random_vector(self.dim(), &mut rng);
        let mut est = 0.0;
        for _ in 0..60 {
            let nv = norm(&v);
            if nv == 0.0 {
                return Ok(0.0);
            }
            v.iter_mut().for_each(|z| *z /= nv);
            let w = comm_adj(&comm(&v));
            est = norm(&w).sqrt();
            v = w;
        }
        Ok(est)
    }
}

fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..dim)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FredholmReport {
    pub n: usize,
    #[serde(rename = "N")]
    pub resolution: usize,
    pub normalization: String,
    /// Even `n` only.
    pub anticommutation_defect: Option<f64>,
    /// Largest gap between the spectrum of `F² − 1` and its closed form.
    pub square_defect: f64,
    /// Largest gap to `−(1 + D²)^{-1}`, the bounded-transform target.
    pub resolvent_gap: Option<f64>,
    /// Largest singular values of `F² − 1`.
    pub square_tail: Vec<f64>,
    pub adjoint_defect: f64,
    pub commutator_norm: f64,
}

/// Assembles `F` with the named normalization (ignored for odd `n`) and
/// measures its algebraic properties.
pub fn fredholm_module_check(
    asm: &SignatureOperatorAssembly,
    phi: &[f64],
    normalization: &str,
    seed: u64,
) -> Result<FredholmReport> {
    let registry = NormalizationRegistry::with_defaults();
    let w = registry.get(normalization)?;
    let f = FredholmOperator::new(asm, w)?;
    let observed = f.square_minus_one_spectrum();
    let mut expected: Vec<f64> = match asm.parity() {
        Parity::Even => f
            .base_spectrum
            .iter()
            .map(|&l| w.square_defect(l))
            .collect(),
        Parity::Odd => f
            .base_spectrum
            .iter()
            .map(|&l| 2.0 * l / (1.0 + l * l))
            .collect(),
    };
    expected.sort_by(f64::total_cmp);
    let gap = |target: &[f64]| {
        observed
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let square_defect = gap(&expected);
    let resolvent_gap = (asm.parity() == Parity::Even).then(|| {
        let mut r: Vec<f64> = f
            .base_spectrum
            .iter()
            .map(|&l| -1.0 / (1.0 + l.max(0.0)))
            .collect();
        r.sort_by(f64::total_cmp);
        gap(&r)
    });
    let mut tail: Vec<f64> = observed.iter().map(|v| v.abs()).collect();
    tail.sort_by(|a, b| b.total_cmp(a));
    tail.truncate(20);
    let anticommutation_defect = match asm.parity() {
        Parity::Even => Some(f.anticommutation_defect(8, seed)?),
        Parity::Odd => None,
    };
    Ok(FredholmReport {
        n: asm.grid().dim(),
        resolution: asm.grid().resolution(),
        normalization: f.normalization.clone(),
        anticommutation_defect,
        square_defect,
        resolvent_gap,
        square_tail: tail,
        adjoint_defect: f.adjoint_defect(4, seed),
        commutator_norm: f.commutator_norm(phi, seed)?,
    })
}
