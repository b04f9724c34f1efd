//! Hermitian eigensolvers behind a common trait, selected by name.

use std::collections::BTreeMap;

use faer::{Mat, Side};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assembly::{dot, norm, SignatureOperatorAssembly};
use crate::error::{Error, Result};

/// Largest operator dimension the `auto` mode hands to the dense solver.
pub const DENSE_LIMIT: usize = 2048;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which whitened operator on degree-`k` forms to diagonalize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    /// `G_kᴴG_k + G_{k-1}G_{k-1}ᴴ`.
    Hodge,
    /// `G_kᴴG_k`.
    Up,
    /// `G_{k-1}G_{k-1}ᴴ`.
    Down,
    /// `G_kᴴG_k + c G_{k-1}G_{k-1}ᴴ`: pushes exact forms up the spectrum so
    /// an iterative solver sees the coexact part first.
    Penalized(f64),
}

#[derive(Clone, Copy)]
pub struct SpectralProblem<'a> {
    pub assembly: &'a SignatureOperatorAssembly,
    pub degree: usize,
    pub kind: OperatorKind,
}

impl<'a> SpectralProblem<'a> {
    pub fn new(assembly: &'a SignatureOperatorAssembly, degree: usize, kind: OperatorKind) -> Self {
        Self {
            assembly,
            degree,
            kind,
        }
    }

    pub fn dim(&self) -> usize {
        self.assembly.len(self.degree)
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let (a, k) = (self.assembly, self.degree);
        match self.kind {
            OperatorKind::Hodge => a.hodge(k, u),
            OperatorKind::Up => a.up(k, u),
            OperatorKind::Down => a.down(k, u),
            OperatorKind::Penalized(c) => {
                let mut out = a.up(k, u);
                out.iter_mut()
                    .zip(a.down(k, u))
                    .for_each(|(x, y)| *x += y * c);
                out
            }
        }
    }
}

/// Eigenvalues in ascending order, with unit eigenvectors (whitened
/// coordinates) when requested.
#[derive(Debug, Clone, Default)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<Vec<Complex64>>>,
    /// Largest residual `‖Hv − λv‖` for iterative solves.
    pub max_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub mode: String,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mode: "auto".into(),
            tolerance: 1e-10,
            max_iterations: 500,
            seed: 0,
        }
    }
}

pub trait EigenSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn supports(&self, problem: &SpectralProblem) -> bool;
    /// The `count` smallest eigenpairs (all of them for `None`).
    fn solve(
        &self,
        problem: &SpectralProblem,
        count: Option<usize>,
        vectors: bool,
        options: &SolverOptions,
    ) -> Result<Eigenpairs>;
}

/// Eigen-decomposition of a dense Hermitian matrix (row-major) through its
/// real symmetric embedding `[[Re, −Im], [Im, Re]]`, whose spectrum is that
/// of the original with every eigenvalue doubled. Returns the `count`
/// smallest eigenvalues and, optionally, an orthonormal set of complex
/// eigenvectors.
pub fn hermitian_eigen(
    dim: usize,
    h: &[Complex64],
    count: usize,
    vectors: bool,
) -> (Vec<f64>, Option<Vec<Vec<Complex64>>>) {
    let count = count.min(dim);
    let entry = |i: usize, j: usize| 0.5 * (h[i * dim + j] + h[j * dim + i].conj());
    let embed = Mat::<f64>::from_fn(2 * dim, 2 * dim, |r, c| {
        let (i, j) = (r % dim, c % dim);
        let z = entry(i, j);
        match (r < dim, c < dim) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    if !vectors {
        let mut all = embed.selfadjoint_eigenvalues(Side::Lower);
        all.sort_by(f64::total_cmp);
        let values = (0..count)
            .map(|i| 0.5 * (all[2 * i] + all[2 * i + 1]))
            .collect();
        return (values, None);
    }
    let eig = embed.selfadjoint_eigendecomposition(Side::Lower);
    let s = eig.s().column_vector();
    let u = eig.u();
    let mut order: Vec<usize> = (0..2 * dim).collect();
    order.sort_by(|&a, &b| s.read(a).total_cmp(&s.read(b)));
    let scale = order
        .iter()
        .map(|&i| s.read(i).abs())
        .fold(1e-300, f64::max);
    let values: Vec<f64> = (0..count)
        .map(|i| 0.5 * (s.read(order[2 * i]) + s.read(order[2 * i + 1])))
        .collect();
    // Walk clusters of the embedded spectrum (chained, so the exact pairs
    // are never split); a cluster of 2r real vectors spans r complex
    // directions, extracted by pivoted Gram–Schmidt on `x + iy`.
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(count);
    let mut start = 0;
    while basis.len() < count && start < 2 * dim {
        let mut end = start + 1;
        while end < 2 * dim && (s.read(order[end]) - s.read(order[end - 1])).abs() <= 1e-9 * scale {
            end += 1;
        }
        let want = (end - start).div_ceil(2);
        let mut candidates: Vec<Vec<Complex64>> = order[start..end]
            .iter()
            .map(|&col| {
                (0..dim)
                    .map(|i| Complex64::new(u.read(i, col), u.read(i + dim, col)))
                    .collect()
            })
            .collect();
        for _ in 0..want {
            let (best, best_norm) = candidates
                .iter()
                .enumerate()
                .map(|(i, z)| (i, norm(z)))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            if best_norm < 1e-6 {
                break;
            }
            let mut q = candidates.swap_remove(best);
            q.iter_mut().for_each(|a| *a /= best_norm);
            for z in candidates.iter_mut() {
                let c = dot(z, &q);
                z.iter_mut().zip(&q).for_each(|(a, b)| *a -= c * b);
            }
            basis.push(q);
        }
        start = end;
    }
    basis.truncate(count);
    (values, Some(basis))
}

pub struct DenseSolver;

impl EigenSolver for DenseSolver {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn supports(&self, _: &SpectralProblem) -> bool {
        true
    }

    fn solve(
        &self,
        problem: &SpectralProblem,
        count: Option<usize>,
        vectors: bool,
        _: &SolverOptions,
    ) -> Result<Eigenpairs> {
        let dim = problem.dim();
        let mut h = vec![ZERO; dim * dim];
        let mut e = vec![ZERO; dim];
        for j in 0..dim {
            e[j] = Complex64::new(1.0, 0.0);
            let col = problem.apply(&e);
            e[j] = ZERO;
            for i in 0..dim {
                h[i * dim + j] = col[i];
            }
        }
        let (values, vectors) = hermitian_eigen(dim, &h, count.unwrap_or(dim), vectors);
        Ok(Eigenpairs {
            values,
            vectors,
            max_residual: None,
        })
    }
}

/// Exact block diagonalization for constant metrics: every Fourier mode is
/// invariant, leaving one `C(n,k) × C(n,k)` Hermitian matrix per frequency.
pub struct FourierSolver;

impl FourierSolver {
    fn block(problem: &SpectralProblem, site: usize) -> DMatrix<Complex64> {
        let a = problem.assembly;
        let grid = a.grid();
        let k = problem.degree;
        let n = grid.dim();
        let whitened = |j: usize| -> DMatrix<Complex64> {
            let (rows, cols) = (grid.num_components(j + 1), grid.num_components(j));
            let sym = DMatrix::from_row_slice(rows, cols, &a.differential().symbol_matrix(j, site));
            let l_out = a
                .mass(j + 1)
                .cholesky_block(0)
                .map(|x| Complex64::new(x, 0.0));
            let l_in = a.mass(j).cholesky_block(0).map(|x| Complex64::new(x, 0.0));
            let l_in_inv_t = l_in
                .transpose()
                .try_inverse()
                .expect("Cholesky factor is invertible");
            l_out.transpose() * sym * l_in_inv_t
        };
        let size = grid.num_components(k);
        let mut up = DMatrix::<Complex64>::zeros(size, size);
        let mut down = DMatrix::<Complex64>::zeros(size, size);
        if k < n && !matches!(problem.kind, OperatorKind::Down) {
            let g = whitened(k);
            up = g.adjoint() * g;
        }
        if k > 0 && !matches!(problem.kind, OperatorKind::Up) {
            let g = whitened(k - 1);
            down = &g * g.adjoint();
        }
        match problem.kind {
            OperatorKind::Penalized(c) => up + down * Complex64::new(c, 0.0),
            _ => up + down,
        }
    }
}

impl EigenSolver for FourierSolver {
    fn name(&self) -> &'static str {
        "fourier"
    }

    fn supports(&self, problem: &SpectralProblem) -> bool {
        problem.assembly.metric().is_constant()
    }

    fn solve(
        &self,
        problem: &SpectralProblem,
        count: Option<usize>,
        vectors: bool,
        _: &SolverOptions,
    ) -> Result<Eigenpairs> {
        if !self.supports(problem) {
            return Err(Error::Invalid(
                "the Fourier solver needs a constant metric".into(),
            ));
        }
        let grid = *problem.assembly.grid();
        let sites = grid.num_sites();
        let size = grid.num_components(problem.degree);
        let mut modes: Vec<(f64, usize, Vec<Complex64>)> = Vec::with_capacity(sites * size);
        for site in 0..sites {
            let eig = SymmetricEigen::new(Self::block(problem, site));
            for j in 0..size {
                let v = if vectors {
                    eig.eigenvectors.column(j).iter().copied().collect()
                } else {
                    Vec::new()
                };
                modes.push((eig.eigenvalues[j], site, v));
            }
        }
        modes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        modes.truncate(count.unwrap_or(modes.len()));
        let values = modes.iter().map(|m| m.0).collect();
        let vectors = vectors.then(|| {
            let amp = 1.0 / (sites as f64).sqrt();
            modes
                .iter()
                .map(|(_, bin, v)| {
                    let c = grid.coords(*bin);
                    let mut out = Vec::with_capacity(sites * size);
                    for s in 0..sites {
                        let x = grid.coords(s);
                        let phase: f64 = (0..grid.dim()).map(|i| (c[i] * x[i]) as f64).sum::<f64>()
                            / grid.resolution() as f64;
                        let w = Complex64::new(0.0, 2.0 * std::f64::consts::PI * phase).exp() * amp;
                        out.extend(v.iter().map(|vi| vi * w));
                    }
                    out
                })
                .collect()
        });
        Ok(Eigenpairs {
            values,
            vectors,
            max_residual: None,
        })
    }
}

/// Locally optimal block preconditioned conjugate gradient for the smallest
/// eigenpairs, preconditioned by the flat Laplacian inverted in Fourier
/// space.
pub struct LobpcgSolver;

impl LobpcgSolver {
    fn precondition(problem: &SpectralProblem, r: &[Complex64], shift: f64) -> Vec<Complex64> {
        let d = problem.assembly.differential();
        let grid = d.grid();
        let comps = grid.num_components(problem.degree);
        let mut spectra = d.transform().forward_components(r, comps);
        for s in 0..grid.num_sites() {
            let lap: f64 = d.symbols_at(s).iter().map(|b| b.norm_sqr()).sum();
            let w = 1.0 / (lap + shift);
            spectra.iter_mut().for_each(|c| c[s] *= w);
        }
        d.transform().inverse_components(spectra)
    }

    /// Orthonormalizes `vs` in place, dropping numerically dependent ones.
    fn orthonormalize(vs: Vec<Vec<Complex64>>) -> Vec<Vec<Complex64>> {
        let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(vs.len());
        for mut v in vs {
            let n0 = norm(&v);
            if n0 == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for q in &out {
                    let c = dot(&v, q);
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let nv = norm(&v);
            if nv > 1e-10 * n0 {
                v.iter_mut().for_each(|a| *a /= nv);
                out.push(v);
            }
        }
        out
    }

    fn operator_norm_estimate(problem: &SpectralProblem, rng: &mut ChaCha8Rng) -> f64 {
        let mut v: Vec<Complex64> = (0..problem.dim())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0))
            .collect();
        let mut est = 0.0;
        for _ in 0..30 {
            let nv = norm(&v);
            v.iter_mut().for_each(|a| *a /= nv);
            let w = problem.apply(&v);
            est = norm(&w);
            v = w;
        }
        est.max(f64::MIN_POSITIVE)
    }
}

impl EigenSolver for LobpcgSolver {
    fn name(&self) -> &'static str {
        "lobpcg"
    }

    fn supports(&self, _: &SpectralProblem) -> bool {
        true
    }

    fn solve(
        &self,
        problem: &SpectralProblem,
        count: Option<usize>,
        vectors: bool,
        options: &SolverOptions,
    ) -> Result<Eigenpairs> {
        let dim = problem.dim();
        let want = count.unwrap_or(dim).min(dim);
        let block = (want + (want / 4).max(4)).min(dim / 3).max(want);
        if 3 * block > dim {
            return Err(Error::Invalid(format!(
                "lobpcg needs 3·block ≤ dim, got block {block} for dim {dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let scale = Self::operator_norm_estimate(problem, &mut rng);
        let target = options.tolerance.sqrt() * scale;
        let mut x = Self::orthonormalize(
            (0..block)
                .map(|_| {
                    (0..dim)
                        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect()
                })
                .collect(),
        );
        let mut p: Vec<Vec<Complex64>> = Vec::new();
        let mut values = vec![0.0_f64; block];
        let mut worst = f64::INFINITY;
        for _ in 0..options.max_iterations {
            let ax: Vec<Vec<Complex64>> = x.iter().map(|v| problem.apply(v)).collect();
            let residuals: Vec<Vec<Complex64>> = x
                .iter()
                .zip(&ax)
                .map(|(v, av)| {
                    let lam = dot(av, v).re;
                    av.iter().zip(v).map(|(a, b)| a - b * lam).collect()
                })
                .collect();
            worst = residuals[..want]
                .iter()
                .map(|r| norm(r))
                .fold(0.0, f64::max);
            if worst <= target {
                break;
            }
            let shift = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            let w: Vec<Vec<Complex64>> = residuals
                .iter()
                .map(|r| Self::precondition(problem, r, shift))
                .collect();
            let mut span = x.clone();
            span.extend(w);
            span.extend(p.iter().cloned());
            let s = Self::orthonormalize(span);
            let r = s.len();
            let as_: Vec<Vec<Complex64>> = s.iter().map(|v| problem.apply(v)).collect();
            let mut small = vec![ZERO; r * r];
            for i in 0..r {
                for j in 0..r {
                    small[i * r + j] = dot(&as_[j], &s[i]);
                }
            }
            let (ritz, coeffs) = hermitian_eigen(r, &small, block, true);
            let coeffs = coeffs.expect("vectors requested");
            let combine = |c: &[Complex64], from: usize| -> Vec<Complex64> {
                let mut out = vec![ZERO; dim];
                for (i, ci) in c.iter().enumerate().skip(from) {
                    out.iter_mut().zip(&s[i]).for_each(|(o, v)| *o += v * ci);
                }
                out
            };
            p = coeffs.iter().map(|c| combine(c, block)).collect();
            x = coeffs.iter().map(|c| combine(c, 0)).collect();
            values = ritz;
        }
        if worst > target {
            return Err(Error::NoConvergence(format!(
                "lobpcg: residual {worst:.3e} above {target:.3e} after {} iterations",
                options.max_iterations
            )));
        }
        let ax: Vec<Vec<Complex64>> = x.iter().map(|v| problem.apply(v)).collect();
        let mut pairs: Vec<(f64, Vec<Complex64>)> = x
            .into_iter()
            .zip(&ax)
            .map(|(v, av)| (dot(av, &v).re, v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.truncate(want);
        Ok(Eigenpairs {
            values: pairs.iter().map(|p| p.0).collect(),
            vectors: vectors.then(|| pairs.into_iter().map(|p| p.1).collect()),
            max_residual: Some(worst),
        })
    }
}

pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Box<dyn EigenSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self {
            solvers: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(DenseSolver));
        r.register(Box::new(FourierSolver));
        r.register(Box::new(LobpcgSolver));
        r
    }

    pub fn register(&mut self, solver: Box<dyn EigenSolver>) {
        self.solvers.insert(solver.name(), solver);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn EigenSolver> {
        self.solvers.get(name).map(|s| s.as_ref()).ok_or_else(|| {
            Error::Invalid(format!(
                "unknown solver `{name}` (known: {})",
                self.names().join(", ")
            ))
        })
    }

    /// `auto`: Fourier for constant metrics, dense up to [`DENSE_LIMIT`],
    /// LOBPCG beyond.
    pub fn select(&self, mode: &str, problem: &SpectralProblem) -> Result<&dyn EigenSolver> {
        let name = match mode {
            "auto" if problem.assembly.metric().is_constant() => "fourier",
            "auto" if problem.dim() <= DENSE_LIMIT => "dense",
            "auto" => "lobpcg",
            other => other,
        };
        let solver = self.get(name)?;
        if !solver.supports(problem) {
            return Err(Error::Invalid(format!(
                "solver `{name}` does not support this problem"
            )));
        }
        Ok(solver)
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::metric::builders::{flat_metric, random_rough_metric, scaled_metric};
    use crate::spectral::assembly::assemble_signature_operator;

    #[test]
    fn embedding_recovers_complex_spectrum() {
        // [[2, i], [-i, 2]] has eigenvalues 1, 3
        let h = [
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(2.0, 0.0),
        ];
        let (vals, vecs) = hermitian_eigen(2, &h, 2, true);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let v = &vecs.unwrap()[0];
        let hv0 = h[0] * v[0] + h[1] * v[1];
        assert!((hv0 - v[0]).norm() < 1e-14);
    }

    #[test]
    fn dense_and_fourier_agree_on_constant_metric() {
        let grid = PeriodicGrid::new(2, 6).unwrap();
        let asm = assemble_signature_operator(&scaled_metric(grid, 2.5).unwrap()).unwrap();
        let opts = SolverOptions::default();
        for kind in [OperatorKind::Hodge, OperatorKind::Up, OperatorKind::Down] {
            let p = SpectralProblem::new(&asm, 1, kind);
            let a = DenseSolver.solve(&p, None, false, &opts).unwrap().values;
            let b = FourierSolver.solve(&p, None, false, &opts).unwrap().values;
            let err = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10 * b.last().unwrap(), "{kind:?} {err}");
        }
    }

    #[test]
    fn fourier_vectors_are_eigenvectors() {
        let grid = PeriodicGrid::new(2, 4).unwrap();
        let asm = assemble_signature_operator(&flat_metric(grid)).unwrap();
        let p = SpectralProblem::new(&asm, 1, OperatorKind::Hodge);
        let e = FourierSolver
            .solve(&p, Some(6), true, &SolverOptions::default())
            .unwrap();
        for (lam, v) in e.values.iter().zip(e.vectors.unwrap()) {
            let hv = p.apply(&v);
            let res: f64 = norm(
                &hv.iter()
                    .zip(&v)
                    .map(|(a, b)| a - b * lam)
                    .collect::<Vec<_>>(),
            );
            assert!(res < 1e-10 * lam.max(1.0));
            assert!((norm(&v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lobpcg_matches_dense() {
        let grid = PeriodicGrid::new(2, 8).unwrap();
        let asm = assemble_signature_operator(&random_rough_metric(grid, 3.0, 2).unwrap()).unwrap();
        let p = SpectralProblem::new(&asm, 1, OperatorKind::Hodge);
        let opts = SolverOptions::default();
        let dense = DenseSolver
            .solve(&p, Some(12), false, &opts)
            .unwrap()
            .values;
        let iter = LobpcgSolver.solve(&p, Some(12), true, &opts).unwrap();
        let scale = dense.last().unwrap();
        for (a, b) in dense.iter().zip(&iter.values) {
            assert!((a - b).abs() < 1e-7 * scale, "{a} {b}");
        }
    }

    #[test]
    fn auto_selection() {
        let reg = SolverRegistry::with_defaults();
        let grid = PeriodicGrid::new(2, 4).unwrap();
        let flat = assemble_signature_operator(&flat_metric(grid)).unwrap();
        let rough =
            assemble_signature_operator(&random_rough_metric(grid, 3.0, 1).unwrap()).unwrap();
        assert_eq!(
            reg.select("auto", &SpectralProblem::new(&flat, 1, OperatorKind::Hodge))
                .unwrap()
                .name(),
            "fourier"
        );
        assert_eq!(
            reg.select(
                "auto",
                &SpectralProblem::new(&rough, 1, OperatorKind::Hodge)
            )
            .unwrap()
            .name(),
            "dense"
        );
        assert!(reg
            .select(
                "fourier",
                &SpectralProblem::new(&rough, 1, OperatorKind::Hodge)
            )
            .is_err());
        assert!(reg
            .select(
                "bogus",
                &SpectralProblem::new(&rough, 1, OperatorKind::Hodge)
            )
            .is_err());
    }
}
