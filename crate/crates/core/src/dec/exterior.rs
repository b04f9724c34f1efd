use num_complex::Complex64;

use super::form::FormField;
use crate::error::{Error, Result};
use crate::grid::{
    component_of, full_index, insertion_sign, multi_indices, wedge_sign, PeriodicGrid,
};

/// One term `sign · ∂_axis ω_source` contributing to a target component.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CoboundaryTerm {
    pub axis: usize,
    pub source: usize,
    pub sign: f64,
}

/// For each degree-`k+1` component `J`, the terms `(i, J \ {i}, sign)`.
pub(crate) fn coboundary_table(n: usize, k: usize) -> Vec<Vec<CoboundaryTerm>> {
    multi_indices(n, k + 1)
        .into_iter()
        .map(|target| {
            (0..n)
                .filter(|&i| target & (1 << i) != 0)
                .map(|i| {
                    let src = target & !(1 << i);
                    CoboundaryTerm {
                        axis: i,
                        source: component_of(n, src),
                        sign: insertion_sign(i, src),
                    }
                })
                .collect()
        })
        .collect()
}

/// For each degree-`k` component `I`: the index of `I^c` among degree
/// `n-k` components and the sign of `dx_I ∧ dx_{I^c}`.
pub(crate) fn complement_table(n: usize, k: usize) -> Vec<(usize, f64)> {
    let full = full_index(n);
    multi_indices(n, k)
        .into_iter()
        .map(|i| {
            let c = full & !i;
            (component_of(n, c), wedge_sign(i, c))
        })
        .collect()
}

/// Forward-difference coboundary `d: C^k → C^{k+1}`,
/// `(dω)_J(x) = Σ_{i∈J} ±(ω_{J∖i}(x + h e_i) − ω_{J∖i}(x)) / h`.
pub fn coboundary(omega: &FormField) -> Result<FormField> {
    let grid = *omega.grid();
    let k = omega.degree();
    if k >= grid.dim() {
        return Err(Error::Degree {
            degree: k + 1,
            dim: grid.dim(),
        });
    }
    let table = coboundary_table(grid.dim(), k);
    let inv_h = grid.resolution() as f64;
    let nc_in = grid.num_components(k);
    let nc_out = table.len();
    let src = omega.data();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.num_sites() * nc_out];
    for site in 0..grid.num_sites() {
        for (j, terms) in table.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in terms {
                let next = grid.forward(site, t.axis);
                acc += (src[next * nc_in + t.source] - src[site * nc_in + t.source]) * t.sign;
            }
            out[site * nc_out + j] = acc * inv_h;
        }
    }
    FormField::from_vec(grid, k + 1, out)
}

/// `∫ α ∧ β̄ ≈ h^n Σ_x (α ∧ β̄)_{1..n}(x)` for complementary degrees.
pub fn wedge_integral(alpha: &FormField, beta: &FormField) -> Result<Complex64> {
    let grid = alpha.grid();
    if grid != beta.grid() || alpha.degree() + beta.degree() != grid.dim() {
        return Err(Error::DegreeMismatch(format!(
            "wedge of degrees {} and {} in dimension {}",
            alpha.degree(),
            beta.degree(),
            grid.dim()
        )));
    }
    Ok(pointwise_wedge_sum(grid, alpha.degree(), alpha.data(), beta.data()) * grid.cell_volume())
}

pub(crate) fn pointwise_wedge_sum(
    grid: &PeriodicGrid,
    k: usize,
    a: &[Complex64],
    b: &[Complex64],
) -> Complex64 {
    let table = complement_table(grid.dim(), k);
    let nk = table.len();
    let nc = grid.num_components(grid.dim() - k);
    let mut acc = Complex64::new(0.0, 0.0);
    for site in 0..grid.num_sites() {
        for (i, &(c, sign)) in table.iter().enumerate() {
            acc += a[site * nk + i] * b[site * nc + c].conj() * sign;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn forward_difference_on_circle() {
        let grid = PeriodicGrid::new(1, 4).unwrap();
        let f = FormField::from_real(grid, 0, &[0.0, 1.0, 0.0, -1.0]).unwrap();
        let df = coboundary(&f).unwrap();
        let got: Vec<f64> = df.data().iter().map(|z| z.re).collect();
        assert_eq!(got, vec![4.0, -4.0, -4.0, 4.0]);
    }

    #[test]
    fn constants_are_closed() {
        for n in 1..=4 {
            let grid = PeriodicGrid::new(n, 4).unwrap();
            for k in 0..n {
                let coeffs: Vec<_> = (0..grid.num_components(k))
                    .map(|i| c(i as f64 + 0.5))
                    .collect();
                let w = FormField::constant(grid, k, &coeffs).unwrap();
                assert_eq!(coboundary(&w).unwrap().max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn d_squared_vanishes_on_random_functions() {
        let grid = PeriodicGrid::new(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = FormField::random(grid, 0, &mut rng).unwrap();
        let ddf = coboundary(&coboundary(&f).unwrap()).unwrap();
        assert!(ddf.max_abs() < 1e-12);
    }

    #[test]
    fn top_degree_has_no_coboundary() {
        let grid = PeriodicGrid::new(2, 4).unwrap();
        let w = FormField::zeros(grid, 2).unwrap();
        assert!(matches!(coboundary(&w), Err(Error::Degree { .. })));
    }

    #[test]
    fn wedge_of_constant_forms() {
        let grid = PeriodicGrid::new(2, 8).unwrap();
        let dx = FormField::constant(grid, 1, &[c(1.0), c(0.0)]).unwrap();
        let dy = FormField::constant(grid, 1, &[c(0.0), c(1.0)]).unwrap();
        assert!((wedge_integral(&dx, &dy).unwrap() - c(1.0)).norm() < 1e-14);
        assert!((wedge_integral(&dy, &dx).unwrap() + c(1.0)).norm() < 1e-14);
        assert_eq!(wedge_integral(&dx, &dx).unwrap(), c(0.0));
        let f = FormField::zeros(grid, 0).unwrap();
        assert!(matches!(
            wedge_integral(&dx, &f),
            Err(Error::DegreeMismatch(_))
        ));
    }
}
