use num_complex::Complex64;

use super::exterior::complement_table;
use super::form::FormField;
use super::mass::{mass_matrix, MassMatrix};
use crate::error::Result;
use crate::metric::MetricField;

/// Fault injection for the verification suite: scales the star by
/// `1 + eps`, which breaks `τ² = id` while leaving everything else intact.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum StarPerturbation {
    #[default]
    None,
    Scale(f64),
}

impl StarPerturbation {
    fn factor(self) -> f64 {
        match self {
            StarPerturbation::None => 1.0,
            StarPerturbation::Scale(eps) => 1.0 + eps,
        }
    }
}

/// Phase `i^{k(k-1)+m}` (n even) or `i^{k(k+1)+m+1}` (n odd) with
/// `m = ⌊n/2⌋`, so that `τ = phase · *` is an involution.
pub fn tau_phase(n: usize, k: usize) -> Complex64 {
    let m = n / 2;
    let e = if n % 2 == 0 {
        k * k - k + m
    } else {
        k * (k + 1) + m + 1
    };
    match e % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Unit constant `c` with `⟨α, β⟩_g = c · ∫ α ∧ \overline{τβ}` on degree `k`.
///
/// The star satisfies `∫ α ∧ \overline{*β} = ⟨α, β⟩_g` exactly; conjugating
/// the phase of `τ` leaves `c = tau_phase(n, k)`.
pub fn duality_phase(n: usize, k: usize) -> Complex64 {
    tau_phase(n, k)
}

/// Pointwise Hodge star `Λ^k → Λ^{n-k}` built from a precomputed degree-`k`
/// mass matrix: `(*β)_{I^c}(x) = ε(I) (B(x) β(x))_I` with `ε(I)` the sign
/// of `dx_I ∧ dx_{I^c}`. In a `g_x`-orthonormal coframe this sends
/// `∧_{i∈I} e_i` to `ε(I) ∧_{i∉I} e_i`.
pub fn star_with_mass(
    mass: &MassMatrix,
    omega: &FormField,
    perturbation: StarPerturbation,
) -> Result<FormField> {
    let grid = *omega.grid();
    let k = omega.degree();
    let n = grid.dim();
    let weighted = mass.apply(omega.data());
    let table = complement_table(n, k);
    let nk = table.len();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.field_len(n - k)];
    let scale = perturbation.factor();
    for site in 0..grid.num_sites() {
        for (i, &(c, sign)) in table.iter().enumerate() {
            out[site * nk + c] = weighted[site * nk + i] * (sign * scale);
        }
    }
    FormField::from_vec(grid, n - k, out)
}

pub fn hodge_star(metric: &MetricField, omega: &FormField) -> Result<FormField> {
    let mass = mass_matrix(metric, omega.degree())?;
    star_with_mass(&mass, omega, StarPerturbation::None)
}

pub fn tau_with_mass(
    mass: &MassMatrix,
    omega: &FormField,
    perturbation: StarPerturbation,
) -> Result<FormField> {
    let phase = tau_phase(omega.grid().dim(), omega.degree());
    Ok(star_with_mass(mass, omega, perturbation)?.scale(phase))
}

/// The Hodge involution `τ: Ω^k → Ω^{n-k}`.
pub fn tau(metric: &MetricField, omega: &FormField) -> Result<FormField> {
    let mass = mass_matrix(metric, omega.degree())?;
    tau_with_mass(&mass, omega, StarPerturbation::None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dec::wedge_integral;
    use crate::grid::PeriodicGrid;
    use crate::metric::builders::flat_metric;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn flat_star_on_plane() {
        let grid = PeriodicGrid::new(2, 4).unwrap();
        let g = flat_metric(grid);
        let dx = FormField::constant(grid, 1, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let dy = FormField::constant(grid, 1, &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(hodge_star(&g, &dx).unwrap(), dy);
        assert_eq!(hodge_star(&g, &dy).unwrap(), dx.scale(c(-1.0, 0.0)));
    }

    #[test]
    fn phases() {
        // n = 2 on 1-forms: τ = i *
        assert_eq!(tau_phase(2, 1), c(0.0, 1.0));
        // n = 3 middle degrees are real
        assert_eq!(tau_phase(3, 1), c(1.0, 0.0));
        assert_eq!(tau_phase(3, 2), c(1.0, 0.0));
        assert_eq!(tau_phase(4, 2), c(1.0, 0.0));
        // n = 1: τ on functions is i *, on 1-forms -i *
        assert_eq!(tau_phase(1, 0), c(0.0, 1.0));
        assert_eq!(tau_phase(1, 1), c(0.0, -1.0));
    }

    #[test]
    fn tau_is_involution_on_flat_three_torus() {
        let grid = PeriodicGrid::new(3, 4).unwrap();
        let g = flat_metric(grid);
        let dx = FormField::constant(grid, 1, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let t = tau(&g, &dx).unwrap();
        assert_eq!(t.degree(), 2);
        let back = tau(&g, &t).unwrap();
        assert!(back.sub(&dx).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn perturbed_star_breaks_involution() {
        let grid = PeriodicGrid::new(2, 4).unwrap();
        let g = flat_metric(grid);
        let m1 = mass_matrix(&g, 1).unwrap();
        let w = FormField::constant(grid, 1, &[c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let p = StarPerturbation::Scale(1e-3);
        let back = tau_with_mass(&m1, &tau_with_mass(&m1, &w, p).unwrap(), p).unwrap();
        assert!(back.sub(&w).unwrap().max_abs() > 1e-3);
    }

    #[test]
    fn star_pairs_to_metric_product() {
        let grid = PeriodicGrid::new(2, 4).unwrap();
        let g = flat_metric(grid);
        let a = FormField::constant(grid, 1, &[c(1.0, 2.0), c(-0.5, 0.0)]).unwrap();
        let b = FormField::constant(grid, 1, &[c(0.3, 0.0), c(1.0, -1.0)]).unwrap();
        let m = mass_matrix(&g, 1).unwrap();
        let lhs = m.inner(&a, &b).unwrap();
        let rhs = wedge_integral(&a, &hodge_star(&g, &b).unwrap()).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
