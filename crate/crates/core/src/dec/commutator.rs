use serde::Serialize;

use super::exterior::coboundary;
use super::form::FormField;
use super::mass::mass_matrix;
use crate::error::Result;
use crate::functions::TrigPolynomial;
use crate::metric::{spd, MetricField};

/// `[d, f] ω = d(f ω) − f dω`.
pub fn commutator(f: &[f64], omega: &FormField) -> Result<FormField> {
    let fw = omega.multiply(f)?;
    coboundary(&fw)?.sub(&coboundary(omega)?.multiply(f)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    /// `‖[d,f]ω‖_g / ‖ω‖_g`; zero when `ω = 0`.
    pub ratio: f64,
    /// `B^{-1/2} max|∇f|`.
    pub bound: f64,
    /// First-order discretization allowance `ε_h`.
    pub epsilon_h: f64,
    pub max_gradient: f64,
    pub metric_jump_rate: f64,
    pub holds: bool,
}

/// Largest relative change of the metric between neighbouring sites, per
/// unit length: `max ‖A(x + h e_i) − A(x)‖ / (h λ_min(A(x)))`.
pub fn metric_jump_rate(metric: &MetricField) -> f64 {
    let grid = metric.grid();
    let inv_h = grid.resolution() as f64;
    let mut worst: f64 = 0.0;
    for site in 0..grid.num_sites() {
        let a = metric.matrix(site);
        let lmin = spd::min_eigenvalue(&a);
        for axis in 0..grid.dim() {
            let b = metric.matrix(grid.forward(site, axis));
            let diff = &b - &a;
            let norm = spd::max_eigenvalue(&diff)
                .abs()
                .max(spd::min_eigenvalue(&diff).abs());
            worst = worst.max(norm * inv_h / lmin);
        }
    }
    worst
}

/// Checks `‖[d,f]ω‖_g ≤ B^{-1/2} max|∇f| ‖ω‖_g (1 + ε_h)` where
/// `ε_h = h (√n ‖∇²f‖_∞ / max|∇f| + J)` and `J` is [`metric_jump_rate`].
///
/// The forward-difference commutator is `D_i f(x) dx_i ∧ ω(x + h e_i)`:
/// the difference quotient overshoots `max|∇f|` by at most `h √n ‖∇²f‖/2`
/// per component and the shift moves `ω` onto a neighbouring metric sample.
pub fn commutator_bound_check(
    metric: &MetricField,
    f: &TrigPolynomial,
    omega: &FormField,
) -> Result<CommutatorReport> {
    let grid = *metric.grid();
    let samples = f.sample(&grid);
    let bracket = commutator(&samples, omega)?;
    let m_in = mass_matrix(metric, omega.degree())?;
    let m_out = mass_matrix(metric, omega.degree() + 1)?;
    let norm_in = m_in.norm(omega)?;
    let ratio = if norm_in > 0.0 {
        m_out.norm(&bracket)? / norm_in
    } else {
        0.0
    };
    let max_gradient = f.max_gradient(&grid);
    let bound = max_gradient / metric.floor().sqrt();
    let jump = metric_jump_rate(metric);
    let h = grid.spacing();
    let curvature = if max_gradient > 0.0 {
        (grid.dim() as f64).sqrt() * f.hessian_bound() / max_gradient
    } else {
        0.0
    };
    let epsilon_h = h * (curvature + jump);
    let holds = ratio <= bound * (1.0 + epsilon_h) + 1e-13 * bound.max(1.0);
    Ok(CommutatorReport {
        ratio,
        bound,
        epsilon_h,
        max_gradient,
        metric_jump_rate: jump,
        holds,
    })
}
