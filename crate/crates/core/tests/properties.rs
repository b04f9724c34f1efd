use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sigop::dec::{coboundary, duality_phase, mass_matrix, tau, wedge_integral, FormField};
use sigop::grid::PeriodicGrid;
use sigop::metric::ledger::lp_threshold;
use sigop::metric::{
    exponents_lp_derivable, exponents_quasiconformal, geometric_mean, interpolate_exponents,
    random_rough_metric,
};
use sigop::spectral::decay::decay_fit;

fn spd(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let c = DMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
    &c * c.transpose() + DMatrix::identity(n, n) * 0.25
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn d_squared_vanishes(n in 2usize..=4, k in 0usize..3, seed in any::<u64>()) {
        prop_assume!(k + 2 <= n);
        let grid = PeriodicGrid::new(n, 4 + (seed % 3) as usize).unwrap();
        let w = FormField::random(grid, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let dd = coboundary(&coboundary(&w).unwrap()).unwrap();
        let scale = (2.0 / grid.spacing()).powi(2) * w.flat_norm();
        prop_assert!(dd.flat_norm() <= 1e-12 * scale);
    }

    #[test]
    fn tau_is_an_isometric_involution(n in 1usize..=3, k in 0usize..4, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let grid = PeriodicGrid::new(n, 6).unwrap();
        let g = random_rough_metric(grid, 6.0, seed).unwrap();
        let w = FormField::random(grid, k, &mut ChaCha8Rng::seed_from_u64(seed ^ 7)).unwrap();
        let tw = tau(&g, &w).unwrap();
        let back = tau(&g, &tw).unwrap();
        prop_assert!(back.sub(&w).unwrap().flat_norm() <= 1e-11 * w.flat_norm());
        let a = mass_matrix(&g, k).unwrap().norm(&w).unwrap();
        let b = mass_matrix(&g, n - k).unwrap().norm(&tw).unwrap();
        prop_assert!((a - b).abs() <= 1e-11 * a);
    }

    #[test]
    fn inner_product_is_wedge_with_tau(n in 1usize..=3, k in 0usize..4, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let grid = PeriodicGrid::new(n, 5).unwrap();
        let g = random_rough_metric(grid, 6.0, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let a = FormField::random(grid, k, &mut rng).unwrap();
        let b = FormField::random(grid, k, &mut rng).unwrap();
        let m = mass_matrix(&g, k).unwrap();
        let lhs = m.inner(&a, &b).unwrap();
        let rhs = duality_phase(n, k) * wedge_integral(&a, &tau(&g, &b).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-11 * m.norm(&a).unwrap() * m.norm(&b).unwrap());
    }

    #[test]
    fn geometric_mean_laws(
        n in 1usize..=4,
        a in prop::collection::vec(-1.0f64..1.0, 16),
        b in prop::collection::vec(-1.0f64..1.0, 16),
        t in 0.0f64..=1.0,
    ) {
        let (a, b) = (spd(n, &a), spd(n, &b));
        prop_assert!(rel(&geometric_mean(&a, &b, 0.0).unwrap(), &a) <= 1e-10);
        prop_assert!(rel(&geometric_mean(&a, &b, 1.0).unwrap(), &b) <= 1e-10);
        // A #_t B = B #_{1−t} A
        let ab = geometric_mean(&a, &b, t).unwrap();
        prop_assert!(rel(&geometric_mean(&b, &a, 1.0 - t).unwrap(), &ab) <= 1e-8);
        // det(A #_t B) = det(A)^{1−t} det(B)^t
        let det = a.determinant().powf(1.0 - t) * b.determinant().powf(t);
        prop_assert!((ab.determinant() - det).abs() <= 1e-8 * det);
    }

    #[test]
    fn lp_threshold_is_strict(n in 1usize..=6, excess in 1e-9f64..50.0) {
        let thr = lp_threshold(n);
        prop_assert!(exponents_lp_derivable(n, thr).is_err());
        prop_assert!(exponents_lp_derivable(n, thr - excess.min(thr - 1e-3)).is_err());
        prop_assert!(exponents_lp_derivable(n, thr + excess).is_ok());
    }

    #[test]
    fn quasiconformal_odd_exponent(half in 0usize..3, excess in 0.01f64..100.0) {
        let n = 2 * half + 1;
        let p = n as f64 + excess;
        let l = exponents_quasiconformal(n, p).unwrap();
        let closed = n as f64 * p / (p - n as f64);
        prop_assert!((l.n_g - closed).abs() <= 1e-12 * closed);
        prop_assert!(l.n_g > n as f64);
    }

    #[test]
    fn exponent_path_endpoints_and_monotone_n_g(p0 in 6.01f64..40.0, p1 in 6.01f64..40.0, t in 0.0f64..=1.0) {
        let (l0, l1) = (exponents_lp_derivable(3, p0).unwrap(), exponents_lp_derivable(3, p1).unwrap());
        prop_assert_eq!(interpolate_exponents(&l0, &l1, 1.0).unwrap(), l0.clone());
        prop_assert_eq!(interpolate_exponents(&l0, &l1, 0.0).unwrap(), l1.clone());
        let mid = interpolate_exponents(&l0, &l1, t).unwrap();
        let (lo, hi) = (l0.n_g.min(l1.n_g), l0.n_g.max(l1.n_g));
        prop_assert!(mid.n_g >= lo * (1.0 - 1e-12) && mid.n_g <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn decay_fit_recovers_power_laws(s in 0.05f64..2.0, c in 0.1f64..10.0, len in 50usize..400) {
        let mu: Vec<f64> = (1..=len).map(|j| c * (j as f64).powf(-s)).collect();
        let fit = decay_fit(&mu, (0.2, 0.7), 3.0).unwrap();
        prop_assert!((fit.slope + s).abs() <= 1e-9);
        prop_assert!(fit.band <= 1e-9);
    }
}
