//! Symmetric positive definite matrix functions: fractional powers and the
//! operator geometric mean `A0^{1/2} (A0^{-1/2} A1 A0^{-1/2})^t A0^{1/2}`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this are floored before taking powers.
pub const EIGEN_FLOOR: f64 = 1e-14;

pub fn symmetry_defect(a: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(1.0);
    (a - a.transpose()).amax() / scale
}

pub fn check_spd(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSpd {
            site: 0,
            reason: "not square".into(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotSpd {
            site: 0,
            reason: "non-finite entry".into(),
        });
    }
    if symmetry_defect(a) > 1e-12 {
        return Err(Error::NotSpd {
            site: 0,
            reason: "not symmetric".into(),
        });
    }
    if a.clone().cholesky().is_none() {
        return Err(Error::NotSpd {
            site: 0,
            reason: "Cholesky factorization failed".into(),
        });
    }
    Ok(())
}

/// `A^t` for symmetric `A` through its eigendecomposition.
pub fn spd_power(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let powered = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR).powf(t));
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&powered) * v.transpose()
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

pub fn max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.max()
}

/// Weighted operator geometric mean of two SPD matrices. Endpoints are
/// returned verbatim so `t ∈ {0, 1}` is exact.
pub fn geometric_mean(a0: &DMatrix<f64>, a1: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Invalid(format!(
            "interpolation parameter {t} outside [0, 1]"
        )));
    }
    if a0.shape() != a1.shape() {
        return Err(Error::Shape(
            "geometric mean of differently sized matrices".into(),
        ));
    }
    check_spd(a0)?;
    check_spd(a1)?;
    if t == 0.0 {
        return Ok(a0.clone());
    }
    if t == 1.0 {
        return Ok(a1.clone());
    }
    let root = spd_power(a0, 0.5);
    let inv_root = spd_power(a0, -0.5);
    let inner = &inv_root * a1 * &inv_root;
    let mean = &root * spd_power(&inner, t) * &root;
    Ok((&mean + mean.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn commuting_diagonal_mean() {
        let a0 = DMatrix::identity(2, 2);
        let a1 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0]));
        let m = geometric_mean(&a0, &a1, 0.5).unwrap();
        assert_relative_eq!(m[(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(m[(1, 1)], 3.0, epsilon = 1e-12);
        assert_relative_eq!(m[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn endpoints_exact() {
        let a0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let a1 = DMatrix::from_row_slice(2, 2, &[5.0, -1.0, -1.0, 3.0]);
        assert_eq!(geometric_mean(&a0, &a1, 0.0).unwrap(), a0);
        assert_eq!(geometric_mean(&a0, &a1, 1.0).unwrap(), a1);
    }

    #[test]
    fn rejects_indefinite_and_bad_t() {
        let a0 = DMatrix::identity(2, 2);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(geometric_mean(&a0, &bad, 0.5).is_err());
        assert!(geometric_mean(&a0, &a0, 1.5).is_err());
    }
}
