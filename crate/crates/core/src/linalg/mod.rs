//! Dense real linear algebra: matrices, states, SVD, direct solves, state
//! distances and Clenshaw-Curtis quadrature.

mod matrix;
pub mod quadrature;
mod svd;

pub use matrix::{DenseMatrix, StateVector};
pub use quadrature::{clenshaw_curtis, ClenshawCurtis};
pub use svd::{svd, SvdFactors};

pub(crate) use matrix::{dot, norm};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smallest singular value accepted by [`direct_solve`].
pub const SINGULARITY_FLOOR: f64 = 1e-13;

/// Solves `A x = b` through the SVD of `A`.
pub fn direct_solve<T: Real>(a: &DenseMatrix<T>, b: &StateVector<T>) -> Result<StateVector<T>> {
    let f = svd(a)?;
    solve_with(a, &f, b)
}

/// Solves `A x = b` given a precomputed SVD of `A`.
pub fn solve_with<T: Real>(
    a: &DenseMatrix<T>,
    f: &SvdFactors<T>,
    b: &StateVector<T>,
) -> Result<StateVector<T>> {
    if !a.is_square() {
        return Err(Error::domain("direct solve", format!("{}x{} is not square", a.rows(), a.cols())));
    }
    if b.dim() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            actual: b.dim(),
        });
    }
    let sigma_min = f.sigma_min();
    if !(sigma_min > T::lit(SINGULARITY_FLOOR)) {
        return Err(Error::Singular {
            sigma_min: sigma_min.to_f64_lossy(),
        });
    }
    let coeffs = f.left.tr_matvec(b.as_slice())?;
    let scaled: Vec<T> = coeffs
        .iter()
        .zip(&f.singular_values)
        .map(|(&c, &s)| c / s)
        .collect();
    StateVector::new(f.right.matvec(&scaled)?)
}

/// `√(2 − 2|⟨u, v⟩|)`: the ℓ₂ distance between unit states after aligning
/// their global sign.
pub fn phase_fixed_distance<T: Real>(u: &StateVector<T>, v: &StateVector<T>) -> Result<T> {
    let overlap = u.dot(v)?;
    // Direct difference is more accurate than 2 - 2|c| when the states are close.
    let sign = if overlap < T::zero() { -T::one() } else { T::one() };
    let d = norm(
        &u.as_slice()
            .iter()
            .zip(v.as_slice())
            .map(|(&a, &b)| a - sign * b)
            .collect::<Vec<_>>(),
    );
    Ok(d.min(T::SQRT_2()))
}

/// Converts an infidelity `μ²` to the Bures distance `√(2(1 − √(1 − μ²)))`.
pub fn bures_from_infidelity<T: Real>(mu_sq: T) -> Result<T> {
    let slack = T::lit(1e-12);
    if !(mu_sq >= -slack && mu_sq <= T::one() + slack) {
        return Err(Error::domain("infidelity", format!("{mu_sq} not in [0, 1]")));
    }
    let mu_sq = mu_sq.max(T::zero()).min(T::one());
    let fid_sqrt = (T::one() - mu_sq).sqrt();
    // 1 - √(1-μ²) = μ² / (1 + √(1-μ²)) avoids cancellation for small μ².
    let gap = mu_sq / (T::one() + fid_sqrt);
    Ok((T::lit(2.0) * gap).sqrt())
}

/// Inverse of [`bures_from_infidelity`]: `μ² = 1 − (1 − Δ²/2)²`.
pub fn infidelity_from_bures<T: Real>(delta: T) -> T {
    let h = delta * delta / T::lit(2.0);
    // (1 - (1-h)^2) = h (2 - h)
    h * (T::lit(2.0) - h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(x: &[f64]) -> StateVector<f64> {
        StateVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let b = sv(&[0.3, -0.4, 0.5]);
        let x = direct_solve(&DenseMatrix::identity(3), &b).unwrap();
        for (a, e) in x.as_slice().iter().zip(b.as_slice()) {
            assert!((a - e).abs() < 1e-15);
        }
        let x = direct_solve(&DenseMatrix::from_diagonal(&[2.0, 4.0]), &sv(&[1.0, 1.0])).unwrap();
        assert!((x.as_slice()[0] - 0.5).abs() < 1e-15);
        assert!((x.as_slice()[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_reports_sigma_min() {
        let a = DenseMatrix::from_diagonal(&[1.0, 0.0]);
        match direct_solve(&a, &sv(&[1.0, 0.0])) {
            Err(Error::Singular { sigma_min }) => assert_eq!(sigma_min, 0.0),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn distance_edge_cases() {
        let u = sv(&[0.6, 0.8]);
        let v = sv(&[-0.6, -0.8]);
        let w = sv(&[0.8, -0.6]);
        assert_eq!(phase_fixed_distance(&u, &u).unwrap(), 0.0);
        assert!(phase_fixed_distance(&u, &v).unwrap() < 1e-15);
        assert!((phase_fixed_distance(&u, &w).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            phase_fixed_distance(&u, &sv(&[1.0, 0.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bures_values() {
        assert_eq!(bures_from_infidelity(0.0).unwrap(), 0.0);
        assert!((bures_from_infidelity(1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        // closed form evaluated directly
        let expected = (2.0 * (1.0 - 0.99f64.sqrt())).sqrt();
        assert!((bures_from_infidelity(0.01).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.100126).abs() < 1e-6);
        assert!(bures_from_infidelity(1.1).is_err());
        assert!(bures_from_infidelity(-0.01).is_err());
        assert!(bures_from_infidelity(1.0 + 1e-13).is_ok());
    }
}
