//! Continuous Lyapunov equation `A^T P + P A = -Q` through its vectorized
//! Kronecker form.

use nalgebra::DMatrix;

use super::SimError;

/// Largest state dimension accepted (the Kronecker system has `n^2` unknowns).
pub const MAX_LYAPUNOV_DIM: usize = 20;

/// Solves `(I ⊗ A^T + A^T ⊗ I) vec(P) = -vec(Q)` and symmetrizes the result.
/// Fails with `NotHurwitz` when the system is singular, the residual is
/// large or `P` is not positive definite.
pub fn solve_lyapunov_eq(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, SimError> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(SimError::BadParameters(format!(
            "A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    if n > MAX_LYAPUNOV_DIM {
        return Err(SimError::BadParameters(format!("dimension {n} exceeds {MAX_LYAPUNOV_DIM}")));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, q.as_slice());
    let sol = k.lu().solve(&rhs).ok_or(SimError::NotHurwitz { residual: f64::INFINITY })?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    let residual = lyapunov_residual(a, &p, q);
    if !(residual <= 1e-8 * q.amax().max(1.0)) || p.clone().cholesky().is_none() {
        return Err(SimError::NotHurwitz { residual });
    }
    Ok(p)
}

/// `|A^T P + P A + Q|_max`.
pub fn lyapunov_residual(a: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (a.transpose() * p + p * a + q).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_cases() {
        let p = solve_lyapunov_eq(&DMatrix::from_element(1, 1, -1.0), &DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15);
        let p = solve_lyapunov_eq(&DMatrix::from_element(1, 1, -3.0), &DMatrix::from_element(1, 1, 5.0)).unwrap();
        assert!((p[(0, 0)] - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn companion_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let q = DMatrix::identity(2, 2);
        let p = solve_lyapunov_eq(&a, &q).unwrap();
        assert!(lyapunov_residual(&a, &p, &q) < 1e-12);
        assert!((&p - p.transpose()).amax() < 1e-12);
        // hand solution: P = [[5/4, 1/4], [1/4, 1/4]]
        let expected = DMatrix::from_row_slice(2, 2, &[1.25, 0.25, 0.25, 0.25]);
        assert!((&p - expected).amax() < 1e-12);
    }

    #[test]
    fn unstable_matrix_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(solve_lyapunov_eq(&a, &DMatrix::identity(2, 2)), Err(SimError::NotHurwitz { .. })));
    }

    #[test]
    fn random_hurwitz_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in 1..=6 {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            // shift the spectrum into the left half plane
            let shift = m.clone().complex_eigenvalues().iter().map(|z| z.re).fold(f64::MIN, f64::max) + 0.5;
            let a = m - DMatrix::identity(n, n) * shift;
            let q = DMatrix::identity(n, n);
            let p = solve_lyapunov_eq(&a, &q).unwrap();
            assert!(lyapunov_residual(&a, &p, &q) < 1e-8);
        }
    }
}
