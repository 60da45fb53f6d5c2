//! Cholesky factorization with a nugget ladder, log-determinants and solves.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernels::CovMatrix;

/// Relative nugget rungs tried in order; each is scaled by the mean diagonal.
pub const NUGGET_LADDER: [f64; 8] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Lower-triangular factor of `Phi + nugget * I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    chol: Cholesky<f64, Dyn>,
    nugget: f64,
}

impl CholeskyFactor {
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// `(Phi + nugget I)^{-1}`.
    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Factorizes `m` with the smallest ladder nugget that succeeds.
pub fn cholesky_with_nugget(m: &CovMatrix) -> Result<CholeskyFactor> {
    let n = m.dim();
    let mean_diag = if n == 0 {
        0.0
    } else {
        m.matrix.diagonal().iter().sum::<f64>() / n as f64
    };
    let cap = NUGGET_LADDER[NUGGET_LADDER.len() - 1] * mean_diag;
    if !(mean_diag > 0.0) || !mean_diag.is_finite() || m.matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite { cap });
    }
    for rung in NUGGET_LADDER {
        let nugget = rung * mean_diag + m.nugget;
        let mut a = m.matrix.clone();
        if nugget > 0.0 {
            for i in 0..n {
                a[(i, i)] += nugget;
            }
        }
        if let Some(chol) = Cholesky::new(a) {
            if chol.l_dirty().diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
                return Ok(CholeskyFactor { chol, nugget });
            }
        }
    }
    Err(Error::NotPositiveDefinite { cap })
}

/// Factorizes with exactly the given nugget (no ladder).
pub fn cholesky_exact(m: &DMatrix<f64>, nugget: f64) -> Result<CholeskyFactor> {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += nugget;
    }
    Cholesky::new(a)
        .map(|chol| CholeskyFactor { chol, nugget })
        .ok_or(Error::NotPositiveDefinite { cap: nugget })
}

/// `log |Phi + nugget I| = 2 sum_i log L_ii`.
pub fn log_det(f: &CholeskyFactor) -> f64 {
    let mut s = 0.0;
    for d in f.chol.l_dirty().diagonal().iter() {
        s += d.ln();
    }
    2.0 * s
}

pub fn solve(f: &CholeskyFactor, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: b.len(),
        });
    }
    Ok(f.chol.solve(b))
}

pub fn solve_matrix(f: &CholeskyFactor, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: b.nrows(),
        });
    }
    Ok(f.chol.solve(b))
}

/// Solve followed by one step of iterative refinement against `phi`
/// (the matrix without nugget; the factor's nugget is added back).
pub fn solve_refined(f: &CholeskyFactor, phi: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let mut x = solve(f, b)?;
    let mut r = b - phi * &x;
    if f.nugget > 0.0 {
        r -= &x * f.nugget;
    }
    x += f.chol.solve(&r);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(n: usize, v: &[f64]) -> CovMatrix {
        CovMatrix::new(DMatrix::from_row_slice(n, n, v))
    }

    #[test]
    fn identity_needs_no_nugget() {
        let f = cholesky_with_nugget(&CovMatrix::new(DMatrix::identity(3, 3))).unwrap();
        assert_eq!(f.nugget(), 0.0);
        assert_eq!(f.l(), DMatrix::identity(3, 3));
        assert_eq!(log_det(&f), 0.0);
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(solve(&f, &b).unwrap(), b);
    }

    #[test]
    fn singular_matrix_takes_first_positive_rung() {
        let f = cholesky_with_nugget(&cm(2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(f.nugget(), 1e-10);
    }

    #[test]
    fn indefinite_matrix_fails_with_cap() {
        match cholesky_with_nugget(&cm(2, &[1.0, 2.0, 2.0, 1.0])) {
            Err(Error::NotPositiveDefinite { cap }) => assert_eq!(cap, 1e-4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn diagonal_cases() {
        let f = cholesky_with_nugget(&cm(2, &[3.0, 0.0, 0.0, 3.0])).unwrap();
        assert!((log_det(&f) - 2.0 * 3f64.ln()).abs() < 1e-15);
        let f = cholesky_with_nugget(&cm(1, &[4.0])).unwrap();
        let x = solve(&f, &DVector::from_vec(vec![4.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
        let f = cholesky_with_nugget(&cm(1, &[2.0])).unwrap();
        let x = solve(&f, &DVector::from_vec(vec![4.0])).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15);
        assert!(solve(&f, &DVector::from_vec(vec![1.0, 2.0])).is_err());
    }
}
