//! Thin wrappers around the dense eigensolvers.

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

/// Eigenpairs of a real symmetric matrix, ascending eigenvalues.
pub fn symmetric_eigen(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Convergence(format!("symmetric eigensolver: {e:?}")))?;
    let n = m.nrows();
    let vals: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenpairs of a Hermitian matrix, ascending eigenvalues.
pub fn hermitian_eigen(m: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Convergence(format!("hermitian eigensolver: {e:?}")))?;
    let vals = (0..m.nrows()).map(|i| evd.S()[i].re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &Mat<c64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Convergence(format!("hermitian eigensolver: {e:?}")))
}

/// Right eigenvectors of a general complex matrix, normalised to unit
/// 2-norm, together with the inverse of the eigenvector matrix.
pub struct Eigensystem {
    pub values: Vec<c64>,
    pub vectors: Mat<c64>,
    pub inverse: Mat<c64>,
}

impl Eigensystem {
    pub fn new(m: &Mat<c64>) -> Result<Self> {
        let n = m.nrows();
        let evd = m
            .eigen()
            .map_err(|e| Error::Convergence(format!("complex eigensolver: {e:?}")))?;
        let values: Vec<c64> = (0..n).map(|i| evd.S()[i]).collect();
        let mut vectors = evd.U().to_owned();
        for j in 0..n {
            let norm = (0..n).map(|i| vectors[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Convergence("degenerate eigenvector".into()));
            }
            for i in 0..n {
                vectors[(i, j)] /= norm;
            }
        }
        let mut inverse = vectors.partial_piv_lu().inverse();
        // one Newton-Schulz pass: X <- X + X (I - V X)
        let mut r = -(&vectors * &inverse);
        for i in 0..n {
            r[(i, i)] += c64::new(1.0, 0.0);
        }
        inverse = &inverse + &inverse * &r;
        // reject (near-)defective matrices
        let check = &inverse * &vectors;
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((check[(i, j)] - target).norm());
            }
        }
        if worst > 1e-8 {
            return Err(Error::Convergence(format!(
                "eigenvector matrix is ill-conditioned (|V^-1 V - I| = {worst:.2e})"
            )));
        }
        Ok(Self {
            values,
            vectors,
            inverse,
        })
    }
}

pub fn real_to_complex(m: &Mat<f64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

/// Conjugate transpose as an owned matrix.
pub fn adjoint(m: &Mat<c64>) -> Mat<c64> {
    m.adjoint().to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigensystem_reconstructs_matrix() {
        let m = Mat::from_fn(5, 5, |i, j| {
            c64::new(((i * 3 + j * 7) % 5) as f64, if i == j { -0.2 * i as f64 } else { 0.0 })
        });
        let es = Eigensystem::new(&m).unwrap();
        let d = Mat::from_fn(5, 5, |i, j| if i == j { es.values[i] } else { c64::new(0.0, 0.0) });
        let back = &es.vectors * &d * &es.inverse;
        for i in 0..5 {
            for j in 0..5 {
                assert!((back[(i, j)] - m[(i, j)]).norm() < 1e-12);
            }
        }
    }
}
