//! Small dense linear-algebra helpers shared by fitting and inference.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

const BASE_JITTER: f64 = 1e-10;

/// Cholesky factor of a symmetric positive (semi)definite matrix, with a
/// diagonal jitter fallback for numerically singular input.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Ok(Self { chol, jitter: 0.0 });
        }
        let scale = m.diagonal().amax().max(1e-300);
        let mut jitter = BASE_JITTER * scale;
        while jitter <= 1e-2 * scale {
            let mut shifted = m.clone();
            for i in 0..m.nrows() {
                shifted[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(shifted) {
                return Ok(Self { chol, jitter });
            }
            jitter *= 100.0;
        }
        Err(Error::Internal(
            "matrix is not positive definite even after diagonal jitter".into(),
        ))
    }

    pub fn jittered(&self) -> bool {
        self.jitter > 0.0
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Inverse of `G + c·P̃`, with `P̃` the PSD matrix `pen` padded by zeros to
/// the size of `gram`. The system is rotated into the eigenbasis of `pen`
/// and Jacobi scaled before factoring, so that a large `c` does not wash out
/// the directions `pen` leaves free. Returns the inverse and whether jitter
/// was needed.
pub fn penalized_inverse(gram: &DMatrix<f64>, pen: &DMatrix<f64>, c: f64) -> Result<(DMatrix<f64>, bool)> {
    let r = gram.nrows();
    let k = pen.nrows();
    let eig = SymmetricEigen::new(symmetrize(pen));
    let top = eig.eigenvalues.amax();
    let mut rot = DMatrix::identity(r, r);
    rot.view_mut((0, 0), (k, k)).copy_from(&eig.eigenvectors);
    let mut m = rot.transpose() * gram * &rot;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        // rounding-level eigenvalues belong to the null space
        if v > 1e-10 * top {
            m[(i, i)] += c * v;
        }
    }
    let scale = m.diagonal().map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 });
    let scaled = DMatrix::from_fn(r, r, |i, j| scale[i] * m[(i, j)] * scale[j]);
    let factor = SpdFactor::new(&scaled)?;
    let inv = factor.inverse();
    let unscaled = DMatrix::from_fn(r, r, |i, j| scale[i] * inv[(i, j)] * scale[j]);
    Ok((symmetrize(&(&rot * unscaled * rot.transpose())), factor.jittered()))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Nearest positive semidefinite matrix in the eigenvalue sense: symmetrize,
/// then truncate negative eigenvalues at zero.
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return sym;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&clipped) * v.transpose()))
}

/// Symmetric square root of a PSD matrix (negative eigenvalues clipped).
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&roots) * v.transpose()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Mean of a slice computed relative to its first element, so identical
/// entries give back that entry bit for bit.
pub fn shifted_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut iter = values.clone();
    let Some(first) = iter.next() else {
        return f64::NAN;
    };
    let mut n = 1usize;
    let mut acc = 0.0;
    for v in iter {
        acc += v - first;
        n += 1;
    }
    first + acc / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_projection_is_idempotent_on_psd_input() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5]);
        let p = project_psd(&a);
        assert!((p - &a).amax() < 1e-10);
    }

    #[test]
    fn psd_projection_clips_negative_eigenvalues() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let p = project_psd(&a);
        assert!(min_eigenvalue(&p) > -1e-12);
        assert!((p[(0, 0)] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn jitter_rescues_singular_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = SpdFactor::new(&a).unwrap();
        assert!(f.jittered());
    }

    #[test]
    fn sqrt_squares_back() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = sym_sqrt(&a);
        assert!((&r * &r - a).amax() < 1e-12);
    }

    #[test]
    fn shifted_mean_is_exact_for_constant_input() {
        let v = [0.1 + 0.2; 7];
        assert_eq!(shifted_mean(v.iter().copied()), v[0]);
    }
}
