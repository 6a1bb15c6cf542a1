//! Small dense linear-algebra helpers shared across the crate.
//!
//! Everything here works on `nalgebra::DMatrix<f64>` and treats symmetric
//! inputs by first averaging with the transpose.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether a symmetric matrix is PSD.
pub const PSD_RELATIVE_TOL: f64 = 1e-10;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Largest absolute entry of `a - aᵀ`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Scale used for PSD tolerances: `|trace| / p`, never zero for non-zero input.
pub fn trace_scale(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows().max(1) as f64;
    let s = m.trace().abs() / p;
    if s > 0.0 {
        s
    } else {
        m.amax()
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order
/// and eigenvectors permuted to match (column `i` belongs to value `i`).
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `V · diag(values) · Vᵀ`, symmetrized.
pub fn from_eigen(values: &[f64], vectors: &DMatrix<f64>) -> DMatrix<f64> {
    let d = DVector::from_column_slice(values);
    let scaled = vectors * DMatrix::from_diagonal(&d);
    symmetrize(&(scaled * vectors.transpose()))
}

/// Factor `F` with `F·Fᵀ = M` for symmetric PSD `M`, via the eigendecomposition.
///
/// Eigenvalues in `[-1e-10·trace/p, 0)` are clipped to zero; anything more
/// negative is rejected.
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::InvalidParameter("psd_factor needs a square matrix".into()));
    }
    let (values, vectors) = sym_eigen_desc(m);
    let tol = PSD_RELATIVE_TOL * trace_scale(m);
    if let Some(&min) = values.last() {
        if min < -tol {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    let mut f = vectors;
    for (j, &v) in values.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    Ok(f)
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // column-major fill order is part of the reproducibility contract
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let z = standard_normal_matrix(p, p, rng);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Principal submatrix on the given index set.
pub fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn high_corr(p: usize) -> DMatrix<f64> {
        DMatrix::from_element(p, p, 0.8) + DMatrix::identity(p, p) * 0.2
    }

    #[test]
    fn factor_identity() {
        let f = psd_factor(&DMatrix::identity(3, 3)).unwrap();
        let prod = &f * f.transpose();
        assert!((prod - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn factor_singular_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0]));
        let f = psd_factor(&m).unwrap();
        assert!((&f * f.transpose() - &m).norm() < 1e-12);
    }

    #[test]
    fn factor_high_corr_reconstructs() {
        let m = high_corr(4);
        let f = psd_factor(&m).unwrap();
        assert!((&f * f.transpose() - &m).norm() < 1e-10);
    }

    #[test]
    fn factor_rejects_indefinite() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]));
        assert!(matches!(psd_factor(&m), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn factor_clips_tiny_negative() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-13]));
        let f = psd_factor(&m).unwrap();
        assert!((&f * f.transpose())[(1, 1)] == 0.0);
    }

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = haar_orthogonal(20, &mut rng);
        assert!((q.transpose() * &q - DMatrix::identity(20, 20)).norm() < 1e-10);
    }

    #[test]
    fn eigen_desc_sorted() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let (v, vecs) = sym_eigen_desc(&m);
        assert_eq!(v, vec![3.0, 2.0, 1.0]);
        assert!((from_eigen(&v, &vecs) - m).norm() < 1e-12);
    }
}
