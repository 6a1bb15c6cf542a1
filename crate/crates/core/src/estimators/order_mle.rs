use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::linalg;

/// Solution of the two-Wishart order-constrained problem.
#[derive(Debug, Clone)]
pub struct OrderedPair {
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
    /// Number of generalized eigendirections that were pooled.
    pub pooled: usize,
}

/// Maximize `−n1 (log det Γ1 + tr Γ1⁻¹M1) − n2 (log det Γ2 + tr Γ2⁻¹M2)`
/// subject to `Γ1 ⪯ Γ2`.
///
/// With `C` simultaneously diagonalizing the pair (`C M1 Cᵀ = I`,
/// `C M2 Cᵀ = diag(λ)`), the problem separates per coordinate: directions
/// with `λ_i ≥ 1` keep `(1, λ_i)`, the rest are pooled to the weighted mean
/// `(n1 + n2 λ_i) / (n1 + n2)`. When nothing is pooled the inputs are
/// returned unchanged.
pub fn two_wishart_order_mle(m1: &DMatrix<f64>, n1: usize, m2: &DMatrix<f64>, n2: usize) -> Result<OrderedPair> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidParameter("degrees of freedom must be positive".into()));
    }
    let chol = Cholesky::new(linalg::symmetrize(m1)).ok_or(Error::SingularStratum("lower stratum"))?;
    let l = chol.l();
    // L⁻¹ M2 L⁻ᵀ
    let half = l.solve_lower_triangular(m2).expect("cholesky factor is invertible");
    let whitened = l
        .solve_lower_triangular(&half.transpose())
        .expect("cholesky factor is invertible");
    let (lambda, q) = linalg::sym_eigen_desc(&whitened);

    let pooled: Vec<usize> = (0..lambda.len()).filter(|&i| lambda[i] < 1.0).collect();
    if pooled.is_empty() {
        return Ok(OrderedPair { lower: m1.clone(), upper: m2.clone(), pooled: 0 });
    }

    // Columns of W = L Q are the directions C⁻¹ e_i; only pooled ones move.
    let (w1, w2) = (n1 as f64, n2 as f64);
    let w = &l * q.select_columns(&pooled);
    let mut shift_lower = w.clone();
    let mut shift_upper = w.clone();
    for (c, &i) in pooled.iter().enumerate() {
        let g = (w1 + w2 * lambda[i]) / (w1 + w2);
        shift_lower.column_mut(c).scale_mut(g - 1.0);
        shift_upper.column_mut(c).scale_mut(g - lambda[i]);
    }
    let lower = linalg::symmetrize(&(m1 + shift_lower * w.transpose()));
    let upper = linalg::symmetrize(&(m2 + shift_upper * w.transpose()));
    Ok(OrderedPair { lower, upper, pooled: pooled.len() })
}
