use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Full spectrum of `(M + Mᵀ)/2`, descending.
pub fn eigenvalues_sym(m: &DMatrix<f64>) -> Vec<f64> {
    let (values, vectors) = linalg::sym_eigen_desc(m);
    debug_assert!({
        let back = linalg::from_eigen(&values, &vectors);
        let scale = linalg::frobenius(m).max(1.0);
        linalg::frobenius(&(back - linalg::symmetrize(m))) <= 1e-8 * scale
    });
    values
}

/// `d̂(δ) = #{i : λ_i ≤ δ}`. The threshold is inclusive.
pub fn nearly_null_dim(eigs: &[f64], delta: f64) -> usize {
    eigs.iter().filter(|&&v| v <= delta).count()
}

/// `(a − b) / b`, or `None` when `b` is zero or the result is not finite.
pub fn relative_difference(a: f64, b: f64) -> Option<f64> {
    if b == 0.0 {
        return None;
    }
    let r = (a - b) / b;
    r.is_finite().then_some(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSummary {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub d_hat_zero: usize,
}

impl SpectrumSummary {
    pub fn new(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let d_hat_zero = eigenvalues.iter().filter(|&&v| v == 0.0).count();
        Self { eigenvalues, d_hat_zero }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self::new(eigenvalues_sym(m))
    }

    pub fn d_hat(&self, delta: f64) -> usize {
        nearly_null_dim(&self.eigenvalues, delta)
    }

    pub fn top(&self, n: usize) -> &[f64] {
        &self.eigenvalues[..n.min(self.eigenvalues.len())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); 0 when `n = 1`.
    pub sd: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl ReplicateStats {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Quantile by linear interpolation between order statistics at position
/// `(n − 1) q` (the "type 7" rule). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<ReplicateStats> {
    let n = values.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ReplicateStats {
        n,
        mean,
        sd,
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
    })
}
