//! Stratum mean squares of the balanced nested design.
//!
//! With dam means `Ȳ_ij·`, sire means `Ȳ_i··` and grand mean `Ȳ···`:
//!
//! ```text
//! S_A = JK Σ_i (Ȳ_i·· − Ȳ···)(·)ᵀ          df_A = I − 1
//! S_B = K  Σ_ij (Ȳ_ij· − Ȳ_i··)(·)ᵀ        df_B = I(J − 1)
//! S_E =    Σ_ijk (Y_ijk − Ȳ_ij·)(·)ᵀ       df_E = IJ(K − 1)
//! ```
//!
//! and `M_k = S_k / df_k`, with `E[M_E] = Σ_E`, `E[M_B] = Σ_E + KΣ_B` and
//! `E[M_A] = Σ_E + KΣ_B + JKΣ_A`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{DesignSpec, PhenotypeDataset};

/// Sire, dam and error mean-square matrices with their degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSquares {
    pub m_a: DMatrix<f64>,
    pub m_b: DMatrix<f64>,
    pub m_e: DMatrix<f64>,
    pub df_a: usize,
    pub df_b: usize,
    pub df_e: usize,
}

impl MeanSquares {
    pub fn new(m_a: DMatrix<f64>, m_b: DMatrix<f64>, m_e: DMatrix<f64>, design: &DesignSpec) -> Result<Self> {
        let p = design.traits();
        for m in [&m_a, &m_b, &m_e] {
            if m.nrows() != p || m.ncols() != p {
                return Err(Error::InvalidParameter(format!("mean squares must be {p}x{p}")));
            }
        }
        Ok(Self {
            m_a: linalg::symmetrize(&m_a),
            m_b: linalg::symmetrize(&m_b),
            m_e: linalg::symmetrize(&m_e),
            df_a: design.df_sire(),
            df_b: design.df_dam(),
            df_e: design.df_error(),
        })
    }

    pub fn traits(&self) -> usize {
        self.m_e.nrows()
    }

    /// Mean squares of the trait subset `idx`. Exact in the balanced design.
    pub fn subset(&self, idx: &[usize]) -> MeanSquares {
        MeanSquares {
            m_a: linalg::principal_submatrix(&self.m_a, idx),
            m_b: linalg::principal_submatrix(&self.m_b, idx),
            m_e: linalg::principal_submatrix(&self.m_e, idx),
            ..*self
        }
    }

    /// `Q M_k Qᵀ` for every stratum.
    pub fn rotate(&self, q: &DMatrix<f64>) -> MeanSquares {
        let rot = |m: &DMatrix<f64>| linalg::symmetrize(&(q * m * q.transpose()));
        MeanSquares { m_a: rot(&self.m_a), m_b: rot(&self.m_b), m_e: rot(&self.m_e), ..*self }
    }
}

fn outer_acc(acc: &mut DMatrix<f64>, v: &DVector<f64>, w: f64) {
    acc.ger(w, v, v, 1.0);
}

/// Two-pass reduction: all group means first, then centered outer products.
pub fn mean_squares(data: &PhenotypeDataset) -> MeanSquares {
    let d = &data.design;
    let (ni, nj, nk, p) = (d.sires(), d.dams_per_sire(), d.offspring_per_dam(), d.traits());

    let mut dam_means = vec![DVector::<f64>::zeros(p); ni * nj];
    for i in 0..ni {
        for j in 0..nj {
            let m = &mut dam_means[i * nj + j];
            for k in 0..nk {
                *m += data.observation(i, j, k).transpose();
            }
            *m /= nk as f64;
        }
    }
    let sire_means: Vec<DVector<f64>> = (0..ni)
        .map(|i| dam_means[i * nj..(i + 1) * nj].iter().sum::<DVector<f64>>() / nj as f64)
        .collect();
    let grand = sire_means.iter().sum::<DVector<f64>>() / ni as f64;

    let mut s_a = DMatrix::zeros(p, p);
    let mut s_b = DMatrix::zeros(p, p);
    let mut s_e = DMatrix::zeros(p, p);
    for i in 0..ni {
        outer_acc(&mut s_a, &(&sire_means[i] - &grand), (nj * nk) as f64);
        for j in 0..nj {
            let dm = &dam_means[i * nj + j];
            outer_acc(&mut s_b, &(dm - &sire_means[i]), nk as f64);
            for k in 0..nk {
                let r = data.observation(i, j, k).transpose() - dm;
                outer_acc(&mut s_e, &r, 1.0);
            }
        }
    }
    MeanSquares {
        m_a: linalg::symmetrize(&(s_a / d.df_sire() as f64)),
        m_b: linalg::symmetrize(&(s_b / d.df_dam() as f64)),
        m_e: linalg::symmetrize(&(s_e / d.df_error() as f64)),
        df_a: d.df_sire(),
        df_b: d.df_dam(),
        df_e: d.df_error(),
    }
}

/// Corrected total sum of squares and products `Σ_ijk (Y_ijk − Ȳ···)(·)ᵀ`.
pub fn total_sscp(data: &PhenotypeDataset) -> DMatrix<f64> {
    let n = data.y.nrows() as f64;
    let grand = data.y.row_sum().transpose() / n;
    let mut s = DMatrix::zeros(grand.len(), grand.len());
    for r in 0..data.y.nrows() {
        let c = data.y.row(r).transpose() - &grand;
        outer_acc(&mut s, &c, 1.0);
    }
    s
}

/// `‖df_A M_A + df_B M_B + df_E M_E − S_total‖_F`; zero up to rounding for
/// mean squares computed from `data`.
pub fn decomposition_check(data: &PhenotypeDataset, ms: &MeanSquares) -> f64 {
    let sum = &ms.m_a * ms.df_a as f64 + &ms.m_b * ms.df_b as f64 + &ms.m_e * ms.df_e as f64;
    (sum - total_sscp(data)).norm()
}
