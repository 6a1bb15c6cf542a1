//! Balanced nested half-sib model.
//!
//! An observation is `Y_ijk = μ + α_i + β_ij + ε_ijk` for sire `i`, dam `j`
//! within sire and offspring `k` within dam, with independent Gaussian
//! effects `α_i ~ N(0, Σ_A)`, `β_ij ~ N(0, Σ_B)` and `ε_ijk ~ N(0, Σ_E)`.

use nalgebra::{DMatrix, DVector, Dyn, MatrixView, U1};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, PSD_RELATIVE_TOL};
use crate::rng;

/// Balanced layout: `I` sires, `J` dams per sire, `K` offspring per dam, `p` traits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DesignSpec {
    sires: usize,
    dams_per_sire: usize,
    offspring_per_dam: usize,
    traits: usize,
}

impl DesignSpec {
    pub fn new(sires: usize, dams_per_sire: usize, offspring_per_dam: usize, traits: usize) -> Result<Self> {
        if sires < 2 || dams_per_sire < 2 || offspring_per_dam < 2 || traits < 1 {
            return Err(Error::InvalidParameter(format!(
                "design needs I, J, K >= 2 and p >= 1, got I={sires} J={dams_per_sire} K={offspring_per_dam} p={traits}"
            )));
        }
        Ok(Self { sires, dams_per_sire, offspring_per_dam, traits })
    }

    /// The `I = 100, J = 3, K = 5` layout used throughout the experiments.
    pub fn standard(traits: usize) -> Result<Self> {
        Self::new(100, 3, 5, traits)
    }

    pub fn sires(&self) -> usize {
        self.sires
    }

    pub fn dams_per_sire(&self) -> usize {
        self.dams_per_sire
    }

    pub fn offspring_per_dam(&self) -> usize {
        self.offspring_per_dam
    }

    pub fn traits(&self) -> usize {
        self.traits
    }

    pub fn with_traits(&self, traits: usize) -> Result<Self> {
        Self::new(self.sires, self.dams_per_sire, self.offspring_per_dam, traits)
    }

    pub fn n_obs(&self) -> usize {
        self.sires * self.dams_per_sire * self.offspring_per_dam
    }

    /// `I - 1`
    pub fn df_sire(&self) -> usize {
        self.sires - 1
    }

    /// `I (J - 1)`
    pub fn df_dam(&self) -> usize {
        self.sires * (self.dams_per_sire - 1)
    }

    /// `I J (K - 1)`
    pub fn df_error(&self) -> usize {
        self.sires * self.dams_per_sire * (self.offspring_per_dam - 1)
    }

    /// Row of observation `(i, j, k)` in the flattened dataset.
    pub fn row(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dams_per_sire + j) * self.offspring_per_dam + k
    }
}

/// Sire, dam and error covariance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceComponents {
    pub sigma_a: DMatrix<f64>,
    pub sigma_b: DMatrix<f64>,
    pub sigma_e: DMatrix<f64>,
}

impl CovarianceComponents {
    /// Checks shapes, symmetry (relative 1e-12) and PSD of all three matrices.
    pub fn new(sigma_a: DMatrix<f64>, sigma_b: DMatrix<f64>, sigma_e: DMatrix<f64>) -> Result<Self> {
        let p = sigma_e.nrows();
        for (name, m) in [("sigma_a", &sigma_a), ("sigma_b", &sigma_b), ("sigma_e", &sigma_e)] {
            if m.nrows() != p || m.ncols() != p {
                return Err(Error::InvalidParameter(format!("{name} must be {p}x{p}")));
            }
            if linalg::asymmetry(m) > 1e-12 * m.amax().max(1.0) {
                return Err(Error::InvalidParameter(format!("{name} is not symmetric")));
            }
            let (eigs, _) = linalg::sym_eigen_desc(m);
            let min = eigs.last().copied().unwrap_or(0.0);
            if min < -PSD_RELATIVE_TOL * linalg::trace_scale(m) {
                return Err(Error::NotPsd { min_eigenvalue: min });
            }
        }
        Ok(Self { sigma_a, sigma_b, sigma_e })
    }

    pub fn traits(&self) -> usize {
        self.sigma_e.nrows()
    }

    /// Expected mean squares `(Γ_E, Γ_B, Γ_A)` under the design.
    pub fn expected_mean_squares(&self, design: &DesignSpec) -> [DMatrix<f64>; 3] {
        let k = design.offspring_per_dam() as f64;
        let jk = (design.dams_per_sire() * design.offspring_per_dam()) as f64;
        let e = self.sigma_e.clone();
        let b = &e + &self.sigma_b * k;
        let a = &b + &self.sigma_a * jk;
        [e, b, a]
    }
}

pub type RowView<'a> = MatrixView<'a, f64, U1, Dyn, U1, Dyn>;

/// Simulated phenotypes. Row `design.row(i, j, k)` of `y` holds `Y_ijk`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeDataset {
    pub design: DesignSpec,
    pub mu: DVector<f64>,
    pub y: DMatrix<f64>,
}

impl PhenotypeDataset {
    pub fn new(design: DesignSpec, mu: DVector<f64>, y: DMatrix<f64>) -> Result<Self> {
        if y.nrows() != design.n_obs() || y.ncols() != design.traits() || mu.len() != design.traits() {
            return Err(Error::InvalidParameter(format!(
                "dataset shape {}x{} (mu {}) does not match design ({} obs, {} traits)",
                y.nrows(),
                y.ncols(),
                mu.len(),
                design.n_obs(),
                design.traits()
            )));
        }
        Ok(Self { design, mu, y })
    }

    pub fn observation(&self, i: usize, j: usize, k: usize) -> RowView<'_> {
        self.y.row(self.design.row(i, j, k))
    }
}

/// Sire covariance structures. `null_dim` trailing diagonal entries are zero
/// and the remainder is multiplied by `scale`.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaAKind {
    ExplicitDiagonal(Vec<f64>),
    /// `c_A diag(1_{p-d}, 0_d)`
    Identity { null_dim: usize, scale: f64 },
    /// `c_A diag(X_1..X_{p-d}, 0_d)`, `X_i ~ χ²_5`
    ChiSquared { null_dim: usize, scale: f64 },
    /// `c_A diag(|X_i + 5|, 0_d)`, `X_i` standard Cauchy
    HeavyTail { null_dim: usize, scale: f64 },
    /// `c_A diag(X_i, 0_d)`, `X_i ~ χ²_5 / 5`. Callers hold the stream fixed
    /// across replicates to reuse one draw.
    ChiSquaredFixed { null_dim: usize, scale: f64 },
    /// `c_A diag(5, 1_{p-d-1}, 0_d)`
    Spiked { null_dim: usize, scale: f64 },
    /// `scale · diag(|Z_i|)`, `Z_i` standard normal
    AbsNormalDiagonal { scale: f64 },
}

impl SigmaAKind {
    pub fn tag(&self) -> &'static str {
        match self {
            SigmaAKind::ExplicitDiagonal(_) => "explicit",
            SigmaAKind::Identity { .. } => "identity",
            SigmaAKind::ChiSquared { .. } => "chisq",
            SigmaAKind::HeavyTail { .. } => "heavytail",
            SigmaAKind::ChiSquaredFixed { .. } => "chisq-fixed",
            SigmaAKind::Spiked { .. } => "spiked",
            SigmaAKind::AbsNormalDiagonal { .. } => "absnormal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaBKind {
    Identity,
    /// `X Xᵀ / p` with `X` a `p × p` standard normal matrix
    Wishart,
    /// `P diag(X_i) Pᵀ` with `X_i ~ χ²_5` and `P` Haar orthogonal
    HighRank,
    /// `0.8 · 11ᵀ + 0.2 · I`
    HighCorr,
    ExplicitDiagonal(Vec<f64>),
    AbsNormalDiagonal { scale: f64 },
}

impl SigmaBKind {
    pub fn tag(&self) -> &'static str {
        match self {
            SigmaBKind::Identity => "identity",
            SigmaBKind::Wishart => "wishart",
            SigmaBKind::HighRank => "highrank",
            SigmaBKind::HighCorr => "highcorr",
            SigmaBKind::ExplicitDiagonal(_) => "explicit",
            SigmaBKind::AbsNormalDiagonal { .. } => "absnormal",
        }
    }
}

fn check_explicit(diag: &[f64], p: usize) -> Result<()> {
    if diag.len() != p {
        return Err(Error::InvalidParameter(format!("explicit diagonal has {} entries, p = {p}", diag.len())));
    }
    if diag.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter("explicit diagonal entries must be finite and >= 0".into()));
    }
    Ok(())
}

fn chi_squared_5<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ChiSquared::new(5.0).expect("valid dof").sample(rng)
}

/// Standard Cauchy as the ratio of two independent standard normals
/// (numerator drawn first).
fn cauchy<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let num: f64 = rng.sample(StandardNormal);
    let den: f64 = rng.sample(StandardNormal);
    num / den
}

pub fn build_sigma_a<R: Rng + ?Sized>(kind: &SigmaAKind, p: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::InvalidParameter("p must be >= 1".into()));
    }
    let diag: Vec<f64> = match kind {
        SigmaAKind::ExplicitDiagonal(d) => {
            check_explicit(d, p)?;
            d.clone()
        }
        SigmaAKind::AbsNormalDiagonal { scale } => {
            check_scale(*scale)?;
            (0..p).map(|_| scale * rng.sample::<f64, _>(StandardNormal).abs()).collect()
        }
        SigmaAKind::Identity { null_dim, scale }
        | SigmaAKind::ChiSquared { null_dim, scale }
        | SigmaAKind::HeavyTail { null_dim, scale }
        | SigmaAKind::ChiSquaredFixed { null_dim, scale }
        | SigmaAKind::Spiked { null_dim, scale } => {
            let (d, c) = (*null_dim, *scale);
            check_scale(c)?;
            if d > p {
                return Err(Error::InvalidParameter(format!("null dimension {d} exceeds p = {p}")));
            }
            let active = p - d;
            let head: Vec<f64> = match kind {
                SigmaAKind::Identity { .. } => vec![1.0; active],
                SigmaAKind::ChiSquared { .. } => (0..active).map(|_| chi_squared_5(rng)).collect(),
                SigmaAKind::HeavyTail { .. } => (0..active).map(|_| (cauchy(rng) + 5.0).abs()).collect(),
                SigmaAKind::ChiSquaredFixed { .. } => (0..active).map(|_| chi_squared_5(rng) / 5.0).collect(),
                SigmaAKind::Spiked { .. } => {
                    if active == 0 {
                        return Err(Error::InvalidParameter(format!(
                            "spiked structure needs at least one non-null direction (d = {d}, p = {p})"
                        )));
                    }
                    let mut v = vec![1.0; active];
                    v[0] = 5.0;
                    v
                }
                _ => unreachable!(),
            };
            head.into_iter().map(|x| c * x).chain(std::iter::repeat_n(0.0, d)).collect()
        }
    };
    Ok(DMatrix::from_diagonal(&DVector::from_vec(diag)))
}

fn check_scale(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {c}")));
    }
    Ok(())
}

pub fn build_sigma_b<R: Rng + ?Sized>(kind: &SigmaBKind, p: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::InvalidParameter("p must be >= 1".into()));
    }
    let m = match kind {
        SigmaBKind::Identity => DMatrix::identity(p, p),
        SigmaBKind::Wishart => {
            let x = linalg::standard_normal_matrix(p, p, rng);
            linalg::symmetrize(&(&x * x.transpose() / p as f64))
        }
        SigmaBKind::HighRank => {
            let q = linalg::haar_orthogonal(p, rng);
            let d: Vec<f64> = (0..p).map(|_| chi_squared_5(rng)).collect();
            linalg::from_eigen(&d, &q)
        }
        SigmaBKind::HighCorr => DMatrix::from_element(p, p, 0.8) + DMatrix::identity(p, p) * 0.2,
        SigmaBKind::ExplicitDiagonal(d) => {
            check_explicit(d, p)?;
            DMatrix::from_diagonal(&DVector::from_column_slice(d))
        }
        SigmaBKind::AbsNormalDiagonal { scale } => {
            check_scale(*scale)?;
            let d: Vec<f64> = (0..p).map(|_| scale * rng.sample::<f64, _>(StandardNormal).abs()).collect();
            DMatrix::from_diagonal(&DVector::from_vec(d))
        }
    };
    Ok(m)
}

/// Draw one dataset.
///
/// The stream seeded by `seed` is consumed in this order: all `α_i`, then all
/// `β_ij` (sire-major), then all `ε_ijk`; each effect is `F z` for a PSD
/// factor `F` of its covariance and `z` a fresh standard normal `p`-vector.
pub fn simulate(
    design: &DesignSpec,
    comps: &CovarianceComponents,
    mu: &DVector<f64>,
    seed: u64,
) -> Result<PhenotypeDataset> {
    let p = design.traits();
    if comps.traits() != p || mu.len() != p {
        return Err(Error::InvalidParameter(format!(
            "components are {}x{}, mu has {} entries, design has p = {p}",
            comps.traits(),
            comps.traits(),
            mu.len()
        )));
    }
    if nalgebra::Cholesky::new(comps.sigma_e.clone()).is_none() {
        return Err(Error::InvalidParameter("sigma_e must be positive definite".into()));
    }
    let fa = linalg::psd_factor(&comps.sigma_a)?;
    let fb = linalg::psd_factor(&comps.sigma_b)?;
    let fe = linalg::psd_factor(&comps.sigma_e)?;

    let (ni, nj, nk) = (design.sires(), design.dams_per_sire(), design.offspring_per_dam());
    let mut stream = rng::stream(seed);
    let alpha = fa * linalg::standard_normal_matrix(p, ni, &mut stream);
    let beta = fb * linalg::standard_normal_matrix(p, ni * nj, &mut stream);
    let eps = fe * linalg::standard_normal_matrix(p, design.n_obs(), &mut stream);

    let mut y = DMatrix::zeros(design.n_obs(), p);
    for i in 0..ni {
        for j in 0..nj {
            for k in 0..nk {
                let row = design.row(i, j, k);
                for t in 0..p {
                    y[(row, t)] = mu[t] + alpha[(t, i)] + beta[(t, i * nj + j)] + eps[(t, row)];
                }
            }
        }
    }
    PhenotypeDataset::new(*design, mu.clone(), y)
}
