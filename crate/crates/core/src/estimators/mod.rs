//! Covariance-component estimators operating on [`MeanSquares`].
//!
//! All REML variants work in the expected-mean-square parameterization
//! ([`StratumChain`]), where the balanced-design REML likelihood factors
//! into three independent Wishart terms and the admissible set is the
//! Löwner chain `Γ_E ⪯ Γ_B ⪯ Γ_A`.

mod order_mle;
mod pairwise;
mod pseudo;
mod stepwise;

use std::fmt;

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CovarianceComponents, DesignSpec};
use crate::stats::MeanSquares;

pub use order_mle::{two_wishart_order_mle, OrderedPair};
pub use pairwise::pairwise_reml;
pub use pseudo::pseudo_reml;
pub use stepwise::{stepwise_reml, StepwiseOptions, DEFAULT_MAX_CYCLES, DEFAULT_TOL, ORDER_SLACK};

/// Eigenvalues of a REML estimate with `|λ| ≤ ZERO_SNAP_TOL · max(1, λ_max)`
/// are set to exactly zero.
pub const ZERO_SNAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Manova,
    StepwiseReml,
    PseudoReml,
    PairwiseReml,
    /// Brute-force reference solver (test and validation use only).
    Oracle,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Manova, Method::StepwiseReml, Method::PseudoReml, Method::PairwiseReml];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::Manova => "manova",
            Method::StepwiseReml => "stepwise",
            Method::PseudoReml => "pseudo",
            Method::PairwiseReml => "pairwise",
            Method::Oracle => "oracle",
        }
    }

    pub fn from_tag(s: &str) -> Option<Method> {
        Method::ALL.into_iter().chain([Method::Oracle]).find(|m| m.tag() == s)
    }

    /// Whether the method guarantees PSD sire and dam estimates.
    pub fn is_constrained(&self) -> bool {
        matches!(self, Method::StepwiseReml | Method::PseudoReml | Method::Oracle)
    }

    pub fn fit(&self, ms: &MeanSquares, design: &DesignSpec, opts: &StepwiseOptions) -> Result<EstimateSet> {
        match self {
            Method::Manova => Ok(manova(ms, design)),
            Method::StepwiseReml => stepwise_reml(ms, design, opts),
            Method::PseudoReml => pseudo_reml(ms, design),
            Method::PairwiseReml => pairwise_reml(ms, design, opts),
            Method::Oracle => crate::oracle::brute_force_reml(ms, design, crate::oracle::DEFAULT_RESTARTS),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Expected mean squares `Γ_E = Σ_E`, `Γ_B = Σ_E + KΣ_B`, `Γ_A = Γ_B + JKΣ_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumChain {
    pub gamma_e: DMatrix<f64>,
    pub gamma_b: DMatrix<f64>,
    pub gamma_a: DMatrix<f64>,
}

impl StratumChain {
    pub fn from_mean_squares(ms: &MeanSquares) -> Self {
        Self { gamma_e: ms.m_e.clone(), gamma_b: ms.m_b.clone(), gamma_a: ms.m_a.clone() }
    }

    pub fn from_components(comps: &CovarianceComponents, design: &DesignSpec) -> Self {
        let [gamma_e, gamma_b, gamma_a] = comps.expected_mean_squares(design);
        Self { gamma_e, gamma_b, gamma_a }
    }

    /// Inverse of [`StratumChain::from_components`]; no PSD repair.
    pub fn to_components(&self, design: &DesignSpec) -> CovarianceComponents {
        let k = design.offspring_per_dam() as f64;
        let jk = (design.dams_per_sire() * design.offspring_per_dam()) as f64;
        CovarianceComponents {
            sigma_e: self.gamma_e.clone(),
            sigma_b: (&self.gamma_b - &self.gamma_e) / k,
            sigma_a: (&self.gamma_a - &self.gamma_b) / jk,
        }
    }

    /// Smallest eigenvalues of `Γ_B − Γ_E` and `Γ_A − Γ_B`.
    pub fn order_gaps(&self) -> (f64, f64) {
        let min = |m: DMatrix<f64>| linalg::sym_eigen_desc(&m).0.last().copied().unwrap_or(0.0);
        (min(&self.gamma_b - &self.gamma_e), min(&self.gamma_a - &self.gamma_b))
    }
}

/// REML log-likelihood up to an additive constant:
/// `−½ Σ_k df_k [log det Γ_k + tr(Γ_k⁻¹ M_k)]`.
///
/// Wishart normalizing constants are dropped, so values are only comparable
/// between fits of the same mean squares. Returns `-∞` if any `Γ_k` is not
/// positive definite.
pub fn reml_criterion(chain: &StratumChain, ms: &MeanSquares) -> f64 {
    let terms = [
        (&chain.gamma_e, &ms.m_e, ms.df_e),
        (&chain.gamma_b, &ms.m_b, ms.df_b),
        (&chain.gamma_a, &ms.m_a, ms.df_a),
    ];
    let mut total = 0.0;
    for (gamma, m, df) in terms {
        let Some(chol) = Cholesky::new(linalg::symmetrize(gamma)) else {
            return f64::NEG_INFINITY;
        };
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let trace = chol.solve(m).trace();
        total += df as f64 * (logdet + trace);
    }
    -0.5 * total
}

/// Sorted (descending) spectra of the three estimated components.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpectra {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub e: Vec<f64>,
}

/// A fitted set of covariance components.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    pub method: Method,
    pub components: CovarianceComponents,
    /// Eigenvalues of the components; for constrained methods near-zero
    /// values are snapped to exact zeros.
    pub spectra: ComponentSpectra,
    pub criterion: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Last value of the convergence distance `d`.
    pub final_step: f64,
    /// REML criterion after each cycle (stepwise only).
    pub criterion_trace: Vec<f64>,
}

impl EstimateSet {
    pub(crate) fn assemble(
        method: Method,
        components: CovarianceComponents,
        criterion: f64,
        iterations: usize,
        converged: bool,
        final_step: f64,
    ) -> Self {
        let (components, spectra) = if method.is_constrained() {
            let (a, sa) = snap_near_zero(&components.sigma_a);
            let (b, sb) = snap_near_zero(&components.sigma_b);
            let se = linalg::sym_eigen_desc(&components.sigma_e).0;
            (CovarianceComponents { sigma_a: a, sigma_b: b, sigma_e: components.sigma_e }, ComponentSpectra { a: sa, b: sb, e: se })
        } else {
            let spectra = ComponentSpectra {
                a: linalg::sym_eigen_desc(&components.sigma_a).0,
                b: linalg::sym_eigen_desc(&components.sigma_b).0,
                e: linalg::sym_eigen_desc(&components.sigma_e).0,
            };
            (components, spectra)
        };
        Self { method, components, spectra, criterion, iterations, converged, final_step, criterion_trace: Vec::new() }
    }

    pub fn spectrum(&self, component: Component) -> &[f64] {
        match component {
            Component::A => &self.spectra.a,
            Component::B => &self.spectra.b,
            Component::E => &self.spectra.e,
        }
    }

    pub fn matrix(&self, component: Component) -> &DMatrix<f64> {
        match component {
            Component::A => &self.components.sigma_a,
            Component::B => &self.components.sigma_b,
            Component::E => &self.components.sigma_e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    A,
    B,
    E,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::A, Component::B, Component::E];

    pub fn tag(&self) -> &'static str {
        match self {
            Component::A => "A",
            Component::B => "B",
            Component::E => "E",
        }
    }
}

/// Snap eigenvalues within `ZERO_SNAP_TOL · max(1, λ_max)` of zero to exactly
/// zero. The matrix is only rebuilt when something was snapped.
fn snap_near_zero(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (mut values, vectors) = linalg::sym_eigen_desc(m);
    let tol = ZERO_SNAP_TOL * values.first().copied().unwrap_or(0.0).abs().max(1.0);
    let mut snapped = false;
    for v in values.iter_mut() {
        if v.abs() <= tol && *v != 0.0 {
            *v = 0.0;
            snapped = true;
        }
    }
    if snapped {
        (linalg::from_eigen(&values, &vectors), values)
    } else {
        (m.clone(), values)
    }
}

/// Moment estimator: `Σ̂_E = M_E`, `Σ̂_B = (M_B − M_E)/K`, `Σ̂_A = (M_A − M_B)/(JK)`.
pub fn manova(ms: &MeanSquares, design: &DesignSpec) -> EstimateSet {
    let chain = StratumChain::from_mean_squares(ms);
    let criterion = reml_criterion(&chain, ms);
    EstimateSet::assemble(Method::Manova, chain.to_components(design), criterion, 0, true, 0.0)
}

pub(crate) fn require_pd(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if Cholesky::new(linalg::symmetrize(m)).is_none() {
        return Err(Error::SingularStratum(what));
    }
    Ok(())
}
