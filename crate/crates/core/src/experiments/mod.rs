//! Replicated simulation experiments over grids of covariance structures.

mod builtin;
mod config;
mod output;

pub use builtin::{builtin, builtin_names, builtin_scenarios};
pub use config::parse_config;
pub use output::{write_csv, write_jsonl, OutputFormat, CSV_HEADER};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Component, EstimateSet, Method, StepwiseOptions};
use crate::model::{
    build_sigma_a, build_sigma_b, simulate, CovarianceComponents, DesignSpec, PhenotypeDataset, SigmaAKind, SigmaBKind,
};
use crate::rng::{self, derive_seed};
use crate::spectra::{nearly_null_dim, relative_difference, SpectrumSummary};
use crate::stats::mean_squares;

/// Method label used for rows describing the simulated truth.
pub const TRUTH: &str = "truth";

/// A sire structure with its null dimension and scale left open; the grid
/// fills them in per cell.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaAFamily {
    Identity,
    ChiSquared,
    HeavyTail,
    ChiSquaredFixed,
    Spiked,
    /// `c_A` is used as the scale; the null dimension is ignored.
    AbsNormal,
    /// Used verbatim; neither `d` nor `c_A` apply.
    Explicit(Vec<f64>),
}

impl SigmaAFamily {
    pub fn with(&self, null_dim: usize, scale: f64) -> SigmaAKind {
        match self {
            SigmaAFamily::Identity => SigmaAKind::Identity { null_dim, scale },
            SigmaAFamily::ChiSquared => SigmaAKind::ChiSquared { null_dim, scale },
            SigmaAFamily::HeavyTail => SigmaAKind::HeavyTail { null_dim, scale },
            SigmaAFamily::ChiSquaredFixed => SigmaAKind::ChiSquaredFixed { null_dim, scale },
            SigmaAFamily::Spiked => SigmaAKind::Spiked { null_dim, scale },
            SigmaAFamily::AbsNormal => SigmaAKind::AbsNormalDiagonal { scale },
            SigmaAFamily::Explicit(d) => SigmaAKind::ExplicitDiagonal(d.clone()),
        }
    }

    pub fn tag(&self) -> &'static str {
        self.with(0, 1.0).tag()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    /// Layout; the trait count is taken from `p_values`.
    pub design: DesignSpec,
    pub sigma_a: Vec<SigmaAFamily>,
    pub sigma_b: Vec<SigmaBKind>,
    /// Multiplier applied to every Σ_B draw.
    pub sigma_b_scale: f64,
    pub null_dims: Vec<usize>,
    pub c_a: Vec<f64>,
    pub p_values: Vec<usize>,
    /// Intercept; zero when absent.
    pub mu: Option<Vec<f64>>,
    /// Zero out a random half of the Σ_A and Σ_B diagonals (rows and columns)
    /// per replicate, drawn independently for the two matrices.
    pub zero_half_diagonals: bool,
    pub replicates: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    /// Extra thresholds for `d_hat(δ)`; `d_hat(0)` is always emitted.
    pub deltas: Vec<f64>,
    /// Number of leading eigenvalues reported per component; 0 means all.
    pub n_top: usize,
    pub stepwise: StepwiseOptions,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("scenario `{}`: {m}", self.name)));
        if self.replicates == 0 {
            return bad("replicates must be >= 1");
        }
        if self.sigma_a.is_empty() || self.sigma_b.is_empty() {
            return bad("at least one sigma_a and one sigma_b structure is required");
        }
        if self.null_dims.is_empty() || self.c_a.is_empty() || self.p_values.is_empty() {
            return bad("null_dims, c_a and p must be non-empty");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.p_values.contains(&0) {
            return bad("p must be >= 1");
        }
        if let Some(&d) = self.null_dims.iter().find(|&&d| self.p_values.iter().any(|&p| d > p)) {
            return bad(&format!("null dimension {d} exceeds some p"));
        }
        if self.c_a.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return bad("c_a entries must be positive");
        }
        if !(self.sigma_b_scale.is_finite() && self.sigma_b_scale >= 0.0) {
            return bad("sigma_b_scale must be >= 0");
        }
        if self.deltas.iter().any(|d| !d.is_finite()) {
            return bad("deltas must be finite");
        }
        if let Some(mu) = &self.mu {
            if self.p_values.iter().any(|&p| p != mu.len()) {
                return bad("mu length must equal every p");
            }
        }
        if !(self.stepwise.tol >= 0.0) || self.stepwise.max_cycles == 0 {
            return bad("tol must be >= 0 and max_cycles >= 1");
        }
        Ok(())
    }

    /// Grid cells in output order: p, then Σ_A structure, Σ_B structure, d, c_A.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &p in &self.p_values {
            for a in &self.sigma_a {
                for b in &self.sigma_b {
                    for &d in &self.null_dims {
                        for &c in &self.c_a {
                            out.push(Cell { index: out.len(), p, d, c_a: c, sigma_a: a.clone(), sigma_b: b.clone() });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub p: usize,
    pub d: usize,
    pub c_a: f64,
    pub sigma_a: SigmaAFamily,
    pub sigma_b: SigmaBKind,
}

/// One output row. `component` is empty for method-level statistics and
/// `value` is `None` where the statistic is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scenario: String,
    pub p: usize,
    pub d: usize,
    #[serde(rename = "c_A")]
    pub c_a: f64,
    #[serde(rename = "sigma_A_kind")]
    pub sigma_a_kind: String,
    #[serde(rename = "sigma_B_kind")]
    pub sigma_b_kind: String,
    pub replicate: usize,
    pub seed: u64,
    pub method: String,
    pub component: String,
    pub statistic: String,
    pub value: Option<f64>,
}

/// Statistic name for the `i`-th largest eigenvalue (1-based).
pub fn eig_stat(i: usize) -> String {
    format!("eig_{i}")
}

pub fn d_hat_stat(delta: f64) -> String {
    format!("d_hat({delta})")
}

pub fn diff_vs_manova_stat(i: usize) -> String {
    format!("diff_vs_manova_eig_{i}")
}

pub const REL_DIFF_VS_MANOVA_1: &str = "rel_diff_vs_manova_1";
pub const REL_BIAS_1: &str = "rel_bias_1";
pub const FAILED: &str = "failed";

/// Fixed label mixed into the seed of the shared χ²/5 draw.
const FIXED_DRAW_LABEL: u64 = 0xC415_F1ED;

struct Emitter<'a> {
    scenario: &'a str,
    cell: &'a Cell,
    replicate: usize,
    seed: u64,
    out: Vec<ResultRecord>,
}

impl Emitter<'_> {
    fn push(&mut self, method: &str, component: &str, statistic: impl Into<String>, value: Option<f64>) {
        self.out.push(ResultRecord {
            scenario: self.scenario.to_string(),
            p: self.cell.p,
            d: self.cell.d,
            c_a: self.cell.c_a,
            sigma_a_kind: self.cell.sigma_a.tag().to_string(),
            sigma_b_kind: self.cell.sigma_b.tag().to_string(),
            replicate: self.replicate,
            seed: self.seed,
            method: method.to_string(),
            component: component.to_string(),
            statistic: statistic.into(),
            value: value.filter(|v| v.is_finite()),
        });
    }

    fn spectrum_rows(&mut self, method: &str, component: Component, s: &SpectrumSummary, cfg: &ScenarioConfig) {
        let c = component.tag();
        let n = if cfg.n_top == 0 { s.eigenvalues.len() } else { cfg.n_top.min(s.eigenvalues.len()) };
        for (i, v) in s.eigenvalues[..n].iter().enumerate() {
            self.push(method, c, eig_stat(i + 1), Some(*v));
        }
        self.push(method, c, "n_zero", Some(s.d_hat_zero as f64));
        self.push(method, c, d_hat_stat(0.0), Some(nearly_null_dim(&s.eigenvalues, 0.0) as f64));
        for &delta in &cfg.deltas {
            if delta != 0.0 {
                self.push(method, c, d_hat_stat(delta), Some(nearly_null_dim(&s.eigenvalues, delta) as f64));
            }
        }
    }
}

fn zero_half(m: &mut DMatrix<f64>, rng: &mut rng::Stream) -> Vec<usize> {
    let p = m.nrows();
    let mut idx = sample(rng, p, p / 2).into_vec();
    idx.sort_unstable();
    for &i in &idx {
        m.row_mut(i).fill(0.0);
        m.column_mut(i).fill(0.0);
    }
    idx
}

/// Draw the true components for one replicate. Returns the zeroed trait
/// indices for Σ_A and Σ_B when half-diagonal zeroing is on.
fn draw_truth(cfg: &ScenarioConfig, cell: &Cell, seed: u64) -> Result<(CovarianceComponents, Vec<usize>, Vec<usize>)> {
    let p = cell.p;
    let kind = cell.sigma_a.with(cell.d, cell.c_a);
    let mut rng = rng::stream(derive_seed(seed, &[0]));
    let mut sigma_a = if let SigmaAKind::ChiSquaredFixed { .. } = kind {
        let mut fixed = rng::stream(derive_seed(cfg.base_seed, &[FIXED_DRAW_LABEL, p as u64, cell.d as u64]));
        build_sigma_a(&kind, p, &mut fixed)?
    } else {
        build_sigma_a(&kind, p, &mut rng)?
    };
    let mut sigma_b = build_sigma_b(&cell.sigma_b, p, &mut rng)? * cfg.sigma_b_scale;
    let (mut za, mut zb) = (Vec::new(), Vec::new());
    if cfg.zero_half_diagonals {
        za = zero_half(&mut sigma_a, &mut rng);
        zb = zero_half(&mut sigma_b, &mut rng);
    }
    let comps = CovarianceComponents::new(sigma_a, sigma_b, DMatrix::identity(p, p))?;
    Ok((comps, za, zb))
}

fn run_replicate(cfg: &ScenarioConfig, cell: &Cell, replicate: usize) -> Vec<ResultRecord> {
    let seed = replicate_seed(cfg, cell, replicate);
    let mut em = Emitter { scenario: &cfg.name, cell, replicate, seed, out: Vec::new() };
    if let Err(e) = replicate_body(cfg, cell, &mut em) {
        em.push(TRUTH, "", FAILED, None);
        log_failure(cfg, cell, replicate, &e);
    }
    em.out
}

fn log_failure(cfg: &ScenarioConfig, cell: &Cell, replicate: usize, e: &Error) {
    eprintln!("{}: p={} d={} c_A={} replicate {replicate}: {e}", cfg.name, cell.p, cell.d, cell.c_a);
}

/// One simulated replicate of a grid cell.
#[derive(Debug, Clone)]
pub struct Realization {
    pub seed: u64,
    pub truth: CovarianceComponents,
    pub data: PhenotypeDataset,
    /// Trait indices whose Σ_A rows and columns were zeroed.
    pub zeroed_a: Vec<usize>,
    pub zeroed_b: Vec<usize>,
}

/// Draw the truth and data for `(cell, replicate)` exactly as
/// [`run_scenario`] does.
pub fn realize(cfg: &ScenarioConfig, cell: &Cell, replicate: usize) -> Result<Realization> {
    let seed = replicate_seed(cfg, cell, replicate);
    let p = cell.p;
    let (truth, zeroed_a, zeroed_b) = draw_truth(cfg, cell, seed)?;
    let design = cfg.design.with_traits(p)?;
    let mu = cfg.mu.clone().map(DVector::from_vec).unwrap_or_else(|| DVector::zeros(p));
    let data = simulate(&design, &truth, &mu, derive_seed(seed, &[1]))?;
    Ok(Realization { seed, truth, data, zeroed_a, zeroed_b })
}

fn replicate_seed(cfg: &ScenarioConfig, cell: &Cell, replicate: usize) -> u64 {
    derive_seed(cfg.base_seed, &[cell.index as u64, replicate as u64])
}

fn replicate_body(cfg: &ScenarioConfig, cell: &Cell, em: &mut Emitter<'_>) -> Result<()> {
    let p = cell.p;
    let Realization { truth, data, zeroed_a: za, zeroed_b: zb, .. } = realize(cfg, cell, em.replicate)?;
    let design = data.design;
    let ms = mean_squares(&data);

    let truth_spec = [
        SpectrumSummary::from_matrix(&truth.sigma_a),
        SpectrumSummary::from_matrix(&truth.sigma_b),
        SpectrumSummary::from_matrix(&truth.sigma_e),
    ];
    for (k, comp) in Component::ALL.iter().enumerate() {
        em.spectrum_rows(TRUTH, *comp, &truth_spec[k], cfg);
    }
    for (k, i) in za.iter().enumerate() {
        em.push(TRUTH, "A", format!("zeroed_trait_{}", k + 1), Some(*i as f64));
    }
    for (k, i) in zb.iter().enumerate() {
        em.push(TRUTH, "B", format!("zeroed_trait_{}", k + 1), Some(*i as f64));
    }

    let fits: Vec<(Method, Result<EstimateSet>)> =
        cfg.methods.iter().map(|m| (*m, m.fit(&ms, &design, &cfg.stepwise))).collect();
    let manova_spec = fits.iter().find(|(m, _)| *m == Method::Manova).and_then(|(_, r)| r.as_ref().ok()).map(|e| {
        Component::ALL.map(|c| SpectrumSummary::new(e.spectrum(c).to_vec()))
    });

    for (method, fit) in &fits {
        let tag = method.tag();
        let est = match fit {
            Ok(est) => est,
            Err(e) => {
                em.push(tag, "", FAILED, None);
                log_failure(cfg, cell, em.replicate, e);
                continue;
            }
        };
        em.push(tag, "", "criterion", Some(est.criterion));
        em.push(tag, "", "iterations", Some(est.iterations as f64));
        em.push(tag, "", "converged", Some(if est.converged { 1.0 } else { 0.0 }));
        em.push(tag, "", "final_step", Some(est.final_step));
        for (k, comp) in Component::ALL.iter().enumerate() {
            let s = SpectrumSummary::new(est.spectrum(*comp).to_vec());
            em.spectrum_rows(tag, *comp, &s, cfg);
            let lambda1 = s.eigenvalues[0];
            em.push(tag, comp.tag(), REL_BIAS_1, relative_difference(lambda1, truth_spec[k].eigenvalues[0]));
            if let (Some(ms), true) = (&manova_spec, *method != Method::Manova) {
                let n = if cfg.n_top == 0 { p } else { cfg.n_top.min(p) };
                for i in 0..n {
                    em.push(tag, comp.tag(), diff_vs_manova_stat(i + 1), Some(s.eigenvalues[i] - ms[k].eigenvalues[i]));
                }
                em.push(tag, comp.tag(), REL_DIFF_VS_MANOVA_1, relative_difference(ms[k].eigenvalues[0], lambda1));
            }
        }
    }
    Ok(())
}

/// Run every (cell, replicate) on the current rayon pool. Output is ordered
/// by cell then replicate, so it does not depend on the number of workers.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let tasks: Vec<(Cell, usize)> =
        cfg.cells().into_iter().flat_map(|c| (0..cfg.replicates).map(move |r| (c.clone(), r))).collect();
    let chunks: Vec<Vec<ResultRecord>> = tasks.par_iter().map(|(cell, r)| run_replicate(cfg, cell, *r)).collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Values of one statistic across rows matching the filter, in row order.
pub fn select<'a>(
    records: &'a [ResultRecord],
    method: &'a str,
    component: &'a str,
    statistic: &'a str,
) -> impl Iterator<Item = &'a ResultRecord> + 'a {
    records.iter().filter(move |r| r.method == method && r.component == component && r.statistic == statistic)
}
