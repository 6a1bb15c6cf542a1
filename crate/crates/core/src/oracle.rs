//! Slow reference REML solver for small `p`.
//!
//! The Löwner chain is parameterized as `Γ_E = L0 L0ᵀ`, `Γ_B = Γ_E + L1 L1ᵀ`,
//! `Γ_A = Γ_B + L2 L2ᵀ` with lower-triangular `L_m`, which makes every point
//! feasible, and the REML criterion is maximized with BFGS from several
//! deterministic starting points. It shares no code with the stepwise solver
//! beyond the criterion itself.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{reml_criterion, stepwise_reml, Component, EstimateSet, Method, StepwiseOptions, StratumChain};
use crate::linalg;
use crate::model::{simulate, CovarianceComponents, DesignSpec};
use crate::rng;
use crate::stats::{mean_squares, MeanSquares};

pub const MAX_TRAITS: usize = 4;
pub const DEFAULT_RESTARTS: usize = 8;
const SEED: u64 = 0x0BAC_1E55;
const MAX_ITER: usize = 20_000;

struct Layout {
    p: usize,
    tri: Vec<(usize, usize)>,
}

impl Layout {
    fn new(p: usize) -> Self {
        let tri = (0..p).flat_map(|r| (0..=r).map(move |c| (r, c))).collect();
        Self { p, tri }
    }

    fn len(&self) -> usize {
        3 * self.tri.len()
    }

    fn factors(&self, x: &DVector<f64>) -> [DMatrix<f64>; 3] {
        let n = self.tri.len();
        std::array::from_fn(|m| {
            let mut l = DMatrix::zeros(self.p, self.p);
            for (t, &(r, c)) in self.tri.iter().enumerate() {
                l[(r, c)] = x[m * n + t];
            }
            l
        })
    }

    fn pack(&self, ls: &[DMatrix<f64>; 3]) -> DVector<f64> {
        let n = self.tri.len();
        let mut x = DVector::zeros(self.len());
        for (m, l) in ls.iter().enumerate() {
            for (t, &(r, c)) in self.tri.iter().enumerate() {
                x[m * n + t] = l[(r, c)];
            }
        }
        x
    }

    fn chain(&self, x: &DVector<f64>) -> StratumChain {
        let [l0, l1, l2] = self.factors(x);
        let gamma_e = &l0 * l0.transpose();
        let gamma_b = &gamma_e + &l1 * l1.transpose();
        let gamma_a = &gamma_b + &l2 * l2.transpose();
        StratumChain { gamma_e, gamma_b, gamma_a }
    }
}

/// Negative criterion and its gradient in the packed factor coordinates.
fn objective(layout: &Layout, ms: &MeanSquares, x: &DVector<f64>) -> (f64, DVector<f64>) {
    let chain = layout.chain(x);
    let f = -reml_criterion(&chain, ms);
    if !f.is_finite() {
        return (f64::INFINITY, DVector::zeros(x.len()));
    }
    // ∂ℓ/∂Γ = −½ df (Γ⁻¹ − Γ⁻¹ M Γ⁻¹)
    let partial = |g: &DMatrix<f64>, m: &DMatrix<f64>, df: usize| {
        let inv = Cholesky::new(g.clone()).expect("finite criterion implies PD").inverse();
        (&inv - &inv * m * &inv) * (-0.5 * df as f64)
    };
    let g_e = partial(&chain.gamma_e, &ms.m_e, ms.df_e);
    let g_b = partial(&chain.gamma_b, &ms.m_b, ms.df_b);
    let g_a = partial(&chain.gamma_a, &ms.m_a, ms.df_a);
    let h2 = g_a;
    let h1 = &g_b + &h2;
    let h0 = &g_e + &h1;
    let ls = layout.factors(x);
    let grads = [&h0 * &ls[0] * -2.0, &h1 * &ls[1] * -2.0, &h2 * &ls[2] * -2.0];
    (f, layout.pack(&grads))
}

fn bfgs(layout: &Layout, ms: &MeanSquares, start: DVector<f64>) -> DVector<f64> {
    let n = start.len();
    let mut x = start;
    let (mut f, mut g) = objective(layout, ms, &x);
    if !f.is_finite() {
        return x;
    }
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut stalled = 0;
    for _ in 0..MAX_ITER {
        if g.amax() < 1e-10 * f.abs().max(1.0) {
            break;
        }
        let mut dir = -(&hinv * &g);
        let mut slope = dir.dot(&g);
        if slope >= 0.0 {
            hinv.fill_with_identity();
            dir = -g.clone();
            slope = dir.dot(&g);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let cand = &x + &dir * t;
            let (fc, gc) = objective(layout, ms, &cand);
            if fc.is_finite() && fc <= f + 1e-4 * t * slope {
                accepted = Some((cand, fc, gc));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if hinv == DMatrix::identity(n, n) {
                break;
            }
            hinv.fill_with_identity();
            continue;
        };
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        stalled = if f - fnew <= 1e-15 * f.abs() { stalled + 1 } else { 0 };
        x = xn;
        f = fnew;
        g = gn;
        if stalled >= 10 {
            break;
        }
    }
    x
}

fn psd_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (mut v, vecs) = linalg::sym_eigen_desc(m);
    v.iter_mut().for_each(|x| *x = x.max(0.0));
    linalg::from_eigen(&v, &vecs)
}

/// MANOVA projected onto the chain, with a small ridge so every increment
/// has a Cholesky factor.
fn projected_start(layout: &Layout, ms: &MeanSquares) -> DVector<f64> {
    let p = layout.p;
    let ridge = DMatrix::<f64>::identity(p, p) * (1e-2 * linalg::trace_scale(&ms.m_e));
    let inc_b = psd_part(&(&ms.m_b - &ms.m_e)) + &ridge;
    let inc_a = psd_part(&(&ms.m_a - &ms.m_b - &ridge)) + &ridge;
    let chol = |m: DMatrix<f64>| Cholesky::new(linalg::symmetrize(&m)).map(|c| c.l()).unwrap_or_else(|| DMatrix::identity(p, p));
    layout.pack(&[chol(ms.m_e.clone()), chol(inc_b), chol(inc_a)])
}

/// Maximize the REML criterion over the Löwner chain by brute force.
///
/// Restart 0 starts from projected MANOVA; restart `k > 0` perturbs it with a
/// stream derived from `k`. The best criterion wins, ties going to the lowest
/// restart index.
pub fn brute_force_reml(ms: &MeanSquares, design: &DesignSpec, restarts: usize) -> Result<EstimateSet> {
    let p = ms.traits();
    if p > MAX_TRAITS {
        return Err(Error::TooManyTraits { p, limit: MAX_TRAITS });
    }
    if Cholesky::new(ms.m_e.clone()).is_none() {
        return Err(Error::SingularStratum("error mean square"));
    }
    let layout = Layout::new(p);
    let base = projected_start(&layout, ms);
    let spread = 0.3 * base.amax().max(1e-3);

    let results: Vec<(usize, f64, DVector<f64>)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut start = base.clone();
            if k > 0 {
                let mut r = rng::stream(rng::derive_seed(SEED, &[k as u64]));
                for v in start.iter_mut() {
                    *v += spread * r.sample::<f64, _>(StandardNormal);
                }
            }
            let x = bfgs(&layout, ms, start);
            let crit = reml_criterion(&layout.chain(&x), ms);
            (k, crit, x)
        })
        .collect();

    let (_, criterion, x) = results
        .into_iter()
        .reduce(|best, cand| if cand.1 > best.1 { cand } else { best })
        .expect("at least one restart");
    let chain = layout.chain(&x);
    Ok(EstimateSet::assemble(Method::Oracle, chain.to_components(design), criterion, restarts, true, 0.0))
}

/// Layout used by the equivalence suite: small enough for the brute-force
/// solver, large enough that the order constraints bind often.
pub fn equivalence_design(p: usize) -> Result<DesignSpec> {
    DesignSpec::new(20, 3, 5, p)
}

/// Mean squares for suite instance `instance` at `p` traits. The sire and
/// dam covariances are random rank-one matrices, so most instances have
/// active constraints.
pub fn equivalence_instance(p: usize, instance: usize, seed: u64) -> Result<(MeanSquares, DesignSpec)> {
    let design = equivalence_design(p)?;
    let mut r = rng::stream(rng::derive_seed(seed, &[p as u64, instance as u64]));
    let mut rank_one = || {
        let x = linalg::standard_normal_matrix(p, 1, &mut r);
        linalg::symmetrize(&(&x * x.transpose() * 0.3))
    };
    let (sa, sb) = (rank_one(), rank_one());
    let comps = CovarianceComponents::new(sa, sb, DMatrix::identity(p, p))?;
    let data = simulate(&design, &comps, &DVector::zeros(p), rng::derive_seed(seed, &[p as u64, instance as u64, 1]))?;
    Ok((mean_squares(&data), design))
}

/// Stepwise-versus-brute-force comparison on one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceCase {
    pub p: usize,
    pub instance: usize,
    pub stepwise_criterion: f64,
    pub oracle_criterion: f64,
    /// `|ℓ_stepwise − ℓ_oracle|`
    pub criterion_gap: f64,
    /// Frobenius distance per component, in (A, B, E) order.
    pub component_gap: [f64; 3],
}

pub fn equivalence_suite(
    p_values: &[usize],
    instances: usize,
    seed: u64,
    opts: &StepwiseOptions,
    restarts: usize,
) -> Result<Vec<EquivalenceCase>> {
    let mut out = Vec::new();
    for &p in p_values {
        for instance in 0..instances {
            let (ms, design) = equivalence_instance(p, instance, seed)?;
            let s = stepwise_reml(&ms, &design, opts)?;
            let o = brute_force_reml(&ms, &design, restarts)?;
            let gap = |c: Component| (s.matrix(c) - o.matrix(c)).norm();
            out.push(EquivalenceCase {
                p,
                instance,
                stepwise_criterion: s.criterion,
                oracle_criterion: o.criterion,
                criterion_gap: (s.criterion - o.criterion).abs(),
                component_gap: Component::ALL.map(gap),
            });
        }
    }
    Ok(out)
}
