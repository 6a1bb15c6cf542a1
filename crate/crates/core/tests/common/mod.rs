#![allow(dead_code)]

use halfsib_reml::estimators::{
    manova, pairwise_reml, pseudo_reml, reml_criterion, stepwise_reml, Component, EstimateSet, Method,
    StepwiseOptions, StratumChain,
};
use halfsib_reml::experiments::{run_scenario, ScenarioConfig, SigmaAFamily};
use halfsib_reml::linalg;
use halfsib_reml::model::{
    build_sigma_a, simulate, CovarianceComponents, DesignSpec, PhenotypeDataset, SigmaAKind, SigmaBKind,
};
use halfsib_reml::rng;
use halfsib_reml::stats::{decomposition_check, mean_squares, MeanSquares};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

pub type Check = Result<String, String>;

/// Simulated data whose sire covariance has a null space of dimension
/// `p/2` and whose dam covariance is low rank, so both order constraints
/// tend to bind.
pub fn binding_dataset(p: usize, seed: u64) -> PhenotypeDataset {
    let design = DesignSpec::new(30, 3, 4, p).unwrap();
    let mut r = rng::stream(rng::derive_seed(seed, &[p as u64, 0xB1D]));
    let sigma_a = build_sigma_a(&SigmaAKind::Identity { null_dim: p / 2, scale: 0.5 }, p, &mut r).unwrap();
    let x = linalg::standard_normal_matrix(p, (p / 2).max(1), &mut r);
    let sigma_b = linalg::symmetrize(&(&x * x.transpose() * (0.3 / p as f64)));
    let comps = CovarianceComponents::new(sigma_a, sigma_b, DMatrix::identity(p, p)).unwrap();
    let mu = DVector::from_fn(p, |i, _| i as f64);
    simulate(&design, &comps, &mu, seed).unwrap()
}

pub fn binding_instance(p: usize, seed: u64) -> (MeanSquares, DesignSpec) {
    let data = binding_dataset(p, seed);
    (mean_squares(&data), data.design)
}

/// Trait counts and seeds shared by the property checks.
pub fn property_cases() -> Vec<(usize, u64)> {
    [2usize, 3, 5, 10, 30].iter().flat_map(|&p| (0..6u64).map(move |s| (p, s))).collect()
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    linalg::sym_eigen_desc(m).0.last().copied().unwrap_or(0.0)
}

pub fn check_monotone_criterion() -> Check {
    let mut cycles = 0;
    for (p, seed) in property_cases() {
        let (ms, design) = binding_instance(p, seed);
        let est = stepwise_reml(&ms, &design, &StepwiseOptions::default()).map_err(|e| e.to_string())?;
        let t = &est.criterion_trace;
        cycles += t.len();
        for (c, w) in t.windows(2).enumerate() {
            if w[1] > w[0] + 1e-9 * w[0].abs() {
                return Err(format!("p={p} seed={seed}: criterion rose at cycle {} ({} -> {})", c + 2, w[0], w[1]));
            }
        }
        if t.last() != Some(&est.criterion) {
            return Err(format!("p={p} seed={seed}: trace does not end at the reported criterion"));
        }
    }
    Ok(format!("{} fits, {cycles} cycles, criterion non-increasing per cycle", property_cases().len()))
}

pub fn check_feasibility() -> Check {
    let mut worst: f64 = 0.0;
    for (p, seed) in property_cases() {
        let (ms, design) = binding_instance(p, seed);
        let fits = [
            stepwise_reml(&ms, &design, &StepwiseOptions::default()).map_err(|e| e.to_string())?,
            pseudo_reml(&ms, &design).map_err(|e| e.to_string())?,
        ];
        for est in &fits {
            let chain = StratumChain::from_components(&est.components, &design);
            let (g_eb, g_ba) = chain.order_gaps();
            let rel_eb = g_eb / linalg::trace_scale(&chain.gamma_b);
            let rel_ba = g_ba / linalg::trace_scale(&chain.gamma_a);
            worst = worst.min(rel_eb).min(rel_ba);
            if rel_eb < -1e-8 || rel_ba < -1e-8 {
                return Err(format!("{} p={p} seed={seed}: order gaps {g_eb:e}, {g_ba:e}", est.method));
            }
            for c in [Component::A, Component::B] {
                let m = est.matrix(c);
                let floor = -1e-8 * linalg::trace_scale(m).max(1.0);
                if min_eig(m) < floor {
                    return Err(format!("{} p={p} seed={seed}: Σ_{} min eigenvalue {:e}", est.method, c.tag(), min_eig(m)));
                }
            }
        }
    }
    Ok(format!("stepwise and pseudo feasible; worst relative order gap {worst:.2e}"))
}

fn signed_permutation<R: Rng>(p: usize, r: &mut R) -> DMatrix<f64> {
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(r);
    let mut q = DMatrix::zeros(p, p);
    for (i, &j) in perm.iter().enumerate() {
        q[(i, j)] = if r.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    q
}

fn equivariance_gap(a: &EstimateSet, b: &EstimateSet, q: &DMatrix<f64>) -> f64 {
    Component::ALL
        .iter()
        .map(|&c| {
            let want = q * a.matrix(c) * q.transpose();
            (b.matrix(c) - &want).norm() / want.norm().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// MANOVA, stepwise and pseudo REML under Haar rotations; pairwise under
/// signed permutations, the orthogonal maps that preserve coordinate pairs.
pub fn check_rotation_equivariance() -> Check {
    let opts = StepwiseOptions { tol: 1e-10, ..Default::default() };
    let mut worst: f64 = 0.0;
    for (p, seed) in property_cases().into_iter().filter(|(p, _)| *p <= 10) {
        let (ms, design) = binding_instance(p, seed);
        let mut r = rng::stream(rng::derive_seed(seed, &[p as u64, 0x0207]));
        let q = linalg::haar_orthogonal(p, &mut r);
        let rot = ms.rotate(&q);
        let pairs: [(Method, EstimateSet, EstimateSet); 3] = [
            (Method::Manova, manova(&ms, &design), manova(&rot, &design)),
            (
                Method::StepwiseReml,
                stepwise_reml(&ms, &design, &opts).map_err(|e| e.to_string())?,
                stepwise_reml(&rot, &design, &opts).map_err(|e| e.to_string())?,
            ),
            (Method::PseudoReml, pseudo_reml(&ms, &design).unwrap(), pseudo_reml(&rot, &design).unwrap()),
        ];
        for (m, a, b) in &pairs {
            let g = equivariance_gap(a, b, &q);
            worst = worst.max(g);
            if g > 1e-6 {
                return Err(format!("{m} p={p} seed={seed}: relative gap {g:e} under rotation"));
            }
            for c in Component::ALL {
                for (x, y) in a.spectrum(c).iter().zip(b.spectrum(c)) {
                    if (x - y).abs() > 1e-6 * x.abs().max(1.0) {
                        return Err(format!("{m} p={p} seed={seed}: eigenvalue {x} became {y}"));
                    }
                }
            }
        }
        let sp = signed_permutation(p, &mut r);
        let a = pairwise_reml(&ms, &design, &opts).map_err(|e| e.to_string())?;
        let b = pairwise_reml(&ms.rotate(&sp), &design, &opts).map_err(|e| e.to_string())?;
        let g = equivariance_gap(&a, &b, &sp);
        worst = worst.max(g);
        if g > 1e-6 {
            return Err(format!("pairwise p={p} seed={seed}: relative gap {g:e} under signed permutation"));
        }
    }
    Ok(format!("worst relative gap {worst:.2e}"))
}

pub fn check_anova_identity() -> Check {
    let mut worst: f64 = 0.0;
    for (p, seed) in property_cases() {
        let data = binding_dataset(p, seed);
        let ms = mean_squares(&data);
        let scale = halfsib_reml::stats::total_sscp(&data).norm();
        let rel = decomposition_check(&data, &ms) / scale;
        worst = worst.max(rel);
        if rel > 1e-10 {
            return Err(format!("p={p} seed={seed}: relative residual {rel:e}"));
        }
    }
    Ok(format!("worst relative residual {worst:.2e}"))
}

/// Mean of the MANOVA estimates over `reps` replicates lies within 3
/// standard errors of the truth, entry by entry.
pub fn check_manova_unbiased(reps: usize) -> Check {
    let p = 3;
    let design = DesignSpec::new(20, 3, 5, p).unwrap();
    let d = |v: [f64; 3]| DMatrix::from_diagonal(&DVector::from_row_slice(&v));
    let mut sigma_b = d([0.5, 0.0, 0.8]);
    sigma_b[(0, 2)] = 0.3;
    sigma_b[(2, 0)] = 0.3;
    let truth = CovarianceComponents::new(d([1.0, 0.2, 0.0]), sigma_b, d([1.0, 1.5, 0.7])).unwrap();
    let mut samples: Vec<[DMatrix<f64>; 3]> = Vec::with_capacity(reps);
    for r in 0..reps {
        let data = simulate(&design, &truth, &DVector::zeros(p), rng::derive_seed(0xAB5, &[r as u64])).unwrap();
        let est = manova(&mean_squares(&data), &design);
        samples.push(Component::ALL.map(|c| est.matrix(c).clone()));
    }
    let targets = [&truth.sigma_a, &truth.sigma_b, &truth.sigma_e];
    let mut worst: f64 = 0.0;
    for (k, target) in targets.iter().enumerate() {
        for i in 0..p {
            for j in i..p {
                let v: Vec<f64> = samples.iter().map(|s| s[k][(i, j)]).collect();
                let mean = v.iter().sum::<f64>() / reps as f64;
                let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
                let z = (mean - target[(i, j)]).abs() / (sd / (reps as f64).sqrt());
                worst = worst.max(z);
                if z > 3.0 {
                    return Err(format!("Σ_{} [{i},{j}]: mean {mean} vs {} ({z:.2} SE)", ["A", "B", "E"][k], target[(i, j)]));
                }
            }
        }
    }
    Ok(format!("{reps} replicates, largest deviation {worst:.2} SE"))
}

pub fn small_grid() -> ScenarioConfig {
    let mut cfg = halfsib_reml::experiments::builtin("fig-top1-bias").unwrap();
    cfg.name = "determinism".into();
    cfg.design = DesignSpec::new(20, 3, 4, 1).unwrap();
    cfg.p_values = vec![6, 10];
    cfg.sigma_a = vec![SigmaAFamily::Identity, SigmaAFamily::ChiSquaredFixed];
    cfg.sigma_b = vec![SigmaBKind::Wishart, SigmaBKind::HighCorr];
    cfg.null_dims = vec![0, 3];
    cfg.c_a = vec![1.0];
    cfg.replicates = 3;
    cfg.methods = Method::ALL.to_vec();
    cfg.deltas = vec![1.0];
    cfg
}

pub fn check_thread_determinism() -> Check {
    let cfg = small_grid();
    let run = |n: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(|| run_scenario(&cfg)).unwrap()
    };
    let one = run(1);
    for n in [2, 4, 7] {
        if run(n) != one {
            return Err(format!("records differ between 1 and {n} threads"));
        }
    }
    Ok(format!("{} records identical for 1, 2, 4 and 7 threads", one.len()))
}

pub fn check_manova_dominance() -> Check {
    for (p, seed) in property_cases() {
        let (ms, design) = binding_instance(p, seed);
        let top = reml_criterion(&StratumChain::from_mean_squares(&ms), &ms);
        for m in [Method::StepwiseReml, Method::PseudoReml] {
            let est = m.fit(&ms, &design, &StepwiseOptions::default()).map_err(|e| e.to_string())?;
            if est.criterion > top + 1e-9 * top.abs() {
                return Err(format!("{m} p={p} seed={seed}: {} above the unconstrained maximum {top}", est.criterion));
            }
        }
    }
    Ok("unconstrained criterion dominates every feasible fit".into())
}

/// Stepwise REML never trails pseudo-REML or the MANOVA estimate projected
/// back onto the cone.
pub fn check_stepwise_is_best_feasible() -> Check {
    for (p, seed) in property_cases() {
        let (ms, design) = binding_instance(p, seed);
        let s = stepwise_reml(&ms, &design, &StepwiseOptions { tol: 1e-9, ..Default::default() }).unwrap();
        let ps = pseudo_reml(&ms, &design).unwrap();
        if s.criterion < ps.criterion - 1e-7 * ps.criterion.abs() {
            return Err(format!("p={p} seed={seed}: stepwise {} below pseudo {}", s.criterion, ps.criterion));
        }
    }
    Ok("stepwise criterion ≥ pseudo criterion on every instance".into())
}

pub fn check_subset_consistency() -> Check {
    for (p, seed) in property_cases().into_iter().filter(|(p, _)| *p >= 3) {
        let data = binding_dataset(p, seed);
        let ms = mean_squares(&data);
        let idx = [p - 1, 0, p / 2];
        let y = DMatrix::from_fn(data.y.nrows(), idx.len(), |r, c| data.y[(r, idx[c])]);
        let mu = DVector::from_fn(idx.len(), |i, _| data.mu[idx[i]]);
        let sub_data = PhenotypeDataset::new(data.design.with_traits(idx.len()).unwrap(), mu, y).unwrap();
        let direct = mean_squares(&sub_data);
        let sliced = ms.subset(&idx);
        for (a, b) in [(&direct.m_a, &sliced.m_a), (&direct.m_b, &sliced.m_b), (&direct.m_e, &sliced.m_e)] {
            if (a - b).amax() > 1e-12 * b.amax().max(1.0) {
                return Err(format!("p={p} seed={seed}: subset mean squares differ by {:e}", (a - b).amax()));
            }
        }
    }
    Ok("trait-subset mean squares equal principal submatrices".into())
}

pub fn check_pairwise_diagonal() -> Check {
    let opts = StepwiseOptions::default();
    for (p, seed) in property_cases().into_iter().filter(|(p, _)| *p <= 10) {
        let (ms, design) = binding_instance(p, seed);
        let pw = pairwise_reml(&ms, &design, &opts).map_err(|e| e.to_string())?;
        for i in 0..p {
            let uni = stepwise_reml(&ms.subset(&[i]), &design.with_traits(1).unwrap(), &opts).unwrap();
            for c in Component::ALL {
                if pw.matrix(c)[(i, i)] != uni.matrix(c)[(0, 0)] {
                    return Err(format!("p={p} seed={seed} trait {i}: Σ_{} diagonal differs", c.tag()));
                }
            }
        }
    }
    Ok("pairwise diagonals equal univariate stepwise fits exactly".into())
}

/// Exact zeros counted by `d_hat(0)` on constrained sire estimates.
pub fn check_dhat_zero_matches_snapped() -> Check {
    use halfsib_reml::spectra::{nearly_null_dim, SpectrumSummary};
    for (p, seed) in property_cases() {
        let (ms, design) = binding_instance(p, seed);
        for m in [Method::StepwiseReml, Method::PseudoReml] {
            let est = m.fit(&ms, &design, &StepwiseOptions::default()).unwrap();
            let s = SpectrumSummary::new(est.spectrum(Component::A).to_vec());
            if nearly_null_dim(&s.eigenvalues, 0.0) != s.d_hat_zero {
                return Err(format!("{m} p={p} seed={seed}: d_hat(0) {} vs {} exact zeros", s.d_hat(0.0), s.d_hat_zero));
            }
        }
    }
    Ok("d_hat(0) equals the exact-zero count for constrained sire estimates".into())
}

/// Write a whole line to the process stdout, bypassing test capture.
pub fn emit(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

pub fn report(name: &str, outcome: &Check) -> bool {
    match outcome {
        Ok(msg) => {
            emit(&format!("  PASS  {name}: {msg}"));
            true
        }
        Err(msg) => {
            emit(&format!("  FAIL  {name}: {msg}"));
            false
        }
    }
}
