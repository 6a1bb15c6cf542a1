mod common;

use common::*;
use halfsib_reml::estimators::{manova, Component, pseudo_reml, stepwise_reml, two_wishart_order_mle, StepwiseOptions};
use halfsib_reml::linalg;
use halfsib_reml::model::DesignSpec;
use halfsib_reml::rng;
use halfsib_reml::stats::MeanSquares;
use nalgebra::{Cholesky, DMatrix};
use proptest::prelude::*;

fn must(outcome: Check) {
    match outcome {
        Ok(msg) => println!("{msg}"),
        Err(msg) => panic!("{msg}"),
    }
}

#[test]
fn stepwise_criterion_is_monotone_per_cycle() {
    must(check_monotone_criterion());
}

#[test]
fn constrained_fits_are_feasible() {
    must(check_feasibility());
}

#[test]
fn estimators_are_rotation_equivariant() {
    must(check_rotation_equivariance());
}

#[test]
fn anova_decomposition_holds() {
    must(check_anova_identity());
}

#[test]
fn manova_is_unbiased() {
    must(check_manova_unbiased(400));
}

#[test]
fn records_do_not_depend_on_thread_count() {
    must(check_thread_determinism());
}

#[test]
fn manova_criterion_dominates() {
    must(check_manova_dominance());
}

#[test]
fn stepwise_beats_pseudo() {
    must(check_stepwise_is_best_feasible());
}

#[test]
fn trait_subsets_slice_mean_squares() {
    must(check_subset_consistency());
}

#[test]
fn pairwise_diagonal_is_univariate() {
    must(check_pairwise_diagonal());
}

#[test]
fn zero_count_matches_snapping() {
    must(check_dhat_zero_matches_snapped());
}

#[test]
fn one_way_reduction_pseudo_equals_stepwise() {
    // sire stratum far above: only the (E, B) constraint can bind
    for (p, seed) in property_cases() {
        let (ms, design) = binding_instance(p, seed);
        let lifted = MeanSquares { m_a: &ms.m_a + DMatrix::identity(p, p) * 1e3, ..ms.clone() };
        let s = stepwise_reml(&lifted, &design, &StepwiseOptions::default()).unwrap();
        let ps = pseudo_reml(&lifted, &design).unwrap();
        assert!(s.iterations <= 2, "p={p} seed={seed}: {} cycles", s.iterations);
        // the second cycle re-adds increments, so agreement is to rounding
        for c in Component::ALL {
            let (a, b) = (s.matrix(c), ps.matrix(c));
            assert!((a - b).amax() <= 1e-12 * b.amax().max(1.0), "p={p} seed={seed} Σ_{}", c.tag());
        }
        assert!((s.criterion - ps.criterion).abs() <= 1e-12 * ps.criterion.abs());
    }
}

fn spd(p: usize, seed: u64, ridge: f64) -> DMatrix<f64> {
    let mut r = rng::stream(seed);
    let x = linalg::standard_normal_matrix(p, p + 2, &mut r);
    linalg::symmetrize(&(&x * x.transpose() / (p + 2) as f64)) + DMatrix::identity(p, p) * ridge
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn order_mle_output_is_ordered(p in 1usize..6, s1 in 0u64..10_000, s2 in 0u64..10_000, n1 in 1usize..200, n2 in 1usize..200) {
        let m1 = spd(p, s1, 0.05);
        let m2 = spd(p, s2.wrapping_add(77), 0.05);
        let out = two_wishart_order_mle(&m1, n1, &m2, n2).unwrap();
        let gap = linalg::sym_eigen_desc(&(&out.upper - &out.lower)).0;
        prop_assert!(*gap.last().unwrap() >= -1e-9 * linalg::trace_scale(&out.upper));
        prop_assert!(Cholesky::new(out.lower.clone()).is_some());
    }

    #[test]
    fn ordered_mean_squares_reproduce_manova(p in 1usize..6, seed in 0u64..10_000) {
        let design = DesignSpec::new(15, 3, 4, p).unwrap();
        let m_e = spd(p, seed, 0.1);
        let m_b = &m_e + spd(p, seed + 1, 0.1);
        let m_a = &m_b + spd(p, seed + 2, 0.1);
        let ms = MeanSquares::new(m_a, m_b, m_e, &design).unwrap();
        let s = stepwise_reml(&ms, &design, &StepwiseOptions::default()).unwrap();
        prop_assert_eq!(s.iterations, 1);
        prop_assert_eq!(&s.components, &manova(&ms, &design).components);
        prop_assert_eq!(&pseudo_reml(&ms, &design).unwrap().components, &s.components);
    }

    #[test]
    fn stepwise_output_is_feasible(p in 1usize..8, seed in 0u64..10_000) {
        let (ms, design) = binding_instance(p, seed);
        let s = stepwise_reml(&ms, &design, &StepwiseOptions::default()).unwrap();
        for m in [&s.components.sigma_a, &s.components.sigma_b] {
            let lo = linalg::sym_eigen_desc(m).0.last().copied().unwrap();
            prop_assert!(lo >= -1e-8 * linalg::trace_scale(m).max(1.0), "min eigenvalue {}", lo);
        }
        prop_assert!(s.converged);
    }
}
