use super::{ScenarioConfig, SigmaAFamily};
use crate::error::{Error, Result};
use crate::estimators::{Method, StepwiseOptions};
use crate::model::{DesignSpec, SigmaBKind};

const NAMES: [&str; 8] = [
    "table1",
    "fig-q50",
    "fig-pairwise",
    "fig-top5-bias",
    "fig-reml-vs-manova",
    "fig-nearly-null",
    "fig-dhat-delta",
    "fig-top1-bias",
];

pub fn builtin_names() -> &'static [&'static str] {
    &NAMES
}

fn base(name: &str) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        design: DesignSpec::standard(1).expect("standard layout is valid"),
        sigma_a: vec![SigmaAFamily::Identity],
        sigma_b: vec![SigmaBKind::Identity],
        sigma_b_scale: 1.0,
        null_dims: vec![0],
        c_a: vec![1.0],
        p_values: vec![50],
        mu: None,
        zero_half_diagonals: false,
        replicates: 1,
        base_seed: 1,
        methods: vec![Method::Manova, Method::StepwiseReml],
        deltas: vec![],
        n_top: 5,
        stepwise: StepwiseOptions::default(),
    }
}

fn sigma_b_all() -> Vec<SigmaBKind> {
    vec![SigmaBKind::Identity, SigmaBKind::Wishart, SigmaBKind::HighRank, SigmaBKind::HighCorr]
}

pub fn builtin(name: &str) -> Result<ScenarioConfig> {
    let steps = |lo: usize, hi: usize, by: usize| (lo..=hi).step_by(by).collect::<Vec<_>>();
    let cfg = match name {
        "table1" => ScenarioConfig {
            sigma_a: vec![SigmaAFamily::Explicit(vec![25.0, 25.0, 0.0, 0.0])],
            sigma_b: vec![SigmaBKind::ExplicitDiagonal(vec![9.0, 0.0, 0.0, 9.0])],
            null_dims: vec![2],
            p_values: vec![4],
            mu: Some(vec![1.0, 2.0, 3.0, 4.0]),
            methods: vec![Method::Manova, Method::StepwiseReml, Method::PseudoReml],
            n_top: 0,
            ..base(name)
        },
        "fig-q50" | "fig-pairwise" => ScenarioConfig {
            sigma_a: vec![SigmaAFamily::AbsNormal],
            sigma_b: vec![SigmaBKind::AbsNormalDiagonal { scale: 25.0 }],
            c_a: vec![25.0],
            methods: if name == "fig-q50" {
                vec![Method::Manova, Method::StepwiseReml]
            } else {
                vec![Method::StepwiseReml, Method::PairwiseReml]
            },
            n_top: 0,
            ..base(name)
        },
        "fig-top5-bias" | "fig-reml-vs-manova" => ScenarioConfig {
            sigma_b_scale: 4.0,
            p_values: steps(10, 100, 10),
            zero_half_diagonals: name == "fig-reml-vs-manova",
            replicates: 50,
            ..base(name)
        },
        "fig-nearly-null" | "fig-dhat-delta" => ScenarioConfig {
            sigma_a: vec![SigmaAFamily::Identity, SigmaAFamily::ChiSquared, SigmaAFamily::HeavyTail],
            sigma_b: sigma_b_all(),
            null_dims: steps(0, 50, 5),
            c_a: vec![0.5, 1.0, 2.0],
            replicates: 10,
            methods: vec![Method::StepwiseReml],
            deltas: if name == "fig-dhat-delta" { vec![1.0] } else { vec![] },
            ..base(name)
        },
        "fig-top1-bias" => ScenarioConfig {
            sigma_a: vec![SigmaAFamily::Identity, SigmaAFamily::ChiSquaredFixed, SigmaAFamily::Spiked],
            sigma_b: sigma_b_all(),
            // the spiked structure needs p − d ≥ 1
            null_dims: steps(0, 45, 5),
            c_a: vec![0.5, 1.0, 2.0],
            replicates: 10,
            ..base(name)
        },
        _ => {
            return Err(Error::UnknownScenario { name: name.to_string(), valid: NAMES.join(", ") });
        }
    };
    Ok(cfg)
}

pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    NAMES.iter().map(|n| builtin(n).expect("builtin names resolve")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SigmaAKind;

    #[test]
    fn all_builtins_validate() {
        for cfg in builtin_scenarios() {
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn table1_parameters() {
        let c = builtin("table1").unwrap();
        let d = c.design.with_traits(c.p_values[0]).unwrap();
        assert_eq!((d.sires(), d.dams_per_sire(), d.offspring_per_dam(), d.traits()), (100, 3, 5, 4));
        assert_eq!(c.sigma_a[0].with(2, 1.0), SigmaAKind::ExplicitDiagonal(vec![25.0, 25.0, 0.0, 0.0]));
        assert_eq!(c.sigma_b, vec![SigmaBKind::ExplicitDiagonal(vec![9.0, 0.0, 0.0, 9.0])]);
        assert_eq!(c.mu, Some(vec![1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn nearly_null_grid_size() {
        let c = builtin("fig-nearly-null").unwrap();
        assert_eq!(c.cells().len(), 3 * 4 * 11 * 3);
        assert_eq!(c.replicates, 10);
    }

    #[test]
    fn top5_dam_line_is_four() {
        let c = builtin("fig-top5-bias").unwrap();
        assert_eq!((c.sigma_b.clone(), c.sigma_b_scale), (vec![SigmaBKind::Identity], 4.0));
        assert_eq!(c.p_values, (10..=100).step_by(10).collect::<Vec<_>>());
    }

    #[test]
    fn unknown_name_lists_valid() {
        let err = builtin("nope").unwrap_err().to_string();
        assert!(err.contains("table1") && err.contains("fig-top1-bias"));
    }
}
