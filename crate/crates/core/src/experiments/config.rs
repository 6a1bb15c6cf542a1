//! Flat `key = value` scenario files.
//!
//! ```text
//! # comments start with '#'
//! base = fig-top5-bias        # optional: start from a builtin
//! name = my-run
//! sires = 100
//! dams_per_sire = 3
//! offspring_per_dam = 5
//! p = 10..50:10               # list or inclusive range with step
//! sigma_a = identity, chisq, explicit(25;25;0;0)
//! sigma_b = identity, highcorr, absnormal(25)
//! sigma_b_scale = 4
//! null_dims = 0, 5
//! c_a = 0.5, 1
//! mu = 1, 2, 3, 4
//! zero_half_diagonals = false
//! replicates = 10
//! seed = 1
//! methods = manova, stepwise
//! deltas = 1
//! n_top = 5
//! tol = 1e-6
//! max_cycles = 10000
//! ```

use std::str::FromStr;

use super::{builtin, ScenarioConfig, SigmaAFamily};
use crate::error::{Error, Result};
use crate::estimators::{Method, StepwiseOptions};
use crate::model::{DesignSpec, SigmaBKind};

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn scalar<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| perr(line, format!("`{key}`: cannot parse `{}`", v.trim())))
}

fn items(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    items(v).map(|s| scalar(line, key, s)).collect()
}

/// Integers, with `lo..hi` or `lo..hi:step` ranges (inclusive).
fn int_list(line: usize, key: &str, v: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in items(v) {
        if let Some((lo, rest)) = item.split_once("..") {
            let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
            let (lo, hi, step): (usize, usize, usize) = (scalar(line, key, lo)?, scalar(line, key, hi)?, scalar(line, key, step)?);
            if step == 0 || hi < lo {
                return Err(perr(line, format!("`{key}`: bad range `{item}`")));
            }
            out.extend((lo..=hi).step_by(step));
        } else {
            out.push(scalar(line, key, item)?);
        }
    }
    Ok(out)
}

/// `name` or `name(arg)`.
fn call(item: &str) -> (&str, Option<&str>) {
    match item.split_once('(') {
        Some((n, rest)) if rest.ends_with(')') => (n.trim(), Some(&rest[..rest.len() - 1])),
        _ => (item, None),
    }
}

fn diag_args(line: usize, args: Option<&str>) -> Result<Vec<f64>> {
    let a = args.ok_or_else(|| perr(line, "explicit(...) needs ';'-separated entries"))?;
    a.split(';').map(|s| scalar(line, "explicit", s)).collect()
}

fn scale_arg(line: usize, args: Option<&str>) -> Result<f64> {
    scalar(line, "absnormal", args.ok_or_else(|| perr(line, "absnormal(...) needs a scale"))?)
}

fn sigma_a_list(line: usize, v: &str) -> Result<Vec<SigmaAFamily>> {
    items(v)
        .map(|item| {
            let (name, args) = call(item);
            Ok(match name {
                "identity" => SigmaAFamily::Identity,
                "chisq" => SigmaAFamily::ChiSquared,
                "heavytail" => SigmaAFamily::HeavyTail,
                "chisq-fixed" => SigmaAFamily::ChiSquaredFixed,
                "spiked" => SigmaAFamily::Spiked,
                "absnormal" => SigmaAFamily::AbsNormal,
                "explicit" => SigmaAFamily::Explicit(diag_args(line, args)?),
                _ => return Err(perr(line, format!("unknown sigma_a structure `{item}`"))),
            })
        })
        .collect()
}

fn sigma_b_list(line: usize, v: &str) -> Result<Vec<SigmaBKind>> {
    items(v)
        .map(|item| {
            let (name, args) = call(item);
            Ok(match name {
                "identity" => SigmaBKind::Identity,
                "wishart" => SigmaBKind::Wishart,
                "highrank" => SigmaBKind::HighRank,
                "highcorr" => SigmaBKind::HighCorr,
                "absnormal" => SigmaBKind::AbsNormalDiagonal { scale: scale_arg(line, args)? },
                "explicit" => SigmaBKind::ExplicitDiagonal(diag_args(line, args)?),
                _ => return Err(perr(line, format!("unknown sigma_b structure `{item}`"))),
            })
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| perr(n + 1, "expected `key = value`"))?;
        entries.push((n + 1, k.trim().to_string(), v.trim().to_string()));
    }

    let mut cfg = match entries.iter().find(|(_, k, _)| k == "base") {
        Some((_, _, v)) => builtin(v)?,
        None => ScenarioConfig {
            name: "custom".into(),
            design: DesignSpec::standard(1)?,
            sigma_a: vec![SigmaAFamily::Identity],
            sigma_b: vec![SigmaBKind::Identity],
            sigma_b_scale: 1.0,
            null_dims: vec![0],
            c_a: vec![1.0],
            p_values: vec![10],
            mu: None,
            zero_half_diagonals: false,
            replicates: 1,
            base_seed: 1,
            methods: vec![Method::Manova, Method::StepwiseReml],
            deltas: vec![],
            n_top: 5,
            stepwise: StepwiseOptions::default(),
        },
    };

    let (mut sires, mut dams, mut kids) =
        (cfg.design.sires(), cfg.design.dams_per_sire(), cfg.design.offspring_per_dam());
    for (line, key, v) in &entries {
        let line = *line;
        match key.as_str() {
            "base" => {}
            "name" => cfg.name = v.clone(),
            "sires" => sires = scalar(line, key, v)?,
            "dams_per_sire" => dams = scalar(line, key, v)?,
            "offspring_per_dam" => kids = scalar(line, key, v)?,
            "p" => cfg.p_values = int_list(line, key, v)?,
            "sigma_a" => cfg.sigma_a = sigma_a_list(line, v)?,
            "sigma_b" => cfg.sigma_b = sigma_b_list(line, v)?,
            "sigma_b_scale" => cfg.sigma_b_scale = scalar(line, key, v)?,
            "null_dims" => cfg.null_dims = int_list(line, key, v)?,
            "c_a" => cfg.c_a = list(line, key, v)?,
            "mu" => cfg.mu = Some(list(line, key, v)?),
            "zero_half_diagonals" => cfg.zero_half_diagonals = scalar(line, key, v)?,
            "replicates" => cfg.replicates = scalar(line, key, v)?,
            "seed" => cfg.base_seed = scalar(line, key, v)?,
            "methods" => {
                cfg.methods = items(v)
                    .map(|m| Method::from_tag(m).ok_or_else(|| perr(line, format!("unknown method `{m}`"))))
                    .collect::<Result<_>>()?
            }
            "deltas" => cfg.deltas = list(line, key, v)?,
            "n_top" => cfg.n_top = scalar(line, key, v)?,
            "tol" => cfg.stepwise.tol = scalar(line, key, v)?,
            "max_cycles" => cfg.stepwise.max_cycles = scalar(line, key, v)?,
            _ => return Err(perr(line, format!("unknown key `{key}`"))),
        }
    }
    cfg.design = DesignSpec::new(sires, dams, kids, 1)?;
    cfg.validate()?;
    Ok(cfg)
}
