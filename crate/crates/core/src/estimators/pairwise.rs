use nalgebra::DMatrix;
use rayon::prelude::*;

use super::stepwise::{stepwise_reml, StepwiseOptions};
use super::{reml_criterion, require_pd, EstimateSet, Method, StratumChain};
use crate::error::Result;
use crate::model::{CovarianceComponents, DesignSpec};
use crate::stats::MeanSquares;

/// Assemble a full estimate from univariate (diagonal) and bivariate
/// (off-diagonal) stepwise REML fits. No bending is applied, so the result
/// may be indefinite.
pub fn pairwise_reml(ms: &MeanSquares, design: &DesignSpec, opts: &StepwiseOptions) -> Result<EstimateSet> {
    require_pd(&ms.m_e, "error mean square")?;
    let p = ms.traits();
    let mut jobs: Vec<(usize, usize)> = (0..p).map(|i| (i, i)).collect();
    jobs.extend((0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))));

    let fits: Vec<((usize, usize), EstimateSet)> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let idx: Vec<usize> = if i == j { vec![i] } else { vec![i, j] };
            let sub = design.with_traits(idx.len())?;
            stepwise_reml(&ms.subset(&idx), &sub, opts).map(|e| ((i, j), e))
        })
        .collect::<Result<_>>()?;

    let mut comps = CovarianceComponents {
        sigma_a: DMatrix::zeros(p, p),
        sigma_b: DMatrix::zeros(p, p),
        sigma_e: DMatrix::zeros(p, p),
    };
    let mut iterations = 0;
    let mut converged = true;
    let mut final_step: f64 = 0.0;
    for ((i, j), est) in &fits {
        let (r, c) = if i == j { (0, 0) } else { (0, 1) };
        for (dst, src) in [
            (&mut comps.sigma_a, &est.components.sigma_a),
            (&mut comps.sigma_b, &est.components.sigma_b),
            (&mut comps.sigma_e, &est.components.sigma_e),
        ] {
            dst[(*i, *j)] = src[(r, c)];
            dst[(*j, *i)] = src[(r, c)];
        }
        iterations = iterations.max(est.iterations);
        converged &= est.converged;
        final_step = final_step.max(est.final_step);
    }

    let criterion = reml_criterion(&StratumChain::from_components(&comps, design), ms);
    Ok(EstimateSet::assemble(Method::PairwiseReml, comps, criterion, iterations, converged, final_step))
}
