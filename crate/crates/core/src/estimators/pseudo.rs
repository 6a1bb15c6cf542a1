use super::order_mle::two_wishart_order_mle;
use super::{reml_criterion, require_pd, EstimateSet, Method, StratumChain};
use crate::error::Result;
use crate::linalg;
use crate::model::DesignSpec;
use crate::stats::MeanSquares;

/// Single bottom-up pass of order-constrained truncation, no increments.
///
/// The `(E, B)` pair is fitted first; the resulting `Γ̃_B` is then treated as
/// data with the pooled degrees of freedom `df_E + df_B` and fitted against
/// `M_A`. `Γ̃_E` is not revisited.
///
/// The second stage may pull `Γ̃_B` below `Γ̃_E`, so the dam component is
/// taken from the first stage and the sire component from the second-stage
/// gap `Γ̃_A − Γ̃_B'`. Both stay PSD and the reported chain is feasible.
pub fn pseudo_reml(ms: &MeanSquares, design: &DesignSpec) -> Result<EstimateSet> {
    require_pd(&ms.m_e, "error mean square")?;
    let lower = two_wishart_order_mle(&ms.m_e, ms.df_e, &ms.m_b, ms.df_b)?;
    let upper = two_wishart_order_mle(&lower.upper, ms.df_e + ms.df_b, &ms.m_a, ms.df_a)?;
    let gamma_a = &lower.upper + (&upper.upper - &upper.lower);
    let chain = StratumChain { gamma_e: lower.lower, gamma_b: lower.upper, gamma_a: linalg::symmetrize(&gamma_a) };
    let criterion = reml_criterion(&chain, ms);
    Ok(EstimateSet::assemble(Method::PseudoReml, chain.to_components(design), criterion, 1, true, 0.0))
}
