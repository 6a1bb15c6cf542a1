//! Compare the stepwise algorithm with direct numerical maximization of the
//! REML criterion on small problems.

use halfsib_reml::estimators::StepwiseOptions;
use halfsib_reml::oracle::{equivalence_suite, DEFAULT_RESTARTS};

fn main() -> halfsib_reml::Result<()> {
    let cases = equivalence_suite(&[1, 2, 3], 5, 7, &StepwiseOptions::default(), DEFAULT_RESTARTS)?;
    for c in &cases {
        println!(
            "p={} #{}  stepwise {:.6}  brute force {:.6}  |Δ| {:.1e}  max ‖ΔΣ‖ {:.1e}",
            c.p,
            c.instance,
            c.stepwise_criterion,
            c.oracle_criterion,
            c.criterion_gap,
            c.component_gap.iter().cloned().fold(0.0, f64::max)
        );
    }
    Ok(())
}
