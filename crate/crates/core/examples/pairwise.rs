//! Pairwise REML assembles a 50-trait estimate from 1×1 and 2×2 fits; the
//! result need not be positive semidefinite.

use halfsib_reml::experiments::{builtin, eig_stat, run_scenario, select};

fn main() -> halfsib_reml::Result<()> {
    let mut cfg = builtin("fig-pairwise")?;
    cfg.replicates = 1;
    let rows = run_scenario(&cfg)?;
    for method in ["stepwise", "pairwise"] {
        let eigs: Vec<f64> = (1..=50).filter_map(|i| select(&rows, method, "A", &eig_stat(i)).next()?.value).collect();
        let negative = eigs.iter().filter(|&&v| v < 0.0).count();
        println!(
            "{method:>9}: λ1 {:.3}  λ25 {:.3}  λ50 {:.3}  negative {negative}",
            eigs[0], eigs[24], eigs[49]
        );
    }
    Ok(())
}
