//! Upward bias of the leading REML sire eigenvalue as p grows while the
//! truth stays fixed at the identity.

use halfsib_reml::estimators::Method;
use halfsib_reml::experiments::{builtin, eig_stat, run_scenario, select};
use halfsib_reml::spectra::summarize;

fn main() -> halfsib_reml::Result<()> {
    let mut cfg = builtin("fig-top5-bias")?;
    cfg.p_values = vec![10, 30, 60];
    cfg.replicates = 10;
    cfg.methods = vec![Method::StepwiseReml];
    let rows = run_scenario(&cfg)?;
    println!("   p  mean λ1(Σ_A)   sd    median λ1(Σ_E)");
    for p in &cfg.p_values {
        let take = |c: &str| -> Vec<f64> {
            select(&rows, "stepwise", c, &eig_stat(1)).filter(|r| r.p == *p).filter_map(|r| r.value).collect()
        };
        let a = summarize(&take("A"))?;
        let e = summarize(&take("E"))?;
        println!("{p:>4}  {:>12.3}  {:>5.3}  {:>13.3}", a.mean, a.sd, e.median);
    }
    Ok(())
}
