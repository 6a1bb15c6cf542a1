//! Estimated count of small sire eigenvalues against the true null
//! dimension.

use halfsib_reml::experiments::{builtin, d_hat_stat, run_scenario, select, SigmaAFamily};
use halfsib_reml::model::SigmaBKind;
use halfsib_reml::spectra::summarize;

fn main() -> halfsib_reml::Result<()> {
    let mut cfg = builtin("fig-nearly-null")?;
    cfg.sigma_a = vec![SigmaAFamily::Identity];
    cfg.sigma_b = vec![SigmaBKind::Identity];
    cfg.c_a = vec![1.0];
    cfg.null_dims = vec![0, 10, 25, 40];
    cfg.replicates = 5;
    cfg.deltas = vec![0.5];
    let rows = run_scenario(&cfg)?;
    let stat = d_hat_stat(0.5);
    println!("  d   median d_hat(.5)  exact zeros");
    for d in &cfg.null_dims {
        let dh: Vec<f64> = select(&rows, "stepwise", "A", &stat).filter(|r| r.d == *d).filter_map(|r| r.value).collect();
        let nz: Vec<f64> = select(&rows, "stepwise", "A", "n_zero").filter(|r| r.d == *d).filter_map(|r| r.value).collect();
        println!("{d:>3}   {:>15.1}   {:>11.1}", summarize(&dh)?.median, summarize(&nz)?.median);
    }
    Ok(())
}
