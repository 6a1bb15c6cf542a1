//! Relative bias of the leading sire eigenvalue across true spectra.

use halfsib_reml::experiments::{builtin, run_scenario, select, REL_BIAS_1};
use halfsib_reml::model::SigmaBKind;
use halfsib_reml::spectra::summarize;

fn main() -> halfsib_reml::Result<()> {
    let mut cfg = builtin("fig-top1-bias")?;
    cfg.sigma_b = vec![SigmaBKind::Identity];
    cfg.c_a = vec![1.0];
    cfg.null_dims = vec![0, 25, 45];
    cfg.replicates = 5;
    let rows = run_scenario(&cfg)?;
    for family in &cfg.sigma_a {
        for d in &cfg.null_dims {
            let v: Vec<f64> = select(&rows, "stepwise", "A", REL_BIAS_1)
                .filter(|r| r.d == *d && r.sigma_a_kind == family.tag())
                .filter_map(|r| r.value)
                .collect();
            let s = summarize(&v)?;
            println!("{:>11} d={d:<3} relative bias median {:+.3} (IQR {:.3})", family.tag(), s.median, s.iqr());
        }
    }
    Ok(())
}
