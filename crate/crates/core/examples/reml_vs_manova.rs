//! Mean difference between REML and MANOVA leading eigenvalues, per
//! component, when half of the diagonal entries are zeroed.

use halfsib_reml::experiments::{builtin, diff_vs_manova_stat, run_scenario, select};

fn main() -> halfsib_reml::Result<()> {
    let mut cfg = builtin("fig-reml-vs-manova")?;
    cfg.p_values = vec![20, 40];
    cfg.replicates = 10;
    let rows = run_scenario(&cfg)?;
    for p in &cfg.p_values {
        for c in ["A", "B", "E"] {
            let means: Vec<String> = (1..=5)
                .map(|i| {
                    let v: Vec<f64> =
                        select(&rows, "stepwise", c, &diff_vs_manova_stat(i)).filter(|r| r.p == *p).filter_map(|r| r.value).collect();
                    format!("{:+.4}", v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect();
            println!("p={p:<3} Σ_{c} REML − MANOVA, i = 1..5: {}", means.join(" "));
        }
    }
    Ok(())
}
