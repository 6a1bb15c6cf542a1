//! The four-trait example: two genetic dimensions with zero variance.
//! Compares MANOVA, stepwise and pseudo REML sire spectra.

use halfsib_reml::experiments::{builtin, eig_stat, run_scenario, select};

fn main() -> halfsib_reml::Result<()> {
    let cfg = builtin("table1")?;
    let rows = run_scenario(&cfg)?;
    println!("truth Σ_A diagonal: 25 25 0 0");
    for method in ["manova", "stepwise", "pseudo"] {
        for c in ["A", "B", "E"] {
            let eigs: Vec<String> = (1..=4)
                .filter_map(|i| select(&rows, method, c, &eig_stat(i)).next().and_then(|r| r.value))
                .map(|v| format!("{v:9.4}"))
                .collect();
            println!("{method:>9} Σ_{c}: {}", eigs.join(" "));
        }
        let crit = select(&rows, method, "", "criterion").next().and_then(|r| r.value).unwrap();
        println!("{method:>9} criterion {crit:.4}");
    }
    Ok(())
}
