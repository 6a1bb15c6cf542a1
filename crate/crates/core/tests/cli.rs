use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn reml_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reml-sim")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = reml_sim(&["--threads", threads, "run", "table1", "--replicates", "3", "--out", path_str(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("scenario,p,d,c_A,sigma_A_kind,sigma_B_kind,replicate,seed,method,component,statistic,value\n"));
}

#[test]
fn table1_criteria_are_ordered() {
    let o = reml_sim(&["run", "table1", "--replicates", "2"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for rep in ["0", "1"] {
        let crit = |method: &str| -> f64 {
            text.lines()
                .map(|l| l.split(',').collect::<Vec<_>>())
                .find(|f| f[6] == rep && f[8] == method && f[10] == "criterion")
                .map(|f| f[11].parse().unwrap())
                .unwrap()
        };
        assert!(crit("manova") >= crit("stepwise"));
        assert!(crit("stepwise") >= crit("pseudo"));
    }
}

#[test]
fn jsonl_rows_parse() {
    let o = reml_sim(&["run", "table1", "--replicates", "1", "--format", "jsonl"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut n = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["scenario"], "table1");
        assert!(v.get("c_A").is_some());
        n += 1;
    }
    assert!(n > 0);
}

#[test]
fn simulate_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let ms = dir.path().join("ms.txt");
    let o = reml_sim(&["simulate", "table1", "--seed", "9", "--out", path_str(&data), "--mean-squares-out", path_str(&ms)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let from_data = reml_sim(&["fit", path_str(&data), "--method", "manova", "--method", "stepwise"]);
    let from_ms = reml_sim(&["fit", path_str(&ms), "--method", "manova", "--method", "stepwise"]);
    assert!(from_data.status.success() && from_ms.status.success());
    let a = String::from_utf8(from_data.stdout).unwrap();
    let b = String::from_utf8(from_ms.stdout).unwrap();
    assert!(a.contains("stepwise"));
    assert_eq!(a, b);
}

#[test]
fn identical_observations_fit_to_zero_with_manova() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("flat.csv");
    let mut text = String::from("sire,dam,individual,trait_1,trait_2\n");
    for i in 1..=4 {
        for j in 1..=2 {
            for k in 1..=3 {
                text += &format!("{i},{j},{k},1.5,-2\n");
            }
        }
    }
    fs::write(&data, text).unwrap();
    let o = reml_sim(&["fit", path_str(&data), "--method", "manova"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("-inf"), "{out}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(reml_sim(&["run", "no-such-scenario"]).status.code(), Some(2));
    assert_eq!(reml_sim(&["fit"]).status.code(), Some(2));
    assert_eq!(reml_sim(&["run", "table1", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(reml_sim(&["--help"]).status.code(), Some(0));
}

#[test]
fn scenario_file_overrides_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(
        &cfg,
        "# shrink the nearly-null grid\nbase = fig-nearly-null\nname = tiny\nsires = 20\np = 6\nnull_dims = 0, 3\nc_a = 1\nreplicates = 2\n",
    )
    .unwrap();
    let o = reml_sim(&["run", path_str(&cfg), "--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<_> = text.lines().skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|l| l.starts_with("tiny,6,")));

    fs::write(&cfg, "replicates = many\n").unwrap();
    assert_eq!(reml_sim(&["run", path_str(&cfg)]).status.code(), Some(2));
}
