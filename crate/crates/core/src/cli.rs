//! `reml-sim` command line.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 1 for
//! failures while running.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::estimators::{Component, Method, StepwiseOptions, DEFAULT_MAX_CYCLES, DEFAULT_TOL};
use crate::experiments::{self, OutputFormat, ScenarioConfig};
use crate::model::{build_sigma_a, simulate, CovarianceComponents, DesignSpec, SigmaAKind};
use crate::oracle::{self, DEFAULT_RESTARTS};
use crate::spectra::{nearly_null_dim, SpectrumSummary};
use crate::stats::mean_squares;
use crate::{io as files, rng};

#[derive(Debug, Parser)]
#[command(name = "reml-sim", version, about = "Simulate balanced half-sib designs and fit covariance components")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "REML_SIM_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one replicate of a scenario and write the dataset.
    Simulate(SimulateArgs),
    /// Fit a dataset or mean-squares file and print spectra and criteria.
    Fit(FitArgs),
    /// Run a builtin scenario or a scenario file.
    Run(RunArgs),
    /// Time stepwise REML fits across trait counts.
    Bench(BenchArgs),
    /// Compare stepwise REML with the brute-force solver on random instances.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Jsonl => OutputFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Manova,
    Stepwise,
    Pseudo,
    Pairwise,
    Oracle,
    All,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Convergence threshold on the weighted step distance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_CYCLES)]
    pub max_cycles: usize,
}

impl SolverArgs {
    fn options(&self) -> StepwiseOptions {
        StepwiseOptions { tol: self.tol, max_cycles: self.max_cycles }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Builtin scenario name or scenario file; the first grid cell is used.
    #[arg(default_value = "table1")]
    pub scenario: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trait count, overriding the scenario's first value.
    #[arg(long)]
    pub p: Option<usize>,
    /// Replicate index to draw.
    #[arg(long, default_value_t = 0)]
    pub replicate: usize,
    /// Dataset output path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the mean squares to this path.
    #[arg(long)]
    pub mean_squares_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset (`sire,dam,individual,trait_…`) or mean-squares file.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub method: Vec<MethodArg>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Threshold for the small-eigenvalue count `d_hat(δ)`; repeatable.
    #[arg(long)]
    pub delta: Vec<f64>,
    /// Random restarts for the brute-force solver.
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    pub restarts: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Builtin scenario name or path to a `key = value` scenario file.
    pub scenario: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Trait counts, overriding the scenario's list.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_cycles: Option<usize>,
    /// Extra `d_hat(δ)` thresholds, replacing the scenario's list.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![50usize, 100, 200])]
    pub p: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 3])]
    pub p: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    pub restarts: usize,
    /// Tolerance on the absolute criterion gap.
    #[arg(long, default_value_t = 1e-4)]
    pub criterion_tol: f64,
    /// Tolerance on the per-component Frobenius gap.
    #[arg(long, default_value_t = 1e-3)]
    pub component_tol: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.threads {
        Some(0) => Err(Failure::Usage("--threads must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Failure::Runtime(e.to_string())),
        },
        None => dispatch(cli.command),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

fn sink(path: &Option<PathBuf>) -> std::result::Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// A builtin name, or a scenario file when the argument names one.
fn load_scenario(arg: &str) -> std::result::Result<ScenarioConfig, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{arg}: {e}")))?;
        experiments::parse_config(&text).map_err(|e| Failure::Usage(format!("{arg}: {e}")))
    } else {
        experiments::builtin(arg).map_err(Failure::usage)
    }
}

fn cmd_simulate(a: SimulateArgs) -> Outcome {
    let mut cfg = load_scenario(&a.scenario)?;
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if let Some(p) = a.p {
        cfg.p_values = vec![p];
        if cfg.mu.as_ref().is_some_and(|m| m.len() != p) {
            cfg.mu = None;
        }
    }
    cfg.validate().map_err(Failure::usage)?;
    let cell = cfg.cells().into_iter().next().expect("validated config has a cell");
    let real = experiments::realize(&cfg, &cell, a.replicate)?;
    files::write_dataset(&real.data, sink(&a.out)?)?;
    if let Some(path) = &a.mean_squares_out {
        let ms = mean_squares(&real.data);
        files::write_mean_squares(&ms, &real.data.design, sink(&Some(path.clone()))?)?;
    }
    Ok(())
}

fn methods(args: &[MethodArg]) -> Vec<Method> {
    let mut out: Vec<Method> = Vec::new();
    for m in args {
        let add: Vec<Method> = match m {
            MethodArg::Manova => vec![Method::Manova],
            MethodArg::Stepwise => vec![Method::StepwiseReml],
            MethodArg::Pseudo => vec![Method::PseudoReml],
            MethodArg::Pairwise => vec![Method::PairwiseReml],
            MethodArg::Oracle => vec![Method::Oracle],
            MethodArg::All => Method::ALL.to_vec(),
        };
        for x in add {
            if !out.contains(&x) {
                out.push(x);
            }
        }
    }
    out
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

fn cmd_fit(a: FitArgs) -> Outcome {
    if !(a.solver.tol >= 0.0) || a.solver.max_cycles == 0 {
        return Err(Failure::Usage("--tol must be >= 0 and --max-cycles >= 1".into()));
    }
    let file = File::open(&a.input).map_err(|e| Failure::Usage(format!("{}: {e}", a.input.display())))?;
    let (ms, design) = files::read_mean_squares_or_dataset(BufReader::new(file))
        .map_err(|e| Failure::Usage(format!("{}: {e}", a.input.display())))?;
    let opts = a.solver.options();
    let mut out = sink(&a.out)?;
    writeln!(
        out,
        "design I={} J={} K={} p={}",
        design.sires(),
        design.dams_per_sire(),
        design.offspring_per_dam(),
        design.traits()
    )?;
    for method in methods(&a.method) {
        let est = match method {
            Method::Oracle => oracle::brute_force_reml(&ms, &design, a.restarts)?,
            m => m.fit(&ms, &design, &opts)?,
        };
        writeln!(
            out,
            "{}: criterion {:.6} iterations {} converged {}",
            method.tag(),
            est.criterion,
            est.iterations,
            est.converged
        )?;
        for c in Component::ALL {
            let s = SpectrumSummary::new(est.spectrum(c).to_vec());
            write!(out, "  {} eigenvalues {}  zeros {}", c.tag(), fmt_list(&s.eigenvalues), s.d_hat_zero)?;
            for &d in &a.delta {
                write!(out, "  d_hat({d}) {}", nearly_null_dim(&s.eigenvalues, d))?;
            }
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_run(a: RunArgs) -> Outcome {
    let mut cfg = load_scenario(&a.scenario)?;
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    if !a.p.is_empty() {
        cfg.p_values = a.p.clone();
    }
    if let Some(t) = a.tol {
        cfg.stepwise.tol = t;
    }
    if let Some(m) = a.max_cycles {
        cfg.stepwise.max_cycles = m;
    }
    if !a.delta.is_empty() {
        cfg.deltas = a.delta.clone();
    }
    cfg.validate().map_err(Failure::usage)?;
    let records = experiments::run_scenario(&cfg)?;
    OutputFormat::from(a.format).write(&records, sink(&a.out)?)?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Outcome {
    if a.p.is_empty() || a.p.contains(&0) {
        return Err(Failure::Usage("--p needs positive trait counts".into()));
    }
    let opts = a.solver.options();
    let mut out = sink(&None)?;
    writeln!(out, "p,cycles,converged,seconds")?;
    for &p in &a.p {
        // half of the sire directions null, so the constraints bind
        let design = DesignSpec::standard(p)?;
        let mut r = rng::stream(rng::derive_seed(a.seed, &[p as u64]));
        let sigma_a = build_sigma_a(&SigmaAKind::Identity { null_dim: p / 2, scale: 1.0 }, p, &mut r)?;
        let id = DMatrix::identity(p, p);
        let comps = CovarianceComponents::new(sigma_a, id.clone(), id)?;
        let data = simulate(&design, &comps, &DVector::zeros(p), rng::derive_seed(a.seed, &[p as u64, 1]))?;
        let ms = mean_squares(&data);
        let start = Instant::now();
        let est = Method::StepwiseReml.fit(&ms, &design, &opts)?;
        let secs = start.elapsed().as_secs_f64();
        writeln!(out, "{p},{},{},{secs:.6}", est.iterations, est.converged)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Outcome {
    if a.p.iter().any(|&p| p == 0 || p > oracle::MAX_TRAITS) {
        return Err(Failure::Usage(format!("--p values must be in 1..={}", oracle::MAX_TRAITS)));
    }
    let cases = oracle::equivalence_suite(&a.p, a.instances, a.seed, &a.solver.options(), a.restarts)?;
    let mut out = sink(&None)?;
    let mut failures = 0;
    for &p in &a.p {
        let mine: Vec<_> = cases.iter().filter(|c| c.p == p).collect();
        let worst_crit = mine.iter().map(|c| c.criterion_gap).fold(0.0, f64::max);
        let worst_comp = mine.iter().flat_map(|c| c.component_gap).fold(0.0, f64::max);
        let bad = mine
            .iter()
            .filter(|c| c.criterion_gap > a.criterion_tol || c.component_gap.iter().any(|g| *g > a.component_tol))
            .count();
        failures += bad;
        writeln!(
            out,
            "{} p={p}: {} instances, max criterion gap {worst_crit:.3e}, max component gap {worst_comp:.3e}, {bad} outside tolerance",
            if bad == 0 { "PASS" } else { "FAIL" },
            mine.len()
        )?;
    }
    out.flush()?;
    if failures > 0 {
        return Err(Failure::Runtime(format!("{failures} instance(s) disagree with the brute-force solver")));
    }
    Ok(())
}
