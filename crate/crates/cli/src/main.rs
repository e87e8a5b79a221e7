use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blockneg_core::analysis::{self, Format, Provenance, RunConfig, ScalingRecord};
use blockneg_core::Error;
use clap::{Args, Parser, Subcommand};

/// Negativity between separated blocks of critical XY spin chains.
#[derive(Parser, Debug)]
#[command(name = "blockneg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Negativity against μ = x/Δ for a list of chain lengths.
    MuSweep(SweepArgs),
    /// Negativity at a fixed μ over a grid of fields, with curve crossings.
    LambdaScan(ScanArgs),
    /// Fit 𝒩 ≈ A μ^(-h) e^(-αμ) to exported records.
    Fit(FitArgs),
    /// Largest relative deviation between two record sets for μ ≤ cut.
    Compare(CompareArgs),
    /// Compare the DMRG pipeline against exact diagonalization.
    OracleCheck(OracleArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// TOML file with default values for every flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Comma-separated chain lengths.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    kept_states: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    /// μ range as `min,max`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    window: Option<Vec<f64>>,
    /// csv or json; defaults to the output extension.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Directory for DMRG checkpoints; existing matching runs are reused.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Target ratio x/Δ, as `p/q`.
    #[arg(long)]
    mu: Option<String>,
    /// Comma-separated field values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    lambdas: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Records file (CSV or JSON).
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', num_args = 1)]
    window: Option<Vec<f64>>,
    /// Fit the logarithmic negativity instead of the negativity.
    #[arg(long)]
    log_negativity: bool,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    first: PathBuf,
    second: PathBuf,
    #[arg(long, default_value_t = 2.5)]
    mu_cut: f64,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

/// Failures split by exit code.
enum Failure {
    Partial(String),
    Invalid(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Invalid(msg),
            Error::InvalidParameter(_) | Error::Unrealizable { .. } => Failure::Invalid(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn window_of(v: &Option<Vec<f64>>) -> Result<Option<[f64; 2]>, Failure> {
    match v.as_deref() {
        None => Ok(None),
        Some([a, b]) => Ok(Some([*a, *b])),
        Some(_) => Err(Failure::Invalid("--window takes exactly two values, min,max".into())),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Invalid(e.to_string())),
        None => Ok(RunConfig::default()),
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let flags = RunConfig {
            gamma: self.gamma,
            lambda: self.lambda,
            sizes: self.sizes.clone(),
            kept_states: self.kept_states,
            sweeps: self.sweeps,
            window: window_of(&self.window)?,
            output: self.out.clone(),
            format: self.format.clone(),
            jobs: self.jobs,
            ..Default::default()
        };
        Ok(load_config(&self.config)?.merged(flags))
    }
}

fn provenance(command: &str, cfg: &RunConfig) -> Provenance {
    Provenance::new(command, serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn print_records(records: &[ScalingRecord]) {
    println!("{:>6} {:>6} {:>6} {:>10} {:>14} {:>12}", "N", "Δ", "x", "μ", "negativity", "ε");
    for r in records {
        println!(
            "{:>6} {:>6} {:>6} {:>10.5} {:>14.8e} {:>12.2e}",
            r.n_sites, r.block_len, r.separation, r.mu, r.negativity, r.truncated_weight
        );
    }
}

fn mu_sweep(args: &SweepArgs) -> CliResult {
    let cfg = args.run.resolve()?;
    let (gamma, lambda) = (cfg.gamma()?, cfg.lambda()?);
    let sizes = cfg.sizes(gamma, lambda)?;
    let (dmrg, window, jobs, format) = (cfg.dmrg()?, cfg.window()?, cfg.jobs()?, cfg.format()?);
    let out = analysis::mu_sweep_cached(gamma, lambda, &sizes, &dmrg, window, jobs, args.checkpoint_dir.as_deref())?;
    for w in &out.warnings {
        log::warn!("{w}");
    }
    match &cfg.output {
        Some(path) => analysis::export_records(path, format, &out.records, &provenance("mu-sweep", &cfg))?,
        None => print_records(&out.records),
    }
    if out.is_partial() {
        let msgs: Vec<String> = out.failures.iter().map(|f| format!("N={}: {}", f.n_sites, f.message)).collect();
        return Err(Failure::Partial(msgs.join("; ")));
    }
    Ok(())
}

fn lambda_scan(args: &ScanArgs) -> CliResult {
    let mut cfg = args.run.resolve()?;
    if args.mu.is_some() {
        cfg.mu = args.mu.clone();
    }
    if args.lambdas.is_some() {
        cfg.lambdas = args.lambdas.clone();
    }
    let gamma = cfg.gamma()?;
    let mu = analysis::parse_ratio(cfg.mu.as_deref().ok_or_else(|| Failure::Invalid("mu is not set".into()))?)?;
    let lambdas = cfg.lambdas.clone().ok_or_else(|| Failure::Invalid("lambdas is not set".into()))?;
    let sizes = cfg.sizes(gamma, lambdas.first().copied().unwrap_or(1.0))?;
    let (dmrg, jobs, format) = (cfg.dmrg()?, cfg.jobs()?, cfg.format()?);
    let scan = analysis::lambda_scan(gamma, mu, &sizes, &lambdas, &dmrg, jobs)?;
    for n in &scan.skipped {
        eprintln!("warning: μ = {} has no realization at N = {n}; skipped", scan.mu);
    }
    match (&cfg.output, format) {
        (Some(path), Format::Json) => write_json(
            path,
            &serde_json::json!({ "provenance": provenance("lambda-scan", &cfg), "scan": scan }),
        )?,
        (Some(path), Format::Csv) => {
            let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Runtime(e.to_string()))?;
            for p in &scan.points {
                w.serialize(p).map_err(|e| Failure::Runtime(e.to_string()))?;
            }
            w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
        }
        (None, _) => {
            println!("{:>6} {:>8} {:>14}", "N", "λ", "negativity");
            for p in &scan.points {
                println!("{:>6} {:>8.4} {:>14.8e}", p.n_sites, p.lambda, p.negativity);
            }
        }
    }
    for c in &scan.crossings {
        println!("crossing N={}/{}: λ = {:.5}, negativity = {:.6}", c.n_small, c.n_large, c.lambda, c.negativity);
    }
    if scan.is_partial() {
        return Err(Failure::Partial(format!("{} scan points failed", scan.failures.len())));
    }
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<ScalingRecord>, Failure> {
    let format = Format::from_path(path).unwrap_or(Format::Csv);
    Ok(analysis::import_records(path, format)?)
}

fn fit(args: &FitArgs) -> CliResult {
    let mut cfg = load_config(&args.config)?;
    if let Some(w) = window_of(&args.window)? {
        cfg.window = Some(w);
    }
    if args.out.is_some() {
        cfg.output = args.out.clone();
    }
    if args.format.is_some() {
        cfg.format = args.format.clone();
    }
    let use_ln = args.log_negativity || cfg.log_negativity.unwrap_or(false);
    cfg.log_negativity = Some(use_ln);
    let (window, format) = (cfg.window()?, cfg.format()?);
    let records = read_records(&args.input)?;
    let fit = analysis::fit_ansatz(&records, window, use_ln)?;
    let sd = |k: usize| fit.covariance[k][k].sqrt();
    println!("h = {:.4} ± {:.4}", fit.h, sd(1));
    println!("alpha = {:.4} ± {:.4}", fit.alpha, sd(2));
    println!("amplitude = {:.6}", fit.amplitude);
    println!("points = {}, window = [{}, {}], residual = {:.3e}", fit.n_points, window[0], window[1], fit.residual_norm);
    if let Some(path) = &cfg.output {
        analysis::export_fits(path, format, std::slice::from_ref(&fit), &provenance("fit", &cfg))?;
    }
    Ok(())
}

fn compare(args: &CompareArgs) -> CliResult {
    let a = read_records(&args.first)?;
    let b = read_records(&args.second)?;
    let dev = analysis::universality_compare(&a, &b, args.mu_cut)?;
    println!("max relative deviation (μ ≤ {}) = {dev:.6}", args.mu_cut);
    Ok(())
}

fn oracle_check(args: &OracleArgs) -> CliResult {
    let mut cfg = args.run.resolve()?;
    cfg.kept_states.get_or_insert(32);
    let (gamma, lambda) = (cfg.gamma()?, cfg.lambda()?);
    let sizes = cfg.sizes(gamma, lambda)?;
    let dmrg = cfg.dmrg()?;
    let window = [f64::MIN_POSITIVE, f64::MAX];
    let out = analysis::mu_sweep(gamma, lambda, &sizes, &dmrg, window, cfg.jobs()?)?;
    let mut worst: f64 = 0.0;
    for &n in &sizes {
        let params = blockneg_core::ModelParams::new(n, gamma, lambda)?;
        let oracle = analysis::oracle_records(&params, window)?;
        for o in &oracle {
            let Some(r) = out.records.iter().find(|r| r.n_sites == n && r.block_len == o.block_len) else {
                continue;
            };
            let diff = (r.negativity - o.negativity).abs();
            worst = worst.max(diff);
            println!("N={n} Δ={} x={} dmrg={:.10} exact={:.10} diff={diff:.2e}", o.block_len, o.separation, r.negativity, o.negativity);
        }
    }
    println!("max difference = {worst:.3e} (tolerance {:.1e})", args.tolerance);
    if out.is_partial() {
        return Err(Failure::Partial("some runs failed".into()));
    }
    if worst > args.tolerance {
        return Err(Failure::Runtime(format!("difference {worst:.3e} exceeds {:.1e}", args.tolerance)));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::MuSweep(a) => mu_sweep(a),
        Command::LambdaScan(a) => lambda_scan(a),
        Command::Fit(a) => fit(a),
        Command::Compare(a) => compare(a),
        Command::OracleCheck(a) => oracle_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(msg)) | Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("invalid configuration: {msg}");
            ExitCode::from(2)
        }
    }
}
