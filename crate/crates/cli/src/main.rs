use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use ddtrack::bounds::{
    limsup_bound, markov_envelope, opgd_envelope, ospgd_expectation_envelope, ospgd_hp_envelope, BoundInputs,
};
use ddtrack::harness::{format_f64, run_experiment, write_outputs, ScenarioConfig, Table};
use ddtrack::subweibull::{fit_subweibull, tail_bound, DEFAULT_MAX_MOMENT};

/// Tracking experiments and error bounds for online projected gradient
/// descent under decision-dependent distributions.
#[derive(Debug, Parser)]
#[command(name = "ddtrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the fleet-charging Monte Carlo experiment and write CSV + JSON.
    ReproduceEv(ReproduceArgs),
    /// Print the per-step envelope table for constant inputs.
    Bounds(BoundsArgs),
    /// Fit a sub-Weibull proxy variance to samples and tabulate the tail.
    FitTail(FitTailArgs),
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Scenario TOML; defaults to the built-in scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo replications (overrides the config).
    #[arg(long)]
    replications: Option<usize>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory receiving the result files; created if missing.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Contraction factor per step.
    #[arg(long)]
    lambda: f64,
    /// Drift of the stable points per step.
    #[arg(long)]
    phi: f64,
    /// Initial tracking error.
    #[arg(long)]
    e0: f64,
    /// Number of steps.
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Mean gradient error per step.
    #[arg(long, default_value_t = 0.0)]
    xi_mean: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Sub-Weibull proxy variance of the gradient error.
    #[arg(long, default_value_t = 0.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Also print the asymptotic bound phi / (1 - lambda).
    #[arg(long)]
    limsup: bool,
}

#[derive(Debug, Args)]
struct FitTailArgs {
    /// CSV with one sample per line and an optional header.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_MOMENT)]
    max_moment: usize,
}

/// A failure together with its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn config_err(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: error.into(),
    }
}

fn runtime_err(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        error: error.into(),
    }
}

fn reproduce_ev(args: ReproduceArgs) -> Result<(), Failure> {
    let mut config = match &args.config {
        Some(path) => ScenarioConfig::from_file(path).map_err(config_err)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(m) = args.replications {
        config.replications = m;
    }
    config.validate().map_err(config_err)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))
        .map_err(runtime_err)?;
    let result = run_experiment(&config, args.workers).map_err(runtime_err)?;
    let (csv, meta) = write_outputs(&result, &args.out_dir).map_err(runtime_err)?;
    println!("wrote {}", csv.display());
    println!("wrote {}", meta.display());
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<(), Failure> {
    if !(args.delta > 0.0 && args.delta < 1.0) {
        return Err(config_err(anyhow!("--delta {} must lie in (0, 1)", args.delta)));
    }
    let inputs = BoundInputs::constant(
        args.steps,
        args.lambda,
        args.phi,
        args.e0,
        args.eta,
        args.xi_mean,
        args.theta,
        args.nu,
        args.delta,
    );
    let limsup = if args.limsup {
        Some(limsup_bound(args.lambda, args.phi).map_err(config_err)?)
    } else {
        None
    };
    let columns = [
        opgd_envelope(&inputs),
        ospgd_expectation_envelope(&inputs),
        ospgd_hp_envelope(&inputs),
        markov_envelope(&inputs),
    ]
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(config_err)?;
    let table = Table {
        header: ["t", "env_opgd", "env_exp", "env_hp", "env_markov"]
            .map(String::from)
            .to_vec(),
        rows: (0..=args.steps)
            .map(|t| {
                let mut row = vec![t as f64];
                row.extend(columns.iter().map(|c| c[t]));
                row
            })
            .collect(),
    };
    print!("{}", table.to_csv());
    if let Some(v) = limsup {
        eprintln!("limsup bound: {}", format_f64(v));
    }
    Ok(())
}

fn read_samples(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => samples.push(v),
            Err(_) if idx == 0 => {} // header
            Err(_) => return Err(anyhow!("{}: row {}: cannot parse {field:?}", path.display(), idx + 1)),
        }
    }
    Ok(samples)
}

fn fit_tail(args: FitTailArgs) -> Result<(), Failure> {
    let samples = read_samples(&args.input).map_err(config_err)?;
    let fit = fit_subweibull(&samples, args.theta, args.max_moment).map_err(config_err)?;
    println!("# theta = {}", format_f64(fit.theta));
    println!("# nu = {}", format_f64(fit.nu));
    let mut table = Table {
        header: ["k", "epsilon", "empirical_tail", "subweibull_bound"]
            .map(String::from)
            .to_vec(),
        rows: Vec::new(),
    };
    if let Ok(sw) = fit.descriptor() {
        let n = samples.len() as f64;
        for k in 1..=20 {
            let eps = 0.25 * k as f64 * fit.nu;
            let freq = samples.iter().filter(|v| v.abs() >= eps).count() as f64 / n;
            table.rows.push(vec![k as f64, eps, freq, tail_bound(sw, eps)]);
        }
    }
    print!("{}", table.to_csv());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::ReproduceEv(args) => reproduce_ev(args),
        Command::Bounds(args) => bounds(args),
        Command::FitTail(args) => fit_tail(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
