use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hippa_cli::config::{parse_config_file, parse_methods, PartialConfig};
use hippa_cli::experiment::{run_experiment, write_atomic};
use hippa_core::{run_all, InstanceSpec};

#[derive(Parser)]
#[command(
    name = "hippa",
    version,
    about = "High-order Moreau envelope smoothing: proximal-point solvers, a validation suite, and the robust low-rank recovery benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: per-method CSV traces, plot-data.csv, summary.json.
    Run(RunArgs),
    /// Run the validation suite and print its JSON report.
    Validate(ValidateArgs),
    /// Write a reproducible benchmark instance description as JSON.
    GenInstance(GenInstanceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value config file; explicit flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Recovery model: 1 (symmetric) or 2 (asymmetric).
    #[arg(long)]
    model: Option<u8>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    /// Factor rank.
    #[arg(long)]
    r: Option<usize>,
    /// Envelope power (> 1).
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,
    /// Envelope parameter (> 0).
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Line-search shrink factor in (0, 1).
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    /// Fraction of corrupted measurements in [0, 1).
    #[arg(long, allow_negative_numbers = true)]
    outliers: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Outer-iteration budget (mutually exclusive with --seconds).
    #[arg(long)]
    iters: Option<usize>,
    /// Virtual-seconds budget: one subgradient call counts as one microsecond.
    #[arg(long, allow_negative_numbers = true)]
    seconds: Option<f64>,
    /// Comma-separated subset of boosted-hippa, hippa, sg-dss, sg-css(ALPHA), sg-pss.
    #[arg(long)]
    methods: Option<String>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Seed for the randomized inequality suites.
    #[arg(long, default_value_t = 20240801)]
    seed: u64,
    /// Also write the JSON report to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenInstanceArgs {
    /// Recovery model: 1 (symmetric) or 2 (asymmetric).
    #[arg(long)]
    model: Option<u8>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    /// Factor rank.
    #[arg(long)]
    r: Option<usize>,
    /// Fraction of corrupted measurements in [0, 1).
    #[arg(long, allow_negative_numbers = true)]
    outliers: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Destination for the instance description.
    #[arg(long, default_value = "instance.json")]
    out: PathBuf,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run_cmd(args),
        Command::Validate(args) => validate_cmd(args),
        Command::GenInstance(args) => gen_instance_cmd(args),
    }
}

fn run_cmd(args: RunArgs) -> ExitCode {
    let methods = match args.methods.as_deref().map(parse_methods).transpose() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let flags = PartialConfig {
        model: args.model,
        n1: args.n1,
        n2: args.n2,
        r: args.r,
        p: args.p,
        gamma: args.gamma,
        theta: args.theta,
        outliers: args.outliers,
        seed: args.seed,
        iters: args.iters,
        seconds: args.seconds,
        methods,
        out: args.out,
    };
    let file = match &args.config {
        Some(path) => match parse_config_file(path) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => PartialConfig::default(),
    };
    let cfg = match flags.merge_over(file).resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_experiment(&cfg) {
        Ok(summary) => {
            println!(
                "wrote {} ({} methods, certificates_ok = {})",
                cfg.out.join("summary.json").display(),
                summary.methods.len(),
                summary.certificates_ok
            );
            if summary.all_methods_ok() {
                ExitCode::SUCCESS
            } else {
                for m in summary.methods.iter().filter(|m| m.status != "ok") {
                    eprintln!("method {}: {}", m.method, m.status);
                }
                ExitCode::from(EXIT_FAILURE)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn validate_cmd(args: ValidateArgs) -> ExitCode {
    let report = match run_all(args.seed) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    if let Some(path) = &args.out {
        if let Err(e) = write_atomic(path, &json) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    print!("{json}");
    if report.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("validation failed");
        ExitCode::from(EXIT_FAILURE)
    }
}

fn gen_instance_cmd(args: GenInstanceArgs) -> ExitCode {
    // Reuse the experiment defaults (model 1, n1 = 50, paper outlier ratio…)
    // so `gen-instance` and `run` describe the same instance by default.
    let partial = PartialConfig {
        model: args.model,
        n1: args.n1,
        n2: args.n2,
        r: args.r,
        outliers: args.outliers,
        seed: args.seed,
        ..Default::default()
    };
    let cfg = match partial.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let spec = InstanceSpec::new(cfg.model, cfg.n1, cfg.n2, cfg.r, cfg.seed, cfg.outlier_ratio);
    // Materialize once so the description we hand out is known-buildable.
    let inst = match spec.materialize() {
        Ok((_, inst)) => inst,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    let mut json = serde_json::to_string_pretty(&spec).expect("spec serializes");
    json.push('\n');
    if let Err(e) = write_atomic(&args.out, &json) {
        eprintln!("error: cannot write {}: {e}", args.out.display());
        return ExitCode::from(EXIT_FAILURE);
    }
    println!(
        "wrote {} (model {}, {}x{}, rank {}, {} measurements)",
        args.out.display(),
        cfg.model_number(),
        cfg.n1,
        cfg.n2,
        cfg.r,
        inst.m
    );
    ExitCode::SUCCESS
}
