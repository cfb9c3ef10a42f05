//! `scoreshrink`: run simulation grids, denoise a matrix file, or tabulate
//! the limiting curves.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or parse errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use scoreshrink::estimator::{baseline_estimate, denoise_entrywise, denoise_full};
use scoreshrink::linalg::{read_csv, to_csv_string};
use scoreshrink::shrinkage::{big_h, big_h_inv};
use scoreshrink::sim::{parse_grid, run_grid, ExperimentConfig};
use scoreshrink::theory::{error_limit, overlap_limit};
use scoreshrink::{AspectRatio, DenoiserParams, Error, Matrix};

#[derive(Parser)]
#[command(
    name = "scoreshrink",
    version,
    about = "Noise-adaptive low-rank matrix denoising"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config and write the results CSV.
    Simulate { config: PathBuf },
    /// Denoise a matrix stored as headerless CSV.
    Denoise(DenoiseArgs),
    /// Print a limiting curve over a grid as CSV.
    Theory(TheoryArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Adaptive,
    Baseline,
    Star,
}

#[derive(clap::Args)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output_prefix: String,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    h_prime: Option<f64>,
    /// Aspect ratio; defaults to rows/cols of the input.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "adaptive")]
    mode: Mode,
    /// Noise standard deviation, required by the baseline mode.
    #[arg(long)]
    noise_sd: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Curve {
    Overlap,
    Error,
    #[value(name = "H")]
    H,
    #[value(name = "Hinv")]
    Hinv,
}

#[derive(clap::Args)]
struct TheoryArgs {
    #[arg(long, value_enum)]
    what: Curve,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Noise precision (Fisher information or inverse variance).
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Comma-separated values or `start:step:stop`.
    #[arg(long, allow_hyphen_values = true)]
    sigma: String,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn classify(e: Error) -> Self {
        if e.is_usage() || matches!(e, Error::Io { .. }) {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { config } => simulate(&config),
        Command::Denoise(args) => denoise(&args),
        Command::Theory(args) => theory(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn simulate(path: &Path) -> Result<(), Failure> {
    let config = ExperimentConfig::from_file(path).map_err(Failure::classify)?;
    let cells = config.cells().map_err(usage)?.len();
    let start = Instant::now();
    let records = run_grid(&config).map_err(runtime)?;
    println!(
        "cells: {cells}, trials: {}, wall time: {:.2} s, output: {}",
        records.len(),
        start.elapsed().as_secs_f64(),
        config.output.display()
    );
    Ok(())
}

fn write_file(path: &str, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{path}: {e}")))
}

fn list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn denoise(args: &DenoiseArgs) -> Result<(), Failure> {
    let y: Matrix = read_csv(&args.input).map_err(usage)?;
    let (m, n) = y.shape();
    let gamma = match args.gamma {
        Some(g) => AspectRatio::new(g),
        None => AspectRatio::of_shape(m, n),
    }
    .map_err(usage)?;
    let defaults = DenoiserParams::defaults_for(m, n);
    let h = args.h.unwrap_or(defaults.h);
    let params = DenoiserParams {
        h,
        h_prime: args.h_prime.unwrap_or(defaults.h_prime),
        eps: args.eps.unwrap_or(defaults.eps),
        delta: args.delta.unwrap_or(defaults.delta),
        kde: defaults.kde.with_bandwidth(h),
    };
    params.validate().map_err(usage)?;
    let prefix = &args.output_prefix;

    match args.mode {
        Mode::Adaptive => {
            let r = denoise_full(&y, &params, gamma).map_err(runtime)?;
            write_file(&format!("{prefix}_xhat.csv"), &to_csv_string(&r.x_hat))?;
            write_file(&format!("{prefix}_xstar.csv"), &to_csv_string(&r.x_star))?;
            let mut meta = String::new();
            let _ = writeln!(meta, "i_hat = {:.16e}", r.i_hat);
            let _ = writeln!(meta, "k_hat = {}", r.k_hat);
            let _ = writeln!(meta, "y_bar = {:.16e}", r.y_bar);
            let _ = writeln!(meta, "sigma0 = {}", list(&r.sigma0));
            let _ = writeln!(meta, "sigma_shrunk = {}", list(&r.sigma_shrunk));
            write_file(&format!("{prefix}_meta.txt"), &meta)?;
        }
        Mode::Star => {
            let r = denoise_entrywise(&y, &params).map_err(runtime)?;
            let x_star = r.x0.scale(r.i_hat.recip());
            write_file(&format!("{prefix}_xstar.csv"), &to_csv_string(&x_star))?;
        }
        Mode::Baseline => {
            let sd = args
                .noise_sd
                .ok_or_else(|| Failure::Usage("--mode baseline needs --noise-sd".into()))?;
            let r = baseline_estimate(&y, sd, params.delta, gamma).map_err(Failure::classify)?;
            write_file(&format!("{prefix}_xhat.csv"), &to_csv_string(&r.x_bar))?;
            let mut meta = String::new();
            let _ = writeln!(meta, "noise_sd = {sd:.16e}");
            let _ = writeln!(meta, "k_hat = {}", r.k_bar);
            let _ = writeln!(meta, "sigma0 = {}", list(&r.sigma0));
            let _ = writeln!(meta, "sigma_shrunk = {}", list(&r.sigma_shrunk));
            write_file(&format!("{prefix}_meta.txt"), &meta)?;
        }
    }
    Ok(())
}

fn theory(args: &TheoryArgs) -> Result<(), Failure> {
    let grid = parse_grid(&args.sigma).map_err(usage)?;
    let gamma = AspectRatio::new(args.gamma).map_err(usage)?;
    if args.t <= 0.0 || !args.t.is_finite() {
        return Err(Failure::Usage(format!(
            "--t must be positive, got {}",
            args.t
        )));
    }
    let head = match args.what {
        Curve::Overlap => "sigma,overlap",
        Curve::Error => "sigma,error",
        Curve::H => "sigma,H",
        Curve::Hinv => "y,Hinv",
    };
    let mut out = String::new();
    let _ = writeln!(out, "{head}");
    for s in grid {
        let v = match args.what {
            Curve::Overlap => overlap_limit(s, args.t, gamma),
            Curve::Error => error_limit(s, args.t),
            Curve::H => big_h(s, gamma),
            Curve::Hinv => big_h_inv(s, gamma).map_err(usage)?,
        };
        let _ = writeln!(out, "{s},{v}");
    }
    print!("{out}");
    Ok(())
}
