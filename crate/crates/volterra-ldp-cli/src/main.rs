//! Single binary exposing the kernel checks, rate-function solver, Monte
//! Carlo verification, and smile asymptotics over a structured JSON config.
//!
//! Exit codes: 0 success, 2 config validation, 3 numerical failure,
//! 4 self-similarity gate refusal.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use volterra_ldp::Error;

use config::RunConfig;
use manifest::{config_hash, Manifest};

#[derive(Parser)]
#[command(
    name = "volterra-ldp",
    version,
    about = "Volterra kernels, rate functions, and LDP verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker thread cap (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Covariance, modulus, and self-similarity diagnostics for the kernel.
    KernelCheck,
    /// Solve the rate function over the configured x grid.
    RateFunction,
    /// Per-y asymptotics table (rates, binary asymptote, implied-vol limit).
    Smile,
    /// Monte Carlo LDP slope verification over an ε grid.
    McVerify,
    /// Small-time slope verification over a maturity grid (gated).
    SmalltimeVerify,
    /// Sample joint (W, B, B̂) paths to CSV.
    Simulate,
    /// Karhunen–Loève spectrum and the exponential-moment bound.
    Eigen,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::KernelCheck => "kernel-check",
            Command::RateFunction => "rate-function",
            Command::Smile => "smile",
            Command::McVerify => "mc-verify",
            Command::SmalltimeVerify => "smalltime-verify",
            Command::Simulate => "simulate",
            Command::Eigen => "eigen",
        }
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) => 2,
        Error::GateRefused { .. } => 4,
        _ => 3,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "config",
        Error::Quadrature { .. } => "quadrature",
        Error::Factorization { .. } => "factorization",
        Error::GateRefused { .. } => "gate_refused",
        Error::MomentRange { .. } => "moment_range",
        Error::Estimation(_) => "estimation",
        Error::DegenerateRate { .. } => "degenerate_rate",
    }
}

fn fail(code: u8, kind: &str, msg: &str) -> ExitCode {
    let one_line = msg.replace('\n', " ");
    eprintln!("error kind={kind} code={code} msg=\"{one_line}\"");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => return fail(2, "config", "--config PATH is required"),
    };
    let raw = match std::fs::read(&config_path) {
        Ok(b) => b,
        Err(e) => return fail(2, "config", &format!("read {}: {e}", config_path.display())),
    };
    let text = match std::str::from_utf8(&raw) {
        Ok(t) => t,
        Err(e) => return fail(2, "config", &format!("config not UTF-8: {e}")),
    };
    let mut cfg = match RunConfig::parse(text) {
        Ok(c) => c,
        Err(e) => return fail(2, "config", &e),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    let threads = cli
        .threads
        .or(cfg.threads)
        .unwrap_or_else(num_cpus_available);
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
    {
        return fail(3, "threads", &format!("thread pool: {e}"));
    }

    let out_dir = PathBuf::from(&cfg.out_dir);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return fail(
            2,
            "config",
            &format!("create out dir {}: {e}", out_dir.display()),
        );
    }

    let mut manifest = Manifest::new(cli.command.name(), config_hash(&raw), cfg.seed, threads);
    let started = Instant::now();
    let result = match cli.command {
        Command::KernelCheck => commands::kernel_check(&cfg, &out_dir, &mut manifest),
        Command::RateFunction => commands::rate_function(&cfg, &out_dir, &mut manifest),
        Command::Smile => commands::smile(&cfg, &out_dir, &mut manifest),
        Command::McVerify => commands::mc_verify(&cfg, &out_dir, &mut manifest),
        Command::SmalltimeVerify => commands::smalltime_verify(&cfg, &out_dir, &mut manifest),
        Command::Simulate => commands::simulate(&cfg, &out_dir, &mut manifest),
        Command::Eigen => commands::eigen(&cfg, &out_dir, &mut manifest),
    };
    match result {
        Ok(()) => {
            if let Err(e) = manifest.write(&out_dir, started.elapsed().as_millis()) {
                return fail(3, "io", &format!("manifest: {e}"));
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(error_code(&e), error_kind(&e), &e.to_string()),
    }
}

fn num_cpus_available() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
