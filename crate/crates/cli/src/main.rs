//! Experiment harness for parameterized orthogonalized tensor deflation:
//! spectra of the block contraction matrices, multi-seed deflation runs,
//! asymptotic sweeps, parameter estimation and the improved deflation, each
//! with seeded determinism and CSV/JSON artifacts plus a manifest.

mod commands;
mod config;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Ctx};
use config::Config;

#[derive(Parser)]
#[command(
    name = "tendefl",
    version,
    about = "Rank-two spiked tensor deflation experiments",
    after_help = "Exit codes: 0 success, 2 config error, 3 numeric/convergence error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key = value configuration file; command-line overrides win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base RNG seed (overrides the config key `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for multi-seed commands (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory (created if missing; default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Restore published trial counts instead of desk-scale defaults.
    #[arg(long, global = true)]
    full: bool,

    /// Also emit minimal standalone SVG charts next to the CSVs.
    #[arg(long, global = true)]
    svg: bool,

    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue spectra of the block contraction matrices.
    ///
    /// Keys: p, beta1, beta2, alpha, seed, bins, gamma (optional; adds the
    /// projected-step matrix). Outputs: eigenvalues.csv (index,eigenvalue),
    /// histogram.csv (bin_center,density), density.csv (x,density), and with
    /// gamma the m_* counterparts with the deformed-law overlay.
    Spectrum,
    /// Two-step deflation runs over one or many seeds.
    ///
    /// Keys: p, beta1, beta2, alpha, gamma, seeds, seed. Outputs: runs.csv
    /// (seed,gamma,lambda1,lambda2,kappa,eta,rho11,rho12,theta21,theta22,
    /// rho21,rho22,mode_spread), summary.csv (quantity,mean,std), and
    /// run.json for single-seed runs.
    Deflate,
    /// Asymptotic sweeps of the deterministic equation systems.
    ///
    /// Keys: kind (gamma|snr), p, seed; for kind=gamma: beta1, beta2, alpha,
    /// gamma_min/max/step; for kind=snr: snr_fixed, snr_min/max/step, alpha,
    /// gamma. Output: sweep.csv (swept,lambda1,rho11,rho12,first_residual,
    /// lambda2,theta21,theta22,rho21,rho22,kappa,eta,tau,second_residual,
    /// status).
    Solve,
    /// Model-parameter estimation from observables.
    ///
    /// Keys: mode (simulate|observables); simulate: p, beta1, beta2, alpha,
    /// seeds, seed; observables: lambda1, lambda2, eta. Outputs:
    /// estimates.csv (seed,lambda1_hat,...,residual,alpha_out_of_model,
    /// status) and estimate_summary.csv (parameter,true,mean,bias,std,
    /// valid_seeds).
    Estimate,
    /// Improved deflation with the tuned projection strength.
    ///
    /// Keys: p, beta1, beta2, alpha, seeds, seed, eps_step. Outputs:
    /// improve.csv (seed,gamma_star,lambda1,lambda2,base_first,base_second,
    /// improved_first,improved_second,beta1_hat,beta2_hat,alpha_hat,status)
    /// and trace.json for single-seed runs.
    Improve,
    /// Figure presets fig1..fig9 (desk-scale trial counts; see --full).
    Figure {
        /// One of fig1..fig9.
        name: String,
    },
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    cfg.apply_overrides(&cli.sets)?;
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed.to_string());
    }
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)?;
    let ctx = Ctx {
        out_dir,
        svg: cli.svg,
        full: cli.full,
    };
    let outputs = match &cli.command {
        Command::Spectrum => commands::cmd_spectrum(&cfg, &ctx)?,
        Command::Deflate => commands::cmd_deflate(&cfg, &ctx)?,
        Command::Solve => commands::cmd_solve(&cfg, &ctx)?,
        Command::Estimate => commands::cmd_estimate(&cfg, &ctx)?,
        Command::Improve => commands::cmd_improve(&cfg, &ctx)?,
        Command::Figure { name } => commands::cmd_figure(name, &cfg, &ctx)?,
    };
    for p in &outputs {
        println!("{}", p.display());
    }
    println!("{}", ctx.out_dir.join("manifest.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("numeric error: {m}");
            ExitCode::from(3)
        }
        Err(CliError::Io(m)) => {
            eprintln!("io error: {m}");
            ExitCode::from(1)
        }
    }
}
