//! `xrt`: reproducible X-ray transform experiments from the command line.
//!
//! Exit codes: 0 success, 1 a reported check failed, 2 invalid input,
//! 3 numerical failure.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::Outcome;
use config::{check_creatable, RunConfig};

#[derive(Parser)]
#[command(name = "xrt", version, about = "X-ray transform and partial-data tomography experiments")]
struct Cli {
    /// Seed for every random choice (sample points, noise, probe starts).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key=value parameter file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter override, KEY=VALUE; repeatable, applied after --config.
    #[arg(short = 'p', long = "param")]
    params: Vec<String>,
    /// Output path (RGF1 field, RSG1 sinogram or text table).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the output field as CSV (2D only).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the text report here as well as to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct WithInput {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize a phantom to an RGF1 field.
    Phantom(Common),
    /// Forward X-ray transform of a field.
    Xray(WithInput),
    /// Backprojection of a sinogram.
    Adjoint(WithInput),
    /// Normal operator X*X of a field.
    Normal(WithInput),
    /// Riesz potential or fractional Laplacian of a field.
    Riesz(WithInput),
    /// Recover f from N f.
    Invert {
        #[command(flatten)]
        inner: WithInput,
        /// Ground truth for the error report.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Exact check of the derivative expansion for every monomial.
    LemmaVerify(Common),
    /// Exact Abel derivative-coefficient tables.
    AbelTables(Common),
    /// Masked reconstruction experiment.
    RoiRecon(Common),
    /// Travel-time splitting experiment.
    Seismo(Common),
    /// Singular values of a masked operator (n <= 32).
    Spectrum(Common),
}

fn load(name: &str, c: &Common, input: Option<&Path>, seed: u64) -> Result<RunConfig> {
    if let Some(p) = &c.csv {
        check_creatable(p)?;
    }
    if let Some(p) = &c.report {
        check_creatable(p)?;
    }
    RunConfig::load(
        name,
        c.config.as_deref(),
        &c.params,
        input.map(Path::to_path_buf),
        c.out.clone(),
        seed,
    )
}

fn run(cli: &Cli) -> Result<(Outcome, Option<PathBuf>)> {
    let seed = cli.seed;
    let (outcome, common) = match &cli.command {
        Command::Phantom(c) => (commands::phantom(&load("phantom", c, None, seed)?, c.csv.as_deref())?, c),
        Command::Xray(w) => (commands::xray(&load("xray", &w.common, Some(&w.input), seed)?)?, &w.common),
        Command::Adjoint(w) => {
            let cfg = load("adjoint", &w.common, Some(&w.input), seed)?;
            (commands::adjoint(&cfg, w.common.csv.as_deref())?, &w.common)
        }
        Command::Normal(w) => {
            let cfg = load("normal", &w.common, Some(&w.input), seed)?;
            (commands::normal(&cfg, w.common.csv.as_deref())?, &w.common)
        }
        Command::Riesz(w) => {
            let cfg = load("riesz", &w.common, Some(&w.input), seed)?;
            (commands::riesz(&cfg, w.common.csv.as_deref())?, &w.common)
        }
        Command::Invert { inner, truth } => {
            if let Some(t) = truth {
                if !t.is_file() {
                    anyhow::bail!("truth {} does not exist", t.display());
                }
            }
            let cfg = load("invert", &inner.common, Some(&inner.input), seed)?;
            let out = commands::invert(&cfg, truth.as_deref(), inner.common.csv.as_deref())?;
            (out, &inner.common)
        }
        Command::LemmaVerify(c) => (commands::lemma_verify(&load("lemma-verify", c, None, seed)?)?, c),
        Command::AbelTables(c) => (commands::abel_tables(&load("abel-tables", c, None, seed)?)?, c),
        Command::RoiRecon(c) => {
            (commands::roi_recon(&load("roi-recon", c, None, seed)?, c.csv.as_deref())?, c)
        }
        Command::Seismo(c) => (commands::seismo(&load("seismo", c, None, seed)?, c.csv.as_deref())?, c),
        Command::Spectrum(c) => (commands::spectrum(&load("spectrum", c, None, seed)?)?, c),
    };
    Ok((outcome, common.report.clone()))
}

/// Numerical failures exit with 3, everything else with 2.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<xrt_core::Error>() {
        Some(err) if err.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok((outcome, report_path)) => {
            print!("{}", outcome.report);
            if let Some(p) = report_path {
                if let Err(e) = std::fs::write(&p, &outcome.report) {
                    eprintln!("error: cannot write {}: {e}", p.display());
                    return ExitCode::from(2);
                }
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
