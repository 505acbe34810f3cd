mod config;
mod pipeline;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;
use pipeline::Stages;

/// Build coarse disjoint unions and fibred coarse embeddings, glue their
/// kernels and verify the resulting proper negative-type function.
#[derive(Parser, Debug)]
#[command(name = "coarse-kernels", version)]
struct Cli {
    #[command(flatten)]
    opts: Options,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Options {
    /// Pipeline configuration (JSON); defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Terms of the proper-function series.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// Relative eigenvalue and quadratic-form tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the coarse disjoint union.
    Boxspace {
        #[command(subcommand)]
        action: BuildAction,
    },
    /// Build or validate the fibred coarse embedding.
    Fce {
        #[command(subcommand)]
        action: FceAction,
    },
    /// Check the kernels of the embedding.
    Kernel {
        #[command(subcommand)]
        action: CheckAction,
    },
    /// Glue the kernels for each configured schedule.
    Glue {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Build and verify the truncated proper function.
    Proper {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Run every stage.
    Verify {
        #[command(subcommand)]
        action: AllAction,
    },
    /// Print the report in the output directory.
    Report,
}

#[derive(Subcommand, Debug)]
enum BuildAction {
    Build,
}

#[derive(Subcommand, Debug)]
enum FceAction {
    Build,
    Validate,
}

#[derive(Subcommand, Debug)]
enum CheckAction {
    Check,
}

#[derive(Subcommand, Debug)]
enum RunAction {
    Run,
}

#[derive(Subcommand, Debug)]
enum AllAction {
    All,
}

fn config(opts: &Options) -> Result<PipelineConfig> {
    let mut cfg = match &opts.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = &opts.out {
        cfg.out = o.clone();
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(n) = opts.nmax {
        cfg.n_max = n;
    }
    if let Some(t) = opts.tol {
        cfg.tol = t;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = config(&cli.opts)?;
    let base = Stages {
        fce: true,
        ..Stages::default()
    };
    let (name, stages) = match &cli.command {
        Command::Report => {
            let r = pipeline::load_report(&cfg.out)?;
            if !cli.opts.quiet {
                print!("{}", r.render());
            }
            return Ok(r.all_passed());
        }
        Command::Boxspace { .. } => ("boxspace build", Stages::default()),
        Command::Fce { action: FceAction::Build } => (
            "fce build",
            Stages {
                write_fce: true,
                ..base
            },
        ),
        Command::Fce {
            action: FceAction::Validate,
        } => (
            "fce validate",
            Stages {
                validate: true,
                ..base
            },
        ),
        Command::Kernel { .. } => (
            "kernel check",
            Stages {
                kernels: true,
                ..base
            },
        ),
        Command::Glue { .. } => ("glue run", Stages { glue: true, ..base }),
        Command::Proper { .. } => (
            "proper run",
            Stages {
                proper: true,
                ..base
            },
        ),
        Command::Verify { .. } => ("verify all", Stages::all()),
    };
    let report = pipeline::run(&cfg, name, stages)?;
    if !cli.opts.quiet || !report.all_passed() {
        print!("{}", report.render());
    }
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
