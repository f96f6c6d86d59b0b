//! `geofuse`: generate synthetic datasets, run mapping variants, evaluate
//! and benchmark them.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geofuse::optimizer::Variant;

use config::{Command, ConfigError, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "geofuse", version, about = "Object-level semantic mapping with geometric fusion")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a synthetic dataset.
    Gen(Common),
    /// Run one variant over a dataset and write per-keyframe maps.
    Run(Common),
    /// Score existing runs against the dataset's ground truth.
    Eval(Common),
    /// Time GeoFusion per frame.
    Bench(Common),
    /// Generate, run every variant and evaluate.
    All(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// fbf, b-slam, r-front or geofusion.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    objects: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset directory (default: <out>/dataset).
    #[arg(long)]
    dataset: Option<PathBuf>,
}

impl Cmd {
    fn parts(&self) -> (Command, &Common) {
        match self {
            Cmd::Gen(c) => (Command::Gen, c),
            Cmd::Run(c) => (Command::Run, c),
            Cmd::Eval(c) => (Command::Eval, c),
            Cmd::Bench(c) => (Command::Bench, c),
            Cmd::All(c) => (Command::All, c),
        }
    }
}

fn resolve(cmd: &Cmd) -> anyhow::Result<RunConfig> {
    let (command, c) = cmd.parts();
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.command = command;
    cfg.apply(&Overrides {
        seed: c.seed,
        variant: c.variant,
        objects: c.objects,
        frames: c.frames,
        out: c.out.clone(),
        dataset: c.dataset.clone(),
    });
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: &Cmd) -> anyhow::Result<()> {
    let cfg = resolve(cmd)?;
    match cfg.command {
        Command::Gen => {
            commands::gen(&cfg)?;
        }
        Command::Run => {
            let ds = commands::load_dataset(&cfg)?;
            commands::run(&cfg, &ds, cfg.variant)?;
        }
        Command::Eval => {
            let ds = commands::load_dataset(&cfg)?;
            let variants = match cmd.parts().1.variant {
                Some(v) => vec![v],
                None => commands::existing_runs(&cfg),
            };
            if variants.is_empty() {
                return Err(config::config_error(format!("no runs under {}", cfg.out.join("runs").display())));
            }
            commands::eval(&cfg, &ds, &variants)?;
        }
        Command::Bench => {
            commands::bench(&cfg)?;
        }
        Command::All => {
            let ds = commands::gen(&cfg)?;
            for v in Variant::ALL {
                commands::run(&cfg, &ds, v)?;
            }
            commands::eval(&cfg, &ds, &Variant::ALL)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
