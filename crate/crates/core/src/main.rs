use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use emx_core::io::commands::{
    cmd_design, cmd_fit, cmd_spectrum, cmd_synth, resolve_out_dir, Grid, Outcome, Pipeline,
    SpectrumKind,
};
use emx_core::io::ExperimentConfig;
use emx_core::Result;

/// Forward models and fits for two-mode microwave electromechanics.
#[derive(Parser)]
#[command(name = "emx", version)]
struct Cli {
    /// Experiment config (TOML); the reference device when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to $EMX_OUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a model spectrum on a probe grid.
    Spectrum {
        /// eit, inverse or npsd
        kind: SpectrumKind,
        /// start,stop,points in Hz relative to the even supermode
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<Grid>,
    },
    /// Generate a synthetic dataset with ground truth.
    Synth,
    /// Fit a dataset directory.
    Fit {
        dir: PathBuf,
        /// lorentzian, eit, ringdown, g0slope, occupancy or heating
        #[arg(long)]
        pipeline: Pipeline,
    },
    /// Evaluate a coil and capacitor design file.
    Design { file: PathBuf },
}

fn load_config(cli: &Cli) -> Result<Option<ExperimentConfig>> {
    let mut cfg = match &cli.config {
        Some(p) => Some(ExperimentConfig::load(p)?),
        None => None,
    };
    if let Some(seed) = cli.seed {
        cfg.get_or_insert_with(ExperimentConfig::preset).seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Outcome> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Spectrum { kind, grid } => {
            let out = resolve_out_dir(cli.out, "emx-out");
            cmd_spectrum(&cfg.unwrap_or_default(), kind, grid, &out)
        }
        Command::Synth => {
            let out = resolve_out_dir(cli.out, "emx-out");
            cmd_synth(&cfg.unwrap_or_default(), &out)
        }
        Command::Fit { dir, pipeline } => {
            let out = resolve_out_dir(cli.out, dir.join("fits"));
            cmd_fit(&dir, pipeline, cfg, &out)
        }
        Command::Design { file } => {
            let out = resolve_out_dir(cli.out, "emx-out");
            cmd_design(&file, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            if !outcome.summary.is_empty() {
                println!("{}", outcome.summary.trim_end());
            }
            for p in &outcome.written {
                println!("wrote {}", p.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
