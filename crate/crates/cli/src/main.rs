use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use fwgd::runner::{self, ExperimentConfig};

/// Particle-based variational inference for neural-network ensembles.
#[derive(Parser)]
#[command(name = "fwgd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one experiment. Extra `--key=value` flags override config keys.
    Train {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run several configs over consecutive seeds and print mean and std per metric as CSV.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// WGD against a known Gaussian; prints moment errors as JSON.
    SanityGaussian {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        particles: usize,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train { config, overrides } => {
            let outcome = runner::run_file(&config, &overrides).with_context(|| format!("running {}", config.display()))?;
            println!("{}", serde_json::to_string_pretty(&outcome.metrics)?);
            eprintln!("wrote {}", outcome.output_dir.display());
        }
        Command::Compare { configs, seeds, out } => {
            let named = configs
                .iter()
                .map(|p| {
                    let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                    ExperimentConfig::load(p, &[])
                        .map(|c| (name, c))
                        .with_context(|| format!("loading {}", p.display()))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let table = runner::compare(&named, seeds)?;
            print!("{table}");
            if let Some(path) = out {
                std::fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::SanityGaussian { dim, particles, steps, lr, seed } => {
            let report = runner::sanity_gaussian(dim, particles, steps, lr, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}
