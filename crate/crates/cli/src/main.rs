use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use fedhdc_cli::compare::compare_dirs;
use fedhdc_cli::config::RunConfig;
use fedhdc_cli::costs::cost_table;
use fedhdc_cli::run::{execute, RunOptions};

#[derive(Parser)]
#[command(name = "fedhdc", version, about = "Federated hyperdimensional-computing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write records.csv, summary.json and effective-config.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Fill the seconds column of records.csv (makes the file non-reproducible).
        #[arg(long)]
        wall_clock_in_records: bool,
    },
    /// Rounds and uplink traffic each run needs to reach the reference run's best accuracy.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        target_from: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Print closed-form FLOP and traffic figures for a config without training.
    ValidateCosts {
        #[arg(long)]
        config: PathBuf,
        /// Count traffic over this many rounds instead of all global epochs.
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
            wall_clock_in_records,
        } => {
            let mut raw = RunConfig::from_file(&config)?;
            if seed.is_some() {
                raw.master_seed = seed;
            }
            let resolved = raw.resolve()?;
            let out = out
                .or(raw.out_dir)
                .ok_or_else(|| anyhow!("no output directory: pass --out or set out_dir"))?;
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .context("configuring worker threads")?;
            }
            let summary = execute(&resolved, &out, RunOptions { wall_clock_in_records })?;
            log::info!(
                "{} rounds, max accuracy {:.4} (round {}), final {:.4}; wrote {}",
                summary.rounds,
                summary.max_accuracy,
                summary.max_accuracy_round.map_or("-".into(), |r| r.to_string()),
                summary.final_accuracy,
                out.display()
            );
        }
        Command::Compare {
            runs,
            target_from,
            format,
        } => {
            let table = compare_dirs(&runs, &target_from)?;
            match format {
                Format::Csv => print!("{}", table.to_csv()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&table)?),
            }
        }
        Command::ValidateCosts { config, rounds, json } => {
            let resolved = RunConfig::from_file(&config)?.resolve()?;
            let table = cost_table(&resolved, rounds);
            if json {
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                print!("{}", table.to_text());
            }
        }
    }
    Ok(())
}
