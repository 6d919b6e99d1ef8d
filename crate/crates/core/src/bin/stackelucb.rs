//! Command-line experiment runner.
//!
//! `run` executes the seeds listed in the config (or one override seed),
//! `sweep` runs a seed range in parallel, `plot` aggregates run CSVs into
//! plot data. Exit codes: 0 success, 2 config error, 3 numerical
//! consistency error, 1 anything else.

use clap::{Parser, Subcommand};
use stackelucb::harness::{
    emit_plot_data, run_experiment, sweep, write_run_outputs, write_summary_csv, ExperimentConfig,
    HarnessError, PlotKind,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "stackelucb", about = "Repeated-game learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the config's seeds and write record/summary CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a range of seeds, optionally in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Seed range `a..b` (inclusive start, exclusive end).
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Aggregate run CSVs into plot data.
    Plot {
        #[arg(long = "in")]
        in_dir: PathBuf,
        /// One of: time_avg_regret, reward_curve, congestion_map.
        #[arg(long)]
        kind: PlotKind,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_seed_range(s: &str) -> Result<Vec<u64>, HarnessError> {
    let parts: Vec<&str> = s.split("..").collect();
    let bad = || HarnessError::Config(format!("seed range must look like a..b, got {s}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a: u64 = parts[0].parse().map_err(|_| bad())?;
    let b: u64 = parts[1].parse().map_err(|_| bad())?;
    if a >= b {
        return Err(bad());
    }
    Ok((a..b).collect())
}

fn main_inner() -> Result<(), HarnessError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seeds = seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
            let mut summaries = Vec::new();
            for s in seeds {
                let result = run_experiment(&cfg, s)?;
                write_run_outputs(&cfg, &result, &out)?;
                println!(
                    "seed {s}: cumulative reward {:.4}, final regret {:.4}",
                    result.summary.cumulative_reward, result.summary.final_regret
                );
                summaries.push(result.summary);
            }
            write_summary_csv(&summaries, &out.join("summary.csv"))?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Sweep {
            config,
            seeds,
            jobs,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seed_list = parse_seed_range(&seeds)?;
            let results = sweep(&cfg, &seed_list, jobs)?;
            let mut summaries = Vec::new();
            for result in &results {
                write_run_outputs(&cfg, result, &out)?;
                summaries.push(result.summary.clone());
            }
            write_summary_csv(&summaries, &out.join("summary.csv"))?;
            let rewards: Vec<f64> = summaries.iter().map(|s| s.cumulative_reward).collect();
            let agg = stackelucb::harness::aggregate(&rewards);
            println!(
                "{} seeds: mean cumulative reward {:.4} ± {:.4}",
                summaries.len(),
                agg.mean,
                agg.stderr
            );
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Plot { in_dir, kind, out } => {
            let path = emit_plot_data(&in_dir, kind, &out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
