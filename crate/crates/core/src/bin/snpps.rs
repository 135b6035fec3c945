use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use snpps::harness::{dump_features, report_resources, run_experiment, sweep_pruning_ratio, ExperimentConfig, SweepAxis};

#[derive(Parser)]
#[command(name = "snpps", version, about = "Pruned parameter sharing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment file.
    Run { config: PathBuf },
    /// Sweep one network's pruning ratio, holding the other schedule fixed.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Ratios (comma or space separated); a dashed value replaces the whole schedule.
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        ratios: Vec<String>,
    },
    /// Parameter counts and relative wall-clock of the runs under a directory.
    Report { dir: PathBuf },
    /// Hidden features of a checkpoint on observations from a file.
    DumpFeatures {
        checkpoint: PathBuf,
        observations: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> snpps::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let (cfg, text) = ExperimentConfig::load(&config)?;
            for r in run_experiment(&cfg, Some(&text))? {
                println!("seed {:>4}  final return {:.4}  ({} steps)", r.seed, r.final_return, r.env_steps);
            }
        }
        Command::Sweep { config, axis, ratios } => {
            let (cfg, _) = ExperimentConfig::load(&config)?;
            let axis: SweepAxis = axis.parse()?;
            for r in sweep_pruning_ratio(&cfg, axis, &ratios)? {
                println!("ratio {:<12} mean {:.4} +/- {:.4} (n={})", r.ratio, r.mean, r.stderr, r.final_returns.len());
            }
        }
        Command::Report { dir } => {
            for r in report_resources(&dir)? {
                println!(
                    "{:<10} params {:>9}  {:>9.2} ms/1000 steps  rel {:.3}",
                    r.sharing, r.parameters, r.ms_per_1000_steps, r.relative_wall_clock
                );
            }
        }
        Command::DumpFeatures { checkpoint, observations, out } => match out {
            Some(p) => {
                let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
                dump_features(&checkpoint, &observations, &mut f)?;
            }
            None => {
                dump_features(&checkpoint, &observations, &mut std::io::stdout().lock())?;
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("snpps: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
