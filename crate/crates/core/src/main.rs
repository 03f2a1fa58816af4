use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kmvnmf::experiment::{self, ExperimentConfig};
use kmvnmf::{Error, Result};

/// Multi-view clustering by adaptive weighted kernel NMF.
///
/// Set RAYON_NUM_THREADS to limit the worker threads.
#[derive(Parser)]
#[command(name = "kmvnmf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid search of one method; writes metrics, traces and assignments.
    Run(Common),
    /// Compare all baselines and the kernel solver; writes comparison.csv.
    Compare(Common),
    /// Rank the features of linear-kernel views; writes importance_<view>.csv.
    Importance(Common),
    /// Write a synthetic dataset as CSV files.
    Gen(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut config = ExperimentConfig::from_file(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| config.out.clone())
            .ok_or_else(|| Error::input("no output directory: pass --out or set 'out'"))?;
        Ok((config, out))
    }
}

fn report(files: &[PathBuf], out: &Path) {
    println!("wrote {} file(s) to {}", files.len(), out.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let (config, out) = args.load()?;
            let result = experiment::run_experiment(&config, &out)?;
            for r in &result.results {
                match r.mean_accuracy() {
                    Some(acc) => println!("{} {} accuracy {:.4}", r.point.tag(), r.point.kernel, acc),
                    None => println!("{} {}", r.point.tag(), r.point.kernel),
                }
            }
            report(&result.files, &out);
        }
        Command::Compare(args) => {
            let (config, out) = args.load()?;
            let table = experiment::compare_methods(&config, &out)?;
            for (name, m) in table.methods.iter().zip(&table.metrics) {
                println!(
                    "{name:>16}  Acc {:6.2}  NMI {:6.2}  RI {:6.2}  MI {:6.2}",
                    m[0], m[1], m[2], m[3]
                );
            }
        }
        Command::Importance(args) => {
            let (config, out) = args.load()?;
            let files = experiment::run_importance(&config, &out)?;
            report(&files, &out);
        }
        Command::Gen(args) => {
            let (config, out) = args.load()?;
            let files = experiment::run_gen(&config, &out)?;
            report(&files, &out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("error ({}): {e}", category.as_str());
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
