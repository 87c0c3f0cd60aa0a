use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kbandit_core::harness::{emit, run, summary_csv, sweep, ExperimentConfig, OutputFormat, SweepGrid};
use kbandit_core::Error;

#[derive(Parser)]
#[command(name = "kbandit", version, about = "Distributed kernelized contextual bandit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replicate of one experiment and write one trace per seed.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides KBANDIT_SEED and the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run the product of a grid over a base config and write a summary CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// Summary file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

fn resolve_seed(flag: Option<u64>, config: &mut ExperimentConfig) -> Result<(), Error> {
    if let Some(s) = flag {
        config.seed = s;
    } else if let Ok(v) = std::env::var("KBANDIT_SEED") {
        config.seed = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("KBANDIT_SEED must be an unsigned integer, got {v:?}")))?;
    }
    Ok(())
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path, format: OutputFormat) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    resolve_seed(seed, &mut cfg)?;
    std::fs::create_dir_all(out)?;
    for o in run(&cfg)? {
        let path = out.join(format!("{}_seed{}.{}", cfg.algorithm, o.seed, format.extension()));
        emit(&o.trace, format, &path)?;
        println!(
            "{}: cum_regret {:.6} cum_comm_scalars {} syncs {}",
            path.display(),
            o.trace.cumulative_regret(),
            o.trace.cumulative_scalars(),
            o.sync_count()
        );
    }
    Ok(())
}

fn run_sweep(config: &Path, grid: &Path, out: Option<&Path>) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    resolve_seed(None, &mut cfg)?;
    let text = std::fs::read_to_string(grid)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", grid.display())))?;
    let grid = SweepGrid::from_toml_str(&text)?;
    let csv = summary_csv(&sweep(&cfg, &grid)?);
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, csv)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            format,
        } => simulate(config, *seed, out, (*format).into()),
        Command::Sweep { config, grid, out } => run_sweep(config, grid, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
