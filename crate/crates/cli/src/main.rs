mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use segab_core::experiment::{
    aggregate_dir, output, run_experiment, run_sweep, ExperimentConfig, ExperimentOutcome, SweepParam, AGGREGATE_FILE,
    RUNS_DIR,
};

use plot::{emit_plots, PlotSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] segab_core::Error),
    #[error("{0}")]
    Config(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Core(segab_core::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "segab", version, about = "Segmented analog broadcast experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (drop, realization, scheme) cell of a config.
    Run { config: PathBuf },
    /// Render an aggregate or sweep CSV to SVG.
    Plot {
        file: PathBuf,
        /// TOML plot settings (metrics, x_axis, log_y, width, height, title).
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Repeat an experiment over values of one parameter.
    Sweep {
        config: PathBuf,
        /// `S_t=1,2,3,5` or `gamma=0.01,0.05,0.1,0.2`.
        #[arg(long)]
        param: String,
    },
    /// Recompute aggregate.csv from the per-run files of an output directory.
    Aggregate { dir: PathBuf },
}

fn load(path: &Path, cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn jobs(cli: &Cli) -> usize {
    cli.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn report(outcome: &ExperimentOutcome) {
    let prep = &outcome.prepared;
    if let Some(l) = prep.l_smooth {
        println!("L = {l:.4}, eta = {:.4}{}", prep.eta, if prep.eta_clipped { " (clipped)" } else { "" });
    }
    println!("{:<9} {:>6} {:>12} {:>12} {:>10}", "scheme", "round", "channel_uses", "gap", "accuracy");
    for r in outcome.final_rows() {
        println!(
            "{:<9} {:>6} {:>12} {:>12.4e} {:>10.4}",
            r.scheme.name(),
            r.round,
            r.channel_uses,
            r.gap.mean,
            r.accuracy.mean
        );
    }
    for f in &outcome.failures {
        eprintln!("failed: {} drop {} realization {}: {}", f.scheme, f.drop, f.realization, f.error);
    }
    println!("wrote {}", outcome.out_dir.display());
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config, cli)?;
            let outcome = run_experiment(&cfg, jobs(cli))?;
            report(&outcome);
            Ok(outcome.is_complete())
        }
        Command::Sweep { config, param } => {
            let cfg = load(config, cli)?;
            let param: SweepParam = param.parse()?;
            let outcome = run_sweep(&cfg, &param, jobs(cli))?;
            for point in &outcome.points {
                report(point);
            }
            println!("wrote {}", cfg.output_dir.join(segab_core::experiment::SWEEP_FILE).display());
            Ok(outcome.is_complete())
        }
        Command::Plot { file, spec } => {
            let spec = match spec {
                Some(p) => PlotSpec::from_path(p)?,
                None => PlotSpec::default(),
            };
            let out_dir = match &cli.out {
                Some(d) => d.clone(),
                None => file.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
            };
            for path in emit_plots(file, &spec, &out_dir)? {
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Aggregate { dir } => {
            let rows = aggregate_dir(&dir.join(RUNS_DIR))?;
            let path = dir.join(AGGREGATE_FILE);
            output::write_aggregate(&path, &rows)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some runs failed; aggregate marked incomplete");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
