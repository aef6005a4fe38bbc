//! Seeded Monte Carlo experiments over drops, channel realizations, and
//! schemes, with CSV outputs and offline-reproducible aggregates.

pub mod config;
pub mod output;
pub mod stats;

pub use config::{ExperimentConfig, SolverConfig, TaskConfig};
pub use output::{RunRow, SweepRow};
pub use stats::{aggregate, aggregate_dir, bootstrap_mean, AggregateRow, Interval};

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::baselines::SchemeId;
use crate::channel::{dbm_to_watts, DeviceGeometry};
use crate::error::{Error, Result};
use crate::fl::{gaussian_blobs, run_training, solve_optimum, Dataset, RunSeeds, Task, TrainingConfig, TrainingEnv, TrainingRun};
use crate::rng::{mix64, SeededRng};

const STREAM_DATA: u64 = 0xDA7A;
const STREAM_INIT: u64 = 0x1417;
const STREAM_GEOMETRY: u64 = 0x6E0;
const OPTIMUM_TOL: f64 = 1e-10;
const OPTIMUM_MAX_ITER: usize = 1_000_000;

pub const RUNS_DIR: &str = "runs";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const METADATA_FILE: &str = "metadata.toml";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Seeds of one `(drop, realization, scheme)` cell. The common seed omits the
/// scheme so that every scheme of a cell sees the same channels, noise, and
/// mini-batches.
pub fn cell_seeds(master: u64, drop: usize, realization: usize, scheme: SchemeId) -> RunSeeds {
    RunSeeds {
        common: mix64(&[master, drop as u64, realization as u64]),
        scheme: mix64(&[master, drop as u64, realization as u64, scheme.index()]),
    }
}

pub fn drop_geometry(master: u64, drop: usize, n_devices: usize) -> Vec<DeviceGeometry> {
    let mut rng = SeededRng::new(mix64(&[master, drop as u64]), STREAM_GEOMETRY);
    DeviceGeometry::sample_drop(n_devices, &mut rng)
}

/// Dataset, initial model, optimum, and learning rate shared by all cells.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub task: Task,
    pub data: Dataset,
    pub theta0: Vec<f64>,
    pub theta_star: Option<Vec<f64>>,
    pub l_smooth: Option<f64>,
    /// Learning rate actually used.
    pub eta: f64,
    pub eta_clipped: bool,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let task = cfg.task();
    let data = gaussian_blobs(&cfg.data, cfg.n_devices, &mut SeededRng::new(cfg.seed, STREAM_DATA))?;
    let theta0 = task.initial_model(&mut SeededRng::new(cfg.seed, STREAM_INIT));
    let (theta_star, l_smooth) = if task.is_strongly_convex() {
        (
            Some(solve_optimum(&task, &data, OPTIMUM_TOL, OPTIMUM_MAX_ITER)?),
            Some(task.smoothness(&data)?),
        )
    } else {
        (None, None)
    };
    let (eta, eta_clipped) = match l_smooth {
        Some(l) if cfg.eta >= 1.0 / l => (0.9 / l, true),
        _ => (cfg.eta, false),
    };
    Ok(Prepared {
        task,
        data,
        theta0,
        theta_star,
        l_smooth,
        eta,
        eta_clipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub drop: usize,
    pub realization: usize,
    pub scheme: SchemeId,
}

/// Cells in drop, realization, scheme order.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for drop in 0..cfg.n_drops {
        for realization in 0..cfg.n_realizations {
            for &scheme in &cfg.schemes {
                out.push(Cell {
                    drop,
                    realization,
                    scheme,
                });
            }
        }
    }
    out
}

pub fn training_config(cfg: &ExperimentConfig, prep: &Prepared, scheme: SchemeId) -> TrainingConfig {
    TrainingConfig {
        scheme,
        n_antennas: cfg.n_antennas,
        n_segments: cfg.n_segments,
        gamma: cfg.gamma,
        power_w: dbm_to_watts(cfg.power_dbm),
        noise_w: dbm_to_watts(cfg.noise_dbm),
        rounds: cfg.rounds,
        local_iters: cfg.local_iters,
        eta: prep.eta,
        batch_size: cfg.batch_size,
        beam: cfg.solver.beam_settings(),
        first_order: cfg.solver.first_order_settings(),
        record_trace: false,
        track_deviations: false,
    }
}

pub fn run_cell(cfg: &ExperimentConfig, prep: &Prepared, geometry: &[DeviceGeometry], cell: Cell) -> Result<TrainingRun> {
    let env = TrainingEnv {
        task: &prep.task,
        data: &prep.data,
        theta0: &prep.theta0,
        theta_star: prep.theta_star.as_deref(),
        geometry,
    };
    let seeds = cell_seeds(cfg.seed, cell.drop, cell.realization, cell.scheme);
    run_training(&env, &training_config(cfg, prep, cell.scheme), seeds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub scheme: SchemeId,
    pub drop: usize,
    pub realization: usize,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub prepared: Prepared,
    pub aggregate: Vec<AggregateRow>,
    pub failures: Vec<CellFailure>,
}

impl ExperimentOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn final_rows(&self) -> Vec<&AggregateRow> {
        let last = self.aggregate.iter().map(|r| r.round).max().unwrap_or(0);
        self.aggregate.iter().filter(|r| r.round == last).collect()
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'a str,
    status: &'a str,
    n_cells: usize,
    eta_requested: f64,
    eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_smooth: Option<f64>,
    decisions: Vec<String>,
    failures: &'a [CellFailure],
    config: &'a ExperimentConfig,
}

fn decisions(cfg: &ExperimentConfig, prep: &Prepared) -> Vec<String> {
    let mut out = vec![
        format!(
            "MinSum: projected gradient, step {}, {} iterations",
            cfg.solver.baseline_step, cfg.solver.baseline_max_iter
        ),
        format!(
            "MinMax: projected subgradient with step length {} along the normalized subgradient, {} iterations",
            cfg.solver.baseline_step, cfg.solver.baseline_max_iter
        ),
        "SegAB: outer updates are backtracked so the epigraph objective never increases".into(),
        format!(
            "aggregate: percentile bootstrap, {} resamples, {}% interval, stream keyed by (scheme, round)",
            stats::BOOTSTRAP_RESAMPLES,
            stats::CONFIDENCE * 100.0
        ),
        "channel uses count downlink payload symbols only".into(),
        "bandwidth_mhz and carrier_ghz are recorded for provenance only".into(),
    ];
    if prep.eta_clipped {
        out.push(format!("eta {} clipped to 0.9/L = {}", cfg.eta, prep.eta));
    }
    out
}

fn write_metadata(dir: &Path, cfg: &ExperimentConfig, prep: &Prepared, n_cells: usize, failures: &[CellFailure]) -> Result<()> {
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        status: if failures.is_empty() { "complete" } else { "incomplete" },
        n_cells,
        eta_requested: cfg.eta,
        eta: prep.eta,
        l_smooth: prep.l_smooth,
        decisions: decisions(cfg, prep),
        failures,
        config: cfg,
    };
    let text = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join(METADATA_FILE), text)?;
    Ok(())
}

fn execute_cell(cfg: &ExperimentConfig, prep: &Prepared, geoms: &[Vec<DeviceGeometry>], runs_dir: &Path, cell: Cell) -> Result<Vec<RunRow>> {
    let run = run_cell(cfg, prep, &geoms[cell.drop], cell)?;
    let rows: Vec<RunRow> = run
        .metrics
        .iter()
        .map(|m| RunRow::from_metrics(m, cell.scheme, cell.drop, cell.realization))
        .collect();
    output::write_run_file(&runs_dir.join(output::run_file_name(cell.scheme, cell.drop, cell.realization)), &rows)?;
    Ok(rows)
}

#[cfg(feature = "parallel")]
fn map_cells<F>(cells: &[Cell], jobs: usize, f: F) -> Result<Vec<Result<Vec<RunRow>>>>
where
    F: Fn(Cell) -> Result<Vec<RunRow>> + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(|&c| f(c)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn map_cells<F>(cells: &[Cell], _jobs: usize, f: F) -> Result<Vec<Result<Vec<RunRow>>>>
where
    F: Fn(Cell) -> Result<Vec<RunRow>>,
{
    Ok(cells.iter().map(|&c| f(c)).collect())
}

/// Runs every cell with at most `jobs` workers and writes `runs/`,
/// `aggregate.csv`, and `metadata.toml` under the configured output directory.
///
/// A failing cell does not stop the others; it is listed in the metadata,
/// which is then marked incomplete, and the aggregate covers the remaining runs.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutcome> {
    if jobs == 0 {
        return Err(Error::invalid("jobs must be positive"));
    }
    let prep = prepare(cfg)?;
    let out_dir = cfg.output_dir.clone();
    let runs_dir = out_dir.join(RUNS_DIR);
    std::fs::create_dir_all(&runs_dir)?;
    let geoms: Vec<Vec<DeviceGeometry>> = (0..cfg.n_drops)
        .map(|d| drop_geometry(cfg.seed, d, cfg.n_devices))
        .collect();
    let all = cells(cfg);
    let results = map_cells(&all, jobs, |cell| execute_cell(cfg, &prep, &geoms, &runs_dir, cell))?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (cell, res) in all.iter().zip(results) {
        match res {
            Ok(r) => rows.extend(r),
            Err(e) => failures.push(CellFailure {
                scheme: cell.scheme,
                drop: cell.drop,
                realization: cell.realization,
                error: e.to_string(),
            }),
        }
    }
    let agg = if rows.is_empty() { Vec::new() } else { aggregate(&rows)? };
    output::write_aggregate(&out_dir.join(AGGREGATE_FILE), &agg)?;
    write_metadata(&out_dir, cfg, &prep, all.len(), &failures)?;
    Ok(ExperimentOutcome {
        out_dir,
        prepared: prep,
        aggregate: agg,
        failures,
    })
}

/// A one-parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepParam {
    Segments(Vec<usize>),
    Gamma(Vec<f64>),
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Segments(_) => "S_t",
            SweepParam::Gamma(_) => "gamma",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepParam::Segments(v) => v.iter().map(|&s| s as f64).collect(),
            SweepParam::Gamma(v) => v.clone(),
        }
    }

    fn apply(&self, base: &ExperimentConfig, idx: usize) -> ExperimentConfig {
        let mut cfg = base.clone();
        let label = match self {
            SweepParam::Segments(v) => {
                cfg.n_segments = v[idx];
                format!("S_t_{}", v[idx])
            }
            SweepParam::Gamma(v) => {
                cfg.gamma = v[idx];
                format!("gamma_{}", v[idx])
            }
        };
        cfg.output_dir = base.output_dir.join(label);
        cfg
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    /// Parses `S_t=1,2,3` or `gamma=0.01,0.1`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, list) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("sweep `{s}`: expected NAME=V1,V2,...")))?;
        let items: Vec<&str> = list.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if items.is_empty() {
            return Err(Error::Config(format!("sweep `{s}`: no values")));
        }
        let bad = |v: &str| Error::Config(format!("sweep `{name}`: cannot parse `{v}`"));
        match name.trim() {
            "S_t" | "n_segments" => items
                .iter()
                .map(|v| v.parse().map_err(|_| bad(v)))
                .collect::<Result<_>>()
                .map(SweepParam::Segments),
            "gamma" => items
                .iter()
                .map(|v| v.parse().map_err(|_| bad(v)))
                .collect::<Result<_>>()
                .map(SweepParam::Gamma),
            other => Err(Error::Config(format!("sweep parameter `{other}` is not one of S_t, gamma"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub points: Vec<ExperimentOutcome>,
}

impl SweepOutcome {
    pub fn is_complete(&self) -> bool {
        self.points.iter().all(ExperimentOutcome::is_complete)
    }
}

/// Runs one experiment per sweep value in `output_dir/<param>_<value>/` and
/// writes the final-round statistics of each to `output_dir/sweep.csv`.
pub fn run_sweep(base: &ExperimentConfig, param: &SweepParam, jobs: usize) -> Result<SweepOutcome> {
    let values = param.values();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (idx, &value) in values.iter().enumerate() {
        let cfg = param.apply(base, idx);
        cfg.validate()
            .map_err(|e| Error::Config(format!("{}={value}: {e}", param.name())))?;
        let outcome = run_experiment(&cfg, jobs)?;
        for r in outcome.final_rows() {
            rows.push(SweepRow {
                param: param.name().to_string(),
                value,
                stats: r.clone(),
            });
        }
        points.push(outcome);
    }
    output::write_sweep(&base.output_dir.join(SWEEP_FILE), &rows)?;
    Ok(SweepOutcome { rows, points })
}
