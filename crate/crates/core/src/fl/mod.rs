//! Federated training over a downlink broadcast channel.
//!
//! Each round the server broadcasts `θ_t`, every device runs local SGD from
//! its received copy `θ̂_{k,t}`, and the server averages the local models
//! (error-free uplink). The optimality gap is measured against the exact
//! minimizer of the strongly convex global loss.

pub mod bound;
pub mod data;
pub mod local;
pub mod task;

pub use bound::{
    estimate_assumption_constants, eval_bound, AssumptionConstants, BoundParams, DevicePath,
    DeviationTracker, ProbeConfig,
};
pub use data::{gaussian_blobs, BlobSpec, Dataset, Samples};
pub use local::{aggregate, local_sgd, local_sgd_observed, LocalObjective, LocalStep, LocalUpdate};
pub use task::{solve_optimum, Task, TaskKind};

use crate::baselines::{minmax_beamformer, minsum_beamformer, FirstOrderSettings, SchemeId};
use crate::beamformer::{eval_worst_case_h, solve_round, BeamSettings, RoundProblem};
use crate::channel::{gen_channel_round, ChannelRound, DeviceGeometry};
use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::rng::{mix64, SeededRng};
use crate::segab::{draw_noise, pack, receive_with_noise, unpack, SegmentPlan};

const TAG_CHANNEL: u64 = 0xC4A2;
const TAG_NOISE: u64 = 0x2015E;
const TAG_SGD: u64 = 0x5CD;

#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub scheme: SchemeId,
    pub n_antennas: usize,
    /// Configured `S`; IdealFM always sends one segment.
    pub n_segments: usize,
    pub gamma: f64,
    pub power_w: f64,
    pub noise_w: f64,
    pub rounds: usize,
    pub local_iters: usize,
    pub eta: f64,
    pub batch_size: usize,
    pub beam: BeamSettings,
    pub first_order: FirstOrderSettings,
    /// Keep per-round signals for offline checks.
    pub record_trace: bool,
    pub track_deviations: bool,
}

/// Seeds for one run. `common` drives channels, noise, and mini-batches and is
/// shared by every scheme of a cell; `scheme` drives scheme-private choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub common: u64,
    pub scheme: u64,
}

/// Fixed inputs shared by every run of an experiment.
#[derive(Debug, Clone, Copy)]
pub struct TrainingEnv<'a> {
    pub task: &'a Task,
    pub data: &'a Dataset,
    pub theta0: &'a [f64],
    pub theta_star: Option<&'a [f64]>,
    pub geometry: &'a [DeviceGeometry],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    /// Rounds completed; row 0 is the initial model.
    pub round: usize,
    pub channel_uses: usize,
    /// `‖θ − θ*‖²`, NaN without a known optimum.
    pub gap: f64,
    pub accuracy: f64,
    /// Worst-case `H_t` of the round's beamformer with the round's `ν_t`; zero for ideal schemes.
    pub worst_h: f64,
    /// The same objective with `ν = 1`.
    pub worst_h_unit: f64,
    /// Outer iterations of the beamformer (SegAB) or first-order iterations (baselines).
    pub solver_trace_len: usize,
    pub wall_ms: f64,
}

/// Signals of one round kept for offline verification.
#[derive(Debug, Clone)]
pub struct RoundTrace {
    pub theta: Vec<f64>,
    pub channel: Option<ChannelRound>,
    pub w: Vec<CVec>,
    pub noise: Vec<CVec>,
    pub received: Vec<Vec<f64>>,
    pub local: Vec<LocalUpdate>,
    pub next_theta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub metrics: Vec<RoundMetrics>,
    pub theta: Vec<f64>,
    pub traces: Vec<RoundTrace>,
    pub deviations: Option<DeviationTracker>,
}

#[cfg(not(target_arch = "wasm32"))]
struct Stopwatch(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Stopwatch {
    fn start() -> Self {
        Self(std::time::Instant::now())
    }

    fn ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

#[cfg(target_arch = "wasm32")]
struct Stopwatch;

#[cfg(target_arch = "wasm32")]
impl Stopwatch {
    fn start() -> Self {
        Self
    }

    fn ms(&self) -> f64 {
        0.0
    }
}

fn gap(theta: &[f64], star: Option<&[f64]>) -> f64 {
    star.map_or(f64::NAN, |s| theta.iter().zip(s).map(|(a, b)| (a - b).powi(2)).sum())
}

impl TrainingConfig {
    fn validate(&self, env: &TrainingEnv<'_>) -> Result<()> {
        env.task.validate(env.data)?;
        if env.theta0.len() != env.task.dim() {
            return Err(Error::invalid("initial model does not match the task dimension"));
        }
        if env.theta_star.is_some_and(|s| s.len() != env.task.dim()) {
            return Err(Error::invalid("optimum does not match the task dimension"));
        }
        if env.geometry.len() != env.data.n_devices() {
            return Err(Error::invalid("one device geometry per dataset partition is required"));
        }
        if self.rounds == 0 || self.n_antennas == 0 {
            return Err(Error::invalid("rounds and antennas must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Runs `T` rounds of federated training for one scheme.
pub fn run_training(env: &TrainingEnv<'_>, config: &TrainingConfig, seeds: RunSeeds) -> Result<TrainingRun> {
    config.validate(env)?;
    let task = env.task;
    let data = env.data;
    let weights = data.weights();
    let plan = SegmentPlan::new(task.dim(), config.scheme.effective_segments(config.n_segments))?;
    let mut tracker = config.track_deviations.then(|| DeviationTracker::new(plan));

    let mut theta = env.theta0.to_vec();
    let mut channel_uses = 0;
    let mut metrics = vec![RoundMetrics {
        round: 0,
        channel_uses: 0,
        gap: gap(&theta, env.theta_star),
        accuracy: task.accuracy(&theta, &data.test),
        worst_h: 0.0,
        worst_h_unit: 0.0,
        solver_trace_len: 0,
        wall_ms: 0.0,
    }];
    let mut traces = Vec::new();

    for t in 0..config.rounds {
        let clock = Stopwatch::start();
        let round_err = |e: Error| Error::Round {
            round: t,
            source: Box::new(e),
        };
        let downlink = broadcast(env, config, &plan, &weights, &theta, seeds, t).map_err(round_err)?;

        let mut locals = Vec::with_capacity(data.n_devices());
        let mut paths = Vec::new();
        for (k, dev) in data.devices.iter().enumerate() {
            let mut rng = SeededRng::new(seeds.common, mix64(&[TAG_SGD, t as u64, k as u64]));
            let mut path = DevicePath::default();
            let keep = tracker.is_some();
            let out = local_sgd_observed(
                task,
                &downlink.received[k],
                dev,
                config.eta,
                config.local_iters,
                config.batch_size,
                &mut rng,
                |step| {
                    if keep {
                        path.iterates.push(step.theta.to_vec());
                        path.batch_grads.push(step.grad.to_vec());
                    }
                },
            )
            .map_err(round_err)?;
            paths.push(path);
            locals.push(out);
        }
        if let Some(tr) = tracker.as_mut() {
            tr.record_round(task, data, &theta, &paths, config.eta, env.theta_star)
                .map_err(round_err)?;
        }
        let models: Vec<Vec<f64>> = locals.iter().map(|l| l.theta.clone()).collect();
        let next = aggregate(&models, &weights).map_err(round_err)?;

        channel_uses += plan.channel_uses();
        metrics.push(RoundMetrics {
            round: t + 1,
            channel_uses,
            gap: gap(&next, env.theta_star),
            accuracy: task.accuracy(&next, &data.test),
            worst_h: downlink.worst_h,
            worst_h_unit: downlink.worst_h_unit,
            solver_trace_len: downlink.solver_trace_len,
            wall_ms: clock.ms(),
        });
        if config.record_trace {
            traces.push(RoundTrace {
                theta: theta.clone(),
                channel: downlink.channel,
                w: downlink.w,
                noise: downlink.noise,
                received: downlink.received,
                local: locals,
                next_theta: next.clone(),
            });
        }
        theta = next;
    }

    Ok(TrainingRun {
        metrics,
        theta,
        traces,
        deviations: tracker,
    })
}

struct Downlink {
    received: Vec<Vec<f64>>,
    channel: Option<ChannelRound>,
    w: Vec<CVec>,
    noise: Vec<CVec>,
    worst_h: f64,
    worst_h_unit: f64,
    solver_trace_len: usize,
}

fn broadcast(
    env: &TrainingEnv<'_>,
    config: &TrainingConfig,
    plan: &SegmentPlan,
    weights: &[f64],
    theta: &[f64],
    seeds: RunSeeds,
    t: usize,
) -> Result<Downlink> {
    let k_dev = env.data.n_devices();
    if config.scheme.is_ideal() {
        return Ok(Downlink {
            received: crate::baselines::ideal_broadcast(theta, k_dev),
            channel: None,
            w: Vec::new(),
            noise: Vec::new(),
            worst_h: 0.0,
            worst_h_unit: 0.0,
            solver_trace_len: 0,
        });
    }

    let mut ch_rng = SeededRng::new(seeds.common, mix64(&[TAG_CHANNEL, t as u64]));
    let channel = gen_channel_round(env.geometry, config.n_antennas, config.gamma, &mut ch_rng)?;
    let problem = RoundProblem::from_round(&channel, weights.to_vec(), config.noise_w, config.power_w)?;
    let s = plan.n_segments();
    let (w, solver_trace_len) = match config.scheme {
        SchemeId::SegAB => {
            let sol = solve_round(&problem, s, &config.beam)?;
            let len = sol.objective_trace.len();
            (sol.w, len)
        }
        SchemeId::MinSum | SchemeId::MinMax => {
            let settings = FirstOrderSettings {
                restart_seed: mix64(&[seeds.scheme, t as u64]),
                ..config.first_order
            };
            let sol = if config.scheme == SchemeId::MinSum {
                minsum_beamformer(&problem, s, &settings)?
            } else {
                minmax_beamformer(&problem, s, &settings)?
            };
            let len = sol.best_trace.len();
            (sol.w, len)
        }
        SchemeId::IdealSeg | SchemeId::IdealFM => unreachable!("ideal schemes return early"),
    };

    let packed = pack(plan, theta)?;
    let mut noise_rng = SeededRng::new(seeds.common, mix64(&[TAG_NOISE, t as u64]));
    let noise = draw_noise(k_dev, plan.complex_len(), config.noise_w.sqrt(), &mut noise_rng);
    let est = receive_with_noise(&packed, &w, &channel, &noise)?;
    let received = est
        .iter()
        .map(|segments| unpack(plan, segments))
        .collect::<Result<Vec<_>>>()?;
    let worst_h_unit = eval_worst_case_h(&w, &problem, 1.0)?;
    Ok(Downlink {
        received,
        channel: Some(channel),
        w,
        noise,
        worst_h: worst_h_unit * packed.nu(),
        worst_h_unit,
        solver_trace_len,
    })
}
