//! WebAssembly bindings for the browser demo. Each export takes plain numbers
//! and returns a JS object built from a serde struct.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use segab_core::baselines::{minmax_beamformer, minsum_beamformer, FirstOrderSettings, SchemeId};
use segab_core::beamformer::{eval_worst_case_h, solve_round, BeamSettings, RoundProblem};
use segab_core::channel::{dbm_to_watts, gen_channel_round, ChannelRound, DeviceGeometry};
use segab_core::experiment::{cells, drop_geometry, prepare, run_cell, ExperimentConfig};
use segab_core::fl::BlobSpec;
use segab_core::linalg::CVec;
use segab_core::rng::SeededRng;
use segab_core::segab::{broadcast_receive, pack, unpack, SegmentPlan};

const POWER_DBM: f64 = 47.0;
const NOISE_DBM: f64 = -96.0;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn to_js<T: Serialize>(v: &T) -> Result<JsValue, JsValue> {
    serde_wasm_bindgen::to_value(v).map_err(js_err)
}

struct Instance {
    channel: ChannelRound,
    problem: RoundProblem,
}

fn instance(n_antennas: usize, n_devices: usize, gamma: f64, seed: u64) -> segab_core::Result<Instance> {
    let mut rng = SeededRng::new(seed, 0);
    let geoms = DeviceGeometry::sample_drop(n_devices, &mut rng);
    let channel = gen_channel_round(&geoms, n_antennas, gamma, &mut rng)?;
    let weights = vec![1.0 / n_devices as f64; n_devices];
    let problem = RoundProblem::from_round(&channel, weights, dbm_to_watts(NOISE_DBM), dbm_to_watts(POWER_DBM))?;
    Ok(Instance { channel, problem })
}

fn beams(scheme: SchemeId, problem: &RoundProblem, n_segments: usize) -> segab_core::Result<Vec<CVec>> {
    match scheme {
        SchemeId::MinSum => Ok(minsum_beamformer(problem, n_segments, &FirstOrderSettings::default())?.w),
        SchemeId::MinMax => Ok(minmax_beamformer(problem, n_segments, &FirstOrderSettings::default())?.w),
        _ => Ok(solve_round(problem, n_segments, &BeamSettings::default())?.w),
    }
}

#[derive(Serialize)]
struct SchemeValue {
    scheme: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct BeamReport {
    objective_trace: Vec<f64>,
    admm_iterations: Vec<usize>,
    worst_case_h: Vec<SchemeValue>,
}

/// Solves one round of the robust beamforming problem and compares the
/// worst-case objective (with unit model norm) against the two baselines.
#[wasm_bindgen]
pub fn solve_beamformer(
    n_antennas: usize,
    n_devices: usize,
    n_segments: usize,
    gamma: f64,
    seed: u32,
) -> Result<JsValue, JsValue> {
    let inst = instance(n_antennas, n_devices, gamma, seed.into()).map_err(js_err)?;
    let sol = solve_round(&inst.problem, n_segments, &BeamSettings::default()).map_err(js_err)?;
    let mut worst = vec![SchemeValue {
        scheme: SchemeId::SegAB.name(),
        value: eval_worst_case_h(&sol.w, &inst.problem, 1.0).map_err(js_err)?,
    }];
    for scheme in [SchemeId::MinSum, SchemeId::MinMax] {
        let w = beams(scheme, &inst.problem, n_segments).map_err(js_err)?;
        worst.push(SchemeValue {
            scheme: scheme.name(),
            value: eval_worst_case_h(&w, &inst.problem, 1.0).map_err(js_err)?,
        });
    }
    to_js(&BeamReport {
        objective_trace: sol.objective_trace,
        admm_iterations: sol.admm_iterations,
        worst_case_h: worst,
    })
}

#[derive(Serialize)]
struct ErrorReport {
    scheme: &'static str,
    /// Mean squared error per parameter, one entry per device.
    device_mse: Vec<f64>,
    /// Squared error per parameter, averaged over devices.
    parameter_error: Vec<f64>,
}

/// Broadcasts a random model of `dim` parameters once with each beamforming
/// scheme and reports the received error.
#[wasm_bindgen]
pub fn segment_error(
    n_antennas: usize,
    n_devices: usize,
    n_segments: usize,
    gamma: f64,
    dim: usize,
    seed: u32,
) -> Result<JsValue, JsValue> {
    let inst = instance(n_antennas, n_devices, gamma, seed.into()).map_err(js_err)?;
    let plan = SegmentPlan::new(dim, n_segments).map_err(js_err)?;
    let mut rng = SeededRng::new(seed.into(), 1);
    let theta: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let packed = pack(&plan, &theta).map_err(js_err)?;
    let mut out = Vec::new();
    for scheme in [SchemeId::SegAB, SchemeId::MinSum, SchemeId::MinMax] {
        let w = beams(scheme, &inst.problem, n_segments).map_err(js_err)?;
        let mut noise_rng = SeededRng::new(seed.into(), 2);
        let est = broadcast_receive(&packed, &w, &inst.channel, dbm_to_watts(NOISE_DBM).sqrt(), &mut noise_rng)
            .map_err(js_err)?;
        let mut device_mse = Vec::with_capacity(n_devices);
        let mut parameter_error = vec![0.0; dim];
        for segments in &est {
            let rx = unpack(&plan, segments).map_err(js_err)?;
            let mut acc = 0.0;
            for (j, (a, b)) in rx.iter().zip(&theta).enumerate() {
                let e = (a - b).powi(2);
                acc += e;
                parameter_error[j] += e / n_devices as f64;
            }
            device_mse.push(acc / dim as f64);
        }
        out.push(ErrorReport {
            scheme: scheme.name(),
            device_mse,
            parameter_error,
        });
    }
    to_js(&out)
}

#[derive(Serialize)]
struct Curve {
    scheme: &'static str,
    channel_uses: Vec<usize>,
    accuracy: Vec<f64>,
    gap: Vec<f64>,
}

/// Federated training of a small logistic model with every scheme on one
/// drop and channel realization.
#[wasm_bindgen]
pub fn train_curves(
    n_segments: usize,
    gamma: f64,
    rounds: usize,
    local_iters: usize,
    seed: u32,
) -> Result<JsValue, JsValue> {
    let cfg = ExperimentConfig {
        n_antennas: 8,
        n_devices: 3,
        n_segments,
        gamma,
        rounds,
        local_iters,
        batch_size: 10,
        seed: seed.into(),
        data: BlobSpec {
            samples_per_device: 60,
            test_samples: 300,
            ..BlobSpec::default()
        },
        ..ExperimentConfig::default()
    };
    let prep = prepare(&cfg).map_err(js_err)?;
    let geometry = drop_geometry(cfg.seed, 0, cfg.n_devices);
    let mut curves = Vec::new();
    for cell in cells(&cfg) {
        let run = run_cell(&cfg, &prep, &geometry, cell).map_err(js_err)?;
        curves.push(Curve {
            scheme: cell.scheme.name(),
            channel_uses: run.metrics.iter().map(|m| m.channel_uses).collect(),
            accuracy: run.metrics.iter().map(|m| m.accuracy).collect(),
            gap: run.metrics.iter().map(|m| m.gap).collect(),
        });
    }
    to_js(&curves)
}
