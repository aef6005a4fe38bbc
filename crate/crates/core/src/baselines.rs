//! Comparison schemes: error-free segmented and full-model broadcast, and two
//! beamformers that minimize a CSI-error upper bound with fixed-step first-order
//! methods (sum of ratios by projected gradient, max ratio by projected
//! subgradient).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beamformer::{mrt_initializer, RoundProblem};
use crate::error::{Error, Result};
use crate::linalg::{stacked_norm_sqr, CVec, C64};
use crate::rng::SeededRng;
use crate::segab::{check_nondegenerate, SegmentPlan};

/// Broadcast schemes, in legend order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SchemeId {
    SegAB,
    IdealSeg,
    IdealFM,
    MinSum,
    MinMax,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::SegAB,
        SchemeId::IdealSeg,
        SchemeId::IdealFM,
        SchemeId::MinSum,
        SchemeId::MinMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::SegAB => "SegAB",
            SchemeId::IdealSeg => "IdealSeg",
            SchemeId::IdealFM => "IdealFM",
            SchemeId::MinSum => "MinSum",
            SchemeId::MinMax => "MinMax",
        }
    }

    /// Stable numeric id used in seed derivation.
    pub fn index(self) -> u64 {
        self as u64
    }

    pub fn is_ideal(self) -> bool {
        matches!(self, SchemeId::IdealSeg | SchemeId::IdealFM)
    }

    /// Segments actually used given the configured count.
    pub fn effective_segments(self, configured: usize) -> usize {
        match self {
            SchemeId::IdealFM => 1,
            _ => configured,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for SchemeId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SchemeId> for String {
    fn from(id: SchemeId) -> String {
        id.name().to_string()
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown scheme '{s}' (expected one of SegAB, IdealSeg, IdealFM, MinSum, MinMax)"
                ))
            })
    }
}

/// Error-free delivery: every device receives `θ` exactly.
pub fn ideal_broadcast(theta: &[f64], n_devices: usize) -> Vec<Vec<f64>> {
    vec![theta.to_vec(); n_devices]
}

/// Downlink channel uses per round of an ideal scheme.
pub fn ideal_channel_uses(scheme: SchemeId, model_dim: usize, n_segments: usize) -> Result<usize> {
    let plan = SegmentPlan::new(model_dim, scheme.effective_segments(n_segments))?;
    Ok(plan.channel_uses())
}

/// Per-`(k, i)` bound ratio, device-major:
/// `r_k (Σ_{j≠i} |ĥ_k^H w_j|² + ε_k² P + σ²) / |ĥ_k^H w_i|²`.
pub fn surrogate_ratios(w: &[CVec], problem: &RoundProblem) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.len() * problem.n_devices());
    for (k, h) in problem.h_hat.iter().enumerate() {
        let r = problem.weights[k];
        let c = problem.epsilon[k].powi(2) * problem.power + problem.noise_power;
        let gains: Vec<f64> = w.iter().map(|wj| h.dot(wj).norm_sqr()).collect();
        let all: f64 = gains.iter().sum();
        for &g in &gains {
            out.push(r * (all - g + c) / g);
        }
    }
    out
}

pub fn minsum_value(w: &[CVec], problem: &RoundProblem) -> f64 {
    surrogate_ratios(w, problem).iter().sum()
}

pub fn minmax_value(w: &[CVec], problem: &RoundProblem) -> f64 {
    surrogate_ratios(w, problem)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Real gradient (`2 ∂/∂w̄`) of the ratio for device `k`, segment `i`, accumulated
/// into `grad` with weight `scale`.
fn accumulate_ratio_gradient(
    w: &[CVec],
    problem: &RoundProblem,
    k: usize,
    i: usize,
    scale: f64,
    grad: &mut [CVec],
) {
    let h = &problem.h_hat[k];
    let r = problem.weights[k];
    let c = problem.epsilon[k].powi(2) * problem.power + problem.noise_power;
    let g: Vec<C64> = w.iter().map(|wj| h.dot(wj)).collect();
    let d = g[i].norm_sqr();
    let num: f64 = g
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, gj)| gj.norm_sqr())
        .sum::<f64>()
        + c;
    for (j, gj) in g.iter().enumerate() {
        let coeff = if j == i {
            -2.0 * r * num / (d * d) * gj
        } else {
            2.0 * r / d * gj
        };
        grad[j].axpy(coeff * scale, h);
    }
}

/// Gradient of [`minsum_value`] with respect to the real and imaginary parts of `w`,
/// packed as complex numbers.
pub fn minsum_gradient(w: &[CVec], problem: &RoundProblem) -> Vec<CVec> {
    let n = problem.n_antennas();
    let mut grad = vec![CVec::zeros(n); w.len()];
    for k in 0..problem.n_devices() {
        for i in 0..w.len() {
            accumulate_ratio_gradient(w, problem, k, i, 1.0, &mut grad);
        }
    }
    grad
}

/// Gradient of the currently largest ratio, a subgradient of [`minmax_value`].
pub fn minmax_subgradient(w: &[CVec], problem: &RoundProblem) -> Vec<CVec> {
    let s = w.len();
    let ratios = surrogate_ratios(w, problem);
    let active = ratios
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(idx, _)| idx);
    let mut grad = vec![CVec::zeros(problem.n_antennas()); s];
    accumulate_ratio_gradient(w, problem, active / s, active % s, 1.0, &mut grad);
    grad
}

#[derive(Debug, Clone, Copy)]
pub struct FirstOrderSettings {
    pub step: f64,
    pub max_iter: usize,
    /// Seed for the single perturbed restart after a degenerate iterate.
    pub restart_seed: u64,
}

impl Default for FirstOrderSettings {
    fn default() -> Self {
        Self {
            step: 0.01,
            max_iter: 2000,
            restart_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineSolution {
    /// Best iterate.
    pub w: Vec<CVec>,
    pub best_value: f64,
    /// Best surrogate value after each iteration (nonincreasing).
    pub best_trace: Vec<f64>,
    pub restarted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Surrogate {
    Sum,
    Max,
}

fn scale_into_ball(w: Vec<CVec>, power: f64) -> Vec<CVec> {
    let norm = stacked_norm_sqr(&w).sqrt();
    if norm <= power.sqrt() {
        w
    } else {
        let f = power.sqrt() / norm;
        w.into_iter().map(|v| v.scaled(f)).collect()
    }
}

fn first_order(
    problem: &RoundProblem,
    n_segments: usize,
    settings: &FirstOrderSettings,
    kind: Surrogate,
) -> Result<BaselineSolution> {
    if !(settings.step > 0.0) || settings.max_iter == 0 {
        return Err(Error::invalid("step and iteration cap must be positive"));
    }
    let norm = problem;
    let value = |w: &[CVec]| match kind {
        Surrogate::Sum => minsum_value(w, norm),
        Surrogate::Max => minmax_value(w, norm),
    };
    let init = mrt_initializer(norm, n_segments)?;
    let mut restarted = false;
    let mut w = init.clone();
    let mut best = w.clone();
    let mut best_value = value(&w);
    let mut best_trace = Vec::with_capacity(settings.max_iter);

    let mut it = 0;
    while it < settings.max_iter {
        let grad = match kind {
            Surrogate::Sum => minsum_gradient(&w, norm),
            Surrogate::Max => minmax_subgradient(&w, norm),
        };
        // PGD takes a gradient step; PSA moves a fixed length along the
        // normalized subgradient.
        let scale = match kind {
            Surrogate::Sum => settings.step,
            Surrogate::Max => {
                let gnorm = stacked_norm_sqr(&grad).sqrt();
                if gnorm > 0.0 {
                    settings.step / gnorm
                } else {
                    0.0
                }
            }
        };
        let stepped: Vec<CVec> = w
            .iter()
            .zip(&grad)
            .map(|(wi, gi)| wi.sub(&gi.scaled(scale)))
            .collect();
        let next = scale_into_ball(stepped, norm.power);
        let status = if next.iter().all(CVec::is_finite) {
            check_nondegenerate(&next, &norm.h_hat)
        } else {
            Err(Error::DegenerateBeam {
                device: 0,
                segment: 0,
                gain: f64::NAN,
            })
        };
        if let Err(e) = status {
            if restarted {
                return Err(e);
            }
            restarted = true;
            let mut rng = SeededRng::new(settings.restart_seed, 0xBA5E);
            let perturbed: Vec<CVec> = init
                .iter()
                .map(|wi| wi.add(&rng.complex_normal_vec(wi.len()).scaled(1e-3 * wi.norm())))
                .collect();
            w = scale_into_ball(perturbed, norm.power);
            continue;
        }
        w = next;
        let v = value(&w);
        if v < best_value {
            best_value = v;
            best = w.clone();
        }
        best_trace.push(best_value);
        it += 1;
    }

    Ok(BaselineSolution {
        w: best,
        best_value,
        best_trace,
        restarted,
    })
}

/// Projected gradient descent on the sum-of-ratios bound.
pub fn minsum_beamformer(
    problem: &RoundProblem,
    n_segments: usize,
    settings: &FirstOrderSettings,
) -> Result<BaselineSolution> {
    first_order(problem, n_segments, settings, Surrogate::Sum)
}

/// Projected subgradient descent on the max-ratio bound, with constant step
/// length along the normalized subgradient of the active term.
pub fn minmax_beamformer(
    problem: &RoundProblem,
    n_segments: usize,
    settings: &FirstOrderSettings,
) -> Result<BaselineSolution> {
    first_order(problem, n_segments, settings, Surrogate::Max)
}
