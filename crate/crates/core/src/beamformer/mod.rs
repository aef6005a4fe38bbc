//! Robust per-round downlink beamforming.
//!
//! The worst-case CSI error for a beamformer is the error-radius-scaled
//! dominant eigenvector of `Σ_i w_i w_i^H`, which turns the min-max problem
//! into a minimization of a sum of ratios. That sum is handled in epigraph
//! form: the epigraph variables `μ` are updated in closed form, and the
//! beamformer is updated by maximizing the total slack of a feasibility
//! problem, convexified by successive linearization and solved by ADMM.

pub mod admm;
pub mod qcqp;

use crate::channel::ChannelRound;
use crate::error::{Error, Result};
use crate::linalg::{
    dominant_eigvec, stacked_norm_sqr, CVec, HermitianMat, DEFAULT_EIG_MAX_ITER, DEFAULT_EIG_TOL,
};
use crate::segab::{check_nondegenerate, eval_h};

pub use admm::{
    admm_run, admm_run_scaled, admm_solve, sca_objective, sca_objective_scaled, AdmmOutcome, AdmmSettings, AdmmState,
};
pub use qcqp::{qcqp_xdsub, qcqp_xdsub_reference, qcqp_xdsub_scaled, XdSolution};

/// Added to `|ĥ^H w|²` while iterating on the normalized problem.
const ITERATION_DENOM_FLOOR: f64 = 1e-12;

/// The data of one round's beamforming problem.
#[derive(Debug, Clone)]
pub struct RoundProblem {
    pub h_hat: Vec<CVec>,
    pub epsilon: Vec<f64>,
    /// Device weights `r_k = A_k / A`.
    pub weights: Vec<f64>,
    /// Receiver noise power `σ²`.
    pub noise_power: f64,
    /// Transmit power budget `P`.
    pub power: f64,
}

impl RoundProblem {
    pub fn new(
        h_hat: Vec<CVec>,
        epsilon: Vec<f64>,
        weights: Vec<f64>,
        noise_power: f64,
        power: f64,
    ) -> Result<Self> {
        let k = h_hat.len();
        if k == 0 {
            return Err(Error::invalid("at least one device is required"));
        }
        if epsilon.len() != k || weights.len() != k {
            return Err(Error::invalid("per-device inputs have different lengths"));
        }
        let n = h_hat[0].len();
        if n == 0 || h_hat.iter().any(|h| h.len() != n) {
            return Err(Error::invalid("channel vectors must share a positive length"));
        }
        if epsilon.iter().any(|&e| !(e >= 0.0)) || weights.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::invalid("error radii must be nonnegative and weights positive"));
        }
        if !(power > 0.0) || !(noise_power >= 0.0) {
            return Err(Error::invalid("power must be positive and noise nonnegative"));
        }
        Ok(Self {
            h_hat,
            epsilon,
            weights,
            noise_power,
            power,
        })
    }

    pub fn from_round(round: &ChannelRound, weights: Vec<f64>, noise_power: f64, power: f64) -> Result<Self> {
        Self::new(round.h_hat.clone(), round.epsilon.clone(), weights, noise_power, power)
    }

    pub fn n_devices(&self) -> usize {
        self.h_hat.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.h_hat[0].len()
    }

    /// An equivalent instance with unit power and unit mean channel energy.
    /// Returns the instance and the factor `√P` that maps its beamformers back.
    ///
    /// Every ratio in the objective is invariant under this rescaling.
    pub fn normalized(&self) -> (RoundProblem, f64) {
        let mean_energy =
            self.h_hat.iter().map(CVec::norm_sqr).sum::<f64>() / self.n_devices() as f64;
        let c = if mean_energy > 0.0 { mean_energy.sqrt() } else { 1.0 };
        let problem = RoundProblem {
            h_hat: self.h_hat.iter().map(|h| h.scaled(1.0 / c)).collect(),
            epsilon: self.epsilon.iter().map(|e| e / c).collect(),
            weights: self.weights.clone(),
            noise_power: self.noise_power / (c * c * self.power),
            power: 1.0,
        };
        (problem, self.power.sqrt())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BeamSettings {
    pub admm: AdmmSettings,
    pub sca_tol: f64,
    pub sca_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Divide constraint `(k, i)` of the convexified problem by
    /// `|ĥ_k^H w_i|²` at the current outer iterate. The slack sum then has the
    /// same first-order behaviour as `1ᵀμ`; without it the iteration tends to
    /// settle where `Σ |ĥ_k^H w_i|² μ^i_k` is stationary instead.
    pub normalize_slack: bool,
    /// `ν` used when reporting the worst-case objective.
    pub nu: f64,
}

impl Default for BeamSettings {
    fn default() -> Self {
        Self {
            admm: AdmmSettings::default(),
            sca_tol: 1e-5,
            sca_max_iter: 5,
            outer_tol: 1e-4,
            outer_max_iter: 50,
            normalize_slack: true,
            nu: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BeamSolution {
    /// One beamformer per segment, in physical units.
    pub w: Vec<CVec>,
    /// Epigraph variables, device-major (`k * S + i`).
    pub mu: Vec<f64>,
    /// `1ᵀμ` after initialization and after every accepted outer iteration.
    pub objective_trace: Vec<f64>,
    pub worst_case_h: f64,
    pub admm_iterations: Vec<usize>,
    pub sca_iterations: usize,
}

/// Equal-power maximum-ratio beams toward the weighted channel centroid.
pub fn mrt_initializer(problem: &RoundProblem, n_segments: usize) -> Result<Vec<CVec>> {
    if n_segments == 0 {
        return Err(Error::invalid("at least one segment is required"));
    }
    let mut centroid = CVec::zeros(problem.n_antennas());
    for (h, &r) in problem.h_hat.iter().zip(&problem.weights) {
        centroid.axpy(r.into(), h);
    }
    let norm = centroid.norm();
    if !(norm > 0.0) {
        return Err(Error::Initialization("weighted channel centroid is zero".into()));
    }
    let beam = centroid.scaled((problem.power / n_segments as f64).sqrt() / norm);
    let w = vec![beam; n_segments];
    check_nondegenerate(&w, &problem.h_hat)
        .map_err(|e| Error::Initialization(format!("MRT beam is degenerate: {e}")))?;
    Ok(w)
}

/// Largest eigenvalue of `Σ_i w_i w_i^H`, i.e. `max_{‖u‖=1} Σ_i |u^H w_i|²`.
pub fn worst_case_leakage(w: &[CVec]) -> Result<f64> {
    Ok(dominant_direction(w)?.1)
}

fn dominant_direction(w: &[CVec]) -> Result<(CVec, f64)> {
    if w.is_empty() || stacked_norm_sqr(w) == 0.0 {
        return Err(Error::invalid("beamformer is all zero"));
    }
    let m = HermitianMat::outer_sum(w)?;
    let tol = DEFAULT_EIG_TOL * m.trace().max(f64::MIN_POSITIVE);
    let pair = dominant_eigvec(&m, tol, DEFAULT_EIG_MAX_ITER)?;
    Ok((pair.vector, pair.value))
}

/// The CSI error of norm `ε` that maximizes `Σ_i |Δh^H w_i|²`.
pub fn worst_case_error(w: &[CVec], epsilon: f64) -> Result<CVec> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid("error radius must be nonnegative"));
    }
    let (phi, _) = dominant_direction(w)?;
    Ok(phi.scaled(epsilon))
}

fn mu_values(w: &[CVec], problem: &RoundProblem, floor: f64) -> Result<Vec<f64>> {
    let leak = worst_case_leakage(w)?;
    let s = w.len();
    let mut mu = Vec::with_capacity(s * problem.n_devices());
    for (k, h) in problem.h_hat.iter().enumerate() {
        let r = problem.weights[k];
        let gains: Vec<f64> = w.iter().map(|wj| h.dot(wj).norm_sqr()).collect();
        let all: f64 = gains.iter().sum();
        let fixed = r * problem.epsilon[k].powi(2) * leak + r * problem.noise_power;
        for &g in &gains {
            mu.push((fixed + r * (all - g)) / (g + floor));
        }
    }
    Ok(mu)
}

/// Closed-form epigraph update
/// `μ^i_k = (r_k ε_k² Σ_j |φ^H w_j|² + r_k Σ_{j≠i} |ĥ_k^H w_j|² + r_k σ²) / |ĥ_k^H w_i|²`.
pub fn mu_update(w: &[CVec], problem: &RoundProblem) -> Result<Vec<f64>> {
    check_nondegenerate(w, &problem.h_hat)?;
    mu_values(w, problem, 0.0)
}

/// `H_t` evaluated at the worst-case CSI error of `w`.
pub fn eval_worst_case_h(w: &[CVec], problem: &RoundProblem, nu: f64) -> Result<f64> {
    let (phi, _) = dominant_direction(w)?;
    let delta: Vec<CVec> = problem.epsilon.iter().map(|&e| phi.scaled(e)).collect();
    eval_h(w, &problem.h_hat, &delta, &problem.weights, nu, problem.noise_power)
}

/// Solves one round's robust beamforming problem.
///
/// Three nested loops: the epigraph update of `μ` (outer), successive
/// linearization around the anchor `v` (middle), and ADMM on the convexified
/// problem (inner). If the new beamformer would increase `1ᵀμ`, the step is
/// halved toward the current beamformer a few times; when no halving gives a
/// strict decrease the iteration ends, so the returned trace is nonincreasing.
pub fn solve_round(problem: &RoundProblem, n_segments: usize, settings: &BeamSettings) -> Result<BeamSolution> {
    let (norm, amplitude) = problem.normalized();
    let mut w = mrt_initializer(&norm, n_segments)?;
    let mut mu = mu_values(&w, &norm, ITERATION_DENOM_FLOOR)?;
    let mut total: f64 = mu.iter().sum();
    let mut trace = vec![total];
    let mut admm_iterations = Vec::new();
    let mut sca_iterations = 0;

    for _outer in 0..settings.outer_max_iter {
        let scale = slack_scale(&w, &norm, settings.normalize_slack);
        let mut v = w.clone();
        let mut prev = sca_objective_scaled(&norm, &mu, &v, &scale, &v);
        for _l in 0..settings.sca_max_iter {
            let out = admm_run_scaled(&norm, &mu, &v, &scale, &settings.admm)?;
            admm_iterations.push(out.iterations);
            sca_iterations += 1;
            if !out.converged && out.objective > prev {
                break;
            }
            let change = (prev - out.objective).abs();
            let scale = prev.abs().max(out.objective.abs()).max(f64::MIN_POSITIVE);
            v = out.w;
            prev = out.objective;
            if change <= settings.sca_tol * scale {
                break;
            }
        }
        let Some((v, mu_next, next)) = descent_step(&w, &v, &norm, total)? else {
            break;
        };
        let rel = (total - next) / total;
        mu = mu_next;
        w = v;
        total = next;
        trace.push(total);
        if rel < settings.outer_tol {
            break;
        }
    }

    let w: Vec<CVec> = w.iter().map(|wi| wi.scaled(amplitude)).collect();
    let worst_case_h = eval_worst_case_h(&w, problem, settings.nu)?;
    Ok(BeamSolution {
        w,
        mu,
        objective_trace: trace,
        worst_case_h,
        admm_iterations,
        sca_iterations,
    })
}

/// Per-constraint factors `1 / |ĥ_k^H w_i|²`, rescaled to unit mean.
fn slack_scale(w: &[CVec], problem: &RoundProblem, normalize: bool) -> Vec<f64> {
    let len = w.len() * problem.n_devices();
    if !normalize {
        return vec![1.0; len];
    }
    let raw: Vec<f64> = problem
        .h_hat
        .iter()
        .flat_map(|h| w.iter().map(move |wi| 1.0 / (h.dot(wi).norm_sqr() + ITERATION_DENOM_FLOOR)))
        .collect();
    let mean = raw.iter().sum::<f64>() / len as f64;
    raw.into_iter().map(|c| c / mean).collect()
}

/// Accepts the SCA solution if it lowers `1ᵀμ`; otherwise backtracks along the
/// segment from the current beamformer (which stays inside the power ball).
/// Returns `None` when no tried point improves.
fn descent_step(
    current: &[CVec],
    candidate: &[CVec],
    problem: &RoundProblem,
    total: f64,
) -> Result<Option<(Vec<CVec>, Vec<f64>, f64)>> {
    const BACKTRACKS: usize = 6;
    let mut alpha = 1.0;
    for _ in 0..=BACKTRACKS {
        let w: Vec<CVec> = current
            .iter()
            .zip(candidate)
            .map(|(a, b)| a.scaled(1.0 - alpha).add(&b.scaled(alpha)))
            .collect();
        if check_nondegenerate(&w, &problem.h_hat).is_ok() {
            let mu = mu_values(&w, problem, ITERATION_DENOM_FLOOR)?;
            let sum: f64 = mu.iter().sum();
            if sum < total {
                return Ok(Some((w, mu, sum)));
            }
        }
        alpha *= 0.5;
    }
    Ok(None)
}
