//! The optimality-gap upper bound and empirical estimates of its constants.

use super::data::Dataset;
use super::local::{aggregate, local_sgd_observed};
use super::task::Task;
use crate::error::{Error, Result};
use crate::rng::{mix64, SeededRng};
use crate::segab::SegmentPlan;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub l_smooth: f64,
    pub lambda_sc: f64,
    pub eta: f64,
    pub local_iters: usize,
    /// Per-segment bound on the centralized-vs-local gradient deviation.
    pub phi: Vec<f64>,
    /// Per-segment bound on the mini-batch gradient noise.
    pub zeta: Vec<f64>,
    /// `Γ = ‖θ_0 − θ*‖²`.
    pub gamma: f64,
    /// `ν = max_{i,t} ‖s_{i,t}‖²`.
    pub nu: f64,
}

impl BoundParams {
    fn validate(&self) -> Result<()> {
        if !(self.l_smooth > 0.0) || !(self.lambda_sc > 0.0) || self.lambda_sc > self.l_smooth {
            return Err(Error::invalid("need 0 < λ ≤ L"));
        }
        if !(self.eta > 0.0) || self.local_iters == 0 {
            return Err(Error::invalid("learning rate and J must be positive"));
        }
        if !(self.eta < 1.0 / self.l_smooth) {
            return Err(Error::Precondition(format!(
                "learning rate {} is not below 1/L = {}",
                self.eta,
                1.0 / self.l_smooth
            )));
        }
        if self.phi.len() != self.zeta.len() {
            return Err(Error::invalid("phi and zeta need one entry per segment"));
        }
        let consts = self.phi.iter().chain(&self.zeta).chain([&self.gamma, &self.nu]);
        if consts.into_iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid("bound constants must be nonnegative"));
        }
        Ok(())
    }

    /// `G_t = 4 (1 − ηλ)^{2J}`.
    pub fn g_factor(&self) -> f64 {
        4.0 * (1.0 - self.eta * self.lambda_sc).powi(2 * self.local_iters as i32)
    }

    /// `C_t = 4 η² J² Σ_i (φ_i + ζ_i)`.
    pub fn c_term(&self) -> f64 {
        let j = self.local_iters as f64;
        let dev: f64 = self.phi.iter().zip(&self.zeta).map(|(p, z)| p + z).sum();
        4.0 * self.eta * self.eta * j * j * dev
    }
}

/// `Σ_t Ḡ_t (H_t + C_t) + Γ Π_t G_t` with `Ḡ_t = Π_{s>t} G_s`, where
/// `H_t = ν · h_over_nu[t]` and `T = h_over_nu.len()`.
pub fn eval_bound(params: &BoundParams, h_over_nu: &[f64]) -> Result<f64> {
    params.validate()?;
    if h_over_nu.iter().any(|&h| !(h >= 0.0)) {
        return Err(Error::invalid("per-round H values must be nonnegative"));
    }
    let g = params.g_factor();
    let c = params.c_term();
    // Backward accumulation keeps Ḡ_t as the running product of later factors.
    let mut tail = 1.0;
    let mut total = 0.0;
    for &h in h_over_nu.iter().rev() {
        total += tail * (params.nu * h + c);
        tail *= g;
    }
    Ok(total + params.gamma * tail)
}

/// Running per-segment maxima of the gradient deviations along a training
/// trajectory, plus the contraction check of the centralized reference path.
#[derive(Debug, Clone)]
pub struct DeviationTracker {
    plan: SegmentPlan,
    pub phi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub nu: f64,
    /// Largest `‖v^J − θ*‖² / ((1 − ηλ)^{2J} ‖θ_t − θ*‖²)` seen.
    pub worst_contraction: f64,
}

/// Local iterates `θ^τ_k` and mini-batch gradients of one device, `τ = 0..J`.
#[derive(Debug, Clone, Default)]
pub struct DevicePath {
    pub iterates: Vec<Vec<f64>>,
    pub batch_grads: Vec<Vec<f64>>,
}

impl DeviationTracker {
    pub fn new(plan: SegmentPlan) -> Self {
        let s = plan.n_segments();
        Self {
            plan,
            phi: vec![0.0; s],
            zeta: vec![0.0; s],
            nu: 0.0,
            worst_contraction: 0.0,
        }
    }

    fn segment_sq_norms(&self, v: &[f64]) -> Vec<f64> {
        (0..self.plan.n_segments())
            .map(|i| v[self.plan.segment_range(i)].iter().map(|x| x * x).sum())
            .collect()
    }

    fn raise(target: &mut [f64], values: &[f64]) {
        for (t, v) in target.iter_mut().zip(values) {
            *t = t.max(*v);
        }
    }

    /// Folds one round into the maxima. `paths[k]` holds device `k`'s local path.
    pub fn record_round(
        &mut self,
        task: &Task,
        data: &Dataset,
        theta_t: &[f64],
        paths: &[DevicePath],
        eta: f64,
        theta_star: Option<&[f64]>,
    ) -> Result<()> {
        if paths.len() != data.n_devices() {
            return Err(Error::invalid("one local path per device is required"));
        }
        let j = paths[0].iterates.len();
        if paths.iter().any(|p| p.iterates.len() != j || p.batch_grads.len() != j) {
            return Err(Error::invalid("local paths differ in length"));
        }
        let dim = task.dim();
        let weights = data.weights();
        self.nu = self.nu.max(self.segment_sq_norms(theta_t).into_iter().fold(0.0, f64::max));

        let mut v = theta_t.to_vec();
        let mut global = vec![0.0; dim];
        let mut local = vec![0.0; dim];
        for tau in 0..j {
            task.global_loss_grad(&v, data, &mut global);
            let mut alpha = global.clone();
            for (k, path) in paths.iter().enumerate() {
                task.loss_grad(&path.iterates[tau], &data.devices[k], None, &mut local);
                for (a, l) in alpha.iter_mut().zip(&local) {
                    *a -= weights[k] * l;
                }
                let beta: Vec<f64> = local.iter().zip(&path.batch_grads[tau]).map(|(a, b)| a - b).collect();
                let b = self.segment_sq_norms(&beta);
                Self::raise(&mut self.zeta, &b);
            }
            let a = self.segment_sq_norms(&alpha);
            Self::raise(&mut self.phi, &a);
            for (x, g) in v.iter_mut().zip(&global) {
                *x -= eta * g;
            }
        }

        if let Some(star) = theta_star {
            let before: f64 = theta_t.iter().zip(star).map(|(a, b)| (a - b).powi(2)).sum();
            let after: f64 = v.iter().zip(star).map(|(a, b)| (a - b).powi(2)).sum();
            let factor = (1.0 - eta * task.lambda_reg).powi(2 * j as i32);
            if before > 0.0 {
                self.worst_contraction = self.worst_contraction.max(after / (factor * before));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub n_segments: usize,
    pub eta: f64,
    pub local_iters: usize,
    pub batch_size: usize,
    pub rounds: usize,
    pub n_probes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionConstants {
    pub l_smooth: f64,
    pub lambda_sc: f64,
    pub phi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub nu: f64,
}

/// Smoothness and strong convexity from the task, and `φ_i`, `ζ_i`, `ν` as
/// empirical maxima over error-free training trajectories started at
/// `theta0`. The deviation weights are `c_k = A_k / A`.
pub fn estimate_assumption_constants(
    task: &Task,
    data: &Dataset,
    theta0: &[f64],
    probe: &ProbeConfig,
) -> Result<AssumptionConstants> {
    if !task.is_strongly_convex() {
        return Err(Error::UnsupportedTask(
            "assumption constants are only estimated for the strongly convex task".into(),
        ));
    }
    task.validate(data)?;
    let l_smooth = task.smoothness(data)?;
    let plan = SegmentPlan::new(task.dim(), probe.n_segments)?;
    let mut tracker = DeviationTracker::new(plan);
    let weights = data.weights();
    for p in 0..probe.n_probes {
        let mut theta = theta0.to_vec();
        for t in 0..probe.rounds {
            let mut paths = Vec::with_capacity(data.n_devices());
            let mut models = Vec::with_capacity(data.n_devices());
            for (k, dev) in data.devices.iter().enumerate() {
                let mut rng = SeededRng::new(probe.seed, mix64(&[p as u64, t as u64, k as u64]));
                let mut path = DevicePath::default();
                let out = local_sgd_observed(task, &theta, dev, probe.eta, probe.local_iters, probe.batch_size, &mut rng, |step| {
                    path.iterates.push(step.theta.to_vec());
                    path.batch_grads.push(step.grad.to_vec());
                })?;
                paths.push(path);
                models.push(out.theta);
            }
            tracker.record_round(task, data, &theta, &paths, probe.eta, None)?;
            theta = aggregate(&models, &weights)?;
        }
    }
    Ok(AssumptionConstants {
        l_smooth,
        lambda_sc: task.lambda_reg,
        phi: tracker.phi,
        zeta: tracker.zeta,
        nu: tracker.nu,
    })
}
