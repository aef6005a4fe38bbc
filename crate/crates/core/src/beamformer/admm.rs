//! ADMM for the convexified feasibility subproblem at a fixed SCA anchor `v`.
//!
//! Splitting variables `x^j_k = ĥ_k^H w_j` and `y = w` separate the problem
//! into per-device QCQPs in `(x_k, δ_k)`, a projection onto the power ball for
//! `y`, and a regularized least-squares update for `w`.

use super::qcqp::{qcqp_xdsub_scaled, XdSolution};
use super::RoundProblem;
use crate::error::{Error, Result};
use crate::linalg::{stacked_norm_sqr, CVec, RegularizedGram, C64};

#[derive(Debug, Clone, Copy)]
pub struct AdmmSettings {
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 0.2,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

/// Primal and (scaled) dual iterates. Device-major indexing: entry `(k, j)` of
/// `x`, `delta`, and `lambda` lives at `k * S + j`.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub x: Vec<C64>,
    pub y: Vec<CVec>,
    pub delta: Vec<f64>,
    pub w: Vec<CVec>,
    pub lambda: Vec<C64>,
    pub m: Vec<CVec>,
    pub rho: f64,
}

impl AdmmState {
    /// Warm start at `w0` with zero duals.
    pub fn new(w0: &[CVec], n_devices: usize, rho: f64) -> Self {
        let s = w0.len();
        let n = w0.first().map_or(0, CVec::len);
        Self {
            x: vec![C64::new(0.0, 0.0); s * n_devices],
            y: w0.to_vec(),
            delta: vec![0.0; s * n_devices],
            w: w0.to_vec(),
            lambda: vec![C64::new(0.0, 0.0); s * n_devices],
            m: vec![CVec::zeros(n); s],
            rho,
        }
    }

    /// `sqrt(Σ |x^j_k − ĥ_k^H w_j|² + ‖y − w‖²)`
    pub fn primal_residual(&self, h_hat: &[CVec]) -> f64 {
        let s = self.w.len();
        let mut acc = 0.0;
        for (k, h) in h_hat.iter().enumerate() {
            for j in 0..s {
                acc += (self.x[k * s + j] - h.dot(&self.w[j])).norm_sqr();
            }
        }
        for (y, w) in self.y.iter().zip(&self.w) {
            acc += y.sub(w).norm_sqr();
        }
        acc.sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    /// Beamformer, projected onto the power ball.
    pub w: Vec<CVec>,
    pub delta: Vec<f64>,
    /// `−1ᵀδ` re-evaluated at the returned `w` with tight constraints.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Constants of the convexified constraints that do not change across ADMM
/// iterations, with constraint `(k, i)` multiplied by `c^i_k`:
/// `e2^i_k = v_i^H ĥ_k`, `μ̃^i_k = c^i_k μ^i_k`, `r̃^i_k = c^i_k r_k`, and
/// `e3^i_k = c^i_k (μ^i_k |ĥ_k^H v_i|² + r_k ε_k² P + r_k σ²)`.
pub(crate) struct ScaConstants {
    pub e2: Vec<C64>,
    pub e3: Vec<f64>,
    pub mu: Vec<f64>,
    pub r: Vec<f64>,
}

impl ScaConstants {
    pub fn new(problem: &RoundProblem, mu: &[f64], v: &[CVec], scale: &[f64]) -> Self {
        let s = v.len();
        let len = s * problem.n_devices();
        let mut out = Self {
            e2: Vec::with_capacity(len),
            e3: Vec::with_capacity(len),
            mu: Vec::with_capacity(len),
            r: Vec::with_capacity(len),
        };
        for (k, h) in problem.h_hat.iter().enumerate() {
            let r = problem.weights[k];
            let fixed = r * problem.epsilon[k].powi(2) * problem.power + r * problem.noise_power;
            for i in 0..s {
                let idx = k * s + i;
                let c = scale[idx];
                let hv = h.dot(&v[i]);
                out.e2.push(hv.conj());
                out.e3.push(c * (mu[idx] * hv.norm_sqr() + fixed));
                out.mu.push(c * mu[idx]);
                out.r.push(c * r);
            }
        }
        out
    }
}

/// Objective `−1ᵀδ` of the convexified problem at `w`, with every `δ` set by
/// its tight constraint:
/// `Σ_{k,i} r_k Σ_{j≠i} |ĥ_k^H w_j|² − 2 μ^i_k Re{v_i^H ĥ_k ĥ_k^H w_i} + e3^i_k`.
pub fn sca_objective(problem: &RoundProblem, mu: &[f64], v: &[CVec], w: &[CVec]) -> f64 {
    sca_objective_scaled(problem, mu, v, &vec![1.0; mu.len()], w)
}

/// [`sca_objective`] with constraint `(k, i)` multiplied by `scale[k * S + i]`.
pub fn sca_objective_scaled(problem: &RoundProblem, mu: &[f64], v: &[CVec], scale: &[f64], w: &[CVec]) -> f64 {
    let consts = ScaConstants::new(problem, mu, v, scale);
    let s = w.len();
    let mut total = 0.0;
    for (k, h) in problem.h_hat.iter().enumerate() {
        let x: Vec<C64> = w.iter().map(|wj| h.dot(wj)).collect();
        let all: f64 = x.iter().map(C64::norm_sqr).sum();
        for i in 0..s {
            let idx = k * s + i;
            total += consts.r[idx] * (all - x[i].norm_sqr()) - 2.0 * consts.mu[idx] * (consts.e2[idx] * x[i]).re
                + consts.e3[idx];
        }
    }
    total
}

/// Euclidean projection of a stacked vector onto `‖y‖² ≤ power`:
/// `min{√P / ‖u‖, 1} · u`.
pub fn project_ball(u: &[CVec], power: f64) -> Vec<CVec> {
    let norm = stacked_norm_sqr(u).sqrt();
    let limit = power.sqrt();
    if norm <= limit {
        u.to_vec()
    } else {
        let f = limit / norm;
        u.iter().map(|v| v.scaled(f)).collect()
    }
}

/// Runs ADMM on the convexified problem anchored at `v`, warm-started at `w = v`.
///
/// Returns an error carrying the final residuals if the iteration cap is hit.
pub fn admm_solve(
    problem: &RoundProblem,
    mu: &[f64],
    v: &[CVec],
    settings: &AdmmSettings,
) -> Result<AdmmOutcome> {
    let outcome = admm_run(problem, mu, v, settings)?;
    if !outcome.converged {
        return Err(Error::AdmmNoConvergence {
            iterations: outcome.iterations,
            primal: outcome.primal_residual,
            dual: outcome.dual_residual,
        });
    }
    Ok(outcome)
}

/// Like [`admm_solve`] but returns the last iterate even without convergence.
pub fn admm_run(
    problem: &RoundProblem,
    mu: &[f64],
    v: &[CVec],
    settings: &AdmmSettings,
) -> Result<AdmmOutcome> {
    admm_run_scaled(problem, mu, v, &vec![1.0; mu.len()], settings)
}

/// [`admm_run`] on the problem whose constraint `(k, i)` is multiplied by
/// `scale[k * S + i] > 0`, so the objective becomes `−Σ c^i_k δ^i_k` in terms of
/// the unscaled slacks. The feasible set is unchanged.
pub fn admm_run_scaled(
    problem: &RoundProblem,
    mu: &[f64],
    v: &[CVec],
    scale: &[f64],
    settings: &AdmmSettings,
) -> Result<AdmmOutcome> {
    let s = v.len();
    let k_dev = problem.n_devices();
    if s == 0 || mu.len() != s * k_dev {
        return Err(Error::invalid(format!(
            "mu has {} entries, expected {}",
            mu.len(),
            s * k_dev
        )));
    }
    if mu.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::invalid("mu must be positive"));
    }
    if scale.len() != mu.len() || scale.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::invalid("one positive finite scale per constraint is required"));
    }
    if !(settings.rho > 0.0) {
        return Err(Error::invalid("rho must be positive"));
    }
    let n = problem.n_antennas();
    if v.iter().any(|vi| vi.len() != n) {
        return Err(Error::invalid("anchor length differs from antenna count"));
    }
    if stacked_norm_sqr(v) > problem.power * (1.0 + 1e-9) {
        return Err(Error::invalid("SCA anchor violates the power constraint"));
    }

    let rho = settings.rho;
    let consts = ScaConstants::new(problem, mu, v, scale);
    let gram = RegularizedGram::new(&problem.h_hat, n)?;
    let mut st = AdmmState::new(v, k_dev, rho);

    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iter {
        iterations += 1;

        // (x, δ): K independent device subproblems
        let subs: Vec<XdSolution> = (0..k_dev)
            .map(|k| {
                let h = &problem.h_hat[k];
                let base = k * s;
                let e1: Vec<C64> = (0..s).map(|j| h.dot(&st.w[j]) - st.lambda[base + j]).collect();
                qcqp_xdsub_scaled(
                    &e1,
                    &consts.e2[base..base + s],
                    &consts.e3[base..base + s],
                    &consts.mu[base..base + s],
                    &consts.r[base..base + s],
                    rho,
                )
            })
            .collect::<Result<_>>()?;
        for (k, sub) in subs.into_iter().enumerate() {
            st.x[k * s..(k + 1) * s].copy_from_slice(&sub.x);
            st.delta[k * s..(k + 1) * s].copy_from_slice(&sub.delta);
        }

        // y: projection of w − m onto the power ball
        let shifted: Vec<CVec> = st.w.iter().zip(&st.m).map(|(w, m)| w.sub(m)).collect();
        st.y = project_ball(&shifted, problem.power);

        // w: (Σ ĥĥ^H + I) w_j = Σ_k (x^j_k + λ^j_k) ĥ_k + y_j + m_j
        let w_old = std::mem::take(&mut st.w);
        st.w = (0..s)
            .map(|j| {
                let mut rhs = st.y[j].add(&st.m[j]);
                for (k, h) in problem.h_hat.iter().enumerate() {
                    rhs.axpy(st.x[k * s + j] + st.lambda[k * s + j], h);
                }
                gram.solve(&rhs)
            })
            .collect::<Result<_>>()?;

        // scaled dual ascent
        let mut primal_sq = 0.0;
        for (k, h) in problem.h_hat.iter().enumerate() {
            for j in 0..s {
                let r = st.x[k * s + j] - h.dot(&st.w[j]);
                st.lambda[k * s + j] += r;
                primal_sq += r.norm_sqr();
            }
        }
        for j in 0..s {
            let r = st.y[j].sub(&st.w[j]);
            primal_sq += r.norm_sqr();
            st.m[j] = st.m[j].add(&r);
        }
        primal = primal_sq.sqrt();

        let mut dual_sq = 0.0;
        for j in 0..s {
            let dw = st.w[j].sub(&w_old[j]);
            dual_sq += dw.norm_sqr();
            for h in &problem.h_hat {
                dual_sq += h.dot(&dw).norm_sqr();
            }
        }
        dual = rho * dual_sq.sqrt();

        let x_norm = st.x.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
        let w_norm = stacked_norm_sqr(&st.w).sqrt();
        let dual_norm = (st.lambda.iter().map(C64::norm_sqr).sum::<f64>() + stacked_norm_sqr(&st.m)).sqrt();
        let primal_scale = 1.0 + x_norm.max(w_norm);
        let dual_scale = 1.0 + rho * dual_norm;
        if primal <= settings.tol * primal_scale && dual <= settings.tol * dual_scale {
            converged = true;
            break;
        }
    }

    let w = project_ball(&st.w, problem.power);
    let objective = sca_objective_scaled(problem, mu, v, scale, &w);
    Ok(AdmmOutcome {
        w,
        delta: st.delta,
        objective,
        iterations,
        converged,
        primal_residual: primal,
        dual_residual: dual,
    })
}
