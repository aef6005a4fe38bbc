//! Learning tasks: L2-regularized multinomial logistic regression (strongly
//! convex) and a one-hidden-layer tanh network (nonconvex, curves only).

use serde::{Deserialize, Serialize};

use super::data::{Dataset, Samples};
use crate::error::{Error, Result};
use crate::linalg::{dominant_eigvec, HermitianMat, C64, DEFAULT_EIG_MAX_ITER, DEFAULT_EIG_TOL};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub kind: TaskKind,
    pub n_features: usize,
    pub n_classes: usize,
    pub lambda_reg: f64,
    /// Hidden width; ignored by the logistic task.
    pub hidden: usize,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl Task {
    pub fn logistic(n_features: usize, n_classes: usize, lambda_reg: f64) -> Self {
        Self {
            kind: TaskKind::Logistic,
            n_features,
            n_classes,
            lambda_reg,
            hidden: 0,
        }
    }

    pub fn mlp(n_features: usize, n_classes: usize, hidden: usize, lambda_reg: f64) -> Self {
        Self {
            kind: TaskKind::Mlp,
            n_features,
            n_classes,
            lambda_reg,
            hidden,
        }
    }

    /// Number of parameters `D`. Logistic: one weight row plus bias per class.
    pub fn dim(&self) -> usize {
        let (d, c, h) = (self.n_features, self.n_classes, self.hidden);
        match self.kind {
            TaskKind::Logistic => (d + 1) * c,
            TaskKind::Mlp => h * (d + 1) + c * (h + 1),
        }
    }

    pub fn is_strongly_convex(&self) -> bool {
        self.kind == TaskKind::Logistic && self.lambda_reg > 0.0
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if data.n_features() != self.n_features || data.n_classes != self.n_classes {
            return Err(Error::invalid("task shape does not match the dataset"));
        }
        if !(self.lambda_reg >= 0.0) {
            return Err(Error::invalid("regularization must be nonnegative"));
        }
        if self.kind == TaskKind::Mlp && self.hidden == 0 {
            return Err(Error::invalid("hidden width must be positive"));
        }
        Ok(())
    }

    /// Initial model: zeros for the convex task, small seeded weights for the network.
    pub fn initial_model(&self, rng: &mut SeededRng) -> Vec<f64> {
        match self.kind {
            TaskKind::Logistic => vec![0.0; self.dim()],
            TaskKind::Mlp => {
                let scale = 1.0 / (self.n_features as f64).sqrt();
                (0..self.dim()).map(|_| scale * rng.normal()).collect()
            }
        }
    }

    fn class_scores(&self, theta: &[f64], x: &[f64], hidden_out: &mut Vec<f64>, scores: &mut [f64]) {
        let (d, c, h) = (self.n_features, self.n_classes, self.hidden);
        match self.kind {
            TaskKind::Logistic => {
                for (j, s) in scores.iter_mut().enumerate() {
                    let row = &theta[j * (d + 1)..(j + 1) * (d + 1)];
                    *s = row[d] + row[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            TaskKind::Mlp => {
                hidden_out.clear();
                for u in 0..h {
                    let row = &theta[u * (d + 1)..(u + 1) * (d + 1)];
                    let a = row[d] + row[..d].iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
                    hidden_out.push(a.tanh());
                }
                let off = h * (d + 1);
                for (j, s) in scores.iter_mut().enumerate().take(c) {
                    let row = &theta[off + j * (h + 1)..off + (j + 1) * (h + 1)];
                    *s = row[h] + row[..h].iter().zip(hidden_out.iter()).map(|(p, q)| p * q).sum::<f64>();
                }
            }
        }
    }

    /// Mean cross-entropy over `rows` (all rows when `None`) plus `λ/2 ‖θ‖²`.
    /// Writes the gradient into `grad` and returns the loss.
    pub fn loss_grad(&self, theta: &[f64], data: &Samples, rows: Option<&[usize]>, grad: &mut [f64]) -> f64 {
        let (d, c, h) = (self.n_features, self.n_classes, self.hidden);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let n = rows.map_or(data.len(), <[usize]>::len);
        let mut scores = vec![0.0; c];
        let mut hidden = Vec::with_capacity(h);
        let mut back = vec![0.0; h];
        let mut loss = 0.0;
        let scale = 1.0 / n as f64;
        for idx in 0..n {
            let r = rows.map_or(idx, |rs| rs[idx]);
            let x = data.row(r);
            let y = data.label(r);
            self.class_scores(theta, x, &mut hidden, &mut scores);
            softmax_in_place(&mut scores);
            loss -= scores[y].max(f64::MIN_POSITIVE).ln() * scale;
            scores[y] -= 1.0;
            match self.kind {
                TaskKind::Logistic => {
                    for (j, &gj) in scores.iter().enumerate() {
                        let g = &mut grad[j * (d + 1)..(j + 1) * (d + 1)];
                        for (gi, xi) in g[..d].iter_mut().zip(x) {
                            *gi += gj * xi * scale;
                        }
                        g[d] += gj * scale;
                    }
                }
                TaskKind::Mlp => {
                    let off = h * (d + 1);
                    back.iter_mut().for_each(|b| *b = 0.0);
                    for (j, &gj) in scores.iter().enumerate() {
                        let base = off + j * (h + 1);
                        for u in 0..h {
                            grad[base + u] += gj * hidden[u] * scale;
                            back[u] += gj * theta[base + u];
                        }
                        grad[base + h] += gj * scale;
                    }
                    for u in 0..h {
                        let da = back[u] * (1.0 - hidden[u] * hidden[u]) * scale;
                        let g = &mut grad[u * (d + 1)..(u + 1) * (d + 1)];
                        for (gi, xi) in g[..d].iter_mut().zip(x) {
                            *gi += da * xi;
                        }
                        g[d] += da;
                    }
                }
            }
        }
        let mut reg = 0.0;
        for (g, t) in grad.iter_mut().zip(theta) {
            *g += self.lambda_reg * t;
            reg += t * t;
        }
        loss + 0.5 * self.lambda_reg * reg
    }

    pub fn loss(&self, theta: &[f64], data: &Samples) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.loss_grad(theta, data, None, &mut g)
    }

    /// Global objective `F = Σ_k r_k F_k` and its gradient.
    pub fn global_loss_grad(&self, theta: &[f64], data: &Dataset, grad: &mut [f64]) -> f64 {
        let weights = data.weights();
        let mut local = vec![0.0; self.dim()];
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (dev, r) in data.devices.iter().zip(weights) {
            total += r * self.loss_grad(theta, dev, None, &mut local);
            for (g, l) in grad.iter_mut().zip(&local) {
                *g += r * l;
            }
        }
        total
    }

    pub fn accuracy(&self, theta: &[f64], data: &Samples) -> f64 {
        let mut scores = vec![0.0; self.n_classes];
        let mut hidden = Vec::with_capacity(self.hidden);
        let correct = (0..data.len())
            .filter(|&i| {
                self.class_scores(theta, data.row(i), &mut hidden, &mut scores);
                let pred = scores
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map_or(0, |(j, _)| j);
                pred == data.label(i)
            })
            .count();
        correct as f64 / data.len() as f64
    }

    /// Smoothness constant valid for every local loss:
    /// `max_k ½ λ_max(X̃_kᵀ X̃_k) / A_k + λ_reg`, where `X̃` appends a ones column.
    /// The ½ bounds the softmax Hessian `diag(p) − ppᵀ`.
    pub fn smoothness(&self, data: &Dataset) -> Result<f64> {
        if !self.is_strongly_convex() {
            return Err(Error::UnsupportedTask(
                "smoothness bound is only available for the regularized logistic task".into(),
            ));
        }
        let dim = self.n_features + 1;
        let mut worst: f64 = 0.0;
        for dev in &data.devices {
            let mut gram = vec![C64::new(0.0, 0.0); dim * dim];
            for i in 0..dev.len() {
                let x = dev.row(i);
                let at = |a: usize| if a < self.n_features { x[a] } else { 1.0 };
                for a in 0..dim {
                    for b in 0..dim {
                        gram[a * dim + b].re += at(a) * at(b);
                    }
                }
            }
            let m = HermitianMat::from_row_major(dim, gram)?;
            let top = dominant_eigvec(&m, DEFAULT_EIG_TOL * m.frobenius_norm(), DEFAULT_EIG_MAX_ITER)?;
            worst = worst.max(0.5 * top.value / dev.len() as f64);
        }
        Ok(worst + self.lambda_reg)
    }
}

/// Minimizer of the global objective by full-batch gradient descent with
/// Armijo backtracking (steps capped at `1.5 / L`, with a rounding allowance
/// on the sufficient-decrease test), stopped when `‖∇F‖ ≤ λ_reg · tol` so that
/// `‖θ − θ*‖ ≤ tol` by strong convexity.
pub fn solve_optimum(task: &Task, data: &Dataset, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !task.is_strongly_convex() {
        return Err(Error::UnsupportedTask(
            "the optimum is only computed for the strongly convex task".into(),
        ));
    }
    task.validate(data)?;
    let l = task.smoothness(data)?;
    let mut theta = vec![0.0; task.dim()];
    let mut grad = vec![0.0; task.dim()];
    let mut trial_grad = vec![0.0; task.dim()];
    let mut f = task.global_loss_grad(&theta, data, &mut grad);
    let max_step = 1.5 / l;
    let mut step = max_step;
    for _ in 0..max_iter {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() <= task.lambda_reg * tol {
            return Ok(theta);
        }
        loop {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            let f_trial = task.global_loss_grad(&trial, data, &mut trial_grad);
            let slack = 8.0 * f64::EPSILON * (1.0 + f.abs());
            if f_trial <= f - 0.5 * step * gnorm2 + slack || step < 1e-12 {
                theta = trial;
                f = f_trial;
                std::mem::swap(&mut grad, &mut trial_grad);
                break;
            }
            step *= 0.5;
        }
        step = (step * 2.0).min(max_step);
    }
    Err(Error::Precondition(format!(
        "optimum not reached to {tol:e} within {max_iter} iterations"
    )))
}
