//! Device-side mini-batch SGD and server-side weighted aggregation.

use super::data::Samples;
use super::task::Task;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// A differentiable per-device loss over rows of [`Samples`].
pub trait LocalObjective {
    fn dim(&self) -> usize;

    /// Loss over `rows` (all rows when `None`); the gradient goes into `grad`.
    fn loss_grad(&self, theta: &[f64], data: &Samples, rows: Option<&[usize]>, grad: &mut [f64]) -> f64;
}

impl LocalObjective for Task {
    fn dim(&self) -> usize {
        Task::dim(self)
    }

    fn loss_grad(&self, theta: &[f64], data: &Samples, rows: Option<&[usize]>, grad: &mut [f64]) -> f64 {
        Task::loss_grad(self, theta, data, rows, grad)
    }
}

/// Tolerance on `|Σ r_k − 1|` accepted by [`aggregate`].
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    /// `θ^J`.
    pub theta: Vec<f64>,
    /// `Δθ = θ^J − θ^0`.
    pub delta: Vec<f64>,
}

/// Walks a shuffled permutation of the rows and reshuffles once exhausted, so
/// no row repeats within an epoch.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    order: Vec<usize>,
    pos: usize,
}

impl EpochSampler {
    pub fn new(n_rows: usize, rng: &mut SeededRng) -> Self {
        let mut order: Vec<usize> = (0..n_rows).collect();
        rng.shuffle(&mut order);
        Self { order, pos: 0 }
    }

    /// Next `size` rows. A batch never straddles two epochs.
    pub fn next_batch(&mut self, size: usize, rng: &mut SeededRng) -> Vec<usize> {
        if self.pos + size > self.order.len() {
            rng.shuffle(&mut self.order);
            self.pos = 0;
        }
        let batch = self.order[self.pos..self.pos + size].to_vec();
        self.pos += size;
        batch
    }
}

/// One local step as seen by an observer: the iterate before the step, the
/// mini-batch drawn, and the mini-batch gradient.
pub struct LocalStep<'a> {
    pub tau: usize,
    pub theta: &'a [f64],
    pub batch: &'a [usize],
    pub grad: &'a [f64],
}

fn check_args<O: LocalObjective + ?Sized>(theta0: &[f64], task: &O, data: &Samples, eta: f64, iters: usize, batch: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("local dataset is empty"));
    }
    if theta0.len() != task.dim() {
        return Err(Error::invalid(format!(
            "model has {} entries, task expects {}",
            theta0.len(),
            task.dim()
        )));
    }
    if !(eta >= 0.0) || iters == 0 {
        return Err(Error::invalid("learning rate must be nonnegative and J positive"));
    }
    if batch == 0 || batch > data.len() {
        return Err(Error::invalid(format!(
            "batch size {batch} must lie in [1, {}]",
            data.len()
        )));
    }
    Ok(())
}

/// `J` steps of `θ ← θ − η ∇F_k(θ; B)`.
pub fn local_sgd<O: LocalObjective + ?Sized>(
    task: &O,
    theta0: &[f64],
    data: &Samples,
    eta: f64,
    iters: usize,
    batch_size: usize,
    rng: &mut SeededRng,
) -> Result<LocalUpdate> {
    local_sgd_observed(task, theta0, data, eta, iters, batch_size, rng, |_| {})
}

/// [`local_sgd`] with a callback invoked before every step.
#[allow(clippy::too_many_arguments)]
pub fn local_sgd_observed<O: LocalObjective + ?Sized>(
    task: &O,
    theta0: &[f64],
    data: &Samples,
    eta: f64,
    iters: usize,
    batch_size: usize,
    rng: &mut SeededRng,
    mut observe: impl FnMut(LocalStep<'_>),
) -> Result<LocalUpdate> {
    check_args(theta0, task, data, eta, iters, batch_size)?;
    let mut sampler = EpochSampler::new(data.len(), rng);
    let mut theta = theta0.to_vec();
    let mut grad = vec![0.0; theta.len()];
    for tau in 0..iters {
        let batch = sampler.next_batch(batch_size, rng);
        task.loss_grad(&theta, data, Some(&batch), &mut grad);
        observe(LocalStep {
            tau,
            theta: &theta,
            batch: &batch,
            grad: &grad,
        });
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= eta * g;
        }
    }
    let delta = theta.iter().zip(theta0).map(|(a, b)| a - b).collect();
    Ok(LocalUpdate { theta, delta })
}

/// `Σ_k r_k θ_k`.
pub fn aggregate(models: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if models.is_empty() || models.len() != weights.len() {
        return Err(Error::invalid("one weight per local model is required"));
    }
    let sum: f64 = weights.iter().sum();
    if !((sum - 1.0).abs() <= WEIGHT_SUM_TOL) {
        return Err(Error::invalid(format!("weights sum to {sum}, not 1")));
    }
    let dim = models[0].len();
    if models.iter().any(|m| m.len() != dim) {
        return Err(Error::invalid("local models differ in dimension"));
    }
    let mut out = vec![0.0; dim];
    for (m, &r) in models.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(m) {
            *o += r * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_covers_each_epoch_once() {
        let mut rng = SeededRng::new(5, 1);
        let mut s = EpochSampler::new(12, &mut rng);
        let mut seen: Vec<usize> = (0..3).flat_map(|_| s.next_batch(4, &mut rng)).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn aggregate_examples() {
        let mean = aggregate(&[vec![1.0, 2.0], vec![3.0, 6.0]], &[0.5, 0.5]).unwrap();
        assert_eq!(mean, vec![2.0, 4.0]);
        let id = aggregate(&[vec![7.0, -1.0]], &[1.0]).unwrap();
        assert_eq!(id, vec![7.0, -1.0]);
        let mix = aggregate(&[vec![0.0; 3], vec![4.0; 3]], &[0.25, 0.75]).unwrap();
        assert_eq!(mix, vec![3.0; 3]);
        assert!(aggregate(&[vec![1.0], vec![1.0]], &[0.5, 0.5 + 1e-8]).is_err());
    }

    #[test]
    fn zero_rate_keeps_model() {
        let task = Task::logistic(2, 2, 0.1);
        let data = Samples::new(2, vec![1.0, 0.0, 0.0, 1.0], vec![0, 1]).unwrap();
        let theta0 = vec![0.3; task.dim()];
        let out = local_sgd(&task, &theta0, &data, 0.0, 4, 1, &mut SeededRng::new(0, 0)).unwrap();
        assert_eq!(out.theta, theta0);
        assert!(out.delta.iter().all(|&d| d == 0.0));
    }
}
