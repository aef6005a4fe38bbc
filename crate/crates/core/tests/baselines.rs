mod common;

use common::*;
use segab_core::baselines::{
    minmax_beamformer, minmax_subgradient, minmax_value, minsum_beamformer, minsum_gradient, minsum_value,
    surrogate_ratios, FirstOrderSettings,
};
use segab_core::beamformer::RoundProblem;
use segab_core::linalg::{stacked_norm_sqr, CVec};
use segab_core::rng::SeededRng;

fn stacked_diff(a: &[CVec], b: &[CVec]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.sub(y).norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn ratios_match_literal_form() {
    let (_, problem) = random_problem(6, 4, 0.1, 1);
    let mut rng = SeededRng::new(1, 1);
    let w = random_beams(6, 3, &mut rng);
    for (a, b) in surrogate_ratios(&w, &problem).iter().zip(surrogate_literal(&w, &problem)) {
        assert!(rel_err(*a, b) < 1e-12);
    }
}

#[test]
fn sum_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let (_, physical) = random_problem(4, 3, 0.1, 10 + seed);
        let (problem, _) = physical.normalized();
        let mut rng = SeededRng::new(seed, 2);
        let w: Vec<CVec> = random_beams(4, 2, &mut rng).iter().map(|x| x.scaled(0.3)).collect();
        let g = minsum_gradient(&w, &problem);
        let fd = fd_complex_gradient(&w, 1e-6, |x| minsum_value(x, &problem));
        let rel = stacked_diff(&g, &fd) / stacked_norm_sqr(&g).sqrt();
        assert!(rel < 1e-4, "seed {seed}: {rel}");
    }
}

#[test]
fn max_subgradient_is_gradient_of_active_term() {
    let (_, physical) = random_problem(4, 3, 0.1, 20);
    let (problem, _) = physical.normalized();
    let mut rng = SeededRng::new(20, 2);
    let w: Vec<CVec> = random_beams(4, 2, &mut rng).iter().map(|x| x.scaled(0.3)).collect();
    let g = minmax_subgradient(&w, &problem);
    // The active term is unique here, so the max is differentiable at w.
    let fd = fd_complex_gradient(&w, 1e-7, |x| minmax_value(x, &problem));
    let rel = stacked_diff(&g, &fd) / stacked_norm_sqr(&g).sqrt();
    assert!(rel < 1e-4, "{rel}");
}

#[test]
fn scalar_instance_reaches_full_power() {
    let h = CVec::from_vec(vec![c(2e-5, -1e-5)]);
    let p = power_w();
    let sigma2 = noise_w();
    let problem = RoundProblem::new(vec![h.clone()], vec![0.0], vec![1.0], sigma2, p).unwrap();
    let settings = FirstOrderSettings::default();
    let sum = minsum_beamformer(&problem, 1, &settings).unwrap();
    let max = minmax_beamformer(&problem, 1, &settings).unwrap();
    for sol in [&sum, &max] {
        assert!(rel_err(sol.w[0].norm_sqr(), p) < 1e-9);
        assert!(rel_err(sol.best_value, sigma2 / (p * h.norm_sqr())) < 1e-9);
    }
}

#[test]
fn single_term_max_equals_sum() {
    let (_, problem) = random_problem(4, 1, 0.1, 30);
    let settings = FirstOrderSettings::default();
    let sum = minsum_beamformer(&problem, 1, &settings).unwrap();
    let max = minmax_beamformer(&problem, 1, &settings).unwrap();
    assert!(rel_err(sum.best_value, max.best_value) < 1e-3);
}

#[test]
fn symmetric_pair_gets_balanced_ratios() {
    let a = 1e-5;
    let h1 = CVec::from_vec(vec![c(a, 0.0), c(0.0, 0.0)]);
    let h2 = CVec::from_vec(vec![c(0.0, 0.0), c(0.0, a)]);
    let problem = RoundProblem::new(vec![h1, h2], vec![0.1 * a; 2], vec![0.5; 2], noise_w(), power_w()).unwrap();
    let sol = minmax_beamformer(&problem, 1, &FirstOrderSettings::default()).unwrap();
    let r = surrogate_ratios(&sol.w, &problem);
    assert!(rel_err(r[0], r[1]) < 0.05, "{r:?}");
}

#[test]
fn iterates_respect_power_and_best_trace_is_monotone() {
    for seed in 0..5 {
        let (_, problem) = random_problem(8, 5, 0.1, 40 + seed);
        let settings = FirstOrderSettings {
            max_iter: 300,
            ..FirstOrderSettings::default()
        };
        for sol in [
            minsum_beamformer(&problem, 3, &settings).unwrap(),
            minmax_beamformer(&problem, 3, &settings).unwrap(),
        ] {
            assert!(stacked_norm_sqr(&sol.w) <= problem.power * (1.0 + 1e-12));
            for pair in sol.best_trace.windows(2) {
                assert!(pair[1] <= pair[0]);
            }
        }
    }
}
