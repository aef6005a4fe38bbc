mod common;

use common::*;
use segab_core::beamformer::qcqp::xdsub_objective;
use segab_core::beamformer::{
    admm_run_scaled, admm_solve, eval_worst_case_h, mrt_initializer, mu_update, qcqp_xdsub, qcqp_xdsub_reference,
    qcqp_xdsub_scaled, sca_objective, sca_objective_scaled, solve_round, worst_case_error, AdmmSettings, BeamSettings,
    RoundProblem,
};
use segab_core::linalg::{CVec, C64};
use segab_core::rng::SeededRng;

#[test]
fn scalar_channel_uses_full_power() {
    let h = CVec::from_vec(vec![c(0.3, -0.4)]);
    let sigma2 = 0.01;
    let p = 2.0;
    let problem = RoundProblem::new(vec![h.clone()], vec![0.0], vec![1.0], sigma2, p).unwrap();
    let sol = solve_round(&problem, 1, &BeamSettings::default()).unwrap();
    assert!((sol.w[0].norm_sqr() - p).abs() < 1e-9);
    let want_mu = sigma2 / (p * h.norm_sqr());
    assert!(rel_err(sol.mu[0], want_mu) < 1e-9);
}

#[test]
fn outer_objective_never_increases() {
    for seed in 0..20 {
        let (_, problem) = random_problem(8, 5, 0.1, 100 + seed);
        let sol = solve_round(&problem, 3, &BeamSettings::default()).unwrap();
        for pair in sol.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "seed {seed}: {:?}", sol.objective_trace);
        }
        assert!(sol.w.iter().map(CVec::norm_sqr).sum::<f64>() <= problem.power * (1.0 + 1e-9));
    }
}

#[test]
fn solution_improves_on_initializer() {
    let mut wins = 0;
    for seed in 0..20 {
        let (_, problem) = random_problem(8, 5, 0.1, 200 + seed);
        let sol = solve_round(&problem, 3, &BeamSettings::default()).unwrap();
        let init = mrt_initializer(&problem, 3).unwrap();
        if eval_worst_case_h(&sol.w, &problem, 1.0).unwrap() <= eval_worst_case_h(&init, &problem, 1.0).unwrap() {
            wins += 1;
        }
    }
    assert!(wins >= 18, "{wins}/20");
}

#[test]
fn worst_case_error_beats_ball_samples() {
    let mut rng = SeededRng::new(31, 0);
    for _ in 0..5 {
        let w = random_beams(3, 2, &mut rng);
        let eps = 0.4;
        let dh = worst_case_error(&w, eps).unwrap();
        let best: f64 = w.iter().map(|wi| inner_sq(&dh, wi)).sum();
        for _ in 0..10_000 {
            let u = ball_point(3, eps, &mut rng);
            let v: f64 = w.iter().map(|wi| inner_sq(&u, wi)).sum();
            assert!(v <= best + 1e-9);
        }
    }
}

fn admm_vs_oracle(n: usize, s: usize, k: usize, seed: u64, mu_scale: f64) -> (f64, f64, usize) {
    let (_, physical) = random_problem(n, k, 0.1, seed);
    let (problem, _) = physical.normalized();
    let v = mrt_initializer(&problem, s).unwrap();
    let mu: Vec<f64> = mu_update(&v, &problem).unwrap().iter().map(|m| m * mu_scale).collect();
    let out = admm_solve(&problem, &mu, &v, &AdmmSettings::default()).unwrap();
    let literal = sca_literal(&problem, &mu, &v, &out.w);
    assert!((out.objective - literal).abs() < 1e-10 * (1.0 + literal.abs()));
    let (_, oracle) = sca_fista(&problem, &mu, &v, 20_000);
    (out.objective, oracle, out.iterations)
}

#[test]
fn admm_matches_projected_gradient_oracle_small() {
    for mu_scale in [1.0, 1.5] {
        let (got, want, _) = admm_vs_oracle(2, 1, 1, 3, mu_scale);
        assert!((got - want).abs() < 1e-5 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn admm_matches_projected_gradient_oracle() {
    for (seed, (n, s, k)) in [(4, 2, 3), (8, 3, 5), (6, 3, 4)].into_iter().enumerate() {
        let (got, want, iters) = admm_vs_oracle(n, s, k, 50 + seed as u64, 1.0);
        assert!(rel_err(got, want) < 1e-5, "{got} vs {want}");
        assert!(iters < 1000);
    }
}

#[test]
fn sca_objective_matches_literal() {
    let (_, problem) = random_problem(5, 3, 0.2, 9);
    let mut rng = SeededRng::new(9, 1);
    let v = random_beams(5, 2, &mut rng);
    let w = random_beams(5, 2, &mut rng);
    let mu: Vec<f64> = (0..6).map(|_| 0.5 + rng.uniform()).collect();
    assert!(rel_err(sca_objective(&problem, &mu, &v, &w), sca_literal(&problem, &mu, &v, &w)) < 1e-12);
}

#[test]
fn single_segment_subproblem_matches_grid_search() {
    let mut rng = SeededRng::new(14, 0);
    for _ in 0..5 {
        let (e1, e2, e3, mu, r, rho) = random_xdsub(1, &mut rng);
        let sol = qcqp_xdsub(&e1, &e2, &e3, &mu, r, rho).unwrap();
        // δ tight: objective |x − e1|² − (2/ρ)(2μ Re{e2 x} − e3)
        let f = |x: C64| (x - e1[0]).norm_sqr() - 2.0 / rho * (2.0 * mu[0] * (e2[0] * x).re - e3[0]);
        let center = sol.x[0];
        let mut best = (f64::INFINITY, center);
        let span = 1.0;
        let steps = 400;
        for a in 0..=steps {
            for b in 0..=steps {
                let x = center + c(span * (2.0 * a as f64 / steps as f64 - 1.0), span * (2.0 * b as f64 / steps as f64 - 1.0));
                let v = f(x);
                if v < best.0 {
                    best = (v, x);
                }
            }
        }
        assert!((best.1 - center).norm() <= 2.0 * span / steps as f64);
        assert!(f(center) <= best.0 + 1e-12);
    }
}

#[test]
fn closed_form_subproblem_matches_elimination_and_barrier() {
    let mut rng = SeededRng::new(15, 0);
    for s in [2, 3, 3, 4] {
        let (e1, e2, e3, mu, r, rho) = random_xdsub(s, &mut rng);
        let sol = qcqp_xdsub(&e1, &e2, &e3, &mu, r, rho).unwrap();
        let closed = xdsub_objective(&sol.x, &sol.delta, &e1, rho);
        let elim = elimination_oracle(&e1, &e2, &e3, &mu, r, rho);
        assert!((closed - elim).abs() <= 1e-8 * (1.0 + closed.abs()), "{closed} vs {elim}");
        let refsol = qcqp_xdsub_reference(&e1, &e2, &e3, &mu, r, rho).unwrap();
        let barrier = xdsub_objective(&refsol.x, &refsol.delta, &e1, rho);
        assert!((closed - barrier).abs() <= 1e-6 * (1.0 + closed.abs()));
    }
}

#[test]
fn closed_form_with_per_constraint_weights_matches_elimination() {
    let mut rng = SeededRng::new(16, 0);
    for s in [2, 3, 4, 5] {
        let (e1, e2, e3, mu, _, rho) = random_xdsub(s, &mut rng);
        let r: Vec<f64> = (0..s).map(|_| 0.05 + 2.0 * rng.uniform()).collect();
        let sol = qcqp_xdsub_scaled(&e1, &e2, &e3, &mu, &r, rho).unwrap();
        let closed = xdsub_objective(&sol.x, &sol.delta, &e1, rho);
        let elim = elimination_oracle_scaled(&e1, &e2, &e3, &mu, &r, rho);
        assert!((closed - elim).abs() <= 1e-8 * (1.0 + closed.abs()), "{closed} vs {elim}");
    }
}

fn random_scale(len: usize, rng: &mut SeededRng) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| 0.1 + 3.0 * rng.uniform()).collect();
    let mean = raw.iter().sum::<f64>() / len as f64;
    raw.into_iter().map(|c| c / mean).collect()
}

#[test]
fn scaled_sca_objective_matches_literal() {
    let (_, problem) = random_problem(5, 3, 0.2, 10);
    let mut rng = SeededRng::new(10, 1);
    let v = random_beams(5, 2, &mut rng);
    let w = random_beams(5, 2, &mut rng);
    let mu: Vec<f64> = (0..6).map(|_| 0.5 + rng.uniform()).collect();
    let scale = random_scale(6, &mut rng);
    let got = sca_objective_scaled(&problem, &mu, &v, &scale, &w);
    assert!(rel_err(got, sca_literal_scaled(&problem, &mu, &v, &scale, &w)) < 1e-12);
}

#[test]
fn scaled_admm_matches_weighted_oracle() {
    let mut rng = SeededRng::new(17, 0);
    for (seed, (n, s, k)) in [(4, 2, 3), (6, 3, 4), (8, 3, 5)].into_iter().enumerate() {
        let (_, physical) = random_problem(n, k, 0.1, 60 + seed as u64);
        let (problem, _) = physical.normalized();
        let v = mrt_initializer(&problem, s).unwrap();
        let mu = mu_update(&v, &problem).unwrap();
        let scale = random_scale(mu.len(), &mut rng);
        let out = admm_run_scaled(&problem, &mu, &v, &scale, &AdmmSettings::default()).unwrap();
        let (_, oracle) = sca_fista_scaled(&problem, &mu, &v, &scale, 20_000);
        assert!(rel_err(out.objective, oracle) < 1e-5, "{} vs {oracle}", out.objective);
    }
}

#[test]
fn admm_rejects_bad_scale() {
    let (_, physical) = random_problem(4, 2, 0.1, 70);
    let (problem, _) = physical.normalized();
    let v = mrt_initializer(&problem, 2).unwrap();
    let mu = mu_update(&v, &problem).unwrap();
    let settings = AdmmSettings::default();
    assert!(admm_run_scaled(&problem, &mu, &v, &[1.0; 3], &settings).is_err());
    assert!(admm_run_scaled(&problem, &mu, &v, &[1.0, 1.0, 0.0, 1.0], &settings).is_err());
}

#[test]
fn normalized_slack_reaches_lower_objective() {
    let mut better = 0;
    let plain = BeamSettings {
        normalize_slack: false,
        ..BeamSettings::default()
    };
    for seed in 0..10 {
        let (_, problem) = random_problem(16, 5, 0.1, 300 + seed);
        let a = solve_round(&problem, 3, &BeamSettings::default()).unwrap();
        let b = solve_round(&problem, 3, &plain).unwrap();
        let last = |t: &[f64]| *t.last().unwrap();
        if last(&a.objective_trace) <= last(&b.objective_trace) {
            better += 1;
        }
    }
    assert!(better >= 9, "{better}/10");
}
