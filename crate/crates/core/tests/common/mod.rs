//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use segab_core::baselines::SchemeId;
use segab_core::beamformer::RoundProblem;
use segab_core::channel::{dbm_to_watts, gen_channel_round, ChannelRound, DeviceGeometry};
use segab_core::linalg::{CVec, HermitianMat, C64};
use segab_core::rng::SeededRng;

pub fn power_w() -> f64 {
    dbm_to_watts(47.0)
}

pub fn noise_w() -> f64 {
    dbm_to_watts(-96.0)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn random_cvec(n: usize, rng: &mut SeededRng) -> CVec {
    rng.complex_normal_vec(n)
}

pub fn random_beams(n: usize, s: usize, rng: &mut SeededRng) -> Vec<CVec> {
    (0..s).map(|_| random_cvec(n, rng)).collect()
}

/// A physical-units problem on one random drop.
pub fn random_problem(n: usize, k: usize, gamma: f64, seed: u64) -> (ChannelRound, RoundProblem) {
    let mut rng = SeededRng::new(seed, 0x7E57);
    let geoms = DeviceGeometry::sample_drop(k, &mut rng);
    let round = gen_channel_round(&geoms, n, gamma, &mut rng).unwrap();
    let problem = RoundProblem::from_round(&round, vec![1.0 / k as f64; k], noise_w(), power_w()).unwrap();
    (round, problem)
}

// ---------------------------------------------------------------------------
// Dense eigensolver

/// All eigenvalues of a real symmetric matrix (row-major) by cyclic Jacobi
/// rotations, ascending.
pub fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = cs * akp - sn * akq;
                    a[k * n + q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = cs * apk - sn * aqk;
                    a[q * n + k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a Hermitian matrix through its real `2n × 2n` embedding
/// `[[Re, −Im], [Im, Re]]`; every eigenvalue appears twice there.
pub fn hermitian_eigenvalues(m: &HermitianMat) -> Vec<f64> {
    let n = m.dim();
    let d = 2 * n;
    let mut a = vec![0.0; d * d];
    for i in 0..n {
        for j in 0..n {
            let z = m.entry(i, j);
            a[i * d + j] = z.re;
            a[i * d + n + j] = -z.im;
            a[(n + i) * d + j] = z.im;
            a[(n + i) * d + n + j] = z.re;
        }
    }
    let all = jacobi_eigenvalues(a, d);
    all.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

pub fn max_eigenvalue(m: &HermitianMat) -> f64 {
    *hermitian_eigenvalues(m).last().unwrap()
}

/// `Σ_i w_i w_i^H` built entry by entry.
pub fn outer_sum_literal(w: &[CVec]) -> HermitianMat {
    let n = w[0].len();
    let mut data = vec![c(0.0, 0.0); n * n];
    for wi in w {
        for a in 0..n {
            for b in 0..n {
                data[a * n + b] += wi[a] * wi[b].conj();
            }
        }
    }
    HermitianMat::from_row_major(n, data).unwrap()
}

// ---------------------------------------------------------------------------
// Ball sampling

/// Uniform point in the complex ball of radius `r`: Gaussian direction in
/// `R^{2n}` and radius `r · U^{1/(2n)}`.
pub fn ball_point(n: usize, r: f64, rng: &mut SeededRng) -> CVec {
    let g: Vec<C64> = (0..n).map(|_| c(rng.normal(), rng.normal())).collect();
    let norm = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let radius = r * rng.uniform().powf(1.0 / (2 * n) as f64);
    CVec::from_vec(g.into_iter().map(|z| z * (radius / norm)).collect())
}

// ---------------------------------------------------------------------------
// Literal objective formulas

/// `|a^H b|²` written out with explicit sums.
pub fn inner_sq(a: &CVec, b: &CVec) -> f64 {
    let mut acc = c(0.0, 0.0);
    for m in 0..a.len() {
        acc += a[m].conj() * b[m];
    }
    acc.norm_sqr()
}

/// The per-round objective, term by term.
pub fn h_literal(w: &[CVec], h_hat: &[CVec], delta: &[CVec], r: &[f64], nu: f64, sigma2: f64) -> f64 {
    let s = w.len();
    let mut total = 0.0;
    for i in 0..s {
        for k in 0..h_hat.len() {
            let mut num = sigma2;
            for j in 0..s {
                num += inner_sq(&delta[k], &w[j]);
                if j != i {
                    num += inner_sq(&h_hat[k], &w[j]);
                }
            }
            total += r[k] * num / inner_sq(&h_hat[k], &w[i]);
        }
    }
    16.0 * s as f64 * nu * total
}

/// Epigraph values, device-major, with the leakage eigenvalue supplied by the caller.
pub fn mu_literal(w: &[CVec], problem: &RoundProblem, leakage: f64) -> Vec<f64> {
    let s = w.len();
    let mut out = Vec::new();
    for k in 0..problem.n_devices() {
        let r = problem.weights[k];
        for i in 0..s {
            let mut num = r * problem.epsilon[k].powi(2) * leakage + r * problem.noise_power;
            for j in 0..s {
                if j != i {
                    num += r * inner_sq(&problem.h_hat[k], &w[j]);
                }
            }
            out.push(num / inner_sq(&problem.h_hat[k], &w[i]));
        }
    }
    out
}

/// Sum of bound ratios used by the MinSum baseline, term by term.
pub fn surrogate_literal(w: &[CVec], problem: &RoundProblem) -> Vec<f64> {
    let s = w.len();
    let mut out = Vec::new();
    for k in 0..problem.n_devices() {
        let r = problem.weights[k];
        for i in 0..s {
            let mut num = problem.epsilon[k].powi(2) * problem.power + problem.noise_power;
            for j in (0..s).filter(|&j| j != i) {
                num += inner_sq(&problem.h_hat[k], &w[j]);
            }
            out.push(r * num / inner_sq(&problem.h_hat[k], &w[i]));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Convexified subproblem oracle

/// The convexified objective at anchor `v`, written from its definition:
/// `Σ_{k,i} r_k Σ_{j≠i} |ĥ_k^H w_j|² − 2 μ^i_k Re{(v_i^H ĥ_k)(ĥ_k^H w_i)} + μ^i_k |ĥ_k^H v_i|² + r_k ε_k² P + r_k σ²`.
pub fn sca_literal(problem: &RoundProblem, mu: &[f64], v: &[CVec], w: &[CVec]) -> f64 {
    sca_literal_scaled(problem, mu, v, &vec![1.0; mu.len()], w)
}

/// As [`sca_literal`], with term `(k, i)` multiplied by `scale[k·S + i]`.
pub fn sca_literal_scaled(problem: &RoundProblem, mu: &[f64], v: &[CVec], scale: &[f64], w: &[CVec]) -> f64 {
    let s = w.len();
    let mut total = 0.0;
    for (k, h) in problem.h_hat.iter().enumerate() {
        let r = problem.weights[k];
        for i in 0..s {
            let m = mu[k * s + i];
            let mut term = 0.0;
            for j in (0..s).filter(|&j| j != i) {
                term += r * inner_sq(h, &w[j]);
            }
            let hv = h.dot(&v[i]).conj();
            let hw = h.dot(&w[i]);
            term += -2.0 * m * (hv * hw).re + m * inner_sq(h, &v[i]);
            term += r * problem.epsilon[k].powi(2) * problem.power + r * problem.noise_power;
            total += scale[k * s + i] * term;
        }
    }
    total
}

fn sca_gradient(problem: &RoundProblem, mu: &[f64], v: &[CVec], scale: &[f64], w: &[CVec]) -> Vec<CVec> {
    let s = w.len();
    let n = problem.n_antennas();
    let mut g = vec![CVec::zeros(n); s];
    for (k, h) in problem.h_hat.iter().enumerate() {
        let r = problem.weights[k];
        let row = &scale[k * s..(k + 1) * s];
        let row_sum: f64 = row.iter().sum();
        for j in 0..s {
            // ∂/∂w̄_j of Σ_{i≠j} c_i r |ĥ^H w_j|² − 2 c_j μ_j Re{(v_j^H ĥ)(ĥ^H w_j)}, times 2
            let hw = h.dot(&w[j]);
            let hv = h.dot(&v[j]);
            let coeff = hw * (2.0 * r * (row_sum - row[j])) - hv * (2.0 * row[j] * mu[k * s + j]);
            g[j].axpy(coeff, h);
        }
    }
    g
}

fn project(w: Vec<CVec>, power: f64) -> Vec<CVec> {
    let norm = w.iter().map(CVec::norm_sqr).sum::<f64>().sqrt();
    if norm <= power.sqrt() {
        w
    } else {
        w.into_iter().map(|x| x.scaled(power.sqrt() / norm)).collect()
    }
}

/// FISTA with restarts on the convexified problem over the power ball.
pub fn sca_fista(problem: &RoundProblem, mu: &[f64], v: &[CVec], iters: usize) -> (Vec<CVec>, f64) {
    sca_fista_scaled(problem, mu, v, &vec![1.0; mu.len()], iters)
}

pub fn sca_fista_scaled(problem: &RoundProblem, mu: &[f64], v: &[CVec], scale: &[f64], iters: usize) -> (Vec<CVec>, f64) {
    let s = v.len();
    // Lipschitz constant of the gradient: 2 λ_max(Σ_k r_k (Σ_i c_ki) ĥ_k ĥ_k^H) for S > 1, plus a floor.
    let weighted: Vec<CVec> = problem
        .h_hat
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let row: f64 = scale[k * s..(k + 1) * s].iter().sum();
            h.scaled((problem.weights[k] * row).sqrt())
        })
        .collect();
    let lam = if s > 1 { max_eigenvalue(&outer_sum_literal(&weighted)) } else { 0.0 };
    let lip = (2.0 * lam).max(1e-12);
    let mut x = v.to_vec();
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let mut fx = sca_literal_scaled(problem, mu, v, scale, &x);
    for _ in 0..iters {
        let g = sca_gradient(problem, mu, v, scale, &y);
        let stepped: Vec<CVec> = y.iter().zip(&g).map(|(a, b)| a.sub(&b.scaled(1.0 / lip))).collect();
        let xn = project(stepped, problem.power);
        let fxn = sca_literal_scaled(problem, mu, v, scale, &xn);
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if fxn > fx {
            // adaptive restart
            y = x.clone();
            t = 1.0;
            continue;
        }
        y = xn
            .iter()
            .zip(&x)
            .map(|(a, b)| a.add(&a.sub(b).scaled((t - 1.0) / tn)))
            .collect();
        x = xn;
        fx = fxn;
        t = tn;
    }
    (x, fx)
}

// ---------------------------------------------------------------------------
// Finite differences

/// Central-difference gradient of `f` with respect to the real and imaginary
/// parts of every entry of `w`, packed as complex numbers.
pub fn fd_complex_gradient(w: &[CVec], h: f64, f: impl Fn(&[CVec]) -> f64) -> Vec<CVec> {
    let mut out = vec![CVec::zeros(w[0].len()); w.len()];
    for i in 0..w.len() {
        for m in 0..w[i].len() {
            let mut parts = [0.0; 2];
            for (p, dir) in [c(1.0, 0.0), c(0.0, 1.0)].into_iter().enumerate() {
                let mut plus = w.to_vec();
                let mut minus = w.to_vec();
                plus[i][m] += dir * h;
                minus[i][m] -= dir * h;
                parts[p] = (f(&plus) - f(&minus)) / (2.0 * h);
            }
            out[i][m] = c(parts[0], parts[1]);
        }
    }
    out
}

pub fn fd_real_gradient(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn scheme_pos(s: SchemeId) -> usize {
    SchemeId::ALL.iter().position(|&x| x == s).unwrap()
}

// ---------------------------------------------------------------------------
// Per-device subproblem

pub fn random_xdsub(s: usize, rng: &mut SeededRng) -> (Vec<C64>, Vec<C64>, Vec<f64>, Vec<f64>, f64, f64) {
    let e1 = (0..s).map(|_| rng.complex_normal()).collect();
    let e2 = (0..s).map(|_| rng.complex_normal()).collect();
    let e3 = (0..s).map(|_| rng.uniform()).collect();
    let mu = (0..s).map(|_| 0.1 + 2.0 * rng.uniform()).collect();
    let r = 0.1 + rng.uniform();
    let rho = 0.05 + rng.uniform();
    (e1, e2, e3, mu, r, rho)
}

/// δ eliminated through the active constraints, then plain gradient descent on
/// the remaining quadratic in `x`.
pub fn elimination_oracle(e1: &[C64], e2: &[C64], e3: &[f64], mu: &[f64], r: f64, rho: f64) -> f64 {
    elimination_oracle_scaled(e1, e2, e3, mu, &vec![r; e1.len()], rho)
}

/// As [`elimination_oracle`] with a separate interference weight `r_i` per constraint.
pub fn elimination_oracle_scaled(e1: &[C64], e2: &[C64], e3: &[f64], mu: &[f64], r: &[f64], rho: f64) -> f64 {
    let s = e1.len();
    // Σ|x_j − e1_j|² − (2/ρ) Σ_i δ_i with δ_i = 2μ_i Re{e2_i x_i} − e3_i − r_i Σ_{j≠i} |x_j|²
    let f = |x: &[C64]| {
        let all: f64 = x.iter().map(C64::norm_sqr).sum();
        let fit: f64 = x.iter().zip(e1).map(|(a, b)| (a - b).norm_sqr()).sum();
        let delta: f64 = (0..s)
            .map(|i| 2.0 * mu[i] * (e2[i] * x[i]).re - e3[i] - r[i] * (all - x[i].norm_sqr()))
            .sum();
        fit - 2.0 / rho * delta
    };
    let r_total: f64 = r.iter().sum();
    let mut x = e1.to_vec();
    let lip = 2.0 + 4.0 * r_total / rho;
    for _ in 0..200_000 {
        // gradient w.r.t. (Re x_j, Im x_j) packed as complex
        let g: Vec<C64> = (0..s)
            .map(|j| (x[j] - e1[j]) * 2.0 + x[j] * (4.0 * (r_total - r[j]) / rho) - e2[j].conj() * (4.0 * mu[j] / rho))
            .collect();
        let norm: f64 = g.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
        if norm < 1e-13 {
            break;
        }
        for (xj, gj) in x.iter_mut().zip(&g) {
            *xj -= gj / lip;
        }
    }
    f(&x)
}
