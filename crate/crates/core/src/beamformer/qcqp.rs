//! The per-device `(x, δ)` subproblem of the ADMM splitting.
//!
//! ```text
//! minimize   Σ_j |x_j − e1_j|² − (2/ρ) δ_j
//! subject to r_i Σ_{j≠i} |x_j|² − 2 μ_i Re{e2_i x_i} + δ_i + e3_i ≤ 0,   i = 1..S
//! ```
//!
//! The ADMM splitting uses one `r` per device; a per-constraint `r_i` arises
//! when the constraints are rescaled.
//!
//! Each `δ_i` has a negative objective coefficient and appears in exactly one
//! constraint, so every constraint is tight at the optimum. Substituting the
//! tight constraints leaves a separable, strictly convex quadratic in `x`
//! with a closed-form minimizer. [`qcqp_xdsub_reference`] solves the original
//! problem with a log-barrier interior-point method instead.

use crate::error::{Error, Result};
use crate::linalg::{solve_dense_real, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct XdSolution {
    pub x: Vec<C64>,
    pub delta: Vec<f64>,
}

fn validate(e1: &[C64], e2: &[C64], e3: &[f64], mu: &[f64], rho: f64) -> Result<()> {
    let s = e1.len();
    if s == 0 || e2.len() != s || e3.len() != s || mu.len() != s {
        return Err(Error::invalid("xdsub inputs must share a positive length"));
    }
    if !(rho > 0.0) {
        return Err(Error::invalid("rho must be positive"));
    }
    if mu.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::invalid("mu must be positive"));
    }
    Ok(())
}

/// Constraint `i` evaluated without its `δ_i` term.
pub fn constraint_base(x: &[C64], e2: &[C64], e3: &[f64], mu: &[f64], r: f64, i: usize) -> f64 {
    let others: f64 = x
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, xj)| xj.norm_sqr())
        .sum();
    r * others - 2.0 * mu[i] * (e2[i] * x[i]).re + e3[i]
}

pub fn xdsub_objective(x: &[C64], delta: &[f64], e1: &[C64], rho: f64) -> f64 {
    x.iter()
        .zip(e1)
        .zip(delta)
        .map(|((xj, e), d)| (xj - e).norm_sqr() - 2.0 / rho * d)
        .sum()
}

/// Closed-form optimum by constraint-activity elimination.
pub fn qcqp_xdsub(
    e1: &[C64],
    e2: &[C64],
    e3: &[f64],
    mu: &[f64],
    r: f64,
    rho: f64,
) -> Result<XdSolution> {
    qcqp_xdsub_scaled(e1, e2, e3, mu, &vec![r; e1.len()], rho)
}

/// [`qcqp_xdsub`] with a separate interference weight `r_i` per constraint.
/// Eliminating `δ` leaves the coefficient `1 + (2/ρ) Σ_{i≠j} r_i` on `|x_j|²`.
pub fn qcqp_xdsub_scaled(
    e1: &[C64],
    e2: &[C64],
    e3: &[f64],
    mu: &[f64],
    r: &[f64],
    rho: f64,
) -> Result<XdSolution> {
    validate(e1, e2, e3, mu, rho)?;
    let s = e1.len();
    if r.len() != s || r.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("one nonnegative interference weight per constraint is required"));
    }
    let r_total: f64 = r.iter().sum();
    let x: Vec<C64> = (0..s)
        .map(|j| {
            let denom = 1.0 + 2.0 * (r_total - r[j]) / rho;
            (e1[j] + e2[j].conj() * (2.0 * mu[j] / rho)) / denom
        })
        .collect();
    let delta = (0..s)
        .map(|i| -constraint_base(&x, e2, e3, mu, r[i], i))
        .collect();
    Ok(XdSolution { x, delta })
}

/// A convex quadratic `zᵀ P z + qᵀ z + c` over real variables (`P` symmetric PSD, row-major).
#[derive(Debug, Clone)]
pub struct RealQuadratic {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub c: f64,
}

impl RealQuadratic {
    fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        let n = self.dim();
        let mut v = self.c;
        for i in 0..n {
            v += self.q[i] * z[i];
            let row = &self.p[i * n..(i + 1) * n];
            v += z[i] * row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        }
        v
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let row = &self.p[i * n..(i + 1) * n];
                self.q[i] + 2.0 * row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}

/// Log-barrier interior-point method for a small convex QCQP
/// `min f0(z) s.t. f_i(z) ≤ 0`, started from a strictly feasible `z0`.
/// Stops once the duality-gap bound `m / t` falls below `gap_tol`.
pub fn barrier_solve(
    objective: &RealQuadratic,
    constraints: &[RealQuadratic],
    z0: Vec<f64>,
    gap_tol: f64,
) -> Result<Vec<f64>> {
    let n = objective.dim();
    let m = constraints.len() as f64;
    if constraints.iter().any(|c| !(c.value(&z0) < 0.0)) {
        return Err(Error::invalid("barrier start is not strictly feasible"));
    }
    let mut z = z0;
    let mut t = 1.0;
    let barrier = |z: &[f64], t: f64| -> f64 {
        let mut v = t * objective.value(z);
        for c in constraints {
            let fi = c.value(z);
            if fi >= 0.0 {
                return f64::INFINITY;
            }
            v -= (-fi).ln();
        }
        v
    };
    for _outer in 0..200 {
        for _newton in 0..200 {
            let mut grad: Vec<f64> = objective.gradient(&z).iter().map(|g| t * g).collect();
            let mut hess: Vec<f64> = objective.p.iter().map(|p| 2.0 * t * p).collect();
            for c in constraints {
                let fi = c.value(&z);
                let gi = c.gradient(&z);
                let inv = -1.0 / fi;
                for a in 0..n {
                    grad[a] += inv * gi[a];
                    for b in 0..n {
                        hess[a * n + b] += inv * 2.0 * c.p[a * n + b] + inv * inv * gi[a] * gi[b];
                    }
                }
            }
            let mut step: Vec<f64> = grad.iter().map(|g| -g).collect();
            let mut h = hess;
            solve_dense_real(&mut h, &mut step)
                .ok_or_else(|| Error::invalid("singular Newton system in barrier solve"))?;
            let decrement: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
            if decrement / 2.0 <= 1e-14 {
                break;
            }
            let f_now = barrier(&z, t);
            let mut alpha = 1.0;
            loop {
                let cand: Vec<f64> = z.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
                let f_cand = barrier(&cand, t);
                if f_cand <= f_now - 0.25 * alpha * decrement {
                    z = cand;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-16 {
                    break;
                }
            }
            if alpha < 1e-16 {
                break;
            }
        }
        if m / t < gap_tol {
            return Ok(z);
        }
        t *= 10.0;
    }
    Ok(z)
}

/// Interior-point reference solution of the per-device subproblem, working on
/// the original constraints with `δ` as free variables.
pub fn qcqp_xdsub_reference(
    e1: &[C64],
    e2: &[C64],
    e3: &[f64],
    mu: &[f64],
    r: f64,
    rho: f64,
) -> Result<XdSolution> {
    validate(e1, e2, e3, mu, rho)?;
    let s = e1.len();
    // z = [Re x (s), Im x (s), δ (s)]
    let n = 3 * s;
    let re = |j: usize| j;
    let im = |j: usize| s + j;
    let dl = |j: usize| 2 * s + j;

    let mut p0 = vec![0.0; n * n];
    let mut q0 = vec![0.0; n];
    let mut c0 = 0.0;
    for j in 0..s {
        p0[re(j) * n + re(j)] = 1.0;
        p0[im(j) * n + im(j)] = 1.0;
        q0[re(j)] = -2.0 * e1[j].re;
        q0[im(j)] = -2.0 * e1[j].im;
        q0[dl(j)] = -2.0 / rho;
        c0 += e1[j].norm_sqr();
    }
    let objective = RealQuadratic { p: p0, q: q0, c: c0 };

    let constraints: Vec<RealQuadratic> = (0..s)
        .map(|i| {
            let mut p = vec![0.0; n * n];
            let mut q = vec![0.0; n];
            for j in (0..s).filter(|&j| j != i) {
                p[re(j) * n + re(j)] = r;
                p[im(j) * n + im(j)] = r;
            }
            // −2μ Re{e2 x} = −2μ (Re e2 Re x − Im e2 Im x)
            q[re(i)] = -2.0 * mu[i] * e2[i].re;
            q[im(i)] = 2.0 * mu[i] * e2[i].im;
            q[dl(i)] = 1.0;
            RealQuadratic { p, q, c: e3[i] }
        })
        .collect();

    let mut z0 = vec![0.0; n];
    for j in 0..s {
        z0[re(j)] = e1[j].re;
        z0[im(j)] = e1[j].im;
    }
    for i in 0..s {
        let x: Vec<C64> = e1.to_vec();
        z0[dl(i)] = -constraint_base(&x, e2, e3, mu, r, i) - 1.0;
    }
    let z = barrier_solve(&objective, &constraints, z0, 1e-11)?;
    Ok(XdSolution {
        x: (0..s).map(|j| C64::new(z[re(j)], z[im(j)])).collect(),
        delta: (0..s).map(|j| z[dl(j)]).collect(),
    })
}
