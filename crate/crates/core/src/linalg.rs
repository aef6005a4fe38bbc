//! Dense complex linear algebra used across the simulator.
//!
//! Dimensions here are small (tens of antennas, a handful of segments), so
//! everything is plain row-major `Vec` storage with direct factorizations.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub type C64 = Complex64;

pub const DEFAULT_EIG_TOL: f64 = 1e-10;
pub const DEFAULT_EIG_MAX_ITER: usize = 10_000;

/// Seed of the fallback start vector used when power iteration stalls.
const EIG_FALLBACK_SEED: u64 = 0x5EED_E16E;

/// A complex column vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CVec(Vec<C64>);

impl CVec {
    pub fn from_vec(entries: Vec<C64>) -> Self {
        CVec(entries)
    }

    pub fn zeros(n: usize) -> Self {
        CVec(vec![C64::new(0.0, 0.0); n])
    }

    pub fn from_real(values: &[f64]) -> Self {
        CVec(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    pub fn iter_mut(&mut self) -> std::slice::IterMut<'_, C64> {
        self.0.iter_mut()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Hermitian inner product `self^H other`.
    pub fn dot(&self, other: &CVec) -> C64 {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> CVec {
        CVec(self.0.iter().map(|z| z * factor).collect())
    }

    pub fn scaled_c(&self, factor: C64) -> CVec {
        CVec(self.0.iter().map(|z| z * factor).collect())
    }

    pub fn add(&self, other: &CVec) -> CVec {
        debug_assert_eq!(self.len(), other.len());
        CVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &CVec) -> CVec {
        debug_assert_eq!(self.len(), other.len());
        CVec(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: C64, x: &CVec) {
        debug_assert_eq!(self.len(), x.len());
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            *a += alpha * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Real vector `[Re(v); Im(v)]`.
    pub fn interleave_real(&self) -> Vec<f64> {
        self.0
            .iter()
            .map(|z| z.re)
            .chain(self.0.iter().map(|z| z.im))
            .collect()
    }
}

impl Index<usize> for CVec {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVec {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl FromIterator<C64> for CVec {
    fn from_iter<I: IntoIterator<Item = C64>>(iter: I) -> Self {
        CVec(iter.into_iter().collect())
    }
}

/// Total squared norm of a stacked list of vectors.
pub fn stacked_norm_sqr(vs: &[CVec]) -> f64 {
    vs.iter().map(CVec::norm_sqr).sum()
}

/// A dense Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMat {
    dim: usize,
    data: Vec<C64>,
}

impl HermitianMat {
    /// Builds from row-major entries, rejecting matrices that are not Hermitian
    /// to within `1e-9` (scaled by the largest entry magnitude).
    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {dim}x{dim} entries, got {}",
                data.len()
            )));
        }
        let m = HermitianMat { dim, data };
        let scale = m.data.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..dim {
            for j in i..dim {
                if (m.entry(i, j) - m.entry(j, i).conj()).norm() > 1e-9 * scale {
                    return Err(Error::invalid(format!(
                        "matrix not Hermitian at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C64::new(1.0, 0.0);
        }
        HermitianMat { dim, data }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = HermitianMat::identity(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.data[i * values.len() + i] = C64::new(v, 0.0);
        }
        m
    }

    /// `Σ_i v_i v_i^H`. All vectors must share the same length.
    pub fn outer_sum(vs: &[CVec]) -> Result<Self> {
        let dim = vs
            .first()
            .map(CVec::len)
            .ok_or_else(|| Error::invalid("outer_sum of an empty list"))?;
        if dim == 0 || vs.iter().any(|v| v.len() != dim) {
            return Err(Error::invalid("outer_sum dimension mismatch"));
        }
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for v in vs {
            for i in 0..dim {
                let vi = v[i];
                for j in 0..dim {
                    data[i * dim + j] += vi * v[j].conj();
                }
            }
        }
        Ok(HermitianMat { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn mul_vec(&self, x: &CVec) -> CVec {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                let row = &self.data[i * self.dim..(i + 1) * self.dim];
                row.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `x^H M x`, real for Hermitian `M`.
    pub fn quad_form(&self, x: &CVec) -> f64 {
        x.dot(&self.mul_vec(x)).re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entry(i, i).re).sum()
    }
}

/// Dominant eigenpair of a Hermitian PSD matrix.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub vector: CVec,
    pub value: f64,
    pub iterations: usize,
}

/// Power iteration for the largest eigenvalue of a Hermitian PSD matrix.
///
/// Starts from the normalized all-ones vector; if the iterate collapses
/// (the start is orthogonal to the range of `m`) it restarts once from a
/// fixed-seed random vector. The returned vector has unit norm and its
/// largest-magnitude entry is real and positive.
pub fn dominant_eigvec(m: &HermitianMat, tol: f64, max_iter: usize) -> Result<Eigenpair> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::invalid("tol and max_iter must be positive"));
    }
    let n = m.dim();
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        let mut v = CVec::zeros(n);
        v[0] = C64::new(1.0, 0.0);
        return Ok(Eigenpair {
            vector: v,
            value: 0.0,
            iterations: 0,
        });
    }

    let ones = CVec::from_vec(vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n]);
    match power_iterate(m, ones, tol, max_iter, scale)? {
        Some(pair) => Ok(pair),
        None => {
            let start = SeededRng::new(EIG_FALLBACK_SEED, n as u64).unit_sphere(n);
            power_iterate(m, start, tol, max_iter, scale)?.ok_or(Error::EigenNoConvergence {
                iterations: max_iter,
                rayleigh: 0.0,
                residual: f64::NAN,
            })
        }
    }
}

/// `Ok(None)` signals a stalled start vector.
fn power_iterate(
    m: &HermitianMat,
    mut x: CVec,
    tol: f64,
    max_iter: usize,
    scale: f64,
) -> Result<Option<Eigenpair>> {
    let mut rayleigh = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let y = m.mul_vec(&x);
        rayleigh = x.dot(&y).re;
        let ynorm = y.norm();
        if ynorm <= tol * scale {
            return Ok(None);
        }
        let mut r = y.clone();
        r.axpy(C64::new(-rayleigh, 0.0), &x);
        residual = r.norm();
        if residual <= tol {
            return Ok(Some(Eigenpair {
                vector: fix_phase(x),
                value: rayleigh,
                iterations: it,
            }));
        }
        x = y.scaled(1.0 / ynorm);
    }
    Err(Error::EigenNoConvergence {
        iterations: max_iter,
        rayleigh,
        residual,
    })
}

/// Rotates `v` so its largest-magnitude entry is real and positive.
pub fn fix_phase(v: CVec) -> CVec {
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or_default();
    if pivot.norm() == 0.0 {
        return v;
    }
    let rot = pivot.conj() / pivot.norm();
    v.scaled_c(rot)
}

/// Cholesky factor of `I + Σ_k a_k a_k^H`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct RegularizedGram {
    dim: usize,
    lower: Vec<C64>,
}

impl RegularizedGram {
    pub fn new(a_list: &[CVec], dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("zero dimension"));
        }
        if let Some(bad) = a_list.iter().position(|a| a.len() != dim) {
            return Err(Error::invalid(format!(
                "vector {bad} has length {}, expected {dim}",
                a_list[bad].len()
            )));
        }
        let mut g = HermitianMat::identity(dim);
        for a in a_list {
            for i in 0..dim {
                for j in 0..dim {
                    g.data[i * dim + j] += a[i] * a[j].conj();
                }
            }
        }
        let lower = cholesky(&g).ok_or_else(|| Error::invalid("Gram matrix not positive definite"))?;
        Ok(RegularizedGram { dim, lower })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, rhs: &CVec) -> Result<CVec> {
        if rhs.len() != self.dim {
            return Err(Error::invalid(format!(
                "rhs has length {}, expected {}",
                rhs.len(),
                self.dim
            )));
        }
        let n = self.dim;
        let l = &self.lower;
        // L z = rhs
        let mut z = rhs.clone().into_vec();
        for i in 0..n {
            let mut acc = z[i];
            for k in 0..i {
                acc -= l[i * n + k] * z[k];
            }
            z[i] = acc / l[i * n + i];
        }
        // L^H x = z
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in i + 1..n {
                acc -= l[k * n + i].conj() * z[k];
            }
            z[i] = acc / l[i * n + i];
        }
        Ok(CVec::from_vec(z))
    }
}

/// Solves `(Σ_k a_k a_k^H + I) x = rhs` directly.
pub fn solve_regularized_normal(a_list: &[CVec], rhs: &CVec) -> Result<CVec> {
    RegularizedGram::new(a_list, rhs.len())?.solve(rhs)
}

fn cholesky(m: &HermitianMat) -> Option<Vec<C64>> {
    let n = m.dim;
    let mut l = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = m.entry(j, j).re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut acc = m.entry(i, j);
            for k in 0..j {
                acc -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = acc / djj;
        }
    }
    Some(l)
}

/// Solves a dense real system `a x = b` by Gaussian elimination with partial
/// pivoting. `a` is row-major `n x n` and is overwritten. Returns `None` when
/// the matrix is numerically singular.
pub fn solve_dense_real(a: &mut [f64], b: &mut [f64]) -> Option<()> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    Some(())
}
