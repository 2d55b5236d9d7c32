//! Symmetric tridiagonal eigensolver.
//!
//! Eigenvalues by Sturm-count bisection, eigenvectors by inverse iteration
//! with reorthogonalization inside eigenvalue clusters. Everything is
//! deterministic: fixed starting vectors, fixed iteration counts, canonical
//! eigenvector signs.
//!
//! The band variant solves only for eigenvalues inside an interval, which
//! is what the mode dictionary generator needs (a handful of eigenpairs of
//! a ~600-node operator per anchor wavenumber, thousands of times per
//! estimate).

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` pairs with `eigenvalues[i]`; unit Euclidean norm,
    /// largest-magnitude entry positive.
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Full spectrum of the symmetric tridiagonal matrix with diagonal `diag`
/// and off-diagonal `offdiag` (length n-1).
pub fn tridiag_eigensolve(diag: &[f64], offdiag: &[f64]) -> Result<TridiagEigen> {
    validate(diag, offdiag)?;
    let (lo, hi) = gershgorin(diag, offdiag);
    solve_indices(diag, offdiag, 0, diag.len(), lo, hi)
}

/// Eigenpairs with eigenvalues in `[lo, hi)`.
pub fn tridiag_eigensolve_range(
    diag: &[f64],
    offdiag: &[f64],
    lo: f64,
    hi: f64,
) -> Result<TridiagEigen> {
    validate(diag, offdiag)?;
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty eigenvalue range [{lo}, {hi})")));
    }
    let (glo, ghi) = gershgorin(diag, offdiag);
    let first = sturm_count(diag, offdiag, lo);
    let last = sturm_count(diag, offdiag, hi);
    solve_indices(diag, offdiag, first, last, glo.max(lo), ghi.min(hi))
}

fn validate(diag: &[f64], offdiag: &[f64]) -> Result<()> {
    if diag.is_empty() {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if offdiag.len() + 1 != diag.len() {
        return Err(Error::Dimension(format!(
            "offdiag length {} must be diag length {} minus one",
            offdiag.len(),
            diag.len()
        )));
    }
    if diag.iter().chain(offdiag).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite matrix entry".into()));
    }
    Ok(())
}

fn gershgorin(diag: &[f64], offdiag: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += offdiag[i - 1].abs();
        }
        if i < n - 1 {
            r += offdiag[i].abs();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let pad = 1e-12 * (hi - lo).max(1.0) + f64::MIN_POSITIVE;
    (lo - pad, hi + pad)
}

fn matrix_scale(diag: &[f64], offdiag: &[f64]) -> f64 {
    let d = diag.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let e = offdiag.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    (d + 2.0 * e).max(f64::MIN_POSITIVE)
}

/// Number of eigenvalues strictly below `x` (Sturm sequence sign count).
fn sturm_count(diag: &[f64], offdiag: &[f64], x: f64) -> usize {
    let pivmin = matrix_scale(diag, offdiag) * 1e-300;
    let mut count = 0usize;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let e2 = offdiag[i - 1] * offdiag[i - 1];
        let denom = if q.abs() < pivmin {
            if q < 0.0 {
                -pivmin
            } else {
                pivmin
            }
        } else {
            q
        };
        q = diag[i] - x - e2 / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Bisection for the eigenvalue of 0-based ascending index `j`.
fn bisect_eigenvalue(diag: &[f64], offdiag: &[f64], j: usize, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, offdiag, mid) <= j {
            lo = mid;
        } else {
            hi = mid;
        }
        let tol = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + f64::MIN_POSITIVE;
        if hi - lo <= tol {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn solve_indices(
    diag: &[f64],
    offdiag: &[f64],
    first: usize,
    last: usize,
    lo: f64,
    hi: f64,
) -> Result<TridiagEigen> {
    let n = diag.len();
    if n == 1 {
        let keep = first == 0 && last == 1;
        return Ok(TridiagEigen {
            eigenvalues: if keep { vec![diag[0]] } else { vec![] },
            eigenvectors: if keep { vec![vec![1.0]] } else { vec![] },
        });
    }
    let scale = matrix_scale(diag, offdiag);
    let mut eigenvalues = Vec::with_capacity(last.saturating_sub(first));
    for j in first..last {
        eigenvalues.push(bisect_eigenvalue(diag, offdiag, j, lo, hi));
    }
    // Reorthogonalize inverse-iteration vectors whose eigenvalues are
    // closer than this; well-separated eigenvalues come out orthogonal
    // on their own.
    let cluster_gap = 1e-3 * scale;
    let mut eigenvectors: Vec<Vec<f64>> = Vec::with_capacity(eigenvalues.len());
    let mut cluster_start = 0usize;
    for (idx, &lambda) in eigenvalues.iter().enumerate() {
        if idx > 0 && lambda - eigenvalues[idx - 1] > cluster_gap {
            cluster_start = idx;
        }
        let prev = &eigenvectors[cluster_start..];
        let v = inverse_iteration(diag, offdiag, lambda, prev, idx);
        eigenvectors.push(v);
    }
    Ok(TridiagEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Deterministic pseudo-random start vector (splitmix64 bits).
fn start_vector(n: usize, salt: usize) -> Vec<f64> {
    let mut state = 0x9e3779b97f4a7c15u64.wrapping_mul(salt as u64 + 1);
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        v.push((z >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
    }
    v
}

fn inverse_iteration(
    diag: &[f64],
    offdiag: &[f64],
    lambda: f64,
    prev: &[Vec<f64>],
    salt: usize,
) -> Vec<f64> {
    let n = diag.len();
    let factor = TriFactor::new(diag, offdiag, lambda);
    let mut v = start_vector(n, salt);
    orthogonalize_against(&mut v, prev);
    normalize(&mut v);
    for _ in 0..3 {
        let mut w = factor.solve(&v);
        orthogonalize_against(&mut w, prev);
        let norm = euclid(&w);
        if norm == 0.0 || !norm.is_finite() {
            // Degenerate start; reseed and keep going.
            v = start_vector(n, salt + 7919);
            orthogonalize_against(&mut v, prev);
            normalize(&mut v);
            continue;
        }
        for x in &mut w {
            *x /= norm;
        }
        v = w;
    }
    canonical_sign(&mut v);
    v
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = euclid(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

fn orthogonalize_against(v: &mut [f64], basis: &[Vec<f64>]) {
    // Two Gram-Schmidt passes are enough at these cluster sizes.
    for _ in 0..2 {
        for u in basis {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (x, b) in v.iter_mut().zip(u) {
                *x -= dot * b;
            }
        }
    }
}

fn canonical_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut mag = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > mag {
            mag = x.abs();
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// LU factors of (T - shift*I) with partial pivoting (three-band storage
/// plus the pivoting fill-in band).
struct TriFactor {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TriFactor {
    fn new(diag: &[f64], offdiag: &[f64], shift: f64) -> Self {
        let n = diag.len();
        let mut dl: Vec<f64> = offdiag.to_vec();
        let mut d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
        let mut du: Vec<f64> = offdiag.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let floor = matrix_scale(diag, offdiag) * f64::EPSILON * 1e-3 + f64::MIN_POSITIVE;
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() < floor {
                    d[i] = if d[i] < 0.0 { -floor } else { floor };
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if d[n - 1].abs() < floor {
            d[n - 1] = if d[n - 1] < 0.0 { -floor } else { floor };
        }
        Self {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut b = rhs.to_vec();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let tmp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = tmp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
        b
    }
}

/// Modified Gram-Schmidt in place; vectors come out orthonormal to
/// machine precision. Intended as a final polish on nearly-orthogonal sets.
pub fn orthonormalize(vectors: &mut [Vec<f64>]) {
    for i in 0..vectors.len() {
        for j in 0..i {
            let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
            let (left, right) = vectors.split_at_mut(i);
            for (x, b) in right[0].iter_mut().zip(&left[j]) {
                *x -= dot * b;
            }
        }
        normalize(&mut vectors[i]);
    }
}
