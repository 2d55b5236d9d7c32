//! Shared, implementation-independent oracles for the integration tests.
//! Everything here recomputes expected values by a different mathematical
//! route than the library code it checks.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use ocmsd_core::config::Scenario;

/// Standard shallow-water scenario used across the suite (thermocline
/// 1496 -> 1485 m/s over 8-10 m, H = 31 m, 1652 m/s halfspace, 30-element
/// VLA at 1 m spacing from 1 m, 596 Hz source at 20 m depth, 5 km range).
pub fn yellow_sea() -> Scenario {
    Scenario::from_toml(ocmsd_core::config::YELLOW_SEA_TOML).unwrap()
}

// ---------------------------------------------------------------------------
// Tanh-sinh (double exponential) quadrature on a finite interval
// ---------------------------------------------------------------------------

/// Integrates f over [a, b] with tanh-sinh quadrature at the given level
/// (node spacing 2^-level). Handles endpoint singularities of log type.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, level: u32) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let h = 0.5f64.powi(level as i32);
    let t_max = 6.5;
    let steps = (t_max / h) as i64;
    let mut sum = 0.0f64;
    for k in -steps..=steps {
        let t = k as f64 * h;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let x = u.tanh();
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        let xx = mid + half * x;
        // Clamp to the open interval; weights underflow long before this
        // matters except for genuinely singular endpoints.
        if xx > a && xx < b {
            let v = f(xx);
            if v.is_finite() {
                sum += w * v;
            }
        }
    }
    sum * h * half
}

/// J0 by the Bessel integral (1/pi) int_0^pi cos(x sin t) dt.
pub fn j0_oracle(x: f64) -> f64 {
    tanh_sinh(|t| (x * t.sin()).cos(), 0.0, std::f64::consts::PI, 10) / std::f64::consts::PI
}

/// Y0 by the integral representation
/// (4/pi^2) int_0^{pi/2} cos(x cos t) (gamma + ln(2 x sin^2 t)) dt,
/// whose endpoint log singularity the tanh-sinh nodes absorb.
pub fn y0_oracle(x: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577215664901532860606512;
    let integral = tanh_sinh(
        |t| {
            let s = t.sin();
            (x * t.cos()).cos() * (EULER_GAMMA + (2.0 * x * s * s).ln())
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        10,
    );
    4.0 / (std::f64::consts::PI * std::f64::consts::PI) * integral
}

// ---------------------------------------------------------------------------
// Analytic Pekeris dispersion (isovelocity water over a fluid halfspace)
// ---------------------------------------------------------------------------

/// Trapped-mode wavenumbers of the ideal waveguide, descending, found from
/// gamma cos(gamma H) + gamma_b (rho_w/rho_b) sin(gamma H) = 0 on a dense
/// scan plus bisection. Continuum solution, no depth grid involved.
pub fn pekeris_wavenumbers(
    c_water: f64,
    c_bottom: f64,
    density_ratio: f64,
    depth: f64,
    frequency: f64,
) -> Vec<f64> {
    let omega = 2.0 * std::f64::consts::PI * frequency;
    let k_w = omega / c_water;
    let k_b = omega / c_bottom;
    let gamma_max = (k_w * k_w - k_b * k_b).sqrt();
    let mismatch = |g: f64| -> f64 {
        let gb = (k_w * k_w - g * g - k_b * k_b).max(0.0).sqrt();
        g * (g * depth).cos() + gb / density_ratio * (g * depth).sin()
    };
    let n_scan = 200_000;
    let pad = gamma_max * 1e-9;
    let mut roots = Vec::new();
    let mut prev_g = pad;
    let mut prev_v = mismatch(prev_g);
    for i in 1..=n_scan {
        let g = pad + (gamma_max - 2.0 * pad) * i as f64 / n_scan as f64;
        let v = mismatch(g);
        if prev_v * v < 0.0 {
            let (mut a, mut b) = (prev_g, g);
            let mut fa = prev_v;
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                let fm = mismatch(m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
                if b - a < 1e-14 {
                    break;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_g = g;
        prev_v = v;
    }
    let mut xi: Vec<f64> = roots
        .iter()
        .map(|g| (k_w * k_w - g * g).sqrt())
        .collect();
    xi.sort_by(|a, b| b.partial_cmp(a).unwrap());
    xi
}

// ---------------------------------------------------------------------------
// Brute-force sparse recovery oracle
// ---------------------------------------------------------------------------

pub struct SparseInstance {
    pub dict: Vec<Vec<Complex64>>, // columns
    pub p: Vec<Complex64>,
    pub epsilon: f64,
    pub true_support: Vec<usize>,
    pub coherence: f64,
}

/// Random 8x20 instance with unit-norm complex Gaussian columns, 3-sparse
/// truth with moduli in [0.5, 1.5], and noise scaled to exactly the given
/// fraction of the signal norm; epsilon is the exact noise norm.
pub fn random_sparse_instance(seed: u64, noise_frac: f64) -> SparseInstance {
    let n = 8usize;
    let m = 20usize;
    let k = 3usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    for _ in 0..m {
        let mut col: Vec<Complex64> = (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        let norm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in col.iter_mut() {
            *c /= norm;
        }
        columns.push(col);
    }
    let mut support: Vec<usize> = Vec::new();
    while support.len() < k {
        let idx = rng.random_range(0..m);
        if !support.contains(&idx) {
            support.push(idx);
        }
    }
    support.sort_unstable();
    let mut signal = vec![Complex64::new(0.0, 0.0); n];
    for &j in &support {
        let modulus: f64 = 0.5 + rng.random::<f64>();
        let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let a = Complex64::from_polar(modulus, phase);
        for (s, c) in signal.iter_mut().zip(&columns[j]) {
            *s += a * c;
        }
    }
    let signal_norm = signal.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut noise: Vec<Complex64> = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    let noise_norm = noise.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let target = noise_frac * signal_norm;
    for c in noise.iter_mut() {
        *c *= target / noise_norm;
    }
    let p: Vec<Complex64> = signal.iter().zip(&noise).map(|(s, w)| s + w).collect();
    let mut coherence = 0.0f64;
    for i in 0..m {
        for j in 0..i {
            let dot: Complex64 = columns[i]
                .iter()
                .zip(&columns[j])
                .map(|(a, b)| a.conj() * b)
                .sum();
            coherence = coherence.max(dot.norm());
        }
    }
    SparseInstance {
        dict: columns,
        p,
        epsilon: target,
        true_support: support,
        coherence,
    }
}

/// Exhaustive oracle: over all supports of size <= 3, constrained least
/// squares; among feasible supports, the one of minimal L1. Returns
/// (support, l1).
pub fn oracle_support(inst: &SparseInstance) -> (Vec<usize>, f64) {
    let m = inst.dict.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let consider = |support: &[usize], best: &mut Option<(f64, Vec<usize>)>| {
        if let Some((res, a)) = support_least_squares(&inst.dict, &inst.p, support) {
            if res <= inst.epsilon * (1.0 + 1e-9) {
                let l1: f64 = a.iter().map(|c| c.norm()).sum();
                let better = match best {
                    None => true,
                    Some((bl1, _)) => l1 < *bl1,
                };
                if better {
                    *best = Some((l1, support.to_vec()));
                }
            }
        }
    };
    for i in 0..m {
        consider(&[i], &mut best);
        for j in i + 1..m {
            consider(&[i, j], &mut best);
            for k in j + 1..m {
                consider(&[i, j, k], &mut best);
            }
        }
    }
    match best {
        Some((l1, s)) => (s, l1),
        None => (Vec::new(), f64::INFINITY),
    }
}

/// LS on a fixed support via the (tiny) normal equations; returns
/// (residual norm, coefficients) or None on a singular system.
fn support_least_squares(
    dict: &[Vec<Complex64>],
    p: &[Complex64],
    support: &[usize],
) -> Option<(f64, Vec<Complex64>)> {
    let k = support.len();
    let n = p.len();
    // Gram and rhs on the support.
    let mut g = vec![Complex64::new(0.0, 0.0); k * k];
    let mut b = vec![Complex64::new(0.0, 0.0); k];
    for (i, &si) in support.iter().enumerate() {
        for (j, &sj) in support.iter().enumerate() {
            g[j * k + i] = dict[si]
                .iter()
                .zip(&dict[sj])
                .map(|(a, c)| a.conj() * c)
                .sum();
        }
        b[i] = dict[si].iter().zip(p).map(|(a, c)| a.conj() * c).sum();
    }
    let a = gauss_solve(&mut g, &mut b, k)?;
    let mut residual = p.to_vec();
    for (i, &si) in support.iter().enumerate() {
        for (r, &c) in residual.iter_mut().zip(&dict[si]) {
            *r -= a[i] * c;
        }
    }
    let _ = n;
    let res = residual.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Some((res, a))
}

/// Plain Gaussian elimination with partial pivoting on a k x k complex
/// system (column-major), consuming its inputs.
fn gauss_solve(g: &mut [Complex64], b: &mut [Complex64], k: usize) -> Option<Vec<Complex64>> {
    for col in 0..k {
        let mut pivot = col;
        let mut best = g[col * k + col].norm();
        for r in col + 1..k {
            let v = g[col * k + r].norm();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best < 1e-12 {
            return None;
        }
        if pivot != col {
            for c in 0..k {
                g.swap(c * k + col, c * k + pivot);
            }
            b.swap(col, pivot);
        }
        let d = g[col * k + col];
        for r in col + 1..k {
            let f = g[col * k + r] / d;
            if f.norm() == 0.0 {
                continue;
            }
            for c in col..k {
                let upper = g[c * k + col];
                g[c * k + r] -= f * upper;
            }
            let bc = b[col];
            b[r] -= f * bc;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); k];
    for r in (0..k).rev() {
        let mut acc = b[r];
        for c in r + 1..k {
            acc -= g[c * k + r] * x[c];
        }
        x[r] = acc / g[r * k + r];
    }
    Some(x)
}

/// Support of a solution vector at a relative magnitude threshold.
pub fn support_of(a: &[Complex64], rel: f64) -> Vec<usize> {
    let max = a.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    a.iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > rel * max)
        .map(|(i, _)| i)
        .collect()
}

/// Indices of the k largest-magnitude entries, ascending.
pub fn top_k_support(a: &[Complex64], k: usize) -> Vec<usize> {
    let mut mags: Vec<(usize, f64)> = a.iter().enumerate().map(|(i, c)| (i, c.norm())).collect();
    mags.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
    let mut top: Vec<usize> = mags.iter().take(k).map(|(i, _)| *i).collect();
    top.sort_unstable();
    top
}

/// Exact-recovery statistic max_{j not in S} ||Psi_S^+ psi_j||_1. Values
/// below 1 guarantee basis-pursuit recovery of supports on S; empirically
/// the transition for these 8x20 instances sits near 1.65, so instances
/// below 1.6 are the "low-coherence" (reliably recoverable) slice.
pub fn exact_recovery_statistic(inst: &SparseInstance) -> f64 {
    let s = &inst.true_support;
    let k = s.len();
    let mut g = vec![Complex64::new(0.0, 0.0); k * k];
    for (i, &si) in s.iter().enumerate() {
        for (j, &sj) in s.iter().enumerate() {
            g[j * k + i] = inst.dict[si]
                .iter()
                .zip(&inst.dict[sj])
                .map(|(a, c)| a.conj() * c)
                .sum();
        }
    }
    let mut worst = 0.0f64;
    for j in 0..inst.dict.len() {
        if s.contains(&j) {
            continue;
        }
        let b: Vec<Complex64> = s
            .iter()
            .map(|&si| {
                inst.dict[si]
                    .iter()
                    .zip(&inst.dict[j])
                    .map(|(a, c)| a.conj() * c)
                    .sum()
            })
            .collect();
        let mut gc = g.clone();
        let mut bc = b.clone();
        if let Some(x) = gauss_solve(&mut gc, &mut bc, k) {
            worst = worst.max(x.iter().map(|c| c.norm()).sum());
        }
    }
    worst
}
