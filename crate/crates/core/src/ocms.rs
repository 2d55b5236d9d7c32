//! Orthogonality-constrained modal search: mode-parameter estimation from
//! one snapshot.
//!
//! The inner problem is basis pursuit denoising over the complex mode
//! amplitudes — minimize the sum of moduli subject to a residual bound —
//! solved by accelerated proximal gradient (complex soft-thresholding)
//! inside a bisection on the lasso penalty that pins the residual at the
//! bound. The outer problem scans the anchor wavenumber over a coarse grid
//! and golden-section refines around the best point; each anchor
//! evaluation regenerates the orthonormal candidate dictionary.

use num_complex::Complex64;

use crate::env::{DepthGrid, Environment};
use crate::error::{Error, Result};
use crate::field::{ModeAmplitudes, PressureSnapshot};
use crate::modes::{candidate_mode_set, ModeSet};

/// Dense complex matrix, column-major. Dictionaries are small (array
/// elements by candidate modes), so no sparsity games.
#[derive(Debug, Clone)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn from_columns(columns: Vec<Vec<Complex64>>) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return Err(Error::Dimension("matrix needs at least one column".into()));
        }
        let rows = columns[0].len();
        if rows == 0 || columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Dimension("ragged or empty columns".into()));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for c in &columns {
            data.extend_from_slice(c);
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds the dictionary from real-valued sample rows (one row per
    /// array element, one column per mode).
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Dimension("empty sample matrix".into()));
        }
        let n = rows.len();
        let m = rows[0].len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("ragged sample matrix".into()));
        }
        let mut data = vec![Complex64::new(0.0, 0.0); n * m];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                data[j * n + i] = Complex64::new(v, 0.0);
            }
        }
        Ok(Self {
            rows: n,
            cols: m,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn col(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.col(j)) {
                *o += a * xj;
            }
        }
        out
    }

    /// Adjoint product A^H y.
    fn adjoint_vec(&self, y: &[Complex64]) -> Vec<Complex64> {
        (0..self.cols)
            .map(|j| {
                self.col(j)
                    .iter()
                    .zip(y)
                    .map(|(a, b)| a.conj() * b)
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Hermitian Gram matrix A^H A, column-major cols x cols.
    fn gram(&self) -> Vec<Complex64> {
        let m = self.cols;
        let mut g = vec![Complex64::new(0.0, 0.0); m * m];
        for j in 0..m {
            for i in j..m {
                let v: Complex64 = self
                    .col(i)
                    .iter()
                    .zip(self.col(j))
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                g[j * m + i] = v;
                g[i * m + j] = v.conj();
            }
        }
        g
    }

    /// Mutual coherence: largest normalized off-diagonal Gram entry.
    pub fn mutual_coherence(&self) -> f64 {
        let m = self.cols;
        let g = self.gram();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..i {
                let denom = (g[i * m + i].re * g[j * m + j].re).sqrt();
                if denom > 0.0 {
                    worst = worst.max(g[j * m + i].norm() / denom);
                }
            }
        }
        worst
    }

    fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

fn cnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn residual_norm(dict: &CMatrix, p: &[Complex64], a: &[Complex64]) -> f64 {
    let ax = dict.matvec(a);
    p.iter()
        .zip(&ax)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn l1_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm()).sum()
}

/// Cholesky solve for a Hermitian positive-definite matrix (column-major).
fn chol_solve(g: &[Complex64], m: usize, rhs: &[Complex64]) -> Option<Vec<Complex64>> {
    let mut l = vec![Complex64::new(0.0, 0.0); m * m];
    for j in 0..m {
        let mut diag = g[j * m + j].re;
        for k in 0..j {
            diag -= l[k * m + j].norm_sqr();
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        let dj = diag.sqrt();
        l[j * m + j] = Complex64::new(dj, 0.0);
        for i in j + 1..m {
            let mut s = g[j * m + i];
            for k in 0..j {
                s -= l[k * m + i] * l[k * m + j].conj();
            }
            l[j * m + i] = s / dj;
        }
    }
    // L y = rhs, then L^H x = y.
    let mut y = rhs.to_vec();
    for i in 0..m {
        for k in 0..i {
            let lik = l[k * m + i];
            y[i] = y[i] - lik * y[k];
        }
        y[i] /= l[i * m + i].re;
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            let lki = l[i * m + k].conj();
            y[i] = y[i] - lki * y[k];
        }
        y[i] /= l[i * m + i].re;
    }
    Some(y)
}

/// Least-squares amplitudes (minimum residual) with escalating diagonal
/// regularization if the normal matrix is numerically singular.
fn least_squares(dict: &CMatrix, p: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = dict.rows;
    let m = dict.cols;
    if m <= n {
        let g = dict.gram();
        let b = dict.adjoint_vec(p);
        let trace: f64 = (0..m).map(|j| g[j * m + j].re).sum::<f64>().max(1e-300);
        let mut jitter = 0.0;
        for _ in 0..8 {
            let mut gj = g.clone();
            if jitter > 0.0 {
                for j in 0..m {
                    gj[j * m + j] += Complex64::new(jitter, 0.0);
                }
            }
            if let Some(a) = chol_solve(&gj, m, &b) {
                return Ok(a);
            }
            jitter = if jitter == 0.0 {
                trace * 1e-14 / m as f64
            } else {
                jitter * 100.0
            };
        }
        Err(Error::Solver("least-squares normal matrix is singular".into()))
    } else {
        // Underdetermined: minimum-norm solution via A A^H.
        let mut w = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for i in j..n {
                let mut s = Complex64::new(0.0, 0.0);
                for c in 0..m {
                    let col = dict.col(c);
                    s += col[i] * col[j].conj();
                }
                w[j * n + i] = s;
                w[i * n + j] = s.conj();
            }
        }
        let trace: f64 = (0..n).map(|j| w[j * n + j].re).sum::<f64>().max(1e-300);
        let mut jitter = 0.0;
        for _ in 0..8 {
            let mut wj = w.clone();
            if jitter > 0.0 {
                for j in 0..n {
                    wj[j * n + j] += Complex64::new(jitter, 0.0);
                }
            }
            if let Some(y) = chol_solve(&wj, n, p) {
                return Ok(dict.adjoint_vec(&y));
            }
            jitter = if jitter == 0.0 {
                trace * 1e-14 / n as f64
            } else {
                jitter * 100.0
            };
        }
        Err(Error::Solver("least-squares normal matrix is singular".into()))
    }
}

/// Basis pursuit denoising outcome. Infeasible is a value, not an error:
/// no amplitude vector can meet the residual bound.
#[derive(Debug, Clone)]
pub enum BpdnOutcome {
    Solution(BpdnSolution),
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct BpdnSolution {
    pub amplitudes: Vec<Complex64>,
    pub residual_l2: f64,
    pub l1_norm: f64,
}

/// Tuning knobs for the inner lasso iteration.
#[derive(Debug, Clone, Copy)]
pub struct LassoParams {
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for LassoParams {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            rel_tol: 1e-9,
        }
    }
}

/// min sum_m |a_m|  subject to  ||p - dict a||_2 <= epsilon.
pub fn bpdn_solve(dict: &CMatrix, p: &[Complex64], epsilon: f64) -> Result<BpdnOutcome> {
    bpdn_solve_with(dict, p, epsilon, LassoParams::default())
}

pub fn bpdn_solve_with(
    dict: &CMatrix,
    p: &[Complex64],
    epsilon: f64,
    params: LassoParams,
) -> Result<BpdnOutcome> {
    if p.len() != dict.rows {
        return Err(Error::Dimension(format!(
            "pressure length {} vs dictionary rows {}",
            p.len(),
            dict.rows
        )));
    }
    if !dict.is_finite() || p.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Domain("non-finite inputs to bpdn_solve".into()));
    }
    if epsilon < 0.0 {
        return Err(Error::Domain("epsilon must be non-negative".into()));
    }
    let m = dict.cols;
    let p_norm = cnorm(p);

    // Zero is feasible and L1-minimal.
    if epsilon >= p_norm {
        return Ok(BpdnOutcome::Solution(BpdnSolution {
            amplitudes: vec![Complex64::new(0.0, 0.0); m],
            residual_l2: p_norm,
            l1_norm: 0.0,
        }));
    }

    let a_ls = least_squares(dict, p)?;
    let r_ls = residual_norm(dict, p, &a_ls);
    if r_ls > epsilon {
        return Ok(BpdnOutcome::Infeasible);
    }
    if r_ls >= epsilon * (1.0 - 1e-9) {
        // The bound is active at the least-squares point; the feasible set
        // has (numerically) no slack to shrink L1 in.
        return Ok(BpdnOutcome::Solution(BpdnSolution {
            l1_norm: l1_norm(&a_ls),
            residual_l2: r_ls,
            amplitudes: a_ls,
        }));
    }

    // Penalized path: residual(lambda) grows monotonically from r_ls (at
    // lambda -> 0) to ||p|| (at lambda >= max|A^H p|); bisect to pin it at
    // epsilon and keep the feasible-side iterate.
    let g = dict.gram();
    let b = dict.adjoint_vec(p);
    let lipschitz = gram_spectral_norm(&g, m).max(1e-300);
    let mut lo = 0.0f64;
    let mut hi = b.iter().map(|x| x.norm()).fold(0.0f64, f64::max);
    let mut warm = vec![Complex64::new(0.0, 0.0); m];
    let mut best: Option<BpdnSolution> = None;
    for _ in 0..40 {
        let lambda = 0.5 * (lo + hi);
        let a = fista(&g, &b, m, lambda, lipschitz, &warm, params);
        let r = residual_norm(dict, p, &a);
        warm = a.clone();
        if r <= epsilon {
            best = Some(BpdnSolution {
                l1_norm: l1_norm(&a),
                residual_l2: r,
                amplitudes: a,
            });
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    Ok(BpdnOutcome::Solution(best.unwrap_or(BpdnSolution {
        l1_norm: l1_norm(&a_ls),
        residual_l2: r_ls,
        amplitudes: a_ls,
    })))
}

/// Largest eigenvalue of the Hermitian Gram matrix by power iteration.
fn gram_spectral_norm(g: &[Complex64], m: usize) -> f64 {
    let mut v = vec![Complex64::new(1.0, 0.0); m];
    let norm0 = (m as f64).sqrt();
    for x in v.iter_mut() {
        *x /= norm0;
    }
    let mut lambda = 0.0f64;
    for _ in 0..60 {
        let mut w = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..m {
            let vj = v[j];
            if vj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..m {
                w[i] += g[j * m + i] * vj;
            }
        }
        let norm = cnorm(&w);
        if norm == 0.0 {
            return 0.0;
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        v = w;
        if (norm - lambda).abs() <= 1e-12 * norm {
            lambda = norm;
            break;
        }
        lambda = norm;
    }
    lambda * (1.0 + 1e-9)
}

fn soft_threshold(v: Complex64, t: f64) -> Complex64 {
    let mag = v.norm();
    if mag <= t {
        Complex64::new(0.0, 0.0)
    } else {
        v * ((mag - t) / mag)
    }
}

/// FISTA with adaptive restart on min 0.5||p - A a||^2 + lambda sum|a_m|,
/// expressed through the Gram form grad = G a - b.
fn fista(
    g: &[Complex64],
    b: &[Complex64],
    m: usize,
    lambda: f64,
    lipschitz: f64,
    warm: &[Complex64],
    params: LassoParams,
) -> Vec<Complex64> {
    let step = 1.0 / lipschitz;
    let thresh = lambda * step;
    let mut a = warm.to_vec();
    let mut y = warm.to_vec();
    let mut theta = 1.0f64;
    let mut grad = vec![Complex64::new(0.0, 0.0); m];
    let mut a_next = vec![Complex64::new(0.0, 0.0); m];
    for _ in 0..params.max_iter {
        for gi in grad.iter_mut() {
            *gi = Complex64::new(0.0, 0.0);
        }
        for j in 0..m {
            let yj = y[j];
            if yj != Complex64::new(0.0, 0.0) {
                for i in 0..m {
                    grad[i] += g[j * m + i] * yj;
                }
            }
        }
        for i in 0..m {
            grad[i] -= b[i];
        }
        for i in 0..m {
            a_next[i] = soft_threshold(y[i] - grad[i] * step, thresh);
        }
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        // Gradient-scheme restart: drop momentum when it points uphill.
        let mut restart_dot = 0.0f64;
        let mut delta_norm2 = 0.0f64;
        let mut a_norm2 = 0.0f64;
        for i in 0..m {
            let d = a_next[i] - a[i];
            let yd = y[i] - a_next[i];
            restart_dot += yd.re * d.re + yd.im * d.im;
            delta_norm2 += d.norm_sqr();
            a_norm2 += a[i].norm_sqr();
        }
        let converged = delta_norm2.sqrt() <= params.rel_tol * a_norm2.sqrt().max(1e-30);
        if restart_dot > 0.0 {
            theta = 1.0;
            y.copy_from_slice(&a_next);
        } else {
            theta = theta_next;
            for i in 0..m {
                y[i] = a_next[i] + (a_next[i] - a[i]) * beta;
            }
        }
        std::mem::swap(&mut a, &mut a_next);
        if converged {
            break;
        }
    }
    a
}

/// Residual bound from noise metadata.
pub enum EpsilonMode<'a> {
    /// sigma recorded by the noise model: epsilon = 1.1 sigma sqrt(N).
    KnownSigma,
    /// Median L2 norm of signal-free adjacent frequency bins, times 1.1.
    OffBinEstimate(&'a [Vec<Complex64>]),
}

pub fn epsilon_from_noise(snapshot: &PressureSnapshot, mode: EpsilonMode<'_>) -> Result<f64> {
    match mode {
        EpsilonMode::KnownSigma => {
            let sigma = snapshot
                .noise_sigma
                .ok_or_else(|| Error::Domain("snapshot carries no noise sigma".into()))?;
            if sigma == 0.0 {
                return Ok(1e-12); // numerical guard, never exactly zero
            }
            Ok(1.1 * sigma * (snapshot.len() as f64).sqrt())
        }
        EpsilonMode::OffBinEstimate(bins) => {
            if bins.is_empty() {
                return Err(Error::Domain("off-bin estimate needs aux bins".into()));
            }
            let mut norms: Vec<f64> = bins.iter().map(|b| cnorm(b)).collect();
            norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = norms.len();
            let median = if n % 2 == 1 {
                norms[n / 2]
            } else {
                0.5 * (norms[n / 2 - 1] + norms[n / 2])
            };
            Ok(1.1 * median)
        }
    }
}

/// Outer-search configuration.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub epsilon_n: f64,
    pub band: (f64, f64),
    pub coarse_grid_points: usize,
    pub refine_tolerance: f64,
    pub lasso_max_iter: usize,
    pub lasso_rel_tol: f64,
    /// Depth grid step override; None takes the default rule.
    pub grid_step: Option<f64>,
}

impl SolverConfig {
    pub fn new(epsilon_n: f64, band: (f64, f64)) -> Result<Self> {
        let cfg = Self {
            epsilon_n,
            band,
            coarse_grid_points: 2000,
            refine_tolerance: 1e-6,
            lasso_max_iter: 5000,
            lasso_rel_tol: 1e-9,
            grid_step: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_n > 0.0) {
            return Err(Error::Config("epsilon_n must be positive".into()));
        }
        if !(self.band.0 < self.band.1) || self.band.0 <= 0.0 {
            return Err(Error::Config(format!(
                "band ({}, {}) is empty or invalid",
                self.band.0, self.band.1
            )));
        }
        if self.coarse_grid_points < 10 {
            return Err(Error::Config("coarse grid needs at least 10 points".into()));
        }
        if !(self.refine_tolerance > 0.0) {
            return Err(Error::Config("refine tolerance must be positive".into()));
        }
        Ok(())
    }

    fn lasso_params(&self) -> LassoParams {
        LassoParams {
            max_iter: self.lasso_max_iter,
            rel_tol: self.lasso_rel_tol,
        }
    }
}

/// Estimated mode parameters: candidate dictionary at the best anchor,
/// complex amplitudes, and the objective landscape.
#[derive(Debug, Clone)]
pub struct ModeEstimate {
    pub modes: ModeSet,
    pub amplitudes: ModeAmplitudes,
    pub l1_norm: f64,
    pub residual_l2: f64,
    pub anchor_xi: f64,
    pub epsilon_n: f64,
    /// All amplitudes are zero (the bound exceeds the snapshot norm);
    /// downstream depth estimation refuses such estimates.
    pub degenerate: bool,
    /// Every feasible (anchor, L1) evaluation in search order.
    pub objective_trace: Vec<(f64, f64)>,
}

struct Evaluation {
    modes: ModeSet,
    solution: BpdnSolution,
}

struct Search<'a> {
    snapshot: &'a PressureSnapshot,
    env: &'a Environment,
    cfg: &'a SolverConfig,
    grid: DepthGrid,
    lo: f64,
    hi_eval: f64,
    trace: Vec<(f64, f64)>,
    best: Option<(f64, f64, Evaluation)>, // (J, xi, evaluation)
}

impl Search<'_> {
    fn evaluate(&mut self, xi: f64) -> f64 {
        if !(self.lo..=self.hi_eval).contains(&xi) {
            return f64::INFINITY;
        }
        let modes = match candidate_mode_set(
            self.env,
            &self.grid,
            self.snapshot.frequency_hz,
            xi,
            self.cfg.band,
        ) {
            Ok(m) => m,
            Err(_) => return f64::INFINITY,
        };
        let rows = match modes.sample_at_depths(&self.snapshot.element_depths_m) {
            Ok(r) => r,
            Err(_) => return f64::INFINITY,
        };
        let dict = match CMatrix::from_real_rows(&rows) {
            Ok(d) => d,
            Err(_) => return f64::INFINITY,
        };
        let outcome = match bpdn_solve_with(
            &dict,
            &self.snapshot.pressure,
            self.cfg.epsilon_n,
            self.cfg.lasso_params(),
        ) {
            Ok(o) => o,
            Err(_) => return f64::INFINITY,
        };
        match outcome {
            BpdnOutcome::Infeasible => f64::INFINITY,
            BpdnOutcome::Solution(solution) => {
                let j = solution.l1_norm;
                self.trace.push((xi, j));
                let better = match &self.best {
                    None => true,
                    Some((bj, _, _)) => j < *bj - 1e-12,
                };
                if better {
                    self.best = Some((j, xi, Evaluation { modes, solution }));
                }
                j
            }
        }
    }
}

/// Estimates modal wavenumbers, mode depth functions and complex
/// amplitudes from one snapshot by minimizing the L1 amplitude norm over
/// the anchor wavenumber (coarse grid plus golden-section refinement).
/// Fully deterministic: identical inputs give identical estimates.
pub fn estimate_modes(
    snapshot: &PressureSnapshot,
    env: &Environment,
    cfg: &SolverConfig,
) -> Result<ModeEstimate> {
    cfg.validate()?;
    if env.halfspace.is_some() {
        return Err(Error::Config(
            "estimator takes the water-column environment only (no halfspace)".into(),
        ));
    }
    if snapshot.is_empty() {
        return Err(Error::Dimension("empty snapshot".into()));
    }
    if snapshot.pressure.len() != snapshot.element_depths_m.len() {
        return Err(Error::Dimension(format!(
            "{} pressure samples vs {} element depths",
            snapshot.pressure.len(),
            snapshot.element_depths_m.len()
        )));
    }
    for &z in &snapshot.element_depths_m {
        if !(0.0 < z && z < env.water_depth_m) {
            return Err(Error::Domain(format!(
                "array element at {z} m outside the water column (0, {})",
                env.water_depth_m
            )));
        }
    }
    let f = snapshot.frequency_hz;
    let grid = DepthGrid::new(env, f, cfg.grid_step)?;
    let k_max = 2.0 * std::f64::consts::PI * f / env.ssp.min_speed();
    let (lo, hi) = cfg.band;
    let hi_eval = hi.min(k_max * (1.0 - 1e-12));
    if lo >= hi_eval {
        return Err(Error::Config(format!(
            "band ({lo}, {hi}) lies above the maximum water wavenumber {k_max:.6}"
        )));
    }

    let mut search = Search {
        snapshot,
        env,
        cfg,
        grid,
        lo,
        hi_eval,
        trace: Vec::new(),
        best: None,
    };

    // Coarse scan, ascending so the smallest anchor wins ties.
    let n = cfg.coarse_grid_points;
    let step = (hi_eval - lo) / n as f64;
    for i in 0..n {
        search.evaluate(lo + i as f64 * step);
    }
    if search.best.is_none() {
        return Err(Error::Solver(
            "epsilon_n too small for this snapshot (all anchor points infeasible)".into(),
        ));
    }

    // Golden-section refinement around the best coarse point.
    let center = search.best.as_ref().unwrap().1;
    let mut a = (center - step).max(lo);
    let mut b = (center + step).min(hi_eval);
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INVPHI * (b - a);
    let mut x2 = a + INVPHI * (b - a);
    let mut f1 = search.evaluate(x1);
    let mut f2 = search.evaluate(x2);
    while b - a > cfg.refine_tolerance {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INVPHI * (b - a);
            f1 = search.evaluate(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INVPHI * (b - a);
            f2 = search.evaluate(x2);
        }
    }

    let (_, anchor_xi, eval) = search.best.unwrap();
    let degenerate = eval.solution.amplitudes.iter().all(|v| v.norm() == 0.0);
    Ok(ModeEstimate {
        modes: eval.modes,
        amplitudes: ModeAmplitudes {
            values: eval.solution.amplitudes,
        },
        l1_norm: eval.solution.l1_norm,
        residual_l2: eval.solution.residual_l2,
        anchor_xi,
        epsilon_n: cfg.epsilon_n,
        degenerate,
        objective_trace: search.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_dict(n: usize) -> CMatrix {
        let cols = (0..n)
            .map(|j| {
                let mut c = vec![Complex64::new(0.0, 0.0); n];
                c[j] = Complex64::new(1.0, 0.0);
                c
            })
            .collect();
        CMatrix::from_columns(cols).unwrap()
    }

    #[test]
    fn identity_dictionary_zero_epsilon_recovers_input() {
        let dict = identity_dict(4);
        let p = vec![
            Complex64::new(1.0, -2.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(-3.0, 0.0),
            Complex64::new(0.25, 0.25),
        ];
        match bpdn_solve(&dict, &p, 0.0).unwrap() {
            BpdnOutcome::Solution(s) => {
                for (a, b) in s.amplitudes.iter().zip(&p) {
                    assert!((a - b).norm() < 1e-10);
                }
            }
            BpdnOutcome::Infeasible => panic!("identity system must be feasible"),
        }
    }

    #[test]
    fn large_epsilon_returns_zero() {
        let dict = identity_dict(3);
        let p = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
        ];
        let norm = cnorm(&p);
        match bpdn_solve(&dict, &p, norm * 1.0001).unwrap() {
            BpdnOutcome::Solution(s) => {
                assert_eq!(s.l1_norm, 0.0);
                assert!(s.amplitudes.iter().all(|v| v.norm() == 0.0));
            }
            BpdnOutcome::Infeasible => panic!(),
        }
    }

    #[test]
    fn infeasible_when_epsilon_below_ls_residual() {
        // One column cannot represent two independent observations.
        let dict = CMatrix::from_columns(vec![vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]])
        .unwrap();
        let p = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        // LS residual is sqrt(2); demand better.
        match bpdn_solve(&dict, &p, 0.5).unwrap() {
            BpdnOutcome::Infeasible => {}
            BpdnOutcome::Solution(_) => panic!("must be infeasible"),
        }
    }

    #[test]
    fn monotone_l1_in_epsilon() {
        let dict = CMatrix::from_columns(vec![
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.3, 0.1)],
            vec![Complex64::new(-0.2, 0.4), Complex64::new(0.8, 0.0)],
            vec![Complex64::new(0.5, 0.5), Complex64::new(0.1, -0.7)],
        ])
        .unwrap();
        let p = vec![Complex64::new(0.9, -0.4), Complex64::new(0.2, 0.7)];
        let mut last = f64::INFINITY;
        for eps in [0.01, 0.05, 0.2, 0.5] {
            match bpdn_solve(&dict, &p, eps).unwrap() {
                BpdnOutcome::Solution(s) => {
                    assert!(
                        s.l1_norm <= last + 1e-9,
                        "L1 should not increase with epsilon"
                    );
                    assert!(s.residual_l2 <= eps * (1.0 + 1e-6));
                    last = s.l1_norm;
                }
                BpdnOutcome::Infeasible => panic!("feasible at eps={eps}"),
            }
        }
    }

    #[test]
    fn scale_equivariance() {
        let dict = CMatrix::from_columns(vec![
            vec![Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)],
            vec![Complex64::new(0.8, 0.1), Complex64::new(-0.6, 0.2)],
        ])
        .unwrap();
        let p = vec![Complex64::new(1.0, 0.3), Complex64::new(-0.5, 0.8)];
        let eps = 0.1;
        let c = 3.5;
        let pc: Vec<Complex64> = p.iter().map(|x| x * c).collect();
        let s1 = match bpdn_solve(&dict, &p, eps).unwrap() {
            BpdnOutcome::Solution(s) => s,
            _ => panic!(),
        };
        let s2 = match bpdn_solve(&dict, &pc, eps * c).unwrap() {
            BpdnOutcome::Solution(s) => s,
            _ => panic!(),
        };
        for (a, b) in s1.amplitudes.iter().zip(&s2.amplitudes) {
            assert!(
                (a * c - b).norm() < 1e-6 * (a.norm() * c).max(1e-12),
                "{a} * {c} vs {b}"
            );
        }
    }

    #[test]
    fn epsilon_known_sigma_formula() {
        let snap = PressureSnapshot {
            frequency_hz: 596.0,
            element_depths_m: (1..=30).map(|i| i as f64).collect(),
            pressure: vec![Complex64::new(0.0, 0.0); 30],
            noise_sigma: Some(1.0541e-3),
            seed: None,
        };
        let eps = epsilon_from_noise(&snap, EpsilonMode::KnownSigma).unwrap();
        assert!((eps - 6.351e-3).abs() < 5e-6, "eps {eps}");
    }

    #[test]
    fn epsilon_zero_sigma_floor() {
        let snap = PressureSnapshot {
            frequency_hz: 596.0,
            element_depths_m: vec![1.0, 2.0],
            pressure: vec![Complex64::new(0.0, 0.0); 2],
            noise_sigma: Some(0.0),
            seed: None,
        };
        assert_eq!(
            epsilon_from_noise(&snap, EpsilonMode::KnownSigma).unwrap(),
            1e-12
        );
    }

    #[test]
    fn epsilon_offbin_median() {
        let snap = PressureSnapshot {
            frequency_hz: 596.0,
            element_depths_m: vec![1.0, 2.0],
            pressure: vec![Complex64::new(0.0, 0.0); 2],
            noise_sigma: None,
            seed: None,
        };
        let bins = vec![
            vec![Complex64::new(0.9, 0.0), Complex64::new(0.0, 0.0)],
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            vec![Complex64::new(1.3, 0.0), Complex64::new(0.0, 0.0)],
        ];
        let eps = epsilon_from_noise(&snap, EpsilonMode::OffBinEstimate(&bins)).unwrap();
        assert!((eps - 1.1).abs() < 1e-12);
        assert!(epsilon_from_noise(&snap, EpsilonMode::OffBinEstimate(&[])).is_err());
    }

    #[test]
    fn solver_config_validation() {
        assert!(SolverConfig::new(1e-3, (2.0, 2.5)).is_ok());
        assert!(SolverConfig::new(0.0, (2.0, 2.5)).is_err());
        assert!(SolverConfig::new(1e-3, (2.5, 2.0)).is_err());
        let mut cfg = SolverConfig::new(1e-3, (2.0, 2.5)).unwrap();
        cfg.coarse_grid_points = 5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bpdn_rejects_bad_inputs() {
        let dict = identity_dict(2);
        let p = vec![Complex64::new(1.0, 0.0)];
        assert!(bpdn_solve(&dict, &p, 0.1).is_err()); // length mismatch
        let p2 = vec![Complex64::new(f64::NAN, 0.0), Complex64::new(0.0, 0.0)];
        assert!(bpdn_solve(&dict, &p2, 0.1).is_err());
        let p3 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(bpdn_solve(&dict, &p3, -0.1).is_err());
    }
}
