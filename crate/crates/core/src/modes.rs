//! Depth-direction mode numerics.
//!
//! Three solvers share the same second-order difference scheme on the
//! depth grid:
//!
//! * [`propagate_recurrence`] — marches a trial solution down from the
//!   surface for a given horizontal wavenumber.
//! * [`candidate_mode_set`] — given one anchor wavenumber, closes the
//!   water-column operator with the anchor trial's bottom ratio and
//!   eigensolves it, producing a fully orthonormal dictionary of mode
//!   depth functions that contains the anchor by construction.
//! * [`reference_mode_set`] — truth model: trapped modes of the waveguide
//!   with a fluid halfspace bottom, found by shooting and bisection on the
//!   bottom impedance mismatch.

use crate::env::{DepthGrid, Environment};
use crate::error::{Error, Result};
use crate::linalg;

/// How a mode set was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeKind {
    /// Halfspace truth model.
    Reference,
    /// Orthogonality-constrained dictionary anchored at one wavenumber.
    Candidate { anchor_xi: f64 },
}

/// Ordered set of modal wavenumbers and mode depth functions on the grid.
///
/// Functions are sampled on nodes 0..=L, satisfy psi(0) = 0, carry unit
/// discrete norm sum(psi^2) * h = 1, and are sign-fixed so the first lobe
/// below the surface is positive. Wavenumbers are strictly decreasing, so
/// index 0 is mode 1.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub grid: DepthGrid,
    pub frequency_hz: f64,
    pub wavenumbers: Vec<f64>,
    pub functions: Vec<Vec<f64>>,
    pub kind: ModeKind,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavenumbers.is_empty()
    }

    /// Mode order by node count: 1 + number of interior sign changes.
    pub fn mode_order(&self, idx: usize) -> usize {
        let f = &self.functions[idx];
        let max = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let eps = 1e-9 * max;
        let mut changes = 0usize;
        let mut last = 0.0f64;
        for &v in &f[1..] {
            if v.abs() <= eps {
                continue;
            }
            if last != 0.0 && v.signum() != last {
                changes += 1;
            }
            last = v.signum();
        }
        1 + changes
    }

    /// Largest deviation of the discrete Gram matrix from the identity.
    pub fn gram_max_deviation(&self) -> f64 {
        let h = self.grid.step();
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..=i {
                let dot: f64 = self.functions[i]
                    .iter()
                    .zip(&self.functions[j])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    * h;
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst
    }

    /// Linear interpolation of every mode function onto the given depths.
    /// Returns one row per depth, one column per mode.
    pub fn sample_at_depths(&self, depths: &[f64]) -> Result<Vec<Vec<f64>>> {
        let h = self.grid.step();
        let deepest = self.grid.deepest_index();
        let bottom = self.grid.bottom_depth();
        let mut rows = Vec::with_capacity(depths.len());
        for &z in depths {
            // The deepest node sits within one step of the true bottom;
            // depths in that sliver take the bottom-node value.
            if !(0.0..=bottom + h).contains(&z) {
                return Err(Error::Domain(format!(
                    "sample depth {z} m outside water column [0, {:.6}]",
                    bottom + h
                )));
            }
            let pos = (z / h).min(deepest as f64);
            // Exact at knots: snap away the roundoff of z/h.
            let nearest = pos.round();
            let row = if (pos - nearest).abs() < 1e-9 && nearest >= 0.0 {
                let l = nearest as usize;
                self.functions.iter().map(|f| f[l]).collect()
            } else {
                let l = (pos.floor() as usize).min(deepest - 1);
                let frac = pos - l as f64;
                self.functions
                    .iter()
                    .map(|f| (1.0 - frac) * f[l] + frac * f[l + 1])
                    .collect()
            };
            rows.push(row);
        }
        Ok(rows)
    }
}

/// k^2(z_l) profile on the grid nodes.
fn k_squared_profile(env: &Environment, grid: &DepthGrid, f: f64) -> Result<Vec<f64>> {
    let omega = 2.0 * std::f64::consts::PI * f;
    let mut out = Vec::with_capacity(grid.len());
    for z in grid.depths() {
        // The deepest node can overshoot H by roundoff; clamp for lookup.
        let c = env.speed_at(z.min(env.water_depth_m))?;
        let k = omega / c;
        out.push(k * k);
    }
    Ok(out)
}

fn check_xi(env: &Environment, f: f64, xi: f64) -> Result<()> {
    if xi <= 0.0 {
        return Err(Error::Domain(format!("wavenumber {xi} must be positive")));
    }
    let k_max = 2.0 * std::f64::consts::PI * f / env.ssp.min_speed();
    if xi >= k_max {
        return Err(Error::Domain(format!(
            "wavenumber {xi} >= 2*pi*f/min(c) = {k_max:.6}; no turning point possible"
        )));
    }
    Ok(())
}

/// Trial solution of the difference scheme with initial values (u0, u1):
/// u_{l+1} = d_l u_l - u_{l-1}, d_l = 2 - h^2 (k^2(z_l) - xi^2).
pub fn propagate_from(
    env: &Environment,
    grid: &DepthGrid,
    f: f64,
    xi: f64,
    u0: f64,
    u1: f64,
) -> Result<Vec<f64>> {
    check_xi(env, f, xi)?;
    let k2 = k_squared_profile(env, grid, f)?;
    Ok(propagate_profile(&k2, grid.step(), xi, u0, u1).0)
}

/// Trial solution with the standard surface start u0 = 0, u1 = h
/// (arbitrary scale). Unnormalized.
pub fn propagate_recurrence(
    env: &Environment,
    grid: &DepthGrid,
    f: f64,
    xi: f64,
) -> Result<Vec<f64>> {
    propagate_from(env, grid, f, xi, 0.0, grid.step())
}

/// Returns (u over nodes 0..=L, ghost value u_{L+1}).
fn propagate_profile(k2: &[f64], h: f64, xi: f64, u0: f64, u1: f64) -> (Vec<f64>, f64) {
    let n = k2.len();
    let h2 = h * h;
    let xi2 = xi * xi;
    let mut u = Vec::with_capacity(n);
    u.push(u0);
    u.push(u1);
    for l in 1..n - 1 {
        let d = 2.0 - h2 * (k2[l] - xi2);
        let next = d * u[l] - u[l - 1];
        u.push(next);
        if next.abs() > 1e200 {
            // Linear problem: rescaling the whole history is harmless and
            // keeps evanescent tails from overflowing.
            for x in u.iter_mut() {
                *x *= 1e-200;
            }
        }
    }
    let d_last = 2.0 - h2 * (k2[n - 1] - xi2);
    let ghost = d_last * u[n - 1] - u[n - 2];
    (u, ghost)
}

/// Orthonormal candidate dictionary anchored at `xi_anchor`.
///
/// The anchor trial's one-step-beyond-bottom ratio closes the interior
/// operator on nodes 1..=L; its symmetric eigenproblem then yields mode
/// depth functions that are exactly orthonormal on the grid and include
/// the anchor wavenumber as an eigenvalue by construction. Wavenumbers are
/// clipped strictly to `band`.
pub fn candidate_mode_set(
    env: &Environment,
    grid: &DepthGrid,
    f: f64,
    xi_anchor: f64,
    band: (f64, f64),
) -> Result<ModeSet> {
    let (lo, hi) = band;
    if !(lo < hi) || lo <= 0.0 {
        return Err(Error::Domain(format!("empty wavenumber band ({lo}, {hi})")));
    }
    if !(lo..=hi).contains(&xi_anchor) {
        return Err(Error::Domain(format!(
            "anchor {xi_anchor} outside band ({lo}, {hi})"
        )));
    }
    check_xi(env, f, xi_anchor)?;
    let k2 = k_squared_profile(env, grid, f)?;
    let h = grid.step();

    // A trial whose bottom node is (numerically) a node of the solution
    // leaves the closure ratio undefined; nudge the anchor and retry.
    let mut last_err = String::new();
    for attempt in 0..5u32 {
        let delta = match attempt {
            0 => 0.0,
            1 => 1e-7,
            2 => -1e-7,
            3 => 2e-7,
            _ => -2e-7,
        };
        let xi_try = xi_anchor * (1.0 + delta);
        let (u, ghost) = propagate_profile(&k2, h, xi_try, 0.0, h);
        let max_u = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let bottom = *u.last().unwrap();
        if max_u == 0.0 || bottom.abs() / max_u < 1e-12 {
            last_err = format!("trial solution node at bottom for anchor {xi_try}");
            continue;
        }
        let beta = ghost / bottom;
        return assemble_candidate_set(grid, f, &k2, xi_try, beta, (lo, hi));
    }
    Err(Error::Solver(format!(
        "candidate set failed after 5 anchor perturbations: {last_err}"
    )))
}

fn assemble_candidate_set(
    grid: &DepthGrid,
    frequency_hz: f64,
    k2: &[f64],
    xi_anchor: f64,
    beta: f64,
    band: (f64, f64),
) -> Result<ModeSet> {
    let h = grid.step();
    let h2 = h * h;
    let deepest = grid.deepest_index();
    // Interior operator on nodes 1..=L; ghost closure psi_{L+1} = beta psi_L
    // folds into the last diagonal entry.
    let n = deepest;
    let mut diag: Vec<f64> = (1..=deepest).map(|l| -2.0 / h2 + k2[l]).collect();
    diag[n - 1] += beta / h2;
    let offdiag = vec![1.0 / h2; n - 1];

    let lam_lo = band.0 * band.0 * (1.0 - 1e-12);
    let lam_hi = band.1 * band.1 * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let eig = linalg::tridiag_eigensolve_range(&diag, &offdiag, lam_lo, lam_hi)?;
    if eig.eigenvalues.is_empty() {
        return Err(Error::Solver(format!(
            "no candidate modes in band ({}, {})",
            band.0, band.1
        )));
    }

    // Exact orthonormality, then descending wavenumber order.
    let mut vectors = eig.eigenvectors;
    linalg::orthonormalize(&mut vectors);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.reverse();

    let mut wavenumbers = Vec::with_capacity(order.len());
    let mut functions = Vec::with_capacity(order.len());
    let scale = 1.0 / h.sqrt();
    for &i in &order {
        let lam = eig.eigenvalues[i];
        if lam <= 0.0 {
            continue;
        }
        let xi = lam.sqrt();
        if xi < band.0 || xi > band.1 {
            continue;
        }
        let mut f = Vec::with_capacity(grid.len());
        f.push(0.0);
        f.extend(vectors[i].iter().map(|v| v * scale));
        fix_sign(&mut f);
        wavenumbers.push(xi);
        functions.push(f);
    }

    let anchored = wavenumbers
        .iter()
        .map(|x| (x - xi_anchor).abs())
        .fold(f64::INFINITY, f64::min);
    if anchored > 1e-9 * xi_anchor {
        return Err(Error::Solver(format!(
            "anchor {xi_anchor} missing from candidate spectrum (nearest offset {anchored:.3e})"
        )));
    }

    Ok(ModeSet {
        grid: *grid,
        frequency_hz,
        wavenumbers,
        functions,
        kind: ModeKind::Candidate { anchor_xi: xi_anchor },
    })
}

/// Makes the first lobe below the surface positive.
fn fix_sign(f: &mut [f64]) {
    let max = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if max == 0.0 {
        return;
    }
    for &v in f.iter() {
        if v.abs() > 1e-8 * max {
            if v < 0.0 {
                for x in f.iter_mut() {
                    *x = -*x;
                }
            }
            return;
        }
    }
}

/// Trapped modes of the waveguide with the configured halfspace bottom.
///
/// Shooting from the surface; an eigenvalue is a zero of the bottom
/// impedance mismatch psi'(H) + gamma_b (rho_w/rho_b) psi(H), located by a
/// 4000-point bracket scan over the trapped band and bisection to 1e-10.
/// Mode functions are normalized to the water-column convention
/// sum(psi^2) h = 1 (the evanescent tail contributes to the physical norm
/// but is renormalized away for comparability with candidate sets).
///
/// Returns an empty set when no trapped modes exist in the band.
pub fn reference_mode_set(env: &Environment, grid: &DepthGrid, f: f64) -> Result<ModeSet> {
    let hs = env.halfspace.as_ref().ok_or_else(|| {
        Error::Config("reference mode solver requires a halfspace bottom".into())
    })?;
    let omega = 2.0 * std::f64::consts::PI * f;
    let k_bottom = omega / hs.speed_mps;
    let k_water_max = omega / env.ssp.min_speed();
    let k2 = k_squared_profile(env, grid, f)?;
    let h = grid.step();
    let rho_ratio_wb = 1.0 / hs.density_ratio; // rho_w / rho_b

    let mismatch = |xi: f64| -> f64 {
        let (u, ghost) = propagate_profile(&k2, h, xi, 0.0, h);
        let n = u.len();
        let psi_bottom = u[n - 1];
        let dpsi = (ghost - u[n - 2]) / (2.0 * h);
        let gamma_b = (xi * xi - k_bottom * k_bottom).max(0.0).sqrt();
        // Scale out the trial amplitude so the scan is well conditioned.
        let scale = psi_bottom.abs().max(dpsi.abs()).max(1e-300);
        (dpsi + gamma_b * rho_ratio_wb * psi_bottom) / scale
    };

    const SCAN_POINTS: usize = 4000;
    let pad = 1e-9 * (k_water_max - k_bottom);
    let lo = k_bottom + pad;
    let hi = k_water_max - pad;
    let mut roots: Vec<f64> = Vec::new();
    if lo < hi {
        let step = (hi - lo) / SCAN_POINTS as f64;
        let mut prev_x = lo;
        let mut prev_v = mismatch(lo);
        for i in 1..=SCAN_POINTS {
            let x = lo + i as f64 * step;
            let v = mismatch(x);
            if prev_v == 0.0 {
                roots.push(prev_x);
            } else if prev_v * v < 0.0 {
                let (mut a, mut b) = (prev_x, x);
                let mut fa = prev_v;
                while b - a > 1e-10 {
                    let mid = 0.5 * (a + b);
                    let fm = mismatch(mid);
                    if fa * fm <= 0.0 {
                        b = mid;
                    } else {
                        a = mid;
                        fa = fm;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            prev_x = x;
            prev_v = v;
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    // Descending wavenumber = ascending mode order.
    roots.reverse();
    let mut functions = Vec::with_capacity(roots.len());
    for &xi in &roots {
        let (u, _) = propagate_profile(&k2, h, xi, 0.0, h);
        let norm2: f64 = u.iter().map(|v| v * v).sum::<f64>() * h;
        let scale = 1.0 / norm2.sqrt();
        let mut psi: Vec<f64> = u.iter().map(|v| v * scale).collect();
        fix_sign(&mut psi);
        functions.push(psi);
    }

    Ok(ModeSet {
        grid: *grid,
        frequency_hz: f,
        wavenumbers: roots,
        functions,
        kind: ModeKind::Reference,
    })
}
