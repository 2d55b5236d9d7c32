//! Depth-sign search and final depth estimation.
//!
//! The estimated mode amplitudes carry unknown signs (the mode functions'
//! values at the unknown source depth). For every hypothesized depth z_q
//! on a 0.1 m ladder, the sign pattern sign[psi_m(z_q)] compensates the
//! ambiguity function; the pattern whose compensated, normalized ambiguity
//! function is closest (KL divergence) to the Dirichlet-kernel template
//! centered at z_q wins, and the source depth is read off the peak of that
//! ambiguity function — not off z_q itself, since one sign pattern can
//! correspond to several depths.

use crate::env::DepthGrid;
use crate::error::{Error, Result};
use crate::modes::ModeSet;
use crate::ocms::ModeEstimate;

/// Additive floor keeping the template strictly positive.
const TEMPLATE_EPSILON: f64 = 1e-6;

/// One sign pattern on the depth ladder.
#[derive(Debug, Clone)]
pub struct SignHypothesis {
    pub q: usize,
    pub depth_m: f64,
    pub signs: Vec<i8>,
}

/// Depth estimate with the evidence behind it.
#[derive(Debug, Clone)]
pub struct DepthResult {
    pub estimated_depth_m: f64,
    pub selected_q0: usize,
    pub selected_signs: Vec<i8>,
    /// D(z, q0) on the dense grid, unit trapezoid integral.
    pub ambiguity: Vec<f64>,
    /// KL(q) for q = 1..Q.
    pub kl_trace: Vec<f64>,
}

/// Knobs for the sign search.
#[derive(Debug, Clone, Copy)]
pub struct DssConfig {
    /// Ladder spacing for sign sampling (0.1 m unless stated otherwise).
    pub sign_step_m: f64,
    /// Modes with |a| below this fraction of max|a| keep a fixed + sign
    /// instead of joining the enumeration; their contribution to D is
    /// negligible and near-zero amplitudes would otherwise inject noise
    /// signs.
    pub amplitude_floor_rel: f64,
}

impl Default for DssConfig {
    fn default() -> Self {
        Self {
            sign_step_m: 0.1,
            amplitude_floor_rel: 1e-3,
        }
    }
}

/// Sign-compensated depth ambiguity function
/// D(z) = |sum_m psi_m(z) |a_m| delta_m|^2, normalized to unit trapezoid
/// integral over the grid.
pub fn ambiguity(modes: &ModeSet, amp_moduli: &[f64], signs: &[i8]) -> Result<Vec<f64>> {
    if amp_moduli.len() != modes.len() || signs.len() != modes.len() {
        return Err(Error::Dimension(format!(
            "{} modes vs {} moduli / {} signs",
            modes.len(),
            amp_moduli.len(),
            signs.len()
        )));
    }
    if amp_moduli.iter().any(|m| *m < 0.0) {
        return Err(Error::Domain("amplitude moduli must be non-negative".into()));
    }
    if amp_moduli.iter().all(|m| *m == 0.0) {
        return Err(Error::Domain(
            "all amplitude moduli are zero (degenerate estimate)".into(),
        ));
    }
    let n = modes.grid.len();
    let mut d = vec![0.0f64; n];
    for ((func, &a), &s) in modes.functions.iter().zip(amp_moduli).zip(signs) {
        if a == 0.0 {
            continue;
        }
        let w = a * s as f64;
        for (acc, &v) in d.iter_mut().zip(func) {
            *acc += w * v;
        }
    }
    for v in d.iter_mut() {
        *v = *v * *v;
    }
    let integral = modes.grid.trapezoid(&d);
    if integral <= 0.0 {
        return Err(Error::Domain("ambiguity function vanishes".into()));
    }
    for v in d.iter_mut() {
        *v /= integral;
    }
    Ok(d)
}

/// Raw squared Dirichlet-kernel ratio |sin[(M+1)pi dz/H] / sin[pi dz/(2H)]|^2
/// with its removable singularity patched by the limit (2(M+1))^2.
pub(crate) fn template_ratio_squared(dz: f64, m_modes: usize, water_depth: f64, half_step: f64) -> f64 {
    if dz.abs() < half_step {
        let lim = 2.0 * (m_modes as f64 + 1.0);
        return lim * lim;
    }
    let num = ((m_modes as f64 + 1.0) * std::f64::consts::PI * dz / water_depth).sin();
    let den = (std::f64::consts::PI * dz / (2.0 * water_depth)).sin();
    let r = num / den;
    r * r
}

/// Theoretical ambiguity-function template centered at z_q, floored at a
/// small epsilon and normalized to unit trapezoid integral.
pub fn dirichlet_template(
    z_q: f64,
    m_modes: usize,
    water_depth: f64,
    grid: &DepthGrid,
) -> Result<Vec<f64>> {
    if !(0.0 < z_q && z_q <= water_depth) {
        return Err(Error::Domain(format!(
            "template depth {z_q} outside (0, {water_depth}]"
        )));
    }
    if m_modes == 0 {
        return Err(Error::Domain("template needs at least one mode".into()));
    }
    let half_step = 0.5 * grid.step();
    let mut ds: Vec<f64> = grid
        .depths()
        .map(|z| template_ratio_squared(z - z_q, m_modes, water_depth, half_step) + TEMPLATE_EPSILON)
        .collect();
    let integral = grid.trapezoid(&ds);
    for v in ds.iter_mut() {
        *v /= integral;
    }
    Ok(ds)
}

/// Trapezoid KL divergence integral of d ln(d/ds); entries where d = 0
/// contribute zero by the usual limit convention.
pub fn kl_divergence(d: &[f64], ds: &[f64], step: f64) -> Result<f64> {
    if d.len() != ds.len() || d.len() < 2 {
        return Err(Error::Dimension("KL inputs must have equal length >= 2".into()));
    }
    let mut acc = 0.0f64;
    for (i, (&a, &b)) in d.iter().zip(ds).enumerate() {
        if a < 0.0 || b < 0.0 {
            return Err(Error::Domain("negative density in KL divergence".into()));
        }
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(Error::Domain("template must be strictly positive".into()));
        }
        let w = if i == 0 || i == d.len() - 1 { 0.5 } else { 1.0 };
        acc += w * a * (a / b).ln();
    }
    Ok(acc * step)
}

fn sign_of(x: f64) -> i8 {
    // Convention: sign(0) = +1.
    if x < 0.0 {
        -1
    } else {
        1
    }
}

/// Full depth-sign search over the 0.1 m ladder.
pub fn estimate_depth(
    estimate: &ModeEstimate,
    water_depth: f64,
    cfg: &DssConfig,
) -> Result<DepthResult> {
    if estimate.degenerate {
        return Err(Error::Domain(
            "degenerate mode estimate (all amplitudes zero)".into(),
        ));
    }
    let modes = &estimate.modes;
    let moduli = estimate.amplitudes.moduli();
    let max_mod = moduli.iter().cloned().fold(0.0f64, f64::max);
    if max_mod == 0.0 {
        return Err(Error::Domain(
            "all amplitude moduli are zero (degenerate estimate)".into(),
        ));
    }
    if !(cfg.sign_step_m > 0.0) {
        return Err(Error::Config("sign step must be positive".into()));
    }
    let enumerate: Vec<bool> = moduli
        .iter()
        .map(|&a| a >= cfg.amplitude_floor_rel * max_mod)
        .collect();

    let q_count = (water_depth / cfg.sign_step_m + 1e-9).floor() as usize;
    if q_count == 0 {
        return Err(Error::Config("sign step exceeds water depth".into()));
    }
    let m_template = enumerate.iter().filter(|&&e| e).count();

    let mut kl_trace = Vec::with_capacity(q_count);
    let mut best: Option<(f64, SignHypothesis)> = None;
    for q in 1..=q_count {
        let z_q = q as f64 * cfg.sign_step_m;
        let at_zq = modes.sample_at_depths(&[z_q])?;
        let hypothesis = SignHypothesis {
            q,
            depth_m: z_q,
            signs: at_zq[0]
                .iter()
                .zip(&enumerate)
                .map(|(&psi, &e)| if e { sign_of(psi) } else { 1 })
                .collect(),
        };
        let d = ambiguity(modes, &moduli, &hypothesis.signs)?;
        let ds = dirichlet_template(z_q, m_template, water_depth, &modes.grid)?;
        let kl = kl_divergence(&d, &ds, modes.grid.step())?;
        kl_trace.push(kl);
        let better = match &best {
            None => true,
            Some((bkl, _)) => kl < *bkl,
        };
        if better {
            best = Some((kl, hypothesis));
        }
    }
    let (_, chosen) = best.expect("at least one hypothesis");
    let (q0, signs) = (chosen.q, chosen.signs);

    let d0 = ambiguity(modes, &moduli, &signs)?;
    let mut peak = 0usize;
    let mut peak_val = f64::NEG_INFINITY;
    for (l, &v) in d0.iter().enumerate() {
        if v > peak_val {
            peak_val = v;
            peak = l;
        }
    }
    Ok(DepthResult {
        estimated_depth_m: modes.grid.depth_of(peak),
        selected_q0: q0,
        selected_signs: signs,
        ambiguity: d0,
        kl_trace,
    })
}
