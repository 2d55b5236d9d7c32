//! On-disk formats: snapshots, mode estimates, time series, sweep tables,
//! and run manifests. All numeric text is shortest round-trip decimal, so
//! reading back reproduces the doubles bit-for-bit.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::dss::DepthResult;
use crate::error::{Error, Result};
use crate::field::PressureSnapshot;
use crate::harness::{SweepAggregate, SweepResult, TimeSeries, TrialRecord};
use crate::ocms::ModeEstimate;

// ---------------------------------------------------------------------------
// Snapshot files
// ---------------------------------------------------------------------------

/// Writes a snapshot:
/// `# freq_hz=...`, `# snr_db=...`, `# seed=...`, `# noise_sigma=...`,
/// then CSV rows `depth_m,re,im`. `snr_db` is the requested array-level
/// SNR (inf for clean snapshots); sigma is the realized noise std.
pub fn write_snapshot(path: &Path, snap: &PressureSnapshot, snr_db: f64) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# freq_hz={}", snap.frequency_hz).unwrap();
    writeln!(out, "# snr_db={}", fmt_f64(snr_db)).unwrap();
    match snap.seed {
        Some(s) => writeln!(out, "# seed={s}").unwrap(),
        None => writeln!(out, "# seed=").unwrap(),
    }
    match snap.noise_sigma {
        Some(s) => writeln!(out, "# noise_sigma={}", fmt_f64(s)).unwrap(),
        None => writeln!(out, "# noise_sigma=").unwrap(),
    }
    writeln!(out, "depth_m,re,im").unwrap();
    for (z, p) in snap.element_depths_m.iter().zip(&snap.pressure) {
        writeln!(out, "{},{},{}", z, p.re, p.im).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<PressureSnapshot> {
    let text = std::fs::read_to_string(path)?;
    let mut freq = None;
    let mut seed = None;
    let mut sigma = None;
    let mut depths = Vec::new();
    let mut pressure = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("freq_hz=") {
                freq = Some(parse_f64(v)?);
            } else if let Some(v) = rest.strip_prefix("seed=") {
                if !v.is_empty() {
                    seed = Some(v.parse::<u64>().map_err(|e| Error::Parse(e.to_string()))?);
                }
            } else if let Some(v) = rest.strip_prefix("noise_sigma=") {
                if !v.is_empty() {
                    sigma = Some(parse_f64(v)?);
                }
            }
            continue;
        }
        if line.starts_with("depth_m") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("snapshot row `{line}`")));
        }
        depths.push(parse_f64(fields[0])?);
        pressure.push(Complex64::new(parse_f64(fields[1])?, parse_f64(fields[2])?));
    }
    let frequency_hz =
        freq.ok_or_else(|| Error::Parse("snapshot missing # freq_hz header".into()))?;
    if depths.is_empty() {
        return Err(Error::Parse("snapshot has no element rows".into()));
    }
    Ok(PressureSnapshot {
        frequency_hz,
        element_depths_m: depths,
        pressure,
        noise_sigma: sigma,
        seed,
    })
}

// ---------------------------------------------------------------------------
// Mode-estimate files
// ---------------------------------------------------------------------------

/// Parsed mode-estimate file. Mode depth functions are not stored; they
/// are reproducible from the anchor, band and grid step recorded here.
#[derive(Debug, Clone)]
pub struct ModeEstimateFile {
    pub frequency_hz: f64,
    pub anchor_xi: f64,
    pub band: (f64, f64),
    pub epsilon_n: f64,
    pub residual_l2: f64,
    pub l1_norm: f64,
    pub degenerate: bool,
    pub grid_step: f64,
    pub wavenumbers: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
}

pub fn write_mode_estimate(
    path: &Path,
    est: &ModeEstimate,
    band: (f64, f64),
) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# freq_hz={}", est.modes.frequency_hz).unwrap();
    writeln!(out, "# anchor_xi={}", est.anchor_xi).unwrap();
    writeln!(out, "# band={},{}", band.0, band.1).unwrap();
    writeln!(out, "# epsilon_n={}", est.epsilon_n).unwrap();
    writeln!(out, "# residual_l2={}", est.residual_l2).unwrap();
    writeln!(out, "# l1_norm={}", est.l1_norm).unwrap();
    writeln!(out, "# degenerate={}", est.degenerate as u8).unwrap();
    writeln!(out, "# grid_step={}", est.modes.grid.step()).unwrap();
    writeln!(out, "mode,k_per_m,re_a,im_a").unwrap();
    for (i, (k, a)) in est
        .modes
        .wavenumbers
        .iter()
        .zip(&est.amplitudes.values)
        .enumerate()
    {
        writeln!(out, "{},{},{},{}", i + 1, k, a.re, a.im).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_mode_estimate(path: &Path) -> Result<ModeEstimateFile> {
    let text = std::fs::read_to_string(path)?;
    let mut freq = None;
    let mut anchor = None;
    let mut band = None;
    let mut epsilon = None;
    let mut residual = None;
    let mut l1 = None;
    let mut degenerate = false;
    let mut grid_step = None;
    let mut wavenumbers = Vec::new();
    let mut amplitudes = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("mode,") {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("freq_hz=") {
                freq = Some(parse_f64(v)?);
            } else if let Some(v) = rest.strip_prefix("anchor_xi=") {
                anchor = Some(parse_f64(v)?);
            } else if let Some(v) = rest.strip_prefix("band=") {
                let parts: Vec<&str> = v.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::Parse("band header needs two values".into()));
                }
                band = Some((parse_f64(parts[0])?, parse_f64(parts[1])?));
            } else if let Some(v) = rest.strip_prefix("epsilon_n=") {
                epsilon = Some(parse_f64(v)?);
            } else if let Some(v) = rest.strip_prefix("residual_l2=") {
                residual = Some(parse_f64(v)?);
            } else if let Some(v) = rest.strip_prefix("l1_norm=") {
                l1 = Some(parse_f64(v)?);
            } else if let Some(v) = rest.strip_prefix("degenerate=") {
                degenerate = v == "1";
            } else if let Some(v) = rest.strip_prefix("grid_step=") {
                grid_step = Some(parse_f64(v)?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("mode estimate row `{line}`")));
        }
        wavenumbers.push(parse_f64(fields[1])?);
        amplitudes.push(Complex64::new(parse_f64(fields[2])?, parse_f64(fields[3])?));
    }
    Ok(ModeEstimateFile {
        frequency_hz: freq.ok_or_else(|| Error::Parse("missing freq_hz".into()))?,
        anchor_xi: anchor.ok_or_else(|| Error::Parse("missing anchor_xi".into()))?,
        band: band.ok_or_else(|| Error::Parse("missing band".into()))?,
        epsilon_n: epsilon.ok_or_else(|| Error::Parse("missing epsilon_n".into()))?,
        residual_l2: residual.ok_or_else(|| Error::Parse("missing residual_l2".into()))?,
        l1_norm: l1.ok_or_else(|| Error::Parse("missing l1_norm".into()))?,
        degenerate,
        grid_step: grid_step.ok_or_else(|| Error::Parse("missing grid_step".into()))?,
        wavenumbers,
        amplitudes,
    })
}

/// Dense mode-function dump: `z_m, psi_1 .. psi_M` per grid node.
pub fn write_mode_functions(path: &Path, est: &ModeEstimate) -> Result<()> {
    let grid = &est.modes.grid;
    let mut out = String::new();
    write!(out, "z_m").unwrap();
    for i in 1..=est.modes.len() {
        write!(out, ",psi_{i}").unwrap();
    }
    writeln!(out).unwrap();
    for l in 0..grid.len() {
        write!(out, "{}", grid.depth_of(l)).unwrap();
        for f in &est.modes.functions {
            write!(out, ",{}", f[l]).unwrap();
        }
        writeln!(out).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Objective trace: `xi_per_m, l1_norm` per feasible evaluation.
pub fn write_objective_trace(path: &Path, est: &ModeEstimate) -> Result<()> {
    let mut out = String::from("xi_per_m,l1_norm\n");
    for (xi, j) in &est.objective_trace {
        writeln!(out, "{xi},{j}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Depth-result files
// ---------------------------------------------------------------------------

pub fn write_depth_result(path: &Path, res: &DepthResult) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# estimated_depth_m={}", res.estimated_depth_m).unwrap();
    writeln!(out, "# q0={}", res.selected_q0).unwrap();
    let signs: Vec<String> = res
        .selected_signs
        .iter()
        .map(|s| if *s >= 0 { "+1".into() } else { "-1".to_string() })
        .collect();
    writeln!(out, "# signs={}", signs.join(",")).unwrap();
    std::fs::write(path, out)?;
    Ok(())
}

/// D(z, q0) over the dense grid: `z_m, D`.
pub fn write_ambiguity(path: &Path, res: &DepthResult, step: f64) -> Result<()> {
    let mut out = String::from("z_m,D\n");
    for (l, v) in res.ambiguity.iter().enumerate() {
        writeln!(out, "{},{}", l as f64 * step, v).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// KL(q) trace: `q, z_q_m, kl`.
pub fn write_kl_trace(path: &Path, res: &DepthResult, sign_step_m: f64) -> Result<()> {
    let mut out = String::from("q,z_q_m,kl\n");
    for (i, kl) in res.kl_trace.iter().enumerate() {
        let q = i + 1;
        writeln!(out, "{q},{},{kl}", q as f64 * sign_step_m).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Time-series files
// ---------------------------------------------------------------------------

/// Reads a multichannel recording:
/// `# sample_rate_hz=...`, `# depths_m=z1,z2,...`, then one CSV row per
/// sample with one column per element (ordered by depth).
pub fn read_time_series(path: &Path) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path)?;
    let mut rate = None;
    let mut depths: Option<Vec<f64>> = None;
    let mut channels: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("sample_rate_hz=") {
                rate = Some(parse_f64(v)?);
            } else if let Some(v) = rest.strip_prefix("depths_m=") {
                let d: Result<Vec<f64>> = v.split(',').map(parse_f64).collect();
                depths = Some(d?);
            }
            continue;
        }
        let row: Result<Vec<f64>> = line.split(',').map(parse_f64).collect();
        let row = row?;
        if channels.is_empty() {
            channels = vec![Vec::new(); row.len()];
        }
        if row.len() != channels.len() {
            return Err(Error::Parse(format!(
                "time-series row has {} columns, expected {}",
                row.len(),
                channels.len()
            )));
        }
        for (c, v) in channels.iter_mut().zip(row) {
            c.push(v);
        }
    }
    let sample_rate_hz =
        rate.ok_or_else(|| Error::Parse("missing # sample_rate_hz header".into()))?;
    let element_depths_m =
        depths.ok_or_else(|| Error::Parse("missing # depths_m header".into()))?;
    if channels.len() != element_depths_m.len() {
        return Err(Error::Parse(format!(
            "{} channels but {} depths",
            channels.len(),
            element_depths_m.len()
        )));
    }
    Ok(TimeSeries {
        sample_rate_hz,
        element_depths_m,
        channels,
    })
}

pub fn write_time_series(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# sample_rate_hz={}", series.sample_rate_hz).unwrap();
    let depths: Vec<String> = series.element_depths_m.iter().map(|d| d.to_string()).collect();
    writeln!(out, "# depths_m={}", depths.join(",")).unwrap();
    let samples = series.channels.first().map(|c| c.len()).unwrap_or(0);
    for t in 0..samples {
        let row: Vec<String> = series.channels.iter().map(|c| c[t].to_string()).collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Sweep output
// ---------------------------------------------------------------------------

/// Flat trial table: one row per trial, list-valued columns pipe-joined.
pub fn write_sweep_records(path: &Path, kind_label: &str, records: &[TrialRecord]) -> Result<()> {
    let mut out = String::new();
    writeln!(
        out,
        "{kind_label},trial,seed,status,estimated_depth_m,ae_m,amplitude_error,runtime_s,n_modes,wavenumbers,mode_function_errors"
    )
    .unwrap();
    for r in records {
        let ks: Vec<String> = r.wavenumbers.iter().map(|k| k.to_string()).collect();
        let fe: Vec<String> = r.mode_function_errors.iter().map(|e| e.to_string()).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.sweep_value,
            r.trial_index,
            r.seed,
            r.status.label(),
            r.estimated_depth_m,
            r.ae_m,
            r.amplitude_error,
            r.runtime_s,
            r.wavenumbers.len(),
            ks.join("|"),
            fe.join("|")
        )
        .unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_sweep_aggregates(
    path: &Path,
    kind_label: &str,
    aggregates: &[SweepAggregate],
) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{kind_label},mae_m,std_ae_m,trials,excluded").unwrap();
    for a in aggregates {
        writeln!(
            out,
            "{},{},{},{},{}",
            a.sweep_value, a.mae, a.std_ae, a.trials, a.excluded
        )
        .unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Run manifest: configuration echo, code version, wall time, worker count.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool_version: &'a str,
    pub kind: &'a str,
    pub values: &'a [f64],
    pub trials: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub base_snr_db: f64,
    pub wall_time_s: f64,
    pub excluded_total: usize,
    pub config_toml: &'a str,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest<'_>) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Parse(format!("manifest serialization: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn total_excluded(result: &SweepResult) -> usize {
    result.aggregates.iter().map(|a| a.excluded).sum()
}

// ---------------------------------------------------------------------------

fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let s = s.trim();
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad number `{s}`"))),
    }
}
