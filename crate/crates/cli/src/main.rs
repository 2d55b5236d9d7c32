//! `ocmsd` — forward simulation, mode estimation, and source depth
//! estimation for a monoharmonic source observed on a vertical line array.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use ocmsd_core::config::Scenario;
use ocmsd_core::dss::{estimate_depth, DssConfig};
use ocmsd_core::env::DepthGrid;
use ocmsd_core::field::{add_noise, mode_amplitudes, synthesize_pressure, ModeAmplitudes, PressureSnapshot};
use ocmsd_core::harness::{
    extract_snapshot, run_sweep, SweepKind, SweepSpec, TrialTuning,
};
use ocmsd_core::io;
use ocmsd_core::modes::{candidate_mode_set, reference_mode_set};
use ocmsd_core::ocms::{epsilon_from_noise, estimate_modes, EpsilonMode, ModeEstimate, SolverConfig};
use ocmsd_core::plot::{line_plot, Band, Series};

#[derive(Parser)]
#[command(name = "ocmsd", version, about = "Seabed-independent source depth estimation from a VLA snapshot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Scenario configuration (TOML: ssp, water_depth, halfspace, array, source).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing). Default: current directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// RNG seed (noise realizations, Monte-Carlo master seed).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps; 0 = all cores.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Anchor wavenumber band `xi_min,xi_max` (1/m). Default: derived
    /// from the sound speed profile.
    #[arg(long, global = true, value_parser = parse_band)]
    band: Option<(f64, f64)>,
    /// Residual bound source: recorded noise sigma or off-bin noise norms.
    #[arg(long, global = true, value_enum, default_value_t = EpsilonModeArg::Known)]
    epsilon_mode: EpsilonModeArg,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum EpsilonModeArg {
    Known,
    Offbin,
}

fn parse_band(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected xi_min,xi_max".into());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| "bad xi_min")?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| "bad xi_max")?;
    Ok((lo, hi))
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a VLA snapshot from the truth model (halfspace bottom).
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Array-level SNR in dB; omit for a noise-free snapshot.
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Estimate modal wavenumbers, mode functions and amplitudes from a snapshot.
    EstimateModes {
        #[command(flatten)]
        common: CommonOpts,
        /// Snapshot file produced by `simulate` or `extract`.
        #[arg(long)]
        snapshot: PathBuf,
        /// Aux-bin file from `extract` (required with --epsilon-mode offbin).
        #[arg(long)]
        aux: Option<PathBuf>,
        /// Coarse anchor grid points.
        #[arg(long, default_value_t = 2000)]
        coarse: usize,
        /// Also dump dense mode depth functions.
        #[arg(long)]
        dump_modes: bool,
    },
    /// Depth-sign search on a mode estimate.
    EstimateDepth {
        #[command(flatten)]
        common: CommonOpts,
        /// Mode-estimate file from `estimate-modes`.
        #[arg(long)]
        estimate: PathBuf,
        /// Sign-sampling interval along depth (m).
        #[arg(long, default_value_t = 0.1)]
        sign_step: f64,
    },
    /// Narrowband snapshot from a multichannel time series.
    Extract {
        #[command(flatten)]
        common: CommonOpts,
        /// Time-series CSV (`# sample_rate_hz=`, `# depths_m=` headers).
        #[arg(long)]
        series: PathBuf,
        /// Tone frequency (Hz).
        #[arg(long)]
        frequency: f64,
        /// Fourier window length (s).
        #[arg(long)]
        window: f64,
        /// Window start time (s).
        #[arg(long, default_value_t = 0.0)]
        start: f64,
    },
    /// Monte-Carlo sweeps of the full pipeline.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        #[command(subcommand)]
        kind: SweepCommand,
    },
    /// Full pipeline on one snapshot; emits the depth ambiguity curve.
    Ambiguity {
        #[command(flatten)]
        common: CommonOpts,
        /// Snapshot file; omit to simulate one at --snr-db.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// SNR for the simulated snapshot when --snapshot is omitted.
        #[arg(long, default_value_t = 30.0)]
        snr_db: f64,
    },
}

#[derive(Args, Clone)]
struct SweepOpts {
    /// Sweep values, comma-separated. Default: the standard study range.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Monte-Carlo trials per value.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// SNR (dB) applied by non-SNR sweeps; for window sweeps this is the
    /// equivalent snapshot SNR of a 1 s window.
    #[arg(long, default_value_t = 30.0)]
    snr_db: f64,
}

#[derive(Subcommand, Clone)]
enum SweepCommand {
    /// SNR from -20 to 40 dB in 2.5 dB steps.
    Snr(SweepOpts),
    /// Array aperture from 4 to 29 m (element count fixed).
    Aperture(SweepOpts),
    /// Element count from 5 to 30 (aperture fixed).
    Elements(SweepOpts),
    /// Source frequency from 50 to 1000 Hz in 50 Hz steps.
    Frequency(SweepOpts),
    /// Fourier window length; values are T in seconds.
    Window(SweepOpts),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { common, snr_db } => simulate(&common, snr_db),
        Command::EstimateModes {
            common,
            snapshot,
            aux,
            coarse,
            dump_modes,
        } => estimate_modes_cmd(&common, &snapshot, aux.as_deref(), coarse, dump_modes),
        Command::EstimateDepth {
            common,
            estimate,
            sign_step,
        } => estimate_depth_cmd(&common, &estimate, sign_step),
        Command::Extract {
            common,
            series,
            frequency,
            window,
            start,
        } => extract_cmd(&common, &series, frequency, window, start),
        Command::Sweep { common, kind } => sweep_cmd(&common, &kind),
        Command::Ambiguity {
            common,
            snapshot,
            snr_db,
        } => ambiguity_cmd(&common, snapshot.as_deref(), snr_db),
    }
}

fn load_scenario(common: &CommonOpts) -> Result<Scenario> {
    let path = common
        .config
        .as_ref()
        .context("--config <path> is required for this command")?;
    Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn ensure_out(common: &CommonOpts) -> Result<PathBuf> {
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("creating output dir {}", common.out.display()))?;
    Ok(common.out.clone())
}

fn simulate(common: &CommonOpts, snr_db: Option<f64>) -> Result<()> {
    let sc = load_scenario(common)?;
    if sc.environment.halfspace.is_none() {
        bail!("simulate needs a halfspace bottom in the config (truth model)");
    }
    let out = ensure_out(common)?;
    let f = sc.source.frequency_hz;
    let grid = DepthGrid::new(&sc.environment, f, None)?;
    let reference = reference_mode_set(&sc.environment, &grid, f)?;
    if reference.is_empty() {
        eprintln!("warning: no trapped modes at {f} Hz; snapshot will be zero");
    }
    let amps = mode_amplitudes(&reference, &sc.source)?;
    let clean = synthesize_pressure(&reference, &amps, &sc.array)?;
    let snr = snr_db.unwrap_or(f64::INFINITY);
    let snap = add_noise(&clean, snr, common.seed);
    let path = out.join("snapshot.csv");
    io::write_snapshot(&path, &snap, snr)?;
    println!(
        "wrote {} ({} elements, {} modes, snr {} dB, seed {})",
        path.display(),
        snap.len(),
        reference.len(),
        snr,
        common.seed
    );
    Ok(())
}

fn solver_config_for(
    common: &CommonOpts,
    sc: &Scenario,
    snap: &PressureSnapshot,
    aux: Option<&Path>,
    coarse: usize,
) -> Result<(SolverConfig, (f64, f64))> {
    let band = match common.band {
        Some(b) => b,
        None => sc.environment.wavenumber_bounds(snap.frequency_hz)?,
    };
    let epsilon = match common.epsilon_mode {
        EpsilonModeArg::Known => epsilon_from_noise(snap, EpsilonMode::KnownSigma)?,
        EpsilonModeArg::Offbin => {
            let aux_path = aux.context("--epsilon-mode offbin requires --aux <file>")?;
            let bins = read_aux_bins(aux_path)?;
            epsilon_from_noise(snap, EpsilonMode::OffBinEstimate(&bins))?
        }
    };
    let mut cfg = SolverConfig::new(epsilon, band)?;
    cfg.coarse_grid_points = coarse;
    Ok((cfg, band))
}

fn estimate_modes_cmd(
    common: &CommonOpts,
    snapshot: &Path,
    aux: Option<&Path>,
    coarse: usize,
    dump_modes: bool,
) -> Result<()> {
    let sc = load_scenario(common)?;
    let out = ensure_out(common)?;
    let snap = io::read_snapshot(snapshot)?;
    let (cfg, band) = solver_config_for(common, &sc, &snap, aux, coarse)?;
    let started = std::time::Instant::now();
    let est = estimate_modes(&snap, &sc.environment.water_only(), &cfg)?;
    let elapsed = started.elapsed();
    let est_path = out.join("estimate.csv");
    io::write_mode_estimate(&est_path, &est, band)?;
    io::write_objective_trace(&out.join("objective_trace.csv"), &est)?;
    if dump_modes {
        io::write_mode_functions(&out.join("mode_functions.csv"), &est)?;
    }
    println!(
        "wrote {} ({} modes, anchor {:.6} 1/m, residual {:.3e} <= eps {:.3e}, {:.1?}{})",
        est_path.display(),
        est.modes.len(),
        est.anchor_xi,
        est.residual_l2,
        est.epsilon_n,
        elapsed,
        if est.degenerate { ", DEGENERATE" } else { "" }
    );
    Ok(())
}

/// Rebuilds the full estimate (with mode functions) from an estimate file;
/// the candidate dictionary is deterministic in (anchor, band, grid).
fn rebuild_estimate(sc: &Scenario, file: &io::ModeEstimateFile) -> Result<ModeEstimate> {
    let env = sc.environment.water_only();
    let grid = DepthGrid::new(&env, file.frequency_hz, Some(file.grid_step))?;
    let modes = candidate_mode_set(&env, &grid, file.frequency_hz, file.anchor_xi, file.band)?;
    if modes.len() != file.wavenumbers.len() {
        bail!(
            "estimate file lists {} modes but regeneration produced {}; \
             was the file produced with a different config?",
            file.wavenumbers.len(),
            modes.len()
        );
    }
    for (a, b) in modes.wavenumbers.iter().zip(&file.wavenumbers) {
        if (a - b).abs() > 1e-6 {
            bail!("regenerated wavenumber {a} differs from file value {b}");
        }
    }
    Ok(ModeEstimate {
        modes,
        amplitudes: ModeAmplitudes {
            values: file.amplitudes.clone(),
        },
        l1_norm: file.l1_norm,
        residual_l2: file.residual_l2,
        anchor_xi: file.anchor_xi,
        epsilon_n: file.epsilon_n,
        degenerate: file.degenerate,
        objective_trace: Vec::new(),
    })
}

fn estimate_depth_cmd(common: &CommonOpts, estimate: &Path, sign_step: f64) -> Result<()> {
    let sc = load_scenario(common)?;
    let out = ensure_out(common)?;
    let file = io::read_mode_estimate(estimate)?;
    let est = rebuild_estimate(&sc, &file)?;
    let cfg = DssConfig {
        sign_step_m: sign_step,
        ..DssConfig::default()
    };
    let result = estimate_depth(&est, sc.environment.water_depth_m, &cfg)?;
    io::write_depth_result(&out.join("depth.txt"), &result)?;
    io::write_ambiguity(&out.join("ambiguity.csv"), &result, est.modes.grid.step())?;
    io::write_kl_trace(&out.join("kl_trace.csv"), &result, sign_step)?;
    println!(
        "estimated depth {:.2} m (q0 = {}, z_q0 = {:.1} m)",
        result.estimated_depth_m,
        result.selected_q0,
        result.selected_q0 as f64 * sign_step
    );
    Ok(())
}

fn extract_cmd(
    common: &CommonOpts,
    series: &Path,
    frequency: f64,
    window: f64,
    start: f64,
) -> Result<()> {
    let out = ensure_out(common)?;
    let ts = io::read_time_series(series)?;
    let ex = extract_snapshot(&ts, frequency, window, start)?;
    let snap_path = out.join("snapshot.csv");
    io::write_snapshot(&snap_path, &ex.snapshot, f64::NAN)?;
    let aux_path = out.join("aux_bins.csv");
    write_aux_bins(&aux_path, &ex.aux_bins)?;
    println!(
        "wrote {} and {} (bin frequency {:.6} Hz, {} channels)",
        snap_path.display(),
        aux_path.display(),
        ex.snapshot.frequency_hz,
        ex.snapshot.len()
    );
    Ok(())
}

fn write_aux_bins(path: &Path, bins: &[Vec<Complex64>]) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::from("bin,element,re,im\n");
    for (b, bin) in bins.iter().enumerate() {
        for (e, c) in bin.iter().enumerate() {
            writeln!(out, "{b},{e},{},{}", c.re, c.im).unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn read_aux_bins(path: &Path) -> Result<Vec<Vec<Complex64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut bins: Vec<Vec<Complex64>> = Vec::new();
    for line in text.lines().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            bail!("bad aux-bin row `{line}`");
        }
        let b: usize = fields[0].parse()?;
        while bins.len() <= b {
            bins.push(Vec::new());
        }
        bins[b].push(Complex64::new(fields[2].parse()?, fields[3].parse()?));
    }
    if bins.is_empty() {
        bail!("aux-bin file {} has no rows", path.display());
    }
    Ok(bins)
}

fn default_values(kind: &SweepCommand) -> Vec<f64> {
    fn range(from: f64, to: f64, step: f64) -> Vec<f64> {
        let mut v = Vec::new();
        let mut x = from;
        while x <= to + 1e-9 {
            v.push(x);
            x += step;
        }
        v
    }
    match kind {
        SweepCommand::Snr(_) => range(-20.0, 40.0, 2.5),
        SweepCommand::Aperture(_) => range(4.0, 29.0, 1.0),
        SweepCommand::Elements(_) => range(5.0, 30.0, 1.0),
        SweepCommand::Frequency(_) => range(50.0, 1000.0, 50.0),
        // 10 log10(T) from 6 dB down to -10 dB in 2 dB steps.
        SweepCommand::Window(_) => (0..=8)
            .map(|i| 10f64.powf((6.0 - 2.0 * i as f64) / 10.0))
            .collect(),
    }
}

fn sweep_cmd(common: &CommonOpts, kind_cmd: &SweepCommand) -> Result<()> {
    let sc = load_scenario(common)?;
    let out = ensure_out(common)?;
    let (kind, opts) = match kind_cmd {
        SweepCommand::Snr(o) => (SweepKind::Snr, o),
        SweepCommand::Aperture(o) => (SweepKind::Aperture, o),
        SweepCommand::Elements(o) => (SweepKind::Elements, o),
        SweepCommand::Frequency(o) => (SweepKind::Frequency, o),
        SweepCommand::Window(o) => (SweepKind::WindowLength, o),
    };
    let values = opts.values.clone().unwrap_or_else(|| default_values(kind_cmd));
    let spec = SweepSpec {
        kind,
        values,
        trials: opts.trials,
        master_seed: common.seed,
        scenario: sc.clone(),
        base_snr_db: opts.snr_db,
        tuning: TrialTuning {
            band_override: common.band,
            ..TrialTuning::default()
        },
        workers: common.workers,
    };
    let started = std::time::Instant::now();
    let result = run_sweep(&spec)?;
    let wall = started.elapsed().as_secs_f64();

    let label = kind.label();
    io::write_sweep_records(&out.join("records.csv"), label, &result.records)?;
    io::write_sweep_aggregates(&out.join("aggregates.csv"), label, &result.aggregates)?;
    let config_echo = std::fs::read_to_string(common.config.as_ref().unwrap())?;
    io::write_manifest(
        &out.join("manifest.json"),
        &io::RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            kind: label,
            values: &spec.values,
            trials: spec.trials,
            master_seed: spec.master_seed,
            workers: spec.workers,
            base_snr_db: spec.base_snr_db,
            wall_time_s: wall,
            excluded_total: io::total_excluded(&result),
            config_toml: &config_echo,
        },
    )?;

    let mae_pts: Vec<(f64, f64)> = result
        .aggregates
        .iter()
        .filter(|a| a.mae.is_finite())
        .map(|a| (a.sweep_value, a.mae))
        .collect();
    let band_pts: Vec<(f64, f64, f64)> = result
        .aggregates
        .iter()
        .filter(|a| a.mae.is_finite())
        .map(|a| (a.sweep_value, (a.mae - a.std_ae).max(0.0), a.mae + a.std_ae))
        .collect();
    line_plot(
        &out.join("sweep.svg"),
        &format!("depth MAE vs {label}"),
        label,
        "MAE (m)",
        &[Series {
            label: "MAE",
            points: &mae_pts,
            color: "#1f77b4",
        }],
        Some(&Band {
            points: &band_pts,
            color: "#1f77b4",
        }),
    )?;

    println!(
        "sweep {} complete: {} values x {} trials in {:.1} s ({} rows excluded); results in {}",
        label,
        spec.values.len(),
        spec.trials,
        wall,
        io::total_excluded(&result),
        out.display()
    );
    for a in &result.aggregates {
        println!(
            "  {label} = {:>8}: MAE = {:.3} m (std {:.3}, {} ok / {} trials)",
            a.sweep_value,
            a.mae,
            a.std_ae,
            a.trials - a.excluded,
            a.trials
        );
    }
    Ok(())
}

fn ambiguity_cmd(common: &CommonOpts, snapshot: Option<&Path>, snr_db: f64) -> Result<()> {
    let sc = load_scenario(common)?;
    let out = ensure_out(common)?;
    let snap = match snapshot {
        Some(p) => io::read_snapshot(p)?,
        None => {
            let f = sc.source.frequency_hz;
            let grid = DepthGrid::new(&sc.environment, f, None)?;
            let reference = reference_mode_set(&sc.environment, &grid, f)?;
            let amps = mode_amplitudes(&reference, &sc.source)?;
            let clean = synthesize_pressure(&reference, &amps, &sc.array)?;
            add_noise(&clean, snr_db, common.seed)
        }
    };
    let (cfg, _) = solver_config_for(common, &sc, &snap, None, 2000)?;
    let est = estimate_modes(&snap, &sc.environment.water_only(), &cfg)?;
    let result = estimate_depth(&est, sc.environment.water_depth_m, &DssConfig::default())?;
    let step = est.modes.grid.step();
    io::write_ambiguity(&out.join("ambiguity.csv"), &result, step)?;
    let pts: Vec<(f64, f64)> = result
        .ambiguity
        .iter()
        .enumerate()
        .map(|(l, &v)| (l as f64 * step, v))
        .collect();
    line_plot(
        &out.join("ambiguity.svg"),
        &format!("depth ambiguity, estimated z_s = {:.2} m", result.estimated_depth_m),
        "depth (m)",
        "D(z, q0)",
        &[Series {
            label: "D",
            points: &pts,
            color: "#d62728",
        }],
        None,
    )?;
    println!(
        "estimated depth {:.2} m; curve written to {}",
        result.estimated_depth_m,
        out.join("ambiguity.csv").display()
    );
    Ok(())
}
