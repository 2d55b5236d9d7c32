//! Forward synthesis of the VLA pressure snapshot and the noise model.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::{ArrayGeometry, SourceSpec};
use crate::error::{Error, Result};
use crate::modes::ModeSet;
use crate::special::hankel1_0;

/// Complex amplitudes of the modes excited by a source.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAmplitudes {
    pub values: Vec<Complex64>,
}

impl ModeAmplitudes {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|a| a.norm()).collect()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Complex pressure on the array at one frequency, with noise metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureSnapshot {
    pub frequency_hz: f64,
    pub element_depths_m: Vec<f64>,
    pub pressure: Vec<Complex64>,
    /// Per-element complex-Gaussian standard deviation; None for clean or
    /// measured snapshots where sigma is unknown.
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
}

impl PressureSnapshot {
    pub fn len(&self) -> usize {
        self.pressure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pressure.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.pressure.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Mode amplitudes a_m = (i/4) S(omega) psi_m(z_s) H0^(1)(k_m r).
pub fn mode_amplitudes(modes: &ModeSet, source: &SourceSpec) -> Result<ModeAmplitudes> {
    if modes.is_empty() {
        return Err(Error::Domain("mode set is empty".into()));
    }
    let at_source = modes.sample_at_depths(&[source.depth_m])?;
    let quarter_i = Complex64::new(0.0, 0.25);
    let mut values = Vec::with_capacity(modes.len());
    for (m, &k_m) in modes.wavenumbers.iter().enumerate() {
        let hankel = hankel1_0(k_m * source.range_m)?;
        values.push(quarter_i * source.spectrum_amplitude * at_source[0][m] * hankel);
    }
    Ok(ModeAmplitudes { values })
}

/// Noise-free snapshot p(z_n) = sum_m a_m psi_m(z_n).
pub fn synthesize_pressure(
    modes: &ModeSet,
    amps: &ModeAmplitudes,
    array: &ArrayGeometry,
) -> Result<PressureSnapshot> {
    if modes.len() != amps.len() {
        return Err(Error::Dimension(format!(
            "{} modes vs {} amplitudes",
            modes.len(),
            amps.len()
        )));
    }
    let rows = modes.sample_at_depths(array.depths())?;
    let pressure = rows
        .iter()
        .map(|row| {
            row.iter()
                .zip(&amps.values)
                .map(|(psi, a)| a * psi)
                .sum::<Complex64>()
        })
        .collect();
    Ok(PressureSnapshot {
        frequency_hz: modes.frequency_hz,
        element_depths_m: array.depths().to_vec(),
        pressure,
        noise_sigma: Some(0.0),
        seed: None,
    })
}

/// Adds i.i.d. complex Gaussian noise at the array-level SNR convention
/// SNR = 20 log10(||p||_2 / (N sigma)), i.e. sigma = ||p||_2 / (N 10^(SNR/20)).
///
/// The total variance sigma^2 splits evenly between real and imaginary
/// parts. `snr_db = +inf` returns the input unchanged with sigma = 0.
/// Fixed seeds give bit-identical snapshots.
pub fn add_noise(p: &PressureSnapshot, snr_db: f64, seed: u64) -> PressureSnapshot {
    if snr_db == f64::INFINITY {
        let mut out = p.clone();
        out.noise_sigma = Some(0.0);
        out.seed = Some(seed);
        return out;
    }
    let n = p.len() as f64;
    let sigma = p.l2_norm() / (n * 10f64.powf(snr_db / 20.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let part = sigma / 2f64.sqrt(); // std of each of Re, Im
    let pressure = p
        .pressure
        .iter()
        .map(|&v| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            v + Complex64::new(re * part, im * part)
        })
        .collect();
    PressureSnapshot {
        frequency_hz: p.frequency_hz,
        element_depths_m: p.element_depths_m.clone(),
        pressure,
        noise_sigma: Some(sigma),
        seed: Some(seed),
    }
}

/// Per-element SNR implied by the array-level convention:
/// SNR_element = SNR + 20 log10(N) - 10 log10(N) = SNR + 10 log10(N)
/// for a flat field; provided for interpreting sweep axes against the
/// more common per-element definition 10 log10(mean|p|^2 / sigma^2).
pub fn per_element_snr_db(p: &PressureSnapshot) -> Option<f64> {
    let sigma = p.noise_sigma?;
    if sigma == 0.0 {
        return Some(f64::INFINITY);
    }
    let n = p.len() as f64;
    let mean_power = p.l2_norm().powi(2) / n;
    Some(10.0 * (mean_power / (sigma * sigma)).log10())
}
