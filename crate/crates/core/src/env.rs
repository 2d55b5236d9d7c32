//! Ocean environment, depth discretization, source and array geometry.
//!
//! All types are immutable after construction and cheap to clone, so they
//! can be shared freely between concurrent workers.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default margin added to the maximum water sound speed when deriving the
/// lower edge of the wavenumber search band.
pub const DEFAULT_BAND_MARGIN_MPS: f64 = 300.0;

/// Sound speed profile c(z) of the water column, piecewise linear in depth.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundSpeedProfile {
    points: Vec<(f64, f64)>,
}

impl SoundSpeedProfile {
    /// Builds a profile from (depth_m, speed_mps) knots. Depths must start
    /// at 0, be strictly increasing, and speeds must lie in the physical
    /// sanity band (1300, 1700) m/s.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config("SSP needs at least 2 points".into()));
        }
        if points[0].0 != 0.0 {
            return Err(Error::Config("first SSP depth must be 0".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config(format!(
                    "SSP depths must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(z, c) in &points {
            if !(1300.0 < c && c < 1700.0) {
                return Err(Error::Config(format!(
                    "SSP speed {c} m/s at depth {z} m outside sanity band (1300, 1700)"
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Deepest knot depth; equals the water depth H for a valid environment.
    pub fn max_depth(&self) -> f64 {
        self.points.last().unwrap().0
    }

    pub fn min_speed(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    pub fn max_speed(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    /// Piecewise-linear interpolation of c(z); exact at knots.
    pub fn speed_at(&self, z: f64) -> Result<f64> {
        if !(0.0..=self.max_depth()).contains(&z) {
            return Err(Error::Domain(format!(
                "depth {z} m outside water column [0, {}]",
                self.max_depth()
            )));
        }
        let pts = &self.points;
        let idx = match pts.iter().position(|p| p.0 >= z) {
            Some(i) => i,
            None => pts.len() - 1,
        };
        if pts[idx].0 == z {
            return Ok(pts[idx].1);
        }
        let (z0, c0) = pts[idx - 1];
        let (z1, c1) = pts[idx];
        Ok(c0 + (c1 - c0) * (z - z0) / (z1 - z0))
    }
}

/// Fluid halfspace below the water column. Truth-model only: the estimator
/// never reads these parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Halfspace {
    pub speed_mps: f64,
    /// Bottom-to-water density ratio rho_b/rho_w (rho_w = 1 g/cm^3 assumed).
    pub density_ratio: f64,
    /// Accepted for completeness; mode shapes and real wavenumbers are
    /// computed lossless, so this value is documented but never applied.
    pub attenuation_db_per_wavelength: f64,
}

/// Range-independent ocean waveguide: water-column SSP, depth H, and an
/// optional halfspace bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub ssp: SoundSpeedProfile,
    pub water_depth_m: f64,
    pub halfspace: Option<Halfspace>,
}

impl Environment {
    pub fn new(
        ssp: SoundSpeedProfile,
        water_depth_m: f64,
        halfspace: Option<Halfspace>,
    ) -> Result<Self> {
        if water_depth_m <= 0.0 {
            return Err(Error::Config("water depth must be positive".into()));
        }
        if (ssp.max_depth() - water_depth_m).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "water depth {water_depth_m} m must equal last SSP depth {} m",
                ssp.max_depth()
            )));
        }
        if let Some(h) = &halfspace {
            if h.speed_mps <= ssp.max_speed() {
                return Err(Error::Config(format!(
                    "halfspace speed {} m/s must exceed max water speed {} m/s",
                    h.speed_mps,
                    ssp.max_speed()
                )));
            }
            if h.density_ratio <= 0.0 {
                return Err(Error::Config("density ratio must be positive".into()));
            }
            if h.attenuation_db_per_wavelength < 0.0 {
                return Err(Error::Config("attenuation must be non-negative".into()));
            }
        }
        Ok(Self {
            ssp,
            water_depth_m,
            halfspace,
        })
    }

    /// The same environment without the halfspace, as seen by the estimator.
    pub fn water_only(&self) -> Environment {
        Environment {
            ssp: self.ssp.clone(),
            water_depth_m: self.water_depth_m,
            halfspace: None,
        }
    }

    pub fn speed_at(&self, z: f64) -> Result<f64> {
        self.ssp.speed_at(z)
    }

    /// Default anchor-wavenumber search band for frequency `f`:
    /// upper edge 2*pi*f/min(c), lower edge 2*pi*f/(max(c) + 300 m/s).
    pub fn wavenumber_bounds(&self, f: f64) -> Result<(f64, f64)> {
        self.wavenumber_bounds_with_margin(f, DEFAULT_BAND_MARGIN_MPS)
    }

    /// Same as [`Self::wavenumber_bounds`] with an explicit speed margin,
    /// for processing setups that pin the band to known bottom speeds.
    pub fn wavenumber_bounds_with_margin(&self, f: f64, margin_mps: f64) -> Result<(f64, f64)> {
        if f <= 0.0 {
            return Err(Error::Domain(format!("frequency {f} Hz must be positive")));
        }
        let omega = 2.0 * std::f64::consts::PI * f;
        let xi_max = omega / self.ssp.min_speed();
        let xi_min = omega / (self.ssp.max_speed() + margin_mps);
        Ok((xi_min, xi_max))
    }
}

/// Uniform depth grid z_l = l*h for l = 0..=L with L*h in (H-h, H].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthGrid {
    h_m: f64,
    deepest: usize,
}

/// Default grid step cap in metres; combined with the points-per-wavelength
/// rule this keeps the depth eigenproblem under ~10^3 unknowns in shallow
/// water.
pub const DEFAULT_GRID_STEP_M: f64 = 0.05;

/// Minimum grid points per vertical wavelength enforced at construction.
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 40.0;

impl DepthGrid {
    /// Grid for environment `env` at working frequency `f`. The default
    /// step is min(0.05 m, lambda_min/40); a custom `step` must satisfy
    /// step <= lambda_min/40.
    pub fn new(env: &Environment, f: f64, step: Option<f64>) -> Result<Self> {
        if f <= 0.0 {
            return Err(Error::Domain(format!("frequency {f} Hz must be positive")));
        }
        let lambda_min = env.ssp.min_speed() / f;
        let h_cap = lambda_min / MIN_POINTS_PER_WAVELENGTH;
        let h = match step {
            None => DEFAULT_GRID_STEP_M.min(h_cap),
            Some(s) => {
                if s <= 0.0 {
                    return Err(Error::Config("grid step must be positive".into()));
                }
                if s > h_cap * (1.0 + 1e-12) {
                    return Err(Error::Config(format!(
                        "grid step {s} m exceeds lambda_min/40 = {h_cap:.6} m at {f} Hz"
                    )));
                }
                s
            }
        };
        let deepest = (env.water_depth_m / h + 1e-9).floor() as usize;
        if deepest < 2 {
            return Err(Error::Config("grid too coarse for water depth".into()));
        }
        Ok(Self { h_m: h, deepest })
    }

    pub fn step(&self) -> f64 {
        self.h_m
    }

    /// Index of the deepest node.
    pub fn deepest_index(&self) -> usize {
        self.deepest
    }

    /// Number of nodes, L + 1.
    pub fn len(&self) -> usize {
        self.deepest + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn depth_of(&self, l: usize) -> f64 {
        l as f64 * self.h_m
    }

    /// Deepest node depth L*h, the effective integration domain end.
    pub fn bottom_depth(&self) -> f64 {
        self.depth_of(self.deepest)
    }

    pub fn depths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|l| self.depth_of(l))
    }

    /// Trapezoid quadrature of nodal samples over [0, L*h].
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let interior: f64 = values[1..values.len() - 1].iter().sum();
        self.h_m * (interior + 0.5 * (values[0] + values[values.len() - 1]))
    }
}

/// Element depths of a vertical line array, strictly increasing, all
/// strictly inside the water column.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    depths_m: Vec<f64>,
}

impl ArrayGeometry {
    pub fn new(depths_m: Vec<f64>, water_depth_m: f64) -> Result<Self> {
        if depths_m.len() < 2 {
            return Err(Error::Config("array needs at least 2 elements".into()));
        }
        for w in depths_m.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(
                    "array depths must be strictly increasing".into(),
                ));
            }
        }
        let first = depths_m[0];
        let last = *depths_m.last().unwrap();
        if first <= 0.0 || last >= water_depth_m {
            return Err(Error::Config(format!(
                "array depths must lie strictly inside (0, {water_depth_m})"
            )));
        }
        Ok(Self { depths_m })
    }

    /// Uniform array: `count` elements from `first_depth` at `spacing`.
    pub fn uniform(first_depth: f64, spacing: f64, count: usize, water_depth_m: f64) -> Result<Self> {
        if spacing <= 0.0 {
            return Err(Error::Config("array spacing must be positive".into()));
        }
        let depths = (0..count).map(|i| first_depth + i as f64 * spacing).collect();
        Self::new(depths, water_depth_m)
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths_m
    }

    pub fn len(&self) -> usize {
        self.depths_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths_m.is_empty()
    }

    pub fn aperture(&self) -> f64 {
        self.depths_m.last().unwrap() - self.depths_m[0]
    }
}

/// Monoharmonic source: frequency, depth, fixed horizontal range, and
/// complex spectrum amplitude S(omega).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub frequency_hz: f64,
    pub depth_m: f64,
    pub range_m: f64,
    pub spectrum_amplitude: Complex64,
}

impl SourceSpec {
    pub fn new(frequency_hz: f64, depth_m: f64, range_m: f64, water_depth_m: f64) -> Result<Self> {
        if frequency_hz <= 0.0 {
            return Err(Error::Config("source frequency must be positive".into()));
        }
        if !(0.0 < depth_m && depth_m < water_depth_m) {
            return Err(Error::Config(format!(
                "source depth {depth_m} m must be inside (0, {water_depth_m})"
            )));
        }
        if range_m <= 0.0 {
            return Err(Error::Config("source range must be positive".into()));
        }
        Ok(Self {
            frequency_hz,
            depth_m,
            range_m,
            spectrum_amplitude: Complex64::new(1.0, 0.0),
        })
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_profile() -> SoundSpeedProfile {
        SoundSpeedProfile::new(vec![(0.0, 1500.0), (31.0, 1500.0)]).unwrap()
    }

    fn thermocline_profile() -> SoundSpeedProfile {
        SoundSpeedProfile::new(vec![
            (0.0, 1496.0),
            (8.0, 1496.0),
            (10.0, 1485.0),
            (31.0, 1485.0),
        ])
        .unwrap()
    }

    #[test]
    fn speed_at_constant_profile() {
        assert_eq!(constant_profile().speed_at(15.5).unwrap(), 1500.0);
    }

    #[test]
    fn speed_at_thermocline_midpoint() {
        // linear between (8, 1496) and (10, 1485)
        let c = thermocline_profile().speed_at(9.0).unwrap();
        assert!((c - 1490.5).abs() < 1e-12, "got {c}");
    }

    #[test]
    fn speed_at_knots_exact() {
        let ssp = SoundSpeedProfile::new(vec![(0.0, 1500.0), (10.0, 1480.0)]).unwrap();
        assert_eq!(ssp.speed_at(0.0).unwrap(), 1500.0);
        assert_eq!(ssp.speed_at(10.0).unwrap(), 1480.0);
    }

    #[test]
    fn speed_at_rejects_out_of_column() {
        let ssp = constant_profile();
        assert!(ssp.speed_at(-0.1).is_err());
        assert!(ssp.speed_at(31.1).is_err());
    }

    #[test]
    fn ssp_validation() {
        assert!(SoundSpeedProfile::new(vec![(0.0, 1500.0)]).is_err());
        assert!(SoundSpeedProfile::new(vec![(1.0, 1500.0), (2.0, 1500.0)]).is_err());
        assert!(SoundSpeedProfile::new(vec![(0.0, 1500.0), (0.0, 1490.0)]).is_err());
        assert!(SoundSpeedProfile::new(vec![(0.0, 1200.0), (10.0, 1500.0)]).is_err());
        assert!(SoundSpeedProfile::new(vec![(0.0, 1500.0), (10.0, 1750.0)]).is_err());
    }

    #[test]
    fn wavenumber_bounds_reference_values() {
        let env = Environment::new(thermocline_profile(), 31.0, None).unwrap();
        let (lo, hi) = env.wavenumber_bounds(596.0).unwrap();
        assert!((hi - 2.5217).abs() < 1e-4, "xi_max {hi}");
        assert!((lo - 2.0851).abs() < 1e-4, "xi_min {lo}");
        assert!(lo < hi);
    }

    #[test]
    fn wavenumber_bounds_linear_in_frequency() {
        let env = Environment::new(thermocline_profile(), 31.0, None).unwrap();
        let (lo1, hi1) = env.wavenumber_bounds(596.0).unwrap();
        let (lo2, hi2) = env.wavenumber_bounds(1192.0).unwrap();
        assert!((lo2 - 2.0 * lo1).abs() < 1e-12);
        assert!((hi2 - 2.0 * hi1).abs() < 1e-12);
    }

    #[test]
    fn wavenumber_bounds_rejects_nonpositive_frequency() {
        let env = Environment::new(constant_profile(), 31.0, None).unwrap();
        assert!(env.wavenumber_bounds(0.0).is_err());
    }

    #[test]
    fn environment_validation() {
        let ssp = thermocline_profile();
        assert!(Environment::new(ssp.clone(), 30.0, None).is_err());
        let hs = Halfspace {
            speed_mps: 1490.0,
            density_ratio: 1.77,
            attenuation_db_per_wavelength: 0.2,
        };
        assert!(Environment::new(ssp, 31.0, Some(hs)).is_err());
    }

    #[test]
    fn depth_grid_default_step_and_side_condition() {
        let env = Environment::new(thermocline_profile(), 31.0, None).unwrap();
        let grid = DepthGrid::new(&env, 596.0, None).unwrap();
        assert_eq!(grid.step(), 0.05);
        let lh = grid.bottom_depth();
        assert!(lh <= 31.0 && lh > 31.0 - grid.step());
        // 596 Hz, c_min 1485: lambda/40 = 0.0623 > 0.05, so the cap holds
        let fine = DepthGrid::new(&env, 2000.0, None).unwrap();
        assert!(fine.step() < 0.05);
        assert!(fine.step() <= 1485.0 / 2000.0 / 40.0 + 1e-15);
    }

    #[test]
    fn depth_grid_rejects_coarse_step() {
        let env = Environment::new(thermocline_profile(), 31.0, None).unwrap();
        assert!(DepthGrid::new(&env, 596.0, Some(0.1)).is_err());
        assert!(DepthGrid::new(&env, 596.0, Some(0.01)).is_ok());
    }

    #[test]
    fn trapezoid_constant_function() {
        let env = Environment::new(constant_profile(), 31.0, None).unwrap();
        let grid = DepthGrid::new(&env, 596.0, None).unwrap();
        let ones = vec![1.0; grid.len()];
        assert!((grid.trapezoid(&ones) - grid.bottom_depth()).abs() < 1e-12);
    }

    #[test]
    fn array_geometry_validation() {
        assert!(ArrayGeometry::uniform(1.0, 1.0, 30, 31.0).is_ok());
        assert!(ArrayGeometry::uniform(1.0, 1.0, 31, 31.0).is_err()); // last at 31
        assert!(ArrayGeometry::new(vec![1.0], 31.0).is_err());
        assert!(ArrayGeometry::new(vec![2.0, 2.0], 31.0).is_err());
        let a = ArrayGeometry::uniform(1.0, 1.0, 30, 31.0).unwrap();
        assert_eq!(a.len(), 30);
        assert!((a.aperture() - 29.0).abs() < 1e-12);
    }

    #[test]
    fn source_spec_validation() {
        assert!(SourceSpec::new(596.0, 20.0, 5000.0, 31.0).is_ok());
        assert!(SourceSpec::new(0.0, 20.0, 5000.0, 31.0).is_err());
        assert!(SourceSpec::new(596.0, 31.0, 5000.0, 31.0).is_err());
        assert!(SourceSpec::new(596.0, 20.0, 0.0, 31.0).is_err());
    }
}
