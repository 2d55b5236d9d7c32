//! Scenario configuration document.
//!
//! One structured-text (TOML) file describes the environment, array and
//! source shared by the CLI subcommands:
//!
//! ```toml
//! ssp = [[0.0, 1496.0], [8.0, 1496.0], [10.0, 1485.0], [31.0, 1485.0]]
//! water_depth = 31.0
//!
//! [halfspace]            # optional; truth model only
//! speed = 1652.0
//! density_ratio = 1.77
//! attenuation_db_per_lambda = 0.2
//!
//! [array]                # either first_depth/spacing/count or depths
//! first_depth = 1.0
//! spacing = 1.0
//! count = 30
//!
//! [source]
//! frequency = 596.0
//! depth = 20.0
//! range = 5000.0
//! ```

use serde::{Deserialize, Serialize};

use crate::env::{ArrayGeometry, Environment, Halfspace, SoundSpeedProfile, SourceSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub ssp: Vec<[f64; 2]>,
    pub water_depth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfspace: Option<HalfspaceDoc>,
    pub array: ArrayDoc,
    pub source: SourceDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfspaceDoc {
    pub speed: f64,
    pub density_ratio: f64,
    #[serde(default)]
    pub attenuation_db_per_lambda: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ArrayDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceDoc {
    pub frequency: f64,
    pub depth: f64,
    pub range: f64,
}

/// Fully validated scenario: environment, array and source.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub environment: Environment,
    pub array: ArrayGeometry,
    pub source: SourceSpec,
}

impl ScenarioDoc {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("scenario config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Validates the document into domain types.
    pub fn build(&self) -> Result<Scenario> {
        let ssp = SoundSpeedProfile::new(self.ssp.iter().map(|p| (p[0], p[1])).collect())?;
        let halfspace = self.halfspace.as_ref().map(|h| Halfspace {
            speed_mps: h.speed,
            density_ratio: h.density_ratio,
            attenuation_db_per_wavelength: h.attenuation_db_per_lambda,
        });
        let environment = Environment::new(ssp, self.water_depth, halfspace)?;
        let array = match (&self.array.depths, self.array.first_depth) {
            (Some(depths), _) => ArrayGeometry::new(depths.clone(), self.water_depth)?,
            (None, Some(first)) => {
                let spacing = self.array.spacing.ok_or_else(|| {
                    Error::Config("array.spacing required with first_depth".into())
                })?;
                let count = self
                    .array
                    .count
                    .ok_or_else(|| Error::Config("array.count required with first_depth".into()))?;
                ArrayGeometry::uniform(first, spacing, count, self.water_depth)?
            }
            (None, None) => {
                return Err(Error::Config(
                    "array must specify either depths or first_depth/spacing/count".into(),
                ))
            }
        };
        let source = SourceSpec::new(
            self.source.frequency,
            self.source.depth,
            self.source.range,
            self.water_depth,
        )?;
        Ok(Scenario {
            environment,
            array,
            source,
        })
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        ScenarioDoc::parse(text)?.build()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        ScenarioDoc::load(path)?.build()
    }
}

/// The shallow-water scenario used throughout the bundled simulations:
/// 31 m water with an 8-10 m thermocline (1496 -> 1485 m/s), 1652 m/s
/// halfspace, 30-element VLA at 1 m spacing from 1 m depth, 596 Hz source
/// at 20 m depth and 5 km range.
pub const YELLOW_SEA_TOML: &str = r#"
ssp = [[0.0, 1496.0], [8.0, 1496.0], [10.0, 1485.0], [31.0, 1485.0]]
water_depth = 31.0

[halfspace]
speed = 1652.0
density_ratio = 1.77
attenuation_db_per_lambda = 0.2

[array]
first_depth = 1.0
spacing = 1.0
count = 30

[source]
frequency = 596.0
depth = 20.0
range = 5000.0
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bundled_scenario() {
        let sc = Scenario::from_toml(YELLOW_SEA_TOML).unwrap();
        assert_eq!(sc.array.len(), 30);
        assert_eq!(sc.source.frequency_hz, 596.0);
        assert!(sc.environment.halfspace.is_some());
        assert_eq!(sc.environment.water_depth_m, 31.0);
    }

    #[test]
    fn explicit_depths_variant() {
        let text = r#"
ssp = [[0.0, 1500.0], [31.0, 1500.0]]
water_depth = 31.0
[array]
depths = [3.0, 5.0, 7.0]
[source]
frequency = 596.0
depth = 20.0
range = 5000.0
"#;
        let sc = Scenario::from_toml(text).unwrap();
        assert_eq!(sc.array.depths(), &[3.0, 5.0, 7.0]);
        assert!(sc.environment.halfspace.is_none());
    }

    #[test]
    fn rejects_incomplete_array() {
        let text = r#"
ssp = [[0.0, 1500.0], [31.0, 1500.0]]
water_depth = 31.0
[array]
first_depth = 1.0
[source]
frequency = 596.0
depth = 20.0
range = 5000.0
"#;
        assert!(Scenario::from_toml(text).is_err());
    }

    #[test]
    fn roundtrips_through_toml() {
        let doc = ScenarioDoc::parse(YELLOW_SEA_TOML).unwrap();
        let again = ScenarioDoc::parse(&doc.to_toml()).unwrap();
        assert_eq!(again.water_depth, doc.water_depth);
        assert_eq!(again.ssp, doc.ssp);
    }
}
