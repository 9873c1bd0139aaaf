//! On-disk scenario schema.
//!
//! A scenario file is a JSON document describing the objects, the radar
//! sites, the estimators to run, and the sweep axes (measurement
//! multiplicities, noise families and noise-level grids). Human-facing
//! angles are degrees; everything else is SI. Unknown keys are rejected so
//! typos fail loudly, with JSON-pointer-style paths in the error message.

use iod_core::bench::{Estimator, ScenarioConfig, SiteSpec};
use iod_core::frames::{GeodeticCoord, KeplerianElements};
use iod_core::NoiseFamily;
use serde::{Deserialize, Serialize};

/// One orbiting object, angles in degrees.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub semi_major_axis_m: f64,
    pub eccentricity: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub arg_perigee_deg: f64,
    #[serde(default)]
    pub mean_anomaly_deg: f64,
}

impl ObjectSpec {
    pub fn to_elements(&self) -> Result<KeplerianElements, String> {
        KeplerianElements::new(
            self.semi_major_axis_m,
            self.eccentricity,
            self.inclination_deg.to_radians(),
            self.raan_deg.to_radians(),
            self.arg_perigee_deg.to_radians(),
            self.mean_anomaly_deg.to_radians(),
        )
        .map_err(|e| e.to_string())
    }
}

/// One radar site, angles in degrees.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteFileSpec {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    #[serde(default)]
    pub altitude_m: f64,
    pub carrier_frequency_hz: f64,
}

impl SiteFileSpec {
    pub fn to_site_spec(&self) -> Result<SiteSpec, String> {
        Ok(SiteSpec {
            coord: GeodeticCoord::from_degrees(
                self.latitude_deg,
                self.longitude_deg,
                self.altitude_m,
            )
            .map_err(|e| e.to_string())?,
            carrier_frequency: self.carrier_frequency_hz,
        })
    }
}

fn default_levels_one() -> Vec<usize> {
    vec![1]
}
fn default_sigma_range() -> Vec<f64> {
    vec![0.1]
}
fn default_sigma_doppler() -> Vec<f64> {
    vec![10.0]
}
fn default_kappa() -> Vec<f64> {
    vec![1e9]
}
fn default_families() -> Vec<NoiseFamily> {
    vec![NoiseFamily::Gaussian]
}
fn default_trials() -> usize {
    100
}
fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Mle]
}

/// The scenario document. Omitted objects or sites fall back to the bundled
/// reference scenario; omitted axes collapse to the reference noise scales.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<ObjectSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<SiteFileSpec>>,
    #[serde(default = "default_families")]
    pub noise_families: Vec<NoiseFamily>,
    #[serde(default = "default_sigma_range")]
    pub sigma_range_levels_m: Vec<f64>,
    #[serde(default = "default_sigma_doppler")]
    pub sigma_doppler_levels_hz: Vec<f64>,
    #[serde(default = "default_kappa")]
    pub kappa_levels: Vec<f64>,
    #[serde(default = "default_levels_one")]
    pub measurements_per_site_levels: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
}

/// One concrete Monte Carlo cell of the sweep grid.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub config: ScenarioConfig,
    pub sigma_range: f64,
    pub sigma_doppler: f64,
    pub kappa: f64,
}

impl ScenarioFile {
    /// Parse with JSON-pointer-style error paths.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let deserializer = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(deserializer).map_err(|error| {
            format!(
                "scenario schema violation at /{}: {}",
                error.path().to_string().replace('.', "/"),
                error.inner()
            )
        })
    }

    pub fn objects(&self) -> Result<Vec<KeplerianElements>, String> {
        match &self.objects {
            None => Ok(iod_core::bench::reference_objects()),
            Some(specs) => specs.iter().map(ObjectSpec::to_elements).collect(),
        }
    }

    pub fn sites(&self) -> Result<Vec<SiteSpec>, String> {
        match &self.sites {
            None => Ok(iod_core::bench::reference_sites()),
            Some(specs) => specs.iter().map(SiteFileSpec::to_site_spec).collect(),
        }
    }

    /// Expand the sweep grid in deterministic order: noise levels outermost
    /// (range, Doppler, κ), then multiplicity, then family.
    pub fn expand(&self) -> Result<Vec<SweepCell>, String> {
        let objects = self.objects()?;
        let sites = self.sites()?;
        let mut cells = Vec::new();
        for &sigma_range in &self.sigma_range_levels_m {
            for &sigma_doppler in &self.sigma_doppler_levels_hz {
                for &kappa in &self.kappa_levels {
                    for &measurements_per_site in &self.measurements_per_site_levels {
                        for &noise_family in &self.noise_families {
                            let config = ScenarioConfig {
                                objects: objects.clone(),
                                sites: sites.clone(),
                                noise_family,
                                sigma_range,
                                sigma_doppler,
                                kappa,
                                measurements_per_site,
                                trials: self.trials,
                                base_seed: self.base_seed,
                                estimators: self.estimators.clone(),
                            };
                            config.validate().map_err(|e| e.to_string())?;
                            cells.push(SweepCell {
                                config,
                                sigma_range,
                                sigma_doppler,
                                kappa,
                            });
                        }
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err("scenario expands to zero sweep cells".into());
        }
        Ok(cells)
    }

    /// Require a scenario with no sweep axes at all (for `simulate`).
    pub fn require_single_cell(&self) -> Result<(), String> {
        let multi: Vec<&str> = [
            ("noise_families", self.noise_families.len()),
            ("sigma_range_levels_m", self.sigma_range_levels_m.len()),
            ("sigma_doppler_levels_hz", self.sigma_doppler_levels_hz.len()),
            ("kappa_levels", self.kappa_levels.len()),
            (
                "measurements_per_site_levels",
                self.measurements_per_site_levels.len(),
            ),
        ]
        .iter()
        .filter(|(_, n)| *n > 1)
        .map(|(name, _)| *name)
        .collect();
        if multi.is_empty() {
            Ok(())
        } else {
            Err(format!(
                "this command needs a single-cell scenario, but these axes have several values: {}",
                multi.join(", ")
            ))
        }
    }
}

/// Directory tag for one noise-level combination, e.g.
/// `sigma_d_1e-1__sigma_f_1e1__kappa_1e9`.
pub fn level_tag(sigma_range: f64, sigma_doppler: f64, kappa: f64) -> String {
    format!("sigma_d_{sigma_range:e}__sigma_f_{sigma_doppler:e}__kappa_{kappa:e}")
}
