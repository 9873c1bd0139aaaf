//! Reproducible Monte Carlo benchmark harness.
//!
//! One [`ScenarioConfig`] fixes the objects, the radar sites, one noise
//! family with one set of noise scales, a measurement multiplicity and a
//! trial count. [`run_monte_carlo`] then simulates every (object, trial)
//! cell with its own deterministic RNG stream, runs the configured
//! estimators on identical noisy measurements and records squared-norm and
//! plain-norm state errors. Trials are independent by construction, so the
//! sweep parallelizes freely and deleting a trial never changes another.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{
    elevation_angle, geodetic_to_ecef, kepler_to_cartesian_earth, FramesError, GeodeticCoord,
    KeplerianElements, StateVector,
};
use crate::measmodel::{apply_noise, ideal_measurements, MeasError, NoiseFamily, RadarSite};
use crate::mle::{self, SolverConfig};
use crate::trilat::{self, TrilaterationInput};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Frames(#[from] FramesError),
    #[error(transparent)]
    Measurement(#[from] MeasError),
    #[error("result pairing mismatch: {0}")]
    PairingMismatch(String),
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to serialize {what}: {source}")]
    Serialize {
        what: &'static str,
        source: serde_json::Error,
    },
}

/// Which estimator produced a trial result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Mle,
    Trilateration,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Mle => "mle",
            Estimator::Trilateration => "trilateration",
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One radar location plus its carrier; the noise scales come from the
/// scenario so sweeps can vary them uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub coord: GeodeticCoord,
    pub carrier_frequency: f64,
}

/// Full specification of one Monte Carlo cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub objects: Vec<KeplerianElements>,
    pub sites: Vec<SiteSpec>,
    pub noise_family: NoiseFamily,
    /// Range noise scale σ_d (m), shared by all sites.
    pub sigma_range: f64,
    /// Doppler noise scale σ_f (Hz), shared by all sites.
    pub sigma_doppler: f64,
    /// Directional concentration κ, shared by all sites.
    pub kappa: f64,
    /// Measurements of each type per site, 1..=5.
    pub measurements_per_site: usize,
    /// Monte Carlo sample count S.
    pub trials: usize,
    pub base_seed: u64,
    pub estimators: Vec<Estimator>,
}

/// The five reference objects (semi-major axis in meters, angles in
/// radians, mean anomaly zero).
pub fn reference_objects() -> Vec<KeplerianElements> {
    let rows: [(f64, f64, f64, f64, f64); 5] = [
        (6913.9278e3, 0.0106, 97.1377, 66.7240, 79.0900),
        (6886.5427e3, 0.0003, 97.4457, 68.2327, 72.8300),
        (6886.5577e3, 0.0002, 97.4460, 67.7949, 74.2700),
        (7151.1996e3, 0.0020, 95.9746, 68.1057, 77.8000),
        (6860.4158e3, 0.0076, 93.9043, 64.4680, 75.0700),
    ];
    rows.iter()
        .map(|&(a, e, i, raan, argp)| {
            KeplerianElements::new(
                a,
                e,
                i.to_radians(),
                raan.to_radians(),
                argp.to_radians(),
                0.0,
            )
            .expect("reference elements are valid")
        })
        .collect()
}

/// Geodetic coordinates of the three reference radar sites.
pub fn reference_site_coords() -> Vec<GeodeticCoord> {
    [
        (72.986276, 40.916634),
        (74.986276, 48.916634),
        (75.986276, 38.916634),
    ]
    .iter()
    .map(|&(lat, lon)| GeodeticCoord::from_degrees(lat, lon, 0.0).expect("valid site"))
    .collect()
}

/// The three reference sites with their carrier frequencies.
pub fn reference_sites() -> Vec<SiteSpec> {
    let carriers = [1215.0e6, 1280.0e6, 1333.0e6];
    reference_site_coords()
        .into_iter()
        .zip(carriers)
        .map(|(coord, carrier_frequency)| SiteSpec {
            coord,
            carrier_frequency,
        })
        .collect()
}

impl ScenarioConfig {
    /// The bundled five-object, three-site scenario with Gaussian noise at
    /// the reference scales (σ_d = 0.1 m, σ_f = 10 Hz, κ = 1e9).
    pub fn reference() -> Self {
        ScenarioConfig {
            objects: reference_objects(),
            sites: reference_sites(),
            noise_family: NoiseFamily::Gaussian,
            sigma_range: 0.1,
            sigma_doppler: 10.0,
            kappa: 1e9,
            measurements_per_site: 1,
            trials: 100,
            base_seed: 1,
            estimators: vec![Estimator::Mle, Estimator::Trilateration],
        }
    }

    /// Total radar count seen by the estimators (sites × multiplicity).
    pub fn radar_count(&self) -> usize {
        self.sites.len() * self.measurements_per_site
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.objects.is_empty() {
            return Err(BenchError::InvalidScenario("no objects".into()));
        }
        if self.sites.is_empty() {
            return Err(BenchError::InvalidScenario("no sites".into()));
        }
        if self.trials == 0 {
            return Err(BenchError::InvalidScenario("trials must be >= 1".into()));
        }
        if !(1..=5).contains(&self.measurements_per_site) {
            return Err(BenchError::InvalidScenario(format!(
                "measurements_per_site must lie in 1..=5, got {}",
                self.measurements_per_site
            )));
        }
        for (name, value) in [
            ("sigma_range", self.sigma_range),
            ("sigma_doppler", self.sigma_doppler),
            ("kappa", self.kappa),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(BenchError::InvalidScenario(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.estimators.is_empty() {
            return Err(BenchError::InvalidScenario("no estimators selected".into()));
        }
        if self.estimators.contains(&Estimator::Trilateration) && self.radar_count() != 3 {
            return Err(BenchError::InvalidScenario(format!(
                "trilateration needs exactly 3 radars, scenario has {}",
                self.radar_count()
            )));
        }
        for elements in &self.objects {
            elements.validate()?;
        }
        Ok(())
    }

    /// Realize the site specs as Cartesian radar sites with this scenario's
    /// noise scales.
    pub fn build_sites(&self) -> Result<Vec<RadarSite>, BenchError> {
        let sites: Vec<RadarSite> = self
            .sites
            .iter()
            .map(|spec| RadarSite {
                position: geodetic_to_ecef(&spec.coord),
                carrier_frequency: spec.carrier_frequency,
                sigma_range: self.sigma_range,
                sigma_doppler: self.sigma_doppler,
                kappa: self.kappa,
            })
            .collect();
        for site in &sites {
            site.validate()?;
        }
        Ok(sites)
    }

    /// Objects below any site's horizon, as human-readable warnings. The
    /// estimators do not require visibility; this only flags unphysical
    /// scenario definitions.
    pub fn visibility_warnings(&self) -> Result<Vec<String>, BenchError> {
        let mut warnings = Vec::new();
        for (object_index, elements) in self.objects.iter().enumerate() {
            let state = kepler_to_cartesian_earth(elements)?;
            for (site_index, spec) in self.sites.iter().enumerate() {
                let ecef = geodetic_to_ecef(&spec.coord);
                let elevation = elevation_angle(&spec.coord, &ecef, &state.position);
                if elevation <= 0.0 {
                    warnings.push(format!(
                        "object {object_index} is below the horizon of site {site_index} \
                         (elevation {:.2} deg)",
                        elevation.to_degrees()
                    ));
                }
            }
        }
        Ok(warnings)
    }
}

/// Squared and plain norm errors of an estimate against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetric {
    /// ‖x̂ − x⁰‖² (m²).
    pub epsilon_position: f64,
    /// ‖v̂ − v⁰‖² ((m/s)²).
    pub epsilon_velocity: f64,
    /// ‖x̂ − x⁰‖ (m).
    pub norm_error_position: f64,
    /// ‖v̂ − v⁰‖ (m/s).
    pub norm_error_velocity: f64,
}

/// Compute both error conventions for one estimate.
pub fn error_metric(estimate: &StateVector, truth: &StateVector) -> ErrorMetric {
    let dp = estimate.position - truth.position;
    let dv = estimate.velocity - truth.velocity;
    ErrorMetric {
        epsilon_position: dp.norm_squared(),
        epsilon_velocity: dv.norm_squared(),
        norm_error_position: dp.norm(),
        norm_error_velocity: dv.norm(),
    }
}

/// One estimator's outcome on one (object, trial) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub object_index: usize,
    pub trial_index: usize,
    pub estimator: Estimator,
    pub radar_count: usize,
    pub noise_family: NoiseFamily,
    pub epsilon_position: Option<f64>,
    pub epsilon_velocity: Option<f64>,
    pub norm_error_position: Option<f64>,
    pub norm_error_velocity: Option<f64>,
    /// Block-coordinate-descent sweeps; absent for the closed-form
    /// baseline.
    pub iterations: Option<usize>,
    /// Estimator wall time in seconds. Excluded from exports so output
    /// files are byte-deterministic.
    pub wall_time: f64,
    pub failure: Option<String>,
}

/// Deterministic RNG stream for one (object, trial) cell.
pub fn trial_rng(base_seed: u64, object_index: usize, trial_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(((object_index as u64) << 32) | trial_index as u64);
    rng
}

/// Run the full sweep: every object × trial × estimator. Estimator failures
/// are recorded in the result rows, never propagated. Results come back
/// sorted by (object, trial, estimator) regardless of scheduling.
pub fn run_monte_carlo(config: &ScenarioConfig) -> Result<Vec<TrialResult>, BenchError> {
    run_monte_carlo_with_solver(config, &SolverConfig::default())
}

/// [`run_monte_carlo`] with an explicit solver configuration for the MLE.
pub fn run_monte_carlo_with_solver(
    config: &ScenarioConfig,
    solver: &SolverConfig,
) -> Result<Vec<TrialResult>, BenchError> {
    config.validate()?;
    for warning in config.visibility_warnings()? {
        log::warn!("{warning}");
    }
    let sites = config.build_sites()?;
    let truths: Vec<StateVector> = config
        .objects
        .iter()
        .map(kepler_to_cartesian_earth)
        .collect::<Result<_, _>>()?;
    let radar_count = config.radar_count();

    let cells: Vec<(usize, usize)> = (0..config.objects.len())
        .flat_map(|object| (0..config.trials).map(move |trial| (object, trial)))
        .collect();

    let mut results: Vec<TrialResult> = cells
        .par_iter()
        .map(|&(object_index, trial_index)| {
            let truth = &truths[object_index];
            let mut rng = trial_rng(config.base_seed, object_index, trial_index);
            let ideal = ideal_measurements(truth, &sites)?
                .replicate(config.measurements_per_site);
            let noisy = apply_noise(&ideal, config.noise_family, &sites, &mut rng)?;

            let mut rows = Vec::with_capacity(config.estimators.len());
            for &estimator in &config.estimators {
                let started = Instant::now();
                let (outcome, iterations) = match estimator {
                    Estimator::Mle => match mle::solve(&noisy, &sites, solver) {
                        Ok((state, report)) => (Ok(state), Some(report.iterations)),
                        Err(error) => (Err(error.to_string()), None),
                    },
                    Estimator::Trilateration => (
                        TrilaterationInput::from_measurements(&noisy, &sites)
                            .and_then(|input| trilat::trilaterate(&input))
                            .map_err(|error| error.to_string()),
                        None,
                    ),
                };
                let wall_time = started.elapsed().as_secs_f64();
                let row = match outcome {
                    Ok(state) => {
                        let metric = error_metric(&state, truth);
                        TrialResult {
                            object_index,
                            trial_index,
                            estimator,
                            radar_count,
                            noise_family: config.noise_family,
                            epsilon_position: Some(metric.epsilon_position),
                            epsilon_velocity: Some(metric.epsilon_velocity),
                            norm_error_position: Some(metric.norm_error_position),
                            norm_error_velocity: Some(metric.norm_error_velocity),
                            iterations,
                            wall_time,
                            failure: None,
                        }
                    }
                    Err(message) => TrialResult {
                        object_index,
                        trial_index,
                        estimator,
                        radar_count,
                        noise_family: config.noise_family,
                        epsilon_position: None,
                        epsilon_velocity: None,
                        norm_error_position: None,
                        norm_error_velocity: None,
                        iterations,
                        wall_time,
                        failure: Some(message),
                    },
                };
                rows.push(row);
            }
            Ok(rows)
        })
        .collect::<Result<Vec<Vec<TrialResult>>, BenchError>>()?
        .into_iter()
        .flatten()
        .collect();

    results.sort_by(|a, b| {
        (a.object_index, a.trial_index, a.estimator)
            .cmp(&(b.object_index, b.trial_index, b.estimator))
    });
    Ok(results)
}

/// Order statistics of one error field over the successful trials of a
/// group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Linear-interpolation ("type 7") quantile of sorted data.
fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - h.floor()) * (sorted[hi] - sorted[lo])
}

fn field_stats(values: &mut [f64]) -> Option<FieldStats> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Some(FieldStats {
        median: quantile_type7(values, 0.5),
        q1: quantile_type7(values, 0.25),
        q3: quantile_type7(values, 0.75),
        min: values[0],
        max: *values.last().unwrap(),
        mean,
    })
}

/// Aggregate statistics of one (estimator, radar count, noise family,
/// object) group. The error stats are absent when every trial in the group
/// failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub count: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_position: Option<FieldStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_velocity: Option<FieldStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_error_position: Option<FieldStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_error_velocity: Option<FieldStats>,
}

/// Summary keyed estimator → radar count → noise family → object index.
pub type SummaryStats =
    BTreeMap<String, BTreeMap<usize, BTreeMap<String, BTreeMap<usize, GroupStats>>>>;

/// Group results and compute order statistics per group. Failed trials are
/// excluded from the statistics but counted.
pub fn summarize(results: &[TrialResult]) -> SummaryStats {
    #[derive(Default)]
    struct Accumulator {
        count: usize,
        failures: usize,
        epsilon_position: Vec<f64>,
        epsilon_velocity: Vec<f64>,
        norm_error_position: Vec<f64>,
        norm_error_velocity: Vec<f64>,
    }

    let mut groups: BTreeMap<(String, usize, String, usize), Accumulator> = BTreeMap::new();
    for row in results {
        let key = (
            row.estimator.as_str().to_owned(),
            row.radar_count,
            row.noise_family.as_str().to_owned(),
            row.object_index,
        );
        let acc = groups.entry(key).or_default();
        acc.count += 1;
        if row.failure.is_some() {
            acc.failures += 1;
            continue;
        }
        acc.epsilon_position.extend(row.epsilon_position);
        acc.epsilon_velocity.extend(row.epsilon_velocity);
        acc.norm_error_position.extend(row.norm_error_position);
        acc.norm_error_velocity.extend(row.norm_error_velocity);
    }

    let mut summary = SummaryStats::new();
    for ((estimator, radar_count, family, object), mut acc) in groups {
        if acc.count == acc.failures {
            log::warn!(
                "group ({estimator}, {radar_count} radars, {family}, object {object}): \
                 all {} trials failed; no error statistics",
                acc.count
            );
        }
        let stats = GroupStats {
            count: acc.count,
            failures: acc.failures,
            epsilon_position: field_stats(&mut acc.epsilon_position),
            epsilon_velocity: field_stats(&mut acc.epsilon_velocity),
            norm_error_position: field_stats(&mut acc.norm_error_position),
            norm_error_velocity: field_stats(&mut acc.norm_error_velocity),
        };
        summary
            .entry(estimator)
            .or_default()
            .entry(radar_count)
            .or_default()
            .entry(family)
            .or_default()
            .insert(object, stats);
    }
    summary
}

/// Which squared-error channel a paired comparison reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorChannel {
    Position,
    Velocity,
}

/// Per-(object, trial) differences ε_a − ε_b between two result sets that
/// consumed identical measurement realizations. Keys present in one set but
/// not the other are a pairing error; keys where either side failed are
/// skipped.
pub fn paired_error_difference(
    results_a: &[TrialResult],
    results_b: &[TrialResult],
    channel: ErrorChannel,
) -> Result<Vec<f64>, BenchError> {
    let epsilon = |row: &TrialResult| match channel {
        ErrorChannel::Position => row.epsilon_position,
        ErrorChannel::Velocity => row.epsilon_velocity,
    };
    let index = |rows: &[TrialResult]| -> BTreeMap<(usize, usize), Option<f64>> {
        rows.iter()
            .map(|row| ((row.object_index, row.trial_index), epsilon(row)))
            .collect()
    };
    let map_a = index(results_a);
    let map_b = index(results_b);
    if map_a.len() != results_a.len() || map_b.len() != results_b.len() {
        return Err(BenchError::PairingMismatch(
            "duplicate (object, trial) keys within one result set".into(),
        ));
    }
    if map_a.keys().ne(map_b.keys()) {
        return Err(BenchError::PairingMismatch(format!(
            "key sets differ: {} vs {} entries",
            map_a.len(),
            map_b.len()
        )));
    }
    Ok(map_a
        .iter()
        .filter_map(|(key, a)| match (a, map_b[key]) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        })
        .collect())
}

/// 17-significant-digit decimal text; round-trips any finite f64.
pub fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Fixed column order of `results.csv`.
pub const RESULTS_CSV_COLUMNS: [&str; 11] = [
    "object_index",
    "trial_index",
    "estimator",
    "radar_count",
    "noise_family",
    "epsilon_position",
    "epsilon_velocity",
    "norm_error_position",
    "norm_error_velocity",
    "iterations",
    "failure",
];

/// Write the row-per-trial CSV. Optional fields of failed trials are empty;
/// wall times are not exported.
pub fn write_results_csv(results: &[TrialResult], path: &Path) -> Result<(), BenchError> {
    let io_err = |source: csv::Error| match source.into_kind() {
        csv::ErrorKind::Io(source) => BenchError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => BenchError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(format!("{other:?}")),
        },
    };
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    writer.write_record(RESULTS_CSV_COLUMNS).map_err(io_err)?;
    let float = |x: Option<f64>| x.map(format_f64).unwrap_or_default();
    for row in results {
        writer
            .write_record([
                row.object_index.to_string(),
                row.trial_index.to_string(),
                row.estimator.to_string(),
                row.radar_count.to_string(),
                row.noise_family.to_string(),
                float(row.epsilon_position),
                float(row.epsilon_velocity),
                float(row.norm_error_position),
                float(row.norm_error_velocity),
                row.iterations.map(|i| i.to_string()).unwrap_or_default(),
                row.failure.clone().unwrap_or_default(),
            ])
            .map_err(io_err)?;
    }
    writer.flush().map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Write the nested summary as pretty JSON.
pub fn write_summary_json(stats: &SummaryStats, path: &Path) -> Result<(), BenchError> {
    let json = serde_json::to_string_pretty(stats).map_err(|source| BenchError::Serialize {
        what: "summary",
        source,
    })?;
    let mut file = std::fs::File::create(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(json.as_bytes())
        .and_then(|()| file.write_all(b"\n"))
        .map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(())
}

/// Write `results.csv` and `summary.json` into `dir`, returning their
/// paths.
pub fn export_results(
    results: &[TrialResult],
    stats: &SummaryStats,
    dir: &Path,
) -> Result<(PathBuf, PathBuf), BenchError> {
    std::fs::create_dir_all(dir).map_err(|source| BenchError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let csv_path = dir.join("results.csv");
    let json_path = dir.join("summary.json");
    write_results_csv(results, &csv_path)?;
    write_summary_json(stats, &json_path)?;
    Ok((csv_path, json_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn quick_config() -> ScenarioConfig {
        ScenarioConfig {
            objects: reference_objects().into_iter().take(2).collect(),
            trials: 3,
            ..ScenarioConfig::reference()
        }
    }

    #[test]
    fn noiseless_sweep_recovers_exactly() {
        let config = ScenarioConfig {
            noise_family: NoiseFamily::None,
            trials: 1,
            ..quick_config()
        };
        let results = run_monte_carlo(&config).unwrap();
        assert_eq!(results.len(), 4); // 2 objects x 1 trial x 2 estimators
        for row in &results {
            assert!(row.failure.is_none());
            assert!(row.epsilon_position.unwrap() <= 1e-6, "{row:?}");
            assert!(row.epsilon_velocity.unwrap() <= 1e-6, "{row:?}");
        }
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let config = quick_config();
        let a = run_monte_carlo(&config).unwrap();
        let b = run_monte_carlo(&config).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            // Everything except wall time must match exactly.
            assert_eq!(x.object_index, y.object_index);
            assert_eq!(x.trial_index, y.trial_index);
            assert_eq!(x.estimator, y.estimator);
            assert_eq!(x.epsilon_position, y.epsilon_position);
            assert_eq!(x.epsilon_velocity, y.epsilon_velocity);
            assert_eq!(x.iterations, y.iterations);
            assert_eq!(x.failure, y.failure);
        }
    }

    #[test]
    fn trials_are_independent_of_trial_count() {
        let short = run_monte_carlo(&ScenarioConfig {
            trials: 2,
            ..quick_config()
        })
        .unwrap();
        let long = run_monte_carlo(&ScenarioConfig {
            trials: 4,
            ..quick_config()
        })
        .unwrap();
        for row in &short {
            let twin = long
                .iter()
                .find(|other| {
                    (
                        other.object_index,
                        other.trial_index,
                        other.estimator,
                    ) == (row.object_index, row.trial_index, row.estimator)
                })
                .unwrap();
            assert_eq!(row.epsilon_position, twin.epsilon_position);
            assert_eq!(row.epsilon_velocity, twin.epsilon_velocity);
        }
    }

    #[test]
    fn error_metric_examples() {
        let truth = StateVector::new(Vector3::zeros(), Vector3::zeros());
        let same = error_metric(&truth, &truth);
        assert_eq!(same.epsilon_position, 0.0);
        assert_eq!(same.norm_error_velocity, 0.0);

        let off = StateVector::new(Vector3::new(3.0, 4.0, 0.0), Vector3::zeros());
        let metric = error_metric(&off, &truth);
        assert_relative_eq!(metric.epsilon_position, 25.0);
        assert_relative_eq!(metric.norm_error_position, 5.0);
    }

    #[test]
    fn error_metric_is_squared_norm() {
        let mut rng = crate::bench::trial_rng(7, 0, 0);
        use rand::Rng;
        for _ in 0..100 {
            let a = StateVector::new(
                Vector3::new(rng.gen(), rng.gen(), rng.gen()),
                Vector3::new(rng.gen(), rng.gen(), rng.gen()),
            );
            let b = StateVector::new(
                Vector3::new(rng.gen(), rng.gen(), rng.gen()),
                Vector3::new(rng.gen(), rng.gen(), rng.gen()),
            );
            let metric = error_metric(&a, &b);
            assert_relative_eq!(
                metric.epsilon_position,
                metric.norm_error_position * metric.norm_error_position,
                max_relative = 1e-12
            );
            assert_relative_eq!(
                metric.epsilon_velocity,
                metric.norm_error_velocity * metric.norm_error_velocity,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn quantiles_match_textbook_convention() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(quantile_type7(&sorted, 0.5), 2.5);
        assert_relative_eq!(quantile_type7(&sorted, 0.25), 1.75);
        assert_relative_eq!(quantile_type7(&sorted, 0.75), 3.25);
    }

    #[test]
    fn single_result_summary() {
        let row = TrialResult {
            object_index: 0,
            trial_index: 0,
            estimator: Estimator::Mle,
            radar_count: 3,
            noise_family: NoiseFamily::Gaussian,
            epsilon_position: Some(4.0),
            epsilon_velocity: Some(9.0),
            norm_error_position: Some(2.0),
            norm_error_velocity: Some(3.0),
            iterations: Some(10),
            wall_time: 0.0,
            failure: None,
        };
        let summary = summarize(&[row]);
        let stats = &summary["mle"][&3]["gaussian"][&0];
        assert_eq!(stats.count, 1);
        assert_eq!(stats.failures, 0);
        let eps = stats.epsilon_position.unwrap();
        assert_eq!(eps.median, 4.0);
        assert_eq!(eps.min, 4.0);
        assert_eq!(eps.max, 4.0);
        assert_eq!(eps.mean, 4.0);
    }

    #[test]
    fn failures_counted_but_excluded() {
        let ok = TrialResult {
            object_index: 0,
            trial_index: 0,
            estimator: Estimator::Mle,
            radar_count: 3,
            noise_family: NoiseFamily::Cauchy,
            epsilon_position: Some(1.0),
            epsilon_velocity: Some(1.0),
            norm_error_position: Some(1.0),
            norm_error_velocity: Some(1.0),
            iterations: Some(5),
            wall_time: 0.0,
            failure: None,
        };
        let failed = TrialResult {
            trial_index: 1,
            epsilon_position: None,
            epsilon_velocity: None,
            norm_error_position: None,
            norm_error_velocity: None,
            iterations: None,
            failure: Some("diverged".into()),
            ..ok.clone()
        };
        let summary = summarize(&[ok, failed]);
        let stats = &summary["mle"][&3]["cauchy"][&0];
        assert_eq!(stats.count, 2);
        assert_eq!(stats.failures, 1);
        assert_eq!(stats.epsilon_position.unwrap().mean, 1.0);
    }

    #[test]
    fn paired_difference_identical_runs() {
        let results = run_monte_carlo(&ScenarioConfig {
            noise_family: NoiseFamily::None,
            trials: 2,
            ..quick_config()
        })
        .unwrap();
        let mle: Vec<_> = results
            .iter()
            .filter(|r| r.estimator == Estimator::Mle)
            .cloned()
            .collect();
        let tri: Vec<_> = results
            .iter()
            .filter(|r| r.estimator == Estimator::Trilateration)
            .cloned()
            .collect();
        let self_diff = paired_error_difference(&mle, &mle, ErrorChannel::Position).unwrap();
        assert!(self_diff.iter().all(|d| *d == 0.0));
        // Noiseless runs: both estimators exact, differences ~ 0.
        let cross = paired_error_difference(&tri, &mle, ErrorChannel::Position).unwrap();
        assert!(cross.iter().all(|d| d.abs() <= 1e-9));
    }

    #[test]
    fn paired_difference_detects_key_mismatch() {
        let results = run_monte_carlo(&ScenarioConfig {
            noise_family: NoiseFamily::None,
            trials: 2,
            estimators: vec![Estimator::Mle],
            ..quick_config()
        })
        .unwrap();
        let mut truncated = results.clone();
        truncated.pop();
        assert!(matches!(
            paired_error_difference(&results, &truncated, ErrorChannel::Velocity),
            Err(BenchError::PairingMismatch(_))
        ));
    }

    #[test]
    fn format_round_trips() {
        for value in [
            0.0,
            1.0,
            -1.0,
            std::f64::consts::PI,
            1.2345678901234567e-123,
            6.840640165320001e6,
            f64::MIN_POSITIVE,
        ] {
            let text = format_f64(value);
            assert_eq!(text.parse::<f64>().unwrap(), value, "text {text}");
        }
    }

    #[test]
    fn export_and_reparse() {
        let dir = std::env::temp_dir().join(format!("iod-bench-test-{}", std::process::id()));
        let config = ScenarioConfig {
            noise_family: NoiseFamily::None,
            trials: 2,
            ..quick_config()
        };
        let results = run_monte_carlo(&config).unwrap();
        let stats = summarize(&results);
        let (csv_path, json_path) = export_results(&results, &stats, &dir).unwrap();

        let mut reader = csv::Reader::from_path(&csv_path).unwrap();
        assert_eq!(
            reader.headers().unwrap().iter().collect::<Vec<_>>(),
            RESULTS_CSV_COLUMNS.to_vec()
        );
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), results.len());
        for (record, row) in rows.iter().zip(&results) {
            assert_eq!(record.len(), RESULTS_CSV_COLUMNS.len());
            assert_eq!(
                record[5].parse::<f64>().unwrap(),
                row.epsilon_position.unwrap()
            );
        }

        let parsed: SummaryStats =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(parsed, stats);

        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn empty_results_give_header_only_exports() {
        let dir = std::env::temp_dir().join(format!("iod-bench-empty-{}", std::process::id()));
        let results: Vec<TrialResult> = Vec::new();
        let stats = summarize(&results);
        let (csv_path, json_path) = export_results(&results, &stats, &dir).unwrap();
        let csv_text = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(csv_text.lines().count(), 1);
        let parsed: SummaryStats =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert!(parsed.is_empty());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn scenario_validation() {
        let mut config = quick_config();
        config.measurements_per_site = 6;
        assert!(config.validate().is_err());
        let mut config = quick_config();
        config.measurements_per_site = 2; // 6 radars with trilateration selected
        assert!(config.validate().is_err());
        config.estimators = vec![Estimator::Mle];
        assert!(config.validate().is_ok());
        let mut config = quick_config();
        config.trials = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn reference_scenario_has_no_visibility_warnings() {
        let warnings = ScenarioConfig::reference().visibility_warnings().unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
    }
}
