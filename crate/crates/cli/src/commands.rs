//! Implementations of the four subcommands.

use std::path::Path;

use iod_core::bench::{
    self, paired_error_difference, run_monte_carlo_with_solver, summarize, ErrorChannel,
    Estimator, TrialResult,
};
use iod_core::measmodel::{apply_noise, ideal_measurements};
use iod_core::mle::{self, SolverConfig};
use iod_core::trilat::{self, TrilaterationInput};
use iod_core::trs::{check_kkt, solve_trs_eigen, solve_trs_secular, TrsProblem};
use iod_core::{MeasurementSet, NoiseFamily, RadarSite, StateVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::{level_tag, ScenarioFile, SweepCell};
use crate::CliError;

/// On-disk measurement batch: the realized sites, one measurement set per
/// object, and (unless stripped) the true states for later scoring.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    pub noise_family: NoiseFamily,
    pub seed: u64,
    pub measurements_per_site: usize,
    pub sites: Vec<RadarSite>,
    pub objects: Vec<MeasuredObject>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredObject {
    pub object_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<StateVector>,
    pub measurements: MeasurementSet,
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<ScenarioFile, CliError> {
    let text = read_to_string(path)?;
    ScenarioFile::from_json(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
    std::fs::write(path, json + "\n")
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// `simulate`: synthesize one measurement batch per object and write it,
/// with the hidden truth states, as JSON.
pub fn simulate(
    scenario_path: &Path,
    output_path: &Path,
    seed: Option<u64>,
    strip_truth: bool,
) -> Result<(), CliError> {
    let file = load_scenario(scenario_path)?;
    file.require_single_cell().map_err(CliError::Usage)?;
    let mut cells = file.expand().map_err(CliError::Usage)?;
    let mut cell = cells.pop().expect("single cell");
    if let Some(seed) = seed {
        cell.config.base_seed = seed;
    }
    for warning in cell
        .config
        .visibility_warnings()
        .map_err(|e| CliError::Usage(e.to_string()))?
    {
        eprintln!("warning: {warning}");
    }

    let sites = cell
        .config
        .build_sites()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut objects = Vec::with_capacity(cell.config.objects.len());
    for (object_index, elements) in cell.config.objects.iter().enumerate() {
        let truth = iod_core::frames::kepler_to_cartesian_earth(elements)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let mut rng = bench::trial_rng(cell.config.base_seed, object_index, 0);
        let ideal = ideal_measurements(&truth, &sites)
            .map_err(|e| CliError::Usage(e.to_string()))?
            .replicate(cell.config.measurements_per_site);
        let noisy = apply_noise(&ideal, cell.config.noise_family, &sites, &mut rng)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        objects.push(MeasuredObject {
            object_index,
            truth: (!strip_truth).then_some(truth),
            measurements: noisy,
        });
    }

    let out = MeasurementFile {
        noise_family: cell.config.noise_family,
        seed: cell.config.base_seed,
        measurements_per_site: cell.config.measurements_per_site,
        sites,
        objects,
    };
    write_json(&out, output_path)?;
    eprintln!(
        "wrote {} objects x {} triples to {}",
        out.objects.len(),
        out.objects.first().map_or(0, |o| o.measurements.len()),
        output_path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveRow {
    object_index: usize,
    estimator: Estimator,
    #[serde(skip_serializing_if = "Option::is_none")]
    state: Option<StateVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost_trace_length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_relaxed_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_original_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    errors_vs_truth: Option<bench::ErrorMetric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
}

/// `solve`: run one estimator on every object of a measurement file and
/// print a JSON report to standard output.
pub fn solve(
    measurement_path: &Path,
    estimator: Estimator,
    solver: &SolverConfig,
) -> Result<(), CliError> {
    let text = read_to_string(measurement_path)?;
    let deserializer = &mut serde_json::Deserializer::from_str(&text);
    let file: MeasurementFile = serde_path_to_error::deserialize(deserializer).map_err(|e| {
        CliError::Usage(format!(
            "{}: measurement schema violation at /{}: {}",
            measurement_path.display(),
            e.path().to_string().replace('.', "/"),
            e.inner()
        ))
    })?;

    if estimator == Estimator::Trilateration {
        for object in &file.objects {
            if object.measurements.len() != 3 {
                return Err(CliError::Usage(format!(
                    "trilateration needs exactly 3 measurement triples, object {} has {}",
                    object.object_index,
                    object.measurements.len()
                )));
            }
        }
    }

    let mut rows = Vec::new();
    let mut failures = 0usize;
    for object in &file.objects {
        let outcome = match estimator {
            Estimator::Mle => mle::solve(&object.measurements, &file.sites, solver)
                .map(|(state, report)| SolveRow {
                    object_index: object.object_index,
                    estimator,
                    state: Some(state),
                    converged: Some(report.converged),
                    iterations: Some(report.iterations),
                    cost_trace_length: Some(report.cost_trace.len()),
                    final_relaxed_cost: Some(report.final_relaxed_cost),
                    final_original_cost: Some(report.final_original_cost),
                    errors_vs_truth: object
                        .truth
                        .as_ref()
                        .map(|truth| bench::error_metric(&state, truth)),
                    failure: None,
                })
                .map_err(|e| e.to_string()),
            Estimator::Trilateration => {
                TrilaterationInput::from_measurements(&object.measurements, &file.sites)
                    .and_then(|input| trilat::trilaterate(&input))
                    .map(|state| SolveRow {
                        object_index: object.object_index,
                        estimator,
                        state: Some(state),
                        converged: None,
                        iterations: None,
                        cost_trace_length: None,
                        final_relaxed_cost: None,
                        final_original_cost: None,
                        errors_vs_truth: object
                            .truth
                            .as_ref()
                            .map(|truth| bench::error_metric(&state, truth)),
                        failure: None,
                    })
                    .map_err(|e| e.to_string())
            }
        };
        rows.push(outcome.unwrap_or_else(|message| {
            failures += 1;
            eprintln!("object {}: {message}", object.object_index);
            SolveRow {
                object_index: object.object_index,
                estimator,
                state: None,
                converged: None,
                iterations: None,
                cost_trace_length: None,
                final_relaxed_cost: None,
                final_original_cost: None,
                errors_vs_truth: None,
                failure: Some(message),
            }
        }));
    }

    let report = serde_json::json!({ "results": rows });
    println!(
        "{}",
        serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?
    );
    if failures > 0 {
        return Err(CliError::Estimator(format!(
            "{failures} of {} objects failed",
            file.objects.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    sigma_range_m: f64,
    sigma_doppler_hz: f64,
    kappa: f64,
    path: String,
}

/// Extra CSV written when a level directory contains paired
/// MLE/trilateration runs.
fn write_paired_csv(
    groups: &[(NoiseFamily, Vec<TrialResult>)],
    path: &Path,
) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    writer
        .write_record([
            "object_index",
            "trial_index",
            "radar_count",
            "noise_family",
            "d_epsilon_position",
            "d_epsilon_velocity",
        ])
        .map_err(io)?;
    for (family, results) in groups {
        let split = |wanted: Estimator| -> Vec<TrialResult> {
            results
                .iter()
                .filter(|r| r.estimator == wanted)
                .cloned()
                .collect()
        };
        let tri = split(Estimator::Trilateration);
        let mle_rows = split(Estimator::Mle);
        if tri.is_empty() || mle_rows.is_empty() {
            continue;
        }
        let position = paired_error_difference(&tri, &mle_rows, ErrorChannel::Position)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let velocity = paired_error_difference(&tri, &mle_rows, ErrorChannel::Velocity)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        // paired_error_difference returns diffs in (object, trial) order of
        // the shared keys; reconstruct those keys for the rows.
        let mut keys: Vec<(usize, usize, usize)> = tri
            .iter()
            .filter(|r| r.failure.is_none())
            .filter(|r| {
                mle_rows.iter().any(|m| {
                    (m.object_index, m.trial_index) == (r.object_index, r.trial_index)
                        && m.failure.is_none()
                })
            })
            .map(|r| (r.object_index, r.trial_index, r.radar_count))
            .collect();
        keys.sort_unstable();
        for (((object, trial, radar_count), dp), dv) in
            keys.into_iter().zip(&position).zip(&velocity)
        {
            writer
                .write_record([
                    object.to_string(),
                    trial.to_string(),
                    radar_count.to_string(),
                    family.to_string(),
                    bench::format_f64(*dp),
                    bench::format_f64(*dv),
                ])
                .map_err(io)?;
        }
    }
    writer
        .flush()
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// `bench`: run every sweep cell of a scenario and export CSV/JSON results.
///
/// Cells that differ only in noise family or measurement multiplicity share
/// one `results.csv` (those are row columns); each distinct noise-level
/// combination gets its own directory unless the grid is a single point.
pub fn bench_sweep(
    scenario_path: &Path,
    output_dir: &Path,
    dry_run: bool,
    solver: &SolverConfig,
) -> Result<(), CliError> {
    let file = load_scenario(scenario_path)?;
    let cells = file.expand().map_err(CliError::Usage)?;
    if dry_run {
        println!(
            "{}",
            serde_json::json!({
                "cells": cells.len(),
                "trials_per_cell": file.trials,
                "estimators": file.estimators,
            })
        );
        return Ok(());
    }

    // Group cells by noise-level combination, preserving order.
    let mut level_groups: Vec<((u64, u64, u64), Vec<&SweepCell>)> = Vec::new();
    for cell in &cells {
        let key = (
            cell.sigma_range.to_bits(),
            cell.sigma_doppler.to_bits(),
            cell.kappa.to_bits(),
        );
        match level_groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, group)) => group.push(cell),
            None => level_groups.push((key, vec![cell])),
        }
    }

    let flat = level_groups.len() == 1;
    let mut manifest = Vec::new();
    let total = cells.len();
    let mut done = 0usize;
    for (_, group) in &level_groups {
        let first = group[0];
        let dir = if flat {
            output_dir.to_path_buf()
        } else {
            output_dir
                .join("levels")
                .join(level_tag(first.sigma_range, first.sigma_doppler, first.kappa))
        };
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;

        let mut level_results: Vec<TrialResult> = Vec::new();
        let mut family_groups: Vec<(NoiseFamily, Vec<TrialResult>)> = Vec::new();
        for cell in group {
            done += 1;
            eprintln!(
                "[{done}/{total}] {} radars, {} noise, sigma_d={} m, sigma_f={} Hz, kappa={}",
                cell.config.radar_count(),
                cell.config.noise_family,
                cell.sigma_range,
                cell.sigma_doppler,
                cell.kappa
            );
            let results = run_monte_carlo_with_solver(&cell.config, solver)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            if cell.config.radar_count() == 3
                && cell.config.estimators.contains(&Estimator::Mle)
                && cell.config.estimators.contains(&Estimator::Trilateration)
            {
                family_groups.push((cell.config.noise_family, results.clone()));
            }
            level_results.extend(results);
        }

        let stats = summarize(&level_results);
        bench::export_results(&level_results, &stats, &dir)
            .map_err(|e| CliError::Io(e.to_string()))?;
        if !family_groups.is_empty() {
            write_paired_csv(&family_groups, &dir.join("paired_differences.csv"))?;
        }
        if !flat {
            manifest.push(ManifestEntry {
                sigma_range_m: first.sigma_range,
                sigma_doppler_hz: first.sigma_doppler,
                kappa: first.kappa,
                path: dir
                    .strip_prefix(output_dir)
                    .unwrap_or(&dir)
                    .display()
                    .to_string(),
            });
        }
    }
    if !flat {
        write_json(&manifest, &output_dir.join("manifest.json"))?;
    }
    eprintln!("benchmark complete: {total} cells into {}", output_dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrsCheckReport {
    count: usize,
    tolerance: f64,
    max_scaled_kkt_residual: f64,
    max_lambda_disagreement: f64,
    max_y_disagreement: f64,
    pass: bool,
    /// (seed, stream) pairs reproducing each violating instance.
    failing_instances: Vec<(u64, u64)>,
}

/// `trs-check`: random structured instances through both solvers, verifying
/// mutual agreement and the optimality conditions.
pub fn trs_check(count: usize, seed: u64, tolerance: f64) -> Result<(), CliError> {
    let mut report = TrsCheckReport {
        count,
        tolerance,
        max_scaled_kkt_residual: 0.0,
        max_lambda_disagreement: 0.0,
        max_y_disagreement: 0.0,
        pass: true,
        failing_instances: Vec::new(),
    };
    if count == 0 {
        eprintln!("note: zero instances requested; the check passes vacuously");
    }
    for index in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let problem = TrsProblem::random(&mut rng);
        let mut violated = false;
        match (solve_trs_secular(&problem), solve_trs_eigen(&problem)) {
            (Ok(secular), Ok(eigen)) => {
                let d_lambda =
                    (secular.lambda - eigen.lambda).abs() / (1.0 + secular.lambda.abs());
                let d_y = (secular.y - eigen.y).norm() / problem.radius;
                report.max_lambda_disagreement = report.max_lambda_disagreement.max(d_lambda);
                report.max_y_disagreement = report.max_y_disagreement.max(d_y);
                if d_lambda > tolerance || d_y > tolerance {
                    violated = true;
                }
                for solution in [&secular, &eigen] {
                    let scaled = check_kkt(&problem, solution).max_scaled(&problem);
                    report.max_scaled_kkt_residual =
                        report.max_scaled_kkt_residual.max(scaled);
                    if scaled > tolerance {
                        violated = true;
                    }
                }
            }
            (secular, eigen) => {
                if let Err(e) = secular {
                    eprintln!("instance {index}: secular solver failed: {e}");
                }
                if let Err(e) = eigen {
                    eprintln!("instance {index}: eigen solver failed: {e}");
                }
                violated = true;
            }
        }
        if violated {
            report.failing_instances.push((seed, index as u64));
        }
    }
    report.pass = report.failing_instances.is_empty();
    println!(
        "{}",
        serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?
    );
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Estimator(format!(
            "{} of {count} instances violated the {tolerance:.1e} tolerance",
            report.failing_instances.len()
        )))
    }
}
