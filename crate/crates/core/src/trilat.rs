//! Trilateration baseline for exactly three radars.
//!
//! Position comes from the intersection of the three range spheres: the
//! pairwise differences of the sphere equations give two planes whose
//! intersection line pierces the first sphere in up to two points, and the
//! measured directions disambiguate the root. Velocity follows by solving
//! the 3×3 linear system `û_iᵀ v = ṙ_i`, with range-rates recovered from
//! the Doppler shifts as `ṙ = c·f/(2f_c)`.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::constants::SPEED_OF_LIGHT;
use crate::frames::{ecef_to_geodetic, StateVector};
use crate::measmodel::{MeasurementSet, RadarSite};

/// Relative discriminant slack: a slightly negative squared out-of-plane
/// coordinate (noisy spheres that just fail to touch) is clamped to zero;
/// anything below −DISCRIMINANT_SLACK·d₁² means the ranges are inconsistent
/// with any geometry.
const DISCRIMINANT_SLACK: f64 = 1e-3;

/// Condition-number ceiling for the velocity system.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error)]
pub enum TrilatError {
    #[error("trilateration needs exactly 3 measurement triples, got {0}")]
    WrongMeasurementCount(usize),
    #[error("radar sites are collinear")]
    CollinearSites,
    #[error("ranges are infeasible: squared out-of-plane coordinate {discriminant:.3e} m²")]
    InfeasibleRanges { discriminant: f64 },
    #[error("line-of-sight directions are numerically dependent (condition {condition:.3e})")]
    SingularGeometry { condition: f64 },
}

/// Input bundle for the baseline: exactly three of everything. The
/// directions are used only to select among the two sphere-intersection
/// roots.
#[derive(Debug, Clone)]
pub struct TrilaterationInput {
    pub sites: [RadarSite; 3],
    pub ranges: [f64; 3],
    pub dopplers: [f64; 3],
    pub directions: [Vector3<f64>; 3],
}

impl TrilaterationInput {
    /// Borrow a three-triple measurement set as trilateration input.
    pub fn from_measurements(
        data: &MeasurementSet,
        sites: &[RadarSite],
    ) -> Result<Self, TrilatError> {
        if data.len() != 3 {
            return Err(TrilatError::WrongMeasurementCount(data.len()));
        }
        let site = |j: usize| sites[data.site_index[j]].clone();
        Ok(TrilaterationInput {
            sites: [site(0), site(1), site(2)],
            ranges: [data.ranges[0], data.ranges[1], data.ranges[2]],
            dopplers: [data.dopplers[0], data.dopplers[1], data.dopplers[2]],
            directions: [data.directions[0], data.directions[1], data.directions[2]],
        })
    }
}

/// Two-way Doppler shift to range-rate: `ṙ = c·f/(2 f_c)`.
pub fn rangerate_from_doppler(doppler: f64, carrier_frequency: f64) -> f64 {
    SPEED_OF_LIGHT * doppler / (2.0 * carrier_frequency)
}

/// Position fix from three ranges by sphere intersection.
pub fn trilaterate_position(input: &TrilaterationInput) -> Result<Vector3<f64>, TrilatError> {
    let [t1, t2, t3] = [
        input.sites[0].position,
        input.sites[1].position,
        input.sites[2].position,
    ];
    let [d1, d2, d3] = input.ranges;

    // Local orthonormal frame spanned by the site triangle.
    let baseline = t2 - t1;
    let baseline_len = baseline.norm();
    if baseline_len == 0.0 {
        return Err(TrilatError::CollinearSites);
    }
    let ex = baseline / baseline_len;
    let third = t3 - t1;
    let i = ex.dot(&third);
    let ey_raw = third - ex * i;
    let ey_len = ey_raw.norm();
    if ey_len <= 1e-9 * third.norm() {
        return Err(TrilatError::CollinearSites);
    }
    let ey = ey_raw / ey_len;
    let ez = ex.cross(&ey);
    let j = ey.dot(&third);

    // Sphere-difference planes in the local frame.
    let x = (d1 * d1 - d2 * d2 + baseline_len * baseline_len) / (2.0 * baseline_len);
    let y = (d1 * d1 - d3 * d3 + i * i + j * j) / (2.0 * j) - (i / j) * x;
    let z2 = d1 * d1 - x * x - y * y;
    if z2 < -DISCRIMINANT_SLACK * d1 * d1 {
        return Err(TrilatError::InfeasibleRanges { discriminant: z2 });
    }
    let z = z2.max(0.0).sqrt();

    let base = t1 + ex * x + ey * y;
    let candidates = [base + ez * z, base - ez * z];

    // Agreement with the measured directions; Earth-surface feasibility
    // breaks near-ties.
    let direction_score = |candidate: &Vector3<f64>| -> f64 {
        (0..3)
            .map(|k| {
                let los = candidate - input.sites[k].position;
                let norm = los.norm();
                if norm == 0.0 {
                    return -1.0;
                }
                input.directions[k].dot(&los) / norm
            })
            .sum()
    };
    let scores = [direction_score(&candidates[0]), direction_score(&candidates[1])];
    let pick = if (scores[0] - scores[1]).abs() <= 1e-9 {
        let above = |c: &Vector3<f64>| ecef_to_geodetic(c).altitude > 0.0;
        match (above(&candidates[0]), above(&candidates[1])) {
            (true, false) => 0,
            (false, true) => 1,
            _ => usize::from(scores[0] < scores[1]),
        }
    } else {
        usize::from(scores[0] < scores[1])
    };
    Ok(candidates[pick])
}

/// Velocity from three range-rates: solve `û_iᵀ v = ṙ_i` with the unit
/// vectors û_i taken from the fixed position.
pub fn velocity_from_rangerates(
    position: &Vector3<f64>,
    rates: &[f64; 3],
    sites: &[RadarSite; 3],
) -> Result<Vector3<f64>, TrilatError> {
    let mut system = Matrix3::zeros();
    for (k, site) in sites.iter().enumerate() {
        let los = position - site.position;
        let norm = los.norm();
        if norm == 0.0 {
            return Err(TrilatError::SingularGeometry {
                condition: f64::INFINITY,
            });
        }
        system.set_row(k, &(los / norm).transpose());
    }
    let singular_values = system.svd(false, false).singular_values;
    let condition = singular_values.max() / singular_values.min();
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(TrilatError::SingularGeometry { condition });
    }
    let rhs = Vector3::new(rates[0], rates[1], rates[2]);
    system
        .lu()
        .solve(&rhs)
        .ok_or(TrilatError::SingularGeometry { condition })
}

/// Full baseline: position from ranges, velocity from Doppler-derived
/// range-rates.
pub fn trilaterate(input: &TrilaterationInput) -> Result<StateVector, TrilatError> {
    let position = trilaterate_position(input)?;
    let rates = [
        rangerate_from_doppler(input.dopplers[0], input.sites[0].carrier_frequency),
        rangerate_from_doppler(input.dopplers[1], input.sites[1].carrier_frequency),
        rangerate_from_doppler(input.dopplers[2], input.sites[2].carrier_frequency),
    ];
    let velocity = velocity_from_rangerates(&position, &rates, &input.sites)?;
    Ok(StateVector::new(position, velocity))
}
