//! Scenario geometry: Keplerian elements and geodetic radar coordinates
//! realized as Cartesian states in a single shared frame.
//!
//! The estimators operate on one instantaneous snapshot, so the Earth-fixed
//! frame of the radar sites and the inertial frame of the object are declared
//! coincident at the measurement instant. Site positions come from the
//! WGS-84 geodetic-to-ECEF transform; object states come from the classical
//! perifocal construction rotated by `R_z(−Ω) R_x(−i) R_z(−ω)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{EARTH_MU, WGS84_A, WGS84_B, WGS84_E2};

/// Errors raised while turning scenario inputs into Cartesian quantities.
#[derive(Debug, Error)]
pub enum FramesError {
    #[error("Kepler iteration did not converge after {iterations} steps (M={mean_anomaly}, e={eccentricity}, residual={residual:.3e})")]
    KeplerDidNotConverge {
        mean_anomaly: f64,
        eccentricity: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("invalid Keplerian elements: {0}")]
    InvalidElements(String),
    #[error("invalid geodetic coordinate: {0}")]
    InvalidCoordinate(String),
}

/// Classical orbital elements of a closed orbit. Angles in radians, lengths
/// in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerianElements {
    pub semi_major_axis: f64,
    pub eccentricity: f64,
    pub inclination: f64,
    pub raan: f64,
    pub arg_perigee: f64,
    pub mean_anomaly: f64,
}

impl KeplerianElements {
    pub fn new(
        semi_major_axis: f64,
        eccentricity: f64,
        inclination: f64,
        raan: f64,
        arg_perigee: f64,
        mean_anomaly: f64,
    ) -> Result<Self, FramesError> {
        let elements = Self {
            semi_major_axis,
            eccentricity,
            inclination,
            raan,
            arg_perigee,
            mean_anomaly,
        };
        elements.validate()?;
        Ok(elements)
    }

    pub fn validate(&self) -> Result<(), FramesError> {
        if self.semi_major_axis <= 0.0 || self.semi_major_axis.is_nan() {
            return Err(FramesError::InvalidElements(format!(
                "semi-major axis must be positive, got {}",
                self.semi_major_axis
            )));
        }
        if !(0.0..1.0).contains(&self.eccentricity) {
            return Err(FramesError::InvalidElements(format!(
                "eccentricity must lie in [0, 1), got {}",
                self.eccentricity
            )));
        }
        for (name, angle) in [
            ("inclination", self.inclination),
            ("raan", self.raan),
            ("arg_perigee", self.arg_perigee),
            ("mean_anomaly", self.mean_anomaly),
        ] {
            if !angle.is_finite() {
                return Err(FramesError::InvalidElements(format!(
                    "{name} must be finite, got {angle}"
                )));
            }
        }
        Ok(())
    }
}

/// Geodetic position on the WGS-84 ellipsoid. Angles in radians, altitude in
/// meters above the ellipsoid. Longitude is normalized to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticCoord {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
}

impl GeodeticCoord {
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Result<Self, FramesError> {
        if !latitude.is_finite() || latitude.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(FramesError::InvalidCoordinate(format!(
                "latitude must lie in [-pi/2, pi/2], got {latitude}"
            )));
        }
        if !longitude.is_finite() {
            return Err(FramesError::InvalidCoordinate(format!(
                "longitude must be finite, got {longitude}"
            )));
        }
        if !altitude.is_finite() {
            return Err(FramesError::InvalidCoordinate(format!(
                "altitude must be finite, got {altitude}"
            )));
        }
        Ok(Self {
            latitude,
            longitude: normalize_longitude(longitude),
            altitude,
        })
    }

    /// Convenience constructor from degrees (altitude still in meters).
    pub fn from_degrees(lat_deg: f64, lon_deg: f64, altitude: f64) -> Result<Self, FramesError> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), altitude)
    }
}

/// Wrap a longitude into (−π, π].
fn normalize_longitude(lon: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut wrapped = lon % TAU;
    if wrapped <= -PI {
        wrapped += TAU;
    } else if wrapped > PI {
        wrapped -= TAU;
    }
    wrapped
}

/// Position and velocity of the observed object in the shared Cartesian
/// frame — the quantity every estimator in this crate produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl StateVector {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self { position, velocity }
    }
}

/// Solve Kepler's equation E − e·sin E = M for the eccentric anomaly by
/// Newton iteration seeded at E₀ = M.
///
/// Converges to |E − e·sin E − M| ≤ 1e−12 for every eccentricity handled
/// here (e < 1).
pub fn solve_kepler_equation(mean_anomaly: f64, eccentricity: f64) -> Result<f64, FramesError> {
    const TOLERANCE: f64 = 1e-12;
    const MAX_ITERATIONS: usize = 50;

    if !(0.0..1.0).contains(&eccentricity) {
        return Err(FramesError::InvalidElements(format!(
            "eccentricity must lie in [0, 1), got {eccentricity}"
        )));
    }

    let mut e_anom = mean_anomaly;
    let mut residual = e_anom - eccentricity * e_anom.sin() - mean_anomaly;
    for _ in 0..MAX_ITERATIONS {
        if residual.abs() <= TOLERANCE {
            return Ok(e_anom);
        }
        e_anom -= residual / (1.0 - eccentricity * e_anom.cos());
        residual = e_anom - eccentricity * e_anom.sin() - mean_anomaly;
    }
    if residual.abs() <= TOLERANCE {
        return Ok(e_anom);
    }
    Err(FramesError::KeplerDidNotConverge {
        mean_anomaly,
        eccentricity,
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Coordinate rotation about the z axis by `angle`.
fn rot_z(angle: f64) -> Matrix3<f64> {
    let (sin, cos) = angle.sin_cos();
    Matrix3::new(cos, sin, 0.0, -sin, cos, 0.0, 0.0, 0.0, 1.0)
}

/// Coordinate rotation about the x axis by `angle`.
fn rot_x(angle: f64) -> Matrix3<f64> {
    let (sin, cos) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, cos, sin, 0.0, -sin, cos)
}

/// Convert Keplerian elements to a Cartesian state for gravitational
/// parameter `mu` (m³/s²).
pub fn kepler_to_cartesian(
    elements: &KeplerianElements,
    mu: f64,
) -> Result<StateVector, FramesError> {
    elements.validate()?;
    if mu <= 0.0 || mu.is_nan() {
        return Err(FramesError::InvalidElements(format!(
            "gravitational parameter must be positive, got {mu}"
        )));
    }

    let a = elements.semi_major_axis;
    let ecc = elements.eccentricity;
    let e_anom = solve_kepler_equation(elements.mean_anomaly, ecc)?;
    let (sin_e, cos_e) = e_anom.sin_cos();
    let one_minus_e2 = 1.0 - ecc * ecc;

    let radius = a * (1.0 - ecc * cos_e);
    let true_anom = (one_minus_e2.sqrt() * sin_e).atan2(cos_e - ecc);
    let (sin_nu, cos_nu) = true_anom.sin_cos();

    // Perifocal frame: x toward perigee, z along angular momentum.
    let r_pf = Vector3::new(radius * cos_nu, radius * sin_nu, 0.0);
    let v_scale = (mu * a).sqrt() / radius;
    let v_pf = Vector3::new(-v_scale * sin_e, v_scale * one_minus_e2.sqrt() * cos_e, 0.0);

    let rotation =
        rot_z(-elements.raan) * rot_x(-elements.inclination) * rot_z(-elements.arg_perigee);
    Ok(StateVector::new(rotation * r_pf, rotation * v_pf))
}

/// [`kepler_to_cartesian`] with the WGS-84 Earth gravitational parameter.
pub fn kepler_to_cartesian_earth(elements: &KeplerianElements) -> Result<StateVector, FramesError> {
    kepler_to_cartesian(elements, EARTH_MU)
}

/// WGS-84 geodetic-to-ECEF transform.
pub fn geodetic_to_ecef(coord: &GeodeticCoord) -> Vector3<f64> {
    let (sin_lat, cos_lat) = coord.latitude.sin_cos();
    let (sin_lon, cos_lon) = coord.longitude.sin_cos();
    // Prime vertical radius of curvature.
    let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
    Vector3::new(
        (n + coord.altitude) * cos_lat * cos_lon,
        (n + coord.altitude) * cos_lat * sin_lon,
        (n * (1.0 - WGS84_E2) + coord.altitude) * sin_lat,
    )
}

/// Inverse of [`geodetic_to_ecef`] by fixed-point iteration on the geodetic
/// latitude. Converges far below a micrometer for near-Earth points.
pub fn ecef_to_geodetic(ecef: &Vector3<f64>) -> GeodeticCoord {
    let longitude = ecef.y.atan2(ecef.x);
    let p = (ecef.x * ecef.x + ecef.y * ecef.y).sqrt();
    if p < 1e-9 {
        // On the polar axis the longitude is arbitrary.
        return GeodeticCoord {
            latitude: std::f64::consts::FRAC_PI_2.copysign(ecef.z),
            longitude: 0.0,
            altitude: ecef.z.abs() - WGS84_B,
        };
    }
    let mut latitude = (ecef.z / (p * (1.0 - WGS84_E2))).atan();
    let mut altitude = 0.0;
    for _ in 0..10 {
        let sin_lat = latitude.sin();
        let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
        altitude = p / latitude.cos() - n;
        latitude = (ecef.z / (p * (1.0 - WGS84_E2 * n / (n + altitude)))).atan();
    }
    GeodeticCoord {
        latitude,
        longitude,
        altitude,
    }
}

/// Elevation angle (radians) of `target` above the geodetic horizon of a
/// site at `site_coord` / `site_ecef`. Positive means the target is visible.
pub fn elevation_angle(
    site_coord: &GeodeticCoord,
    site_ecef: &Vector3<f64>,
    target: &Vector3<f64>,
) -> f64 {
    let (sin_lat, cos_lat) = site_coord.latitude.sin_cos();
    let (sin_lon, cos_lon) = site_coord.longitude.sin_cos();
    // Geodetic "up" direction (ellipsoid normal).
    let up = Vector3::new(cos_lat * cos_lon, cos_lat * sin_lon, sin_lat);
    let line_of_sight = (target - site_ecef).normalize();
    line_of_sight.dot(&up).clamp(-1.0, 1.0).asin()
}
