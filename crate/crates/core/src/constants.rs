//! Physical and geodetic constants shared across the crate.

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Earth gravitational parameter μ = GM (m³/s²), WGS-84 value.
pub const EARTH_MU: f64 = 3.986004418e14;

/// WGS-84 ellipsoid semi-major (equatorial) axis (m).
pub const WGS84_A: f64 = 6_378_137.0;

/// WGS-84 ellipsoid flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;

/// WGS-84 ellipsoid semi-minor (polar) axis b = a(1 − f) (m).
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);

/// WGS-84 first eccentricity squared, e² = f(2 − f).
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);
