//! One-shot initial orbit determination for low-Earth-orbit objects.
//!
//! A set of monostatic radars simultaneously measures range, line-of-sight
//! direction and two-way Doppler shift of one object. This crate estimates
//! the object's full state vector (position and velocity) from a single such
//! batch, with no dynamics model:
//!
//! * [`mle`] — an approximate maximum likelihood estimator. The nonconvex
//!   likelihood is relaxed by auxiliary per-radar variables and minimized by
//!   block coordinate descent, where each inner step is a structured
//!   trust-region subproblem ([`trs`]) and the outer step has a closed form.
//! * [`trilat`] — the classical baseline for exactly three radars: position
//!   from three-sphere intersection, velocity from Doppler-derived
//!   range-rates.
//! * [`bench`] — a reproducible Monte Carlo harness comparing the two over
//!   configurable noise families, noise levels and measurement counts.
//!
//! Scenario construction (orbital elements to Cartesian states, geodetic
//! radar coordinates to ECEF) lives in [`frames`]; the measurement model and
//! noise synthesis in [`measmodel`].

pub mod bench;
pub mod constants;
pub mod frames;
pub mod measmodel;
pub mod mle;
pub mod trilat;
pub mod trs;

pub use frames::{GeodeticCoord, KeplerianElements, StateVector};
pub use measmodel::{MeasurementSet, NoiseFamily, RadarSite};
