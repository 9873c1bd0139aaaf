//! Forward measurement model and noise synthesis.
//!
//! Each monostatic radar at `t_i` observes the object at state `(x, v)` as a
//! triple
//!
//! ```text
//! d_i = ‖x − t_i‖                 range (m)
//! u_i = (x − t_i) / ‖x − t_i‖     unit line-of-sight direction
//! f_i = (2 f_c,i / c) u_iᵀ v      two-way Doppler shift (Hz)
//! ```
//!
//! Range and Doppler noise is additive (Gaussian, Laplace or Cauchy with a
//! common nominal scale σ); directional noise replaces `u_i` by a von
//! Mises-Fisher draw concentrated on it with parameter κ, which keeps noisy
//! directions on the unit sphere.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::SPEED_OF_LIGHT;
use crate::frames::StateVector;

#[derive(Debug, Error)]
pub enum MeasError {
    #[error("degenerate geometry: object coincides with radar site {site_index}")]
    DegenerateGeometry { site_index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A monostatic radar: Cartesian position, carrier frequency and the noise
/// scales of its three measurement channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSite {
    /// Site position t_i (m).
    pub position: Vector3<f64>,
    /// Carrier frequency f_c,i (Hz).
    pub carrier_frequency: f64,
    /// Range noise standard deviation σ_d (m).
    pub sigma_range: f64,
    /// Doppler noise standard deviation σ_f (Hz).
    pub sigma_doppler: f64,
    /// Directional concentration parameter κ.
    pub kappa: f64,
}

impl RadarSite {
    pub fn validate(&self) -> Result<(), MeasError> {
        for (name, value) in [
            ("carrier_frequency", self.carrier_frequency),
            ("sigma_range", self.sigma_range),
            ("sigma_doppler", self.sigma_doppler),
            ("kappa", self.kappa),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(MeasError::InvalidParameter(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Distribution family applied to the range and Doppler channels. Angle
/// noise is always von Mises-Fisher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Gaussian,
    Laplace,
    Cauchy,
    /// No perturbation at all; the measurement set is returned unchanged.
    None,
}

impl NoiseFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Laplace => "laplace",
            NoiseFamily::Cauchy => "cauchy",
            NoiseFamily::None => "none",
        }
    }
}

impl std::fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One batch of simultaneous measurements. Entry `j` of each list belongs to
/// the site `sites[site_index[j]]` of the site list the set was built from;
/// a site replicated k times contributes k consecutive entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub ranges: Vec<f64>,
    pub directions: Vec<Vector3<f64>>,
    pub dopplers: Vec<f64>,
    pub site_index: Vec<usize>,
}

impl MeasurementSet {
    /// Number of measurement triples.
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Repeat every triple `count` times (keeping replicas of one site
    /// adjacent), modelling a site that acquires several independent
    /// measurements of each type. Noise must be applied afterwards so the
    /// replicas receive independent draws.
    pub fn replicate(&self, count: usize) -> MeasurementSet {
        let mut out = MeasurementSet {
            ranges: Vec::with_capacity(self.len() * count),
            directions: Vec::with_capacity(self.len() * count),
            dopplers: Vec::with_capacity(self.len() * count),
            site_index: Vec::with_capacity(self.len() * count),
        };
        for j in 0..self.len() {
            for _ in 0..count {
                out.ranges.push(self.ranges[j]);
                out.directions.push(self.directions[j]);
                out.dopplers.push(self.dopplers[j]);
                out.site_index.push(self.site_index[j]);
            }
        }
        out
    }
}

/// Evaluate the noise-free forward model for every site.
pub fn ideal_measurements(
    state: &StateVector,
    sites: &[RadarSite],
) -> Result<MeasurementSet, MeasError> {
    let mut set = MeasurementSet {
        ranges: Vec::with_capacity(sites.len()),
        directions: Vec::with_capacity(sites.len()),
        dopplers: Vec::with_capacity(sites.len()),
        site_index: Vec::with_capacity(sites.len()),
    };
    for (i, site) in sites.iter().enumerate() {
        site.validate()?;
        let offset = state.position - site.position;
        let range = offset.norm();
        if range == 0.0 {
            return Err(MeasError::DegenerateGeometry { site_index: i });
        }
        let direction = offset / range;
        let doppler =
            2.0 * site.carrier_frequency / SPEED_OF_LIGHT * direction.dot(&state.velocity);
        set.ranges.push(range);
        set.directions.push(direction);
        set.dopplers.push(doppler);
        set.site_index.push(i);
    }
    Ok(set)
}

/// Draw one von Mises-Fisher sample on S² concentrated around
/// `mean_direction`.
///
/// Uses the closed-form inverse CDF of the cosine on S²,
/// `w = 1 + κ⁻¹·ln(ξ + (1 − ξ)e^(−2κ))`, a uniform azimuth, and a rotation
/// of the pole onto the mean direction. The `1 − w` term is carried
/// explicitly so concentrations up to κ ~ 1e12 keep full precision.
pub fn sample_vmf<R: Rng + ?Sized>(
    mean_direction: &Vector3<f64>,
    kappa: f64,
    rng: &mut R,
) -> Result<Vector3<f64>, MeasError> {
    if kappa <= 0.0 || kappa.is_nan() {
        return Err(MeasError::InvalidParameter(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    if (mean_direction.norm() - 1.0).abs() > 1e-9 {
        return Err(MeasError::InvalidParameter(format!(
            "mean direction must be unit length, got norm {}",
            mean_direction.norm()
        )));
    }

    // ξ ∈ (0, 1]: avoids ln(0) when e^(−2κ) underflows.
    let xi = 1.0 - rng.gen::<f64>();
    let one_minus_w = -(xi + (1.0 - xi) * (-2.0 * kappa).exp()).ln() / kappa;
    let w = 1.0 - one_minus_w;
    let sin_theta = (one_minus_w * (2.0 - one_minus_w)).max(0.0).sqrt();
    let phi = rng.gen::<f64>() * std::f64::consts::TAU;
    let local = Vector3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), w);

    Ok(rotate_pole_to(mean_direction, &local))
}

/// Rotate a vector expressed relative to the north pole so that the pole
/// maps onto `target` (Rodrigues form), renormalizing the result.
fn rotate_pole_to(target: &Vector3<f64>, local: &Vector3<f64>) -> Vector3<f64> {
    let cos_angle = target.z;
    if cos_angle > 1.0 - 1e-14 {
        return *local;
    }
    if cos_angle < -1.0 + 1e-14 {
        // Antipodal: rotate by π about the x axis.
        return Vector3::new(local.x, -local.y, -local.z);
    }
    let axis = Vector3::new(-target.y, target.x, 0.0); // e_z × target
    let cross = axis.cross(local);
    let rotated = local + cross + axis.cross(&cross) / (1.0 + cos_angle);
    rotated.normalize()
}

/// Sample one additive noise value with nominal scale `sigma`.
///
/// Gaussian uses standard deviation σ; Laplace uses scale b = σ/√2 so its
/// variance equals σ²; Cauchy (which has no variance) uses location 0 and
/// scale γ = σ.
fn sample_additive<R: Rng + ?Sized>(family: NoiseFamily, sigma: f64, rng: &mut R) -> f64 {
    match family {
        NoiseFamily::None => 0.0,
        NoiseFamily::Gaussian => Normal::new(0.0, sigma).expect("sigma > 0").sample(rng),
        NoiseFamily::Laplace => {
            // Inverse CDF: b·sgn(q)·ln(1 − 2|q|) with q uniform on (−½, ½).
            let scale = sigma / std::f64::consts::SQRT_2;
            let q: f64 = rng.gen::<f64>() - 0.5;
            -scale * q.signum() * (1.0 - 2.0 * q.abs()).ln()
        }
        NoiseFamily::Cauchy => Cauchy::new(0.0, sigma).expect("sigma > 0").sample(rng),
    }
}

/// Corrupt an ideal measurement set with the selected noise family.
///
/// Ranges and Dopplers are perturbed additively with the per-site scales;
/// directions are replaced by von Mises-Fisher draws around the ideal
/// direction. A noisy range may come out non-positive under heavy-tailed
/// noise; it is kept as measured and the estimators must tolerate it.
pub fn apply_noise<R: Rng + ?Sized>(
    ideal: &MeasurementSet,
    family: NoiseFamily,
    sites: &[RadarSite],
    rng: &mut R,
) -> Result<MeasurementSet, MeasError> {
    if family == NoiseFamily::None {
        return Ok(ideal.clone());
    }
    let mut noisy = ideal.clone();
    for j in 0..ideal.len() {
        let site = &sites[ideal.site_index[j]];
        site.validate()?;
        noisy.ranges[j] += sample_additive(family, site.sigma_range, rng);
        noisy.dopplers[j] += sample_additive(family, site.sigma_doppler, rng);
        noisy.directions[j] = sample_vmf(&ideal.directions[j], site.kappa, rng)?;
    }
    Ok(noisy)
}

/// Equivalent angular standard deviation (rad) of a von Mises-Fisher
/// concentration parameter:
/// `σ = √(−2·ln(1 − 1/(2κ) − 1/(8κ²) − 1/(8κ³)))`.
pub fn kappa_to_sigma(kappa: f64) -> Result<f64, MeasError> {
    if kappa <= 0.0 || kappa.is_nan() {
        return Err(MeasError::InvalidParameter(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    let deficit = 1.0 / (2.0 * kappa) + 1.0 / (8.0 * kappa * kappa)
        + 1.0 / (8.0 * kappa * kappa * kappa);
    if deficit >= 1.0 {
        return Err(MeasError::InvalidParameter(format!(
            "kappa = {kappa} too small: logarithm argument {} is not positive",
            1.0 - deficit
        )));
    }
    // ln_1p keeps precision when the deficit is ~1/(2κ) with large κ.
    Ok((-2.0 * (-deficit).ln_1p()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn site_at(position: Vector3<f64>, carrier: f64) -> RadarSite {
        RadarSite {
            position,
            carrier_frequency: carrier,
            sigma_range: 0.1,
            sigma_doppler: 10.0,
            kappa: 1e9,
        }
    }

    #[test]
    fn collinear_doppler() {
        let state = StateVector::new(Vector3::new(1000.0, 0.0, 0.0), Vector3::new(50.0, 0.0, 0.0));
        let sites = [site_at(Vector3::zeros(), 1.0e9)];
        let set = ideal_measurements(&state, &sites).unwrap();
        assert_relative_eq!(set.ranges[0], 1000.0);
        assert_relative_eq!(
            set.dopplers[0],
            2.0 * 1.0e9 * 50.0 / SPEED_OF_LIGHT,
            max_relative = 1e-15
        );
    }

    #[test]
    fn doppler_at_reference_carrier() {
        // 1215 MHz carrier, 7.5 km/s radial speed.
        let state = StateVector::new(
            Vector3::new(0.0, 0.0, 7.0e5),
            Vector3::new(0.0, 0.0, 7500.0),
        );
        let sites = [site_at(Vector3::zeros(), 1215.0e6)];
        let set = ideal_measurements(&state, &sites).unwrap();
        assert_relative_eq!(set.dopplers[0], 60792.05634986321, max_relative = 1e-12);
        // Receding target gives a positive shift under this sign convention.
        assert!(set.dopplers[0] > 0.0);
    }

    #[test]
    fn transverse_velocity_gives_zero_doppler() {
        let state = StateVector::new(
            Vector3::new(1000.0, 0.0, 0.0),
            Vector3::new(0.0, 340.0, 0.0),
        );
        let sites = [site_at(Vector3::zeros(), 1.0e9)];
        let set = ideal_measurements(&state, &sites).unwrap();
        assert!(set.dopplers[0].abs() < 1e-12);
    }

    #[test]
    fn coincident_site_is_degenerate() {
        let state = StateVector::new(Vector3::new(1.0, 2.0, 3.0), Vector3::zeros());
        let sites = [site_at(Vector3::new(1.0, 2.0, 3.0), 1.0e9)];
        assert!(matches!(
            ideal_measurements(&state, &sites),
            Err(MeasError::DegenerateGeometry { site_index: 0 })
        ));
    }

    #[test]
    fn ideal_directions_are_unit_and_ranges_positive() {
        let state = StateVector::new(Vector3::new(4.0e6, 3.0e6, 5.0e6), Vector3::zeros());
        let sites = [
            site_at(Vector3::new(1.0e6, 0.0, 0.0), 1.0e9),
            site_at(Vector3::new(0.0, 2.0e6, 1.0e6), 1.2e9),
        ];
        let set = ideal_measurements(&state, &sites).unwrap();
        for j in 0..set.len() {
            assert!(set.ranges[j] > 0.0);
            assert!((set.directions[j].norm() - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn vmf_concentration_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mean = Vector3::new(0.0, 1.0, 0.0);
        for _ in 0..100 {
            let sample = sample_vmf(&mean, 1e12, &mut rng).unwrap();
            assert!(sample.dot(&mean) >= 1.0 - 1e-10);
        }
    }

    #[test]
    fn vmf_samples_are_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mean = Vector3::new(1.0, 2.0, -0.5).normalize();
        for _ in 0..1000 {
            let sample = sample_vmf(&mean, 3.0, &mut rng).unwrap();
            assert!((sample.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn vmf_mean_resultant_length() {
        // Mean resultant length of vMF is coth(κ) − 1/κ ≈ 1 − 1/κ for large
        // κ. Accumulate deviations from the mean direction so the check is
        // not swamped by f64 rounding of sums of ~1 values.
        let kappa = 1e9;
        let n = 100_000;
        let mean = Vector3::new(0.3, -0.4, 0.8660254037844386).normalize();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut dev_sum = Vector3::zeros();
        for _ in 0..n {
            dev_sum += sample_vmf(&mean, kappa, &mut rng).unwrap() - mean;
        }
        let resultant = (mean + dev_sum / n as f64).norm();
        let expected = 1.0 - 1.0 / kappa; // coth(κ) indistinguishable from 1 here
        let standard_error = 1.0 / kappa / (n as f64).sqrt();
        assert!(
            (resultant - expected).abs() <= 3.0 * standard_error,
            "resultant {resultant} vs {expected} ± {standard_error}"
        );
    }

    #[test]
    fn vmf_rejects_bad_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mean = Vector3::new(1.0, 0.0, 0.0);
        assert!(sample_vmf(&mean, 0.0, &mut rng).is_err());
        assert!(sample_vmf(&Vector3::new(2.0, 0.0, 0.0), 1.0, &mut rng).is_err());
    }

    #[test]
    fn vmf_handles_poles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mean in [Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.0, 0.0, -1.0)] {
            for _ in 0..100 {
                let sample = sample_vmf(&mean, 1e6, &mut rng).unwrap();
                assert!((sample.norm() - 1.0).abs() <= 1e-12);
                assert!(sample.dot(&mean) > 0.99);
            }
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let state = StateVector::new(
            Vector3::new(4.0e6, 3.0e6, 5.0e6),
            Vector3::new(100.0, -200.0, 300.0),
        );
        let sites = [site_at(Vector3::new(1.0e6, 0.0, 0.0), 1.0e9)];
        let ideal = ideal_measurements(&state, &sites).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let noisy = apply_noise(&ideal, NoiseFamily::None, &sites, &mut rng).unwrap();
        assert_eq!(ideal, noisy);
    }

    #[test]
    fn gaussian_range_noise_variance() {
        let sigma: f64 = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let draw = sample_additive(NoiseFamily::Gaussian, sigma, &mut rng);
            sum_sq += draw * draw;
        }
        let variance = sum_sq / n as f64;
        assert!((variance - sigma * sigma).abs() <= 0.05 * sigma * sigma);
    }

    #[test]
    fn laplace_noise_variance_matches_sigma_squared() {
        let sigma: f64 = 2.5;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let draw = sample_additive(NoiseFamily::Laplace, sigma, &mut rng);
            sum_sq += draw * draw;
        }
        let variance = sum_sq / n as f64;
        assert!((variance - sigma * sigma).abs() <= 0.05 * sigma * sigma);
    }

    /// Two-sided Kolmogorov-Smirnov test at α = 0.01 against a nominal CDF.
    fn ks_passes(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> bool {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = samples.len() as f64;
        let mut d_stat: f64 = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let f = cdf(x);
            d_stat = d_stat
                .max((f - i as f64 / n).abs())
                .max(((i + 1) as f64 / n - f).abs());
        }
        // Asymptotic critical value at α = 0.01.
        d_stat <= 1.62762 / n.sqrt()
    }

    #[test]
    fn kolmogorov_smirnov_each_family() {
        let n = 10_000;
        let sigma: f64 = 1.7;
        let mut rng = ChaCha8Rng::seed_from_u64(9);

        let mut gaussian: Vec<f64> = (0..n)
            .map(|_| sample_additive(NoiseFamily::Gaussian, sigma, &mut rng))
            .collect();
        assert!(ks_passes(&mut gaussian, |x| {
            let normal = statrs::distribution::Normal::new(0.0, sigma).unwrap();
            statrs::distribution::ContinuousCDF::cdf(&normal, x)
        }));

        let mut laplace: Vec<f64> = (0..n)
            .map(|_| sample_additive(NoiseFamily::Laplace, sigma, &mut rng))
            .collect();
        let b = sigma / std::f64::consts::SQRT_2;
        assert!(ks_passes(&mut laplace, |x| {
            if x < 0.0 {
                0.5 * (x / b).exp()
            } else {
                1.0 - 0.5 * (-x / b).exp()
            }
        }));

        let mut cauchy: Vec<f64> = (0..n)
            .map(|_| sample_additive(NoiseFamily::Cauchy, sigma, &mut rng))
            .collect();
        assert!(ks_passes(&mut cauchy, |x| {
            0.5 + (x / sigma).atan() / std::f64::consts::PI
        }));
    }

    #[test]
    fn kappa_sigma_reference_value() {
        // κ = 1e9 corresponds to roughly 0.0018 degrees.
        let sigma = kappa_to_sigma(1e9).unwrap();
        assert_relative_eq!(sigma, 3.162277660958949e-5, max_relative = 1e-12);
        assert!((sigma.to_degrees() - 0.0018).abs() / 0.0018 < 0.05);
    }

    #[test]
    fn kappa_sigma_asymptotic() {
        let sigma = kappa_to_sigma(1e10).unwrap();
        assert_relative_eq!(sigma, 1e-5, max_relative = 1e-9);
    }

    #[test]
    fn kappa_sigma_monotone() {
        let mut previous = f64::INFINITY;
        for exp in 0..=12 {
            let sigma = kappa_to_sigma(10f64.powi(exp)).unwrap();
            assert!(sigma < previous);
            previous = sigma;
        }
    }

    #[test]
    fn kappa_sigma_rejects_small_kappa() {
        assert!(kappa_to_sigma(0.5).is_err());
        assert!(kappa_to_sigma(-1.0).is_err());
    }

    #[test]
    fn replication_repeats_triples() {
        let state = StateVector::new(Vector3::new(4.0e6, 3.0e6, 5.0e6), Vector3::zeros());
        let sites = [
            site_at(Vector3::new(1.0e6, 0.0, 0.0), 1.0e9),
            site_at(Vector3::new(0.0, 2.0e6, 1.0e6), 1.2e9),
        ];
        let set = ideal_measurements(&state, &sites).unwrap().replicate(3);
        assert_eq!(set.len(), 6);
        assert_eq!(set.site_index, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(set.ranges[0], set.ranges[2]);
    }
}
