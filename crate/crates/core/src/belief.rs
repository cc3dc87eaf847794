//! Conjugate Gaussian estimation of the friction coefficient.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("variance must be positive and finite, got {0}")]
    Variance(f64),
    #[error("mean must be finite, got {0}")]
    Mean(f64),
    #[error("clamp range [{lo}, {hi}] is empty")]
    ClampRange { lo: f64, hi: f64 },
}

/// Gaussian belief over the unknown parameter. The mean doubles as the
/// point estimate handed to controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: f64,
    pub variance: f64,
    pub update_count: u32,
}

impl GaussianBelief {
    pub fn new(mean: f64, variance: f64) -> Result<Self, BeliefError> {
        if !mean.is_finite() {
            return Err(BeliefError::Mean(mean));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(BeliefError::Variance(variance));
        }
        Ok(Self { mean, variance, update_count: 0 })
    }

    /// Belief from a mean and a standard deviation.
    pub fn from_std(mean: f64, std: f64) -> Result<Self, BeliefError> {
        Self::new(mean, std * std)
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }

    /// One unclamped draw from the belief.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.std() * z
    }

    /// Conjugate update with one measurement.
    pub fn update(&self, measurement: f64, model: &MeasurementModel) -> GaussianBelief {
        let (v, nv) = (self.variance, model.noise_variance);
        GaussianBelief {
            mean: (nv * self.mean + v * measurement) / (nv + v),
            variance: nv * v / (nv + v),
            update_count: self.update_count + 1,
        }
    }

    /// Left fold of [`update`](Self::update) over `measurements`.
    pub fn posterior_after_n<I>(&self, measurements: I, model: &MeasurementModel) -> GaussianBelief
    where
        I: IntoIterator<Item = f64>,
    {
        measurements.into_iter().fold(*self, |b, m| b.update(m, model))
    }
}

/// Sensor model for friction measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementModel {
    /// Measurement noise variance σ̄².
    pub noise_variance: f64,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
}

impl Default for MeasurementModel {
    fn default() -> Self {
        Self { noise_variance: 0.1, clamp_lo: 0.05, clamp_hi: 1.2 }
    }
}

impl MeasurementModel {
    pub fn from_std(std: f64) -> Self {
        Self { noise_variance: std * std, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), BeliefError> {
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return Err(BeliefError::Variance(self.noise_variance));
        }
        if !(self.clamp_lo < self.clamp_hi) {
            return Err(BeliefError::ClampRange { lo: self.clamp_lo, hi: self.clamp_hi });
        }
        Ok(())
    }

    pub fn clamp(&self, mu: f64) -> f64 {
        mu.clamp(self.clamp_lo, self.clamp_hi)
    }

    /// `true_mu` plus Gaussian noise of variance σ̄², clamped to the range.
    /// Always consumes exactly one normal draw.
    pub fn sample<R: Rng + ?Sized>(&self, true_mu: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.clamp(true_mu + self.noise_variance.sqrt() * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{family, stream_rng};

    #[test]
    fn equal_variances_meet_halfway() {
        let m = MeasurementModel { noise_variance: 0.04, ..Default::default() };
        let b = GaussianBelief::new(0.5, 0.04).unwrap().update(0.7, &m);
        assert!((b.mean - 0.6).abs() < 1e-15);
        assert!((b.variance - 0.02).abs() < 1e-15);
        assert_eq!(b.update_count, 1);
    }

    #[test]
    fn reference_prior_single_update() {
        let m = MeasurementModel::default();
        let b = GaussianBelief::new(0.3, 0.01).unwrap().update(0.7, &m);
        assert!((b.mean - 0.037 / 0.11).abs() < 1e-15);
        assert!((b.variance - 0.001 / 0.11).abs() < 1e-15);
    }

    #[test]
    fn huge_noise_ignores_measurement() {
        let m = MeasurementModel { noise_variance: 1e300, ..Default::default() };
        let b = GaussianBelief::new(0.3, 0.01).unwrap().update(0.9, &m);
        assert!((b.mean - 0.3).abs() < 1e-15);
    }

    #[test]
    fn empty_fold_is_identity() {
        let prior = GaussianBelief::new(0.3, 0.01).unwrap();
        assert_eq!(prior.posterior_after_n(std::iter::empty(), &MeasurementModel::default()), prior);
    }

    #[test]
    fn zero_noise_measurement_is_exact() {
        let m = MeasurementModel { noise_variance: 0.0, ..Default::default() };
        let mut rng = stream_rng(0, family::MEASUREMENT, 0);
        assert_eq!(m.sample(0.42, &mut rng), 0.42);
    }

    #[test]
    fn measurements_respect_clamp() {
        let m = MeasurementModel { noise_variance: 25.0, ..Default::default() };
        let mut rng = stream_rng(0, family::MEASUREMENT, 0);
        for _ in 0..10_000 {
            let x = m.sample(0.95, &mut rng);
            assert!((m.clamp_lo..=m.clamp_hi).contains(&x));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(GaussianBelief::new(0.3, 0.0).is_err());
        assert!(GaussianBelief::new(f64::NAN, 0.1).is_err());
        assert!(MeasurementModel { clamp_lo: 1.0, clamp_hi: 1.0, ..Default::default() }.validate().is_err());
    }
}
