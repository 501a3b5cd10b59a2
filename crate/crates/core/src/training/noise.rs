use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
    /// Zero-mean uniform on `[-σ√3, σ√3]`, which has standard deviation σ.
    Uniform,
}

impl std::str::FromStr for NoiseDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::invalid(format!(
                "unknown noise distribution `{other}` (expected gaussian or uniform)"
            ))),
        }
    }
}

impl NoiseDistribution {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Uniform => "uniform",
        }
    }
}

/// Noise family and the range of standard deviations (on the `[0,255]`
/// scale) seen during training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub distribution: NoiseDistribution,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            distribution: NoiseDistribution::Gaussian,
            sigma_min: 0.0,
            sigma_max: 55.0,
        }
    }
}

impl NoiseSpec {
    pub fn gaussian(sigma_min: f64, sigma_max: f64) -> Self {
        Self {
            distribution: NoiseDistribution::Gaussian,
            sigma_min,
            sigma_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min >= 0.0 && self.sigma_min <= self.sigma_max && self.sigma_max.is_finite()) {
            return Err(Error::config(format!(
                "noise range must satisfy 0 <= sigma_min <= sigma_max, got [{}, {}]",
                self.sigma_min, self.sigma_max
            )));
        }
        Ok(())
    }

    /// Uniform draw of a noise level from the training range.
    pub fn draw_sigma(&self, rng: &mut Rng) -> f64 {
        rng.uniform(self.sigma_min, self.sigma_max)
    }

    pub fn contains(&self, sigma: f64) -> bool {
        sigma >= self.sigma_min && sigma <= self.sigma_max
    }

    /// Noise at a level inside the training range.
    pub fn sample<T: Real>(&self, shape: &[usize], sigma: f64, rng: &mut Rng) -> Result<Tensor<T>> {
        if !self.contains(sigma) {
            return Err(Error::invalid(format!(
                "sigma {sigma} lies outside the training range [{}, {}]; use sample_noise to evaluate elsewhere",
                self.sigma_min, self.sigma_max
            )));
        }
        sample_noise(shape, sigma, self.distribution, rng)
    }
}

/// Zero-mean i.i.d. noise with standard deviation `sigma`.
pub fn sample_noise<T: Real>(
    shape: &[usize],
    sigma: f64,
    distribution: NoiseDistribution,
    rng: &mut Rng,
) -> Result<Tensor<T>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "noise level must be a finite non-negative number, got {sigma}"
        )));
    }
    let n: usize = shape.iter().product();
    if sigma == 0.0 {
        return Ok(Tensor::zeros(shape.to_vec()));
    }
    let data = match distribution {
        NoiseDistribution::Gaussian => (0..n)
            .map(|_| T::from_f64_lossy(sigma * rng.normal()))
            .collect(),
        NoiseDistribution::Uniform => {
            let half = sigma * 3f64.sqrt();
            (0..n)
                .map(|_| T::from_f64_lossy(rng.uniform(-half, half)))
                .collect()
        }
    };
    Tensor::new(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_silent() {
        let n = sample_noise::<f32>(&[1, 4, 4], 0.0, NoiseDistribution::Gaussian, &mut Rng::new(0)).unwrap();
        assert!(n.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_sigma_is_rejected() {
        assert!(sample_noise::<f32>(&[4], -1.0, NoiseDistribution::Gaussian, &mut Rng::new(0)).is_err());
        assert!(NoiseSpec::gaussian(0.0, 10.0)
            .sample::<f32>(&[4], 20.0, &mut Rng::new(0))
            .is_err());
    }

    #[test]
    fn gaussian_moments() {
        let n = sample_noise::<f64>(&[1_000_000], 25.0, NoiseDistribution::Gaussian, &mut Rng::new(1)).unwrap();
        let mean = n.sum() / 1e6;
        let std = (n.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1e6).sqrt();
        assert!((24.9..=25.1).contains(&std), "std {std}");
        assert!((-0.1..=0.1).contains(&mean), "mean {mean}");
    }

    #[test]
    fn uniform_support_and_std() {
        let n = sample_noise::<f64>(&[200_000], 30.0, NoiseDistribution::Uniform, &mut Rng::new(2)).unwrap();
        let bound = 30.0 * 3f64.sqrt();
        assert!(n.data().iter().all(|v| v.abs() <= bound));
        let std = (n.data().iter().map(|v| v * v).sum::<f64>() / 2e5).sqrt();
        assert!((std - 30.0).abs() < 0.2, "std {std}");
    }
}
