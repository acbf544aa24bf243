//! Per-arm outcome distributions and streaming sample-mean accumulation.

use rand::Rng;
use thiserror::Error;

/// Invalid distribution parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("normal mean must be finite, got {0}")]
    NonFiniteMean(f64),
    #[error("normal sd must be finite and > 0, got {0}")]
    NonPositiveSd(f64),
    #[error("bernoulli success probability must lie in [0, 1], got {0}")]
    ProbabilityOutOfRange(f64),
}

/// Outcome distribution of a single treatment arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseModel {
    Normal { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
}

impl ResponseModel {
    /// Normal arm with the given mean and standard deviation (sd > 0).
    pub fn normal(mean: f64, sd: f64) -> Result<Self, ModelError> {
        let model = ResponseModel::Normal { mean, sd };
        model.validate()?;
        Ok(model)
    }

    /// Bernoulli arm with success probability `p` in [0, 1].
    pub fn bernoulli(p: f64) -> Result<Self, ModelError> {
        let model = ResponseModel::Bernoulli { p };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            ResponseModel::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return Err(ModelError::NonFiniteMean(mean));
                }
                if !(sd.is_finite() && sd > 0.0) {
                    return Err(ModelError::NonPositiveSd(sd));
                }
                Ok(())
            }
            ResponseModel::Bernoulli { p } => {
                if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                    return Err(ModelError::ProbabilityOutOfRange(p));
                }
                Ok(())
            }
        }
    }

    /// Expected response: the mean for a Normal arm, `p` for a Bernoulli arm.
    pub fn true_mean(&self) -> f64 {
        match *self {
            ResponseModel::Normal { mean, .. } => mean,
            ResponseModel::Bernoulli { p } => p,
        }
    }

    /// Draws one i.i.d. response.
    ///
    /// Stream usage is fixed per variant — exactly two uniforms for a Normal
    /// draw (one Box-Muller deviate, the sine branch is discarded) and one
    /// uniform for a Bernoulli draw — so a seeded stream replays the same
    /// trajectory draw for draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ResponseModel::Normal { mean, sd } => {
                // 1 - u maps [0,1) onto (0,1]; ln stays finite.
                let u1 = 1.0 - rng.random::<f64>();
                let u2 = rng.random::<f64>();
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                mean + sd * z
            }
            ResponseModel::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Running allocation count and sample mean for one arm.
///
/// The sum is kept alongside the mean and the mean is recomputed as
/// `sum / count` on every update, so two arms fed identical observations
/// carry bitwise-equal means — the tie rule tests exact equality.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmState {
    count: u64,
    sum: f64,
    mean: f64,
}

impl ArmState {
    pub fn new() -> Self {
        ArmState::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    /// Running mean, or `None` before the first observation.
    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    /// Folds one observation into the running statistics.
    pub fn update(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.mean = self.sum / self.count as f64;
    }
}
