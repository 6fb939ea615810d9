use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::NoiseParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateFlags {
    pub alpha: bool,
    pub noise: bool,
    pub missing: bool,
}

impl Default for UpdateFlags {
    fn default() -> Self {
        Self {
            alpha: true,
            noise: true,
            missing: true,
        }
    }
}

/// How the ownership Metropolis step groups customers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OwnershipScan {
    /// One proposal redraws every customer's dish count.
    #[default]
    Joint,
    /// One proposal per customer, in customer order.
    PerCustomer,
}

/// Gamma prior on `alpha` with shape and inverse scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        Self {
            shape: 1.0,
            rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub alpha_prior: GammaPrior,
    /// Standard deviation of the log-space random walk on each noise scale.
    pub noise_proposal_scale: f64,
    pub seed: u64,
    pub update: UpdateFlags,
    #[serde(default)]
    pub ownership: OwnershipScan,
    /// Starting value of `alpha`; drawn from its prior when `None`.
    pub initial_alpha: Option<f64>,
    pub initial_noise: NoiseParams,
    /// Store the full feature matrix in every sample record.
    pub record_features: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            burn_in: 0,
            alpha_prior: GammaPrior::default(),
            noise_proposal_scale: 0.1,
            seed: 0,
            update: UpdateFlags::default(),
            ownership: OwnershipScan::Joint,
            initial_alpha: None,
            initial_noise: NoiseParams::default(),
            record_features: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Error::Config {
            key: key.into(),
            reason: reason.into(),
        };
        if self.iterations > 0 && self.burn_in >= self.iterations {
            return Err(bad("burn_in", "must be smaller than iterations"));
        }
        if !(self.alpha_prior.shape > 0.0 && self.alpha_prior.rate > 0.0) {
            return Err(bad("alpha_prior", "shape and rate must be positive"));
        }
        if !(self.noise_proposal_scale >= 0.0 && self.noise_proposal_scale.is_finite()) {
            return Err(bad("noise_proposal_scale", "must be a finite nonnegative number"));
        }
        if let Some(a) = self.initial_alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(bad("initial_alpha", "must be positive"));
            }
        }
        self.initial_noise.validate()
    }
}
