use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub temperature: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self { temperature: 100.0 }
    }
}

impl EnergyConfig {
    pub fn new(temperature: f64) -> Result<Self> {
        if temperature <= 0.0 || !temperature.is_finite() {
            return Err(Error::config(format!(
                "temperature must be > 0, got {temperature}"
            )));
        }
        Ok(Self { temperature })
    }
}

/// `−T log Σ_i exp(σ_i / T)`, with the maximum factored out of the sum.
pub fn energy_score(inputs: &[f64], cfg: &EnergyConfig) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::config("energy score of an empty vector"));
    }
    let t = EnergyConfig::new(cfg.temperature)?.temperature;
    let max = inputs
        .iter()
        .map(|s| s / t)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = inputs.iter().map(|s| (s / t - max).exp()).sum();
    Ok(-t * (max + sum.ln()))
}
