use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::law::DisorderLaw;

/// Random Curie-Weiss model: inverse temperature, field law, system size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwParams {
    pub beta: f64,
    pub law: DisorderLaw,
    pub n_particles: usize,
}

impl CwParams {
    pub fn new(beta: f64, law: DisorderLaw, n_particles: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return config(format!("beta must be positive and finite, got {beta}"));
        }
        if n_particles == 0 {
            return config("n_particles must be at least 1");
        }
        Ok(Self {
            beta,
            law,
            n_particles,
        })
    }

    /// Same model with a different system size.
    pub fn with_n(&self, n_particles: usize) -> Result<Self> {
        Self::new(self.beta, self.law.clone(), n_particles)
    }
}

/// Random Kuramoto model: coupling, frequency scale, frequency law, size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuramotoParams {
    pub theta: f64,
    pub omega: f64,
    pub law: DisorderLaw,
    pub n_particles: usize,
}

impl KuramotoParams {
    pub fn new(theta: f64, omega: f64, law: DisorderLaw, n_particles: usize) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return config(format!("theta must be positive and finite, got {theta}"));
        }
        if !(omega >= 0.0 && omega.is_finite()) {
            return config(format!("omega must be non-negative and finite, got {omega}"));
        }
        Ok(Self {
            theta,
            omega,
            law,
            n_particles,
        })
    }

    pub fn with_n(&self, n_particles: usize) -> Result<Self> {
        Self::new(self.theta, self.omega, self.law.clone(), n_particles)
    }

    /// Frequencies `±1` with equal weight.
    pub fn require_unit_pair(&self) -> Result<()> {
        if !self.law.is_unit_pair() {
            return config("frequency law must be ½(δ₁+δ₋₁) for this operation");
        }
        Ok(())
    }

    /// Unit-pair frequencies and `omega < 1/2`, the setting of the critical theory.
    pub fn require_critical_setting(&self) -> Result<()> {
        self.require_unit_pair()?;
        if self.omega >= 0.5 {
            return config(format!("critical analysis needs omega < 1/2, got {}", self.omega));
        }
        Ok(())
    }
}
