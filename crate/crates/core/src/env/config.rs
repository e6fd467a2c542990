use serde::{Deserialize, Serialize};

use super::{EVAgentSpec, PriceModel};
use crate::{Error, Result};

/// Distributions for the per-episode arrival/departure windows and initial charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Inclusive range of arrival step indices.
    pub arrival_steps: [usize; 2],
    /// Inclusive range of departure step indices; defaults to the last six steps.
    pub departure_steps: Option<[usize; 2]>,
    /// Inclusive range of the initial charge as a fraction of capacity.
    pub initial_soc_fraction: [f64; 2],
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            arrival_steps: [0, 5],
            departure_steps: None,
            initial_soc_fraction: [0.2, 0.5],
        }
    }
}

impl SamplingConfig {
    pub fn departure_range(&self, horizon: usize) -> [usize; 2] {
        self.departure_steps
            .unwrap_or([horizon.saturating_sub(5).max(1), horizon])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_agents: usize,
    /// Steps per charging cycle `H`.
    pub horizon: usize,
    /// Step duration in hours.
    pub step_hours: f64,
    /// Exogenous load per step (kW); empty means zero.
    pub baseline_load: Vec<f64>,
    pub price: PriceModel,
    /// Template applied to every agent unless `ev_overrides` is given.
    pub ev: EVAgentSpec,
    /// Optional explicit per-agent parameters (length `n_agents`).
    pub ev_overrides: Vec<EVAgentSpec>,
    pub sampling: SamplingConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_agents: 10,
            horizon: 34,
            step_hours: 0.5,
            baseline_load: Vec::new(),
            price: PriceModel::default(),
            ev: EVAgentSpec::default(),
            ev_overrides: Vec::new(),
            sampling: SamplingConfig::default(),
        }
    }
}

impl GridConfig {
    pub fn with_agents(n_agents: usize) -> Self {
        Self {
            n_agents,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 || self.horizon == 0 {
            return Err(Error::Config("need at least one agent and one step".into()));
        }
        if !(self.step_hours > 0.0 && self.step_hours.is_finite()) {
            return Err(Error::Config("step duration must be positive".into()));
        }
        if !self.baseline_load.is_empty() && self.baseline_load.len() != self.horizon {
            return Err(Error::Config(format!(
                "baseline_load has {} entries for a {}-step horizon",
                self.baseline_load.len(),
                self.horizon
            )));
        }
        if self.baseline_load.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::Config("baseline load must be finite and nonnegative".into()));
        }
        self.price.validate()?;
        if !self.ev_overrides.is_empty() && self.ev_overrides.len() != self.n_agents {
            return Err(Error::Config(format!(
                "ev_overrides lists {} agents but n_agents = {}",
                self.ev_overrides.len(),
                self.n_agents
            )));
        }
        for spec in self.agent_specs() {
            spec.validate()?;
        }
        let [a_lo, a_hi] = self.sampling.arrival_steps;
        let [d_lo, d_hi] = self.sampling.departure_range(self.horizon);
        if a_lo > a_hi || d_lo > d_hi || d_hi > self.horizon || a_hi >= d_lo {
            return Err(Error::Config(format!(
                "sampling windows must satisfy arrival ≤ {a_hi} < departure ≥ {d_lo}, departure ≤ H = {} \
                 (arrival {:?}, departure {:?})",
                self.horizon,
                [a_lo, a_hi],
                [d_lo, d_hi]
            )));
        }
        let [f_lo, f_hi] = self.sampling.initial_soc_fraction;
        if !(0.0 <= f_lo && f_lo <= f_hi && f_hi <= 1.0) {
            return Err(Error::Config("initial_soc_fraction must satisfy 0 ≤ lo ≤ hi ≤ 1".into()));
        }
        Ok(())
    }

    pub fn agent_specs(&self) -> Vec<EVAgentSpec> {
        if self.ev_overrides.is_empty() {
            vec![self.ev; self.n_agents]
        } else {
            self.ev_overrides.clone()
        }
    }

    pub fn baseline_at(&self, step: usize) -> f64 {
        self.baseline_load.get(step).copied().unwrap_or(0.0)
    }

    pub fn max_baseline(&self) -> f64 {
        self.baseline_load.iter().copied().fold(0.0, f64::max)
    }

    /// Largest total demand the network can see.
    pub fn max_total_load(&self) -> f64 {
        self.agent_specs().iter().map(|s| s.max_power_kw).sum::<f64>() + self.max_baseline()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = GridConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.horizon, 34);
        assert_eq!(cfg.sampling.departure_range(34), [29, 34]);
        assert!(cfg.agent_specs().iter().all(|s| s.battery_kwh == 60.0));
    }

    #[test]
    fn rejects_overlapping_windows_and_bad_shapes() {
        let mut cfg = GridConfig::with_agents(2);
        cfg.sampling.arrival_steps = [0, 30];
        assert!(cfg.validate().is_err());
        let mut cfg = GridConfig::with_agents(2);
        cfg.baseline_load = vec![1.0; 3];
        assert!(cfg.validate().is_err());
        let mut cfg = GridConfig::with_agents(2);
        cfg.ev_overrides = vec![EVAgentSpec::default()];
        assert!(cfg.validate().is_err());
        assert!(GridConfig::with_agents(0).validate().is_err());
    }
}
