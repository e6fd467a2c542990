use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-vehicle battery, charger and reward parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EVAgentSpec {
    /// Battery capacity `B_max` (kWh).
    pub battery_kwh: f64,
    /// Charging efficiency `η` in (0, 1].
    pub efficiency: f64,
    /// Charger limit `a_max` (kW).
    pub max_power_kw: f64,
    /// Desired level at departure `B_exp` (kWh); defaults to capacity.
    pub target_kwh: Option<f64>,
    /// Allowed shortfall `σ` at departure (kWh).
    pub tolerance_kwh: f64,
    /// `α1`, weight on the price-times-power term.
    pub price_weight: f64,
    /// `α2`, weight on the squared charge gap.
    pub gap_weight: f64,
    /// Negative reward `𝓔` when the departure gap exceeds the tolerance.
    pub departure_penalty: f64,
}

impl Default for EVAgentSpec {
    fn default() -> Self {
        Self {
            battery_kwh: 60.0,
            efficiency: 0.9,
            max_power_kw: 6.6,
            target_kwh: None,
            tolerance_kwh: 2.0,
            price_weight: 0.1,
            gap_weight: 0.05,
            departure_penalty: -50.0,
        }
    }
}

impl EVAgentSpec {
    pub fn target(&self) -> f64 {
        self.target_kwh.unwrap_or(self.battery_kwh)
    }

    pub fn validate(&self) -> Result<()> {
        let target = self.target();
        let all_finite = [
            self.battery_kwh,
            self.efficiency,
            self.max_power_kw,
            target,
            self.tolerance_kwh,
            self.price_weight,
            self.gap_weight,
            self.departure_penalty,
        ]
        .iter()
        .all(|v| v.is_finite());
        let problems = [
            (!all_finite, "all EV parameters must be finite"),
            (self.battery_kwh <= 0.0, "battery capacity must be positive"),
            (!(self.efficiency > 0.0 && self.efficiency <= 1.0), "efficiency must lie in (0, 1]"),
            (self.max_power_kw <= 0.0, "max charging power must be positive"),
            (!(target > 0.0 && target <= self.battery_kwh), "target must lie in (0, capacity]"),
            (!(self.tolerance_kwh > 0.0 && self.tolerance_kwh < target), "tolerance must lie in (0, target)"),
            (self.price_weight < 0.0 || self.gap_weight < 0.0, "reward weights must be nonnegative"),
            (self.departure_penalty >= 0.0, "departure penalty must be negative"),
        ];
        match problems.iter().find(|(bad, _)| *bad) {
            Some((_, msg)) => Err(Error::Config(format!("{msg} ({self:?})"))),
            None => Ok(()),
        }
    }

    /// Energy added by one step at `power_kw` for `step_hours`.
    pub fn energy_per_step(&self, power_kw: f64, step_hours: f64) -> f64 {
        self.efficiency * power_kw * step_hours
    }
}

/// Live battery state of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EVState {
    pub soc_kwh: f64,
    pub arrival: usize,
    pub departure: usize,
    pub plugged: bool,
    pub initial_kwh: f64,
}

impl EVState {
    pub fn new(initial_kwh: f64, arrival: usize, departure: usize) -> Self {
        Self {
            soc_kwh: initial_kwh,
            arrival,
            departure,
            plugged: arrival == 0 && departure > 0,
            initial_kwh,
        }
    }

    pub fn plugged_at(&self, step: usize) -> bool {
        self.arrival <= step && step < self.departure
    }
}

/// Advances the battery by one step. Unplugged vehicles draw nothing and the
/// level saturates at capacity.
pub fn battery_step(spec: &EVAgentSpec, state: &EVState, power_kw: f64, step_hours: f64) -> Result<EVState> {
    if !(power_kw >= 0.0) {
        return Err(Error::Contract(format!("charging power must be nonnegative, got {power_kw}")));
    }
    if power_kw > spec.max_power_kw * (1.0 + 1e-12) {
        return Err(Error::Contract(format!(
            "charging power {power_kw} exceeds charger limit {}",
            spec.max_power_kw
        )));
    }
    let power = if state.plugged { power_kw } else { 0.0 };
    let soc = (state.soc_kwh + spec.energy_per_step(power, step_hours)).min(spec.battery_kwh);
    Ok(EVState { soc_kwh: soc, ..*state })
}

/// `−α1·F·a − α2·ΔB² (+ 𝓔 at departure when ΔB > σ)`.
pub fn reward(spec: &EVAgentSpec, price_now: f64, power_kw: f64, gap_kwh: f64, at_departure: bool) -> f64 {
    let mut r = -spec.price_weight * price_now * power_kw - spec.gap_weight * gap_kwh * gap_kwh;
    if at_departure && gap_kwh > spec.tolerance_kwh {
        r += spec.departure_penalty;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plugged(soc: f64) -> EVState {
        EVState::new(soc, 0, 10)
    }

    #[test]
    fn battery_step_examples() {
        let spec = EVAgentSpec::default();
        let s = battery_step(&spec, &plugged(10.0), 6.0, 0.5).unwrap();
        assert!((s.soc_kwh - 12.7).abs() < 1e-12);
        let s = battery_step(&spec, &plugged(10.0), 0.0, 0.5).unwrap();
        assert_eq!(s.soc_kwh, 10.0);
        let spec1 = EVAgentSpec { efficiency: 1.0, ..spec };
        let s = battery_step(&spec1, &plugged(59.9), 6.6, 0.5).unwrap();
        assert_eq!(s.soc_kwh, 60.0);
    }

    #[test]
    fn battery_step_errors_and_unplugged() {
        let spec = EVAgentSpec::default();
        assert!(matches!(battery_step(&spec, &plugged(1.0), -0.1, 0.5), Err(Error::Contract(_))));
        assert!(battery_step(&spec, &plugged(1.0), 7.0, 0.5).is_err());
        let away = EVState::new(5.0, 3, 10);
        assert!(!away.plugged);
        assert_eq!(battery_step(&spec, &away, 6.6, 0.5).unwrap().soc_kwh, 5.0);
    }

    #[test]
    fn reward_examples() {
        let spec = EVAgentSpec::default();
        assert_eq!(reward(&spec, 1.6, 0.0, 0.0, false), 0.0);
        assert!((reward(&spec, 1.6, 4.0, 10.0, false) - (-5.64)).abs() < 1e-12);
        let base = reward(&spec, 1.0, 2.0, 5.0, false);
        assert!((reward(&spec, 1.0, 2.0, 5.0, true) - (base - 50.0)).abs() < 1e-12);
        // within tolerance: no penalty
        assert_eq!(reward(&spec, 1.0, 2.0, 1.5, true), reward(&spec, 1.0, 2.0, 1.5, false));
    }

    #[test]
    fn spec_validation() {
        assert!(EVAgentSpec::default().validate().is_ok());
        assert!(EVAgentSpec { departure_penalty: 1.0, ..Default::default() }.validate().is_err());
        assert!(EVAgentSpec { tolerance_kwh: 70.0, ..Default::default() }.validate().is_err());
        assert!(EVAgentSpec { target_kwh: Some(61.0), ..Default::default() }.validate().is_err());
        assert!(EVAgentSpec { efficiency: 1.2, ..Default::default() }.validate().is_err());
    }
}
