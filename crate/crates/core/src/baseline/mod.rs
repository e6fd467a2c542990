//! Full-information centralized scheduling baseline.
//!
//! Minimizes `Σ_h C(Σ_i l_i^h + base_h)` over per-agent charging windows
//! subject to power caps and each agent reaching `B_exp − σ`. The projected
//! gradient solver is checked against an exact grid search on small instances.

mod brute;
mod pgd;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::env::{EVAgentSpec, EvChargingEnv, GridConfig, PriceModel};
use crate::{Error, Result};

pub use brute::{brute_force_dp, brute_force_oracle, EXHAUSTIVE_LIMIT};
pub use pgd::{solve_centralized, PgdOptions};

/// A charging instance: windows `[arrival, departure)` and initial levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub windows: Vec<(usize, usize)>,
    pub initial_kwh: Vec<f64>,
}

impl Instance {
    /// The scenario the environment would draw for `seed`.
    pub fn sample(grid: &GridConfig, seed: u64) -> Result<Self> {
        let mut env = EvChargingEnv::new(grid.clone())?;
        env.reset(seed);
        Ok(Self {
            windows: env.states().iter().map(|s| (s.arrival, s.departure)).collect(),
            initial_kwh: env.states().iter().map(|s| s.initial_kwh).collect(),
        })
    }
}

/// `N × H` charging powers in kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleMatrix {
    pub powers: Vec<Vec<f64>>,
}

impl ScheduleMatrix {
    pub fn zeros(n: usize, h: usize) -> Self {
        Self {
            powers: vec![vec![0.0; h]; n],
        }
    }

    pub fn n_agents(&self) -> usize {
        self.powers.len()
    }

    pub fn horizon(&self) -> usize {
        self.powers.first().map_or(0, Vec::len)
    }

    pub fn load_at(&self, h: usize) -> f64 {
        self.powers.iter().map(|row| row[h]).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent,step,power_kW\n");
        for (i, row) in self.powers.iter().enumerate() {
            for (h, p) in row.iter().enumerate() {
                let _ = writeln!(out, "{i},{h},{p}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSolution {
    pub schedule: ScheduleMatrix,
    pub objective: f64,
    pub iterations: usize,
    /// Final objective of every restart, in restart order.
    pub restart_objectives: Vec<f64>,
    pub converged: bool,
}

impl BaselineSolution {
    pub fn restart_spread(&self) -> f64 {
        let max = self.restart_objectives.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.restart_objectives.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Per-agent data the solvers work with.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub horizon: usize,
    pub price: PriceModel,
    pub baseline: Vec<f64>,
    pub specs: Vec<EVAgentSpec>,
    pub windows: Vec<(usize, usize)>,
    /// Required `Σ_h l_i^h` (kW·steps).
    pub need: Vec<f64>,
}

impl Prepared {
    pub fn new(grid: &GridConfig, inst: &Instance) -> Result<Self> {
        grid.price.validate()?;
        let n = grid.n_agents;
        if inst.windows.len() != n || inst.initial_kwh.len() != n {
            return Err(Error::Config(format!(
                "instance describes {} windows and {} levels for {n} agents",
                inst.windows.len(),
                inst.initial_kwh.len()
            )));
        }
        if !(grid.step_hours > 0.0) || grid.horizon == 0 {
            return Err(Error::Config("horizon and step length must be positive".into()));
        }
        if !grid.baseline_load.is_empty() && grid.baseline_load.len() != grid.horizon {
            return Err(Error::Config("baseline_load must have one entry per step".into()));
        }
        let specs = grid.agent_specs();
        let mut need = Vec::with_capacity(n);
        for (i, spec) in specs.iter().enumerate() {
            spec.validate()?;
            let (arr, dep) = inst.windows[i];
            if arr > dep || dep > grid.horizon {
                return Err(Error::Config(format!("agent {i} window [{arr}, {dep}) outside horizon")));
            }
            let b0 = inst.initial_kwh[i];
            if !(0.0..=spec.battery_kwh).contains(&b0) {
                return Err(Error::Config(format!("agent {i} initial level {b0} outside [0, B_max]")));
            }
            let energy = (spec.target() - spec.tolerance_kwh - b0).max(0.0);
            need.push(energy / (spec.efficiency * grid.step_hours));
        }
        Ok(Self {
            horizon: grid.horizon,
            price: grid.price,
            baseline: (0..grid.horizon).map(|h| grid.baseline_at(h)).collect(),
            specs,
            windows: inst.windows.clone(),
            need,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.specs.len()
    }

    /// Lists every agent whose window cannot deliver its requirement.
    pub fn check_feasible(&self) -> Result<()> {
        let mut report = String::new();
        for i in 0..self.n_agents() {
            let (arr, dep) = self.windows[i];
            let cap = (dep - arr) as f64 * self.specs[i].max_power_kw;
            if self.need[i] > cap * (1.0 + 1e-12) {
                let _ = write!(
                    report,
                    "agent {i}: needs {:.6} kW·steps but window [{arr}, {dep}) allows at most {cap:.6}; ",
                    self.need[i]
                );
            }
        }
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::Infeasible(report.trim_end_matches("; ").to_string()))
        }
    }

    pub fn objective(&self, s: &ScheduleMatrix) -> f64 {
        (0..self.horizon)
            .map(|h| self.price.network_cost(s.load_at(h) + self.baseline[h]).unwrap_or(f64::INFINITY))
            .sum()
    }
}

/// `Σ_h C(Σ_i l_i^h + base_h)`.
pub fn objective(grid: &GridConfig, schedule: &ScheduleMatrix) -> Result<f64> {
    if schedule.n_agents() != grid.n_agents || schedule.horizon() != grid.horizon {
        return Err(Error::Contract("schedule shape does not match the grid".into()));
    }
    (0..grid.horizon)
        .map(|h| grid.price.network_cost(schedule.load_at(h) + grid.baseline_at(h)))
        .sum()
}

/// Box, window and energy constraints, with absolute slack `tol` on energy (kWh).
pub fn check_schedule(grid: &GridConfig, inst: &Instance, schedule: &ScheduleMatrix, tol: f64) -> Result<()> {
    let p = Prepared::new(grid, inst)?;
    if schedule.n_agents() != p.n_agents() || schedule.horizon() != p.horizon {
        return Err(Error::Contract("schedule shape does not match the grid".into()));
    }
    for (i, row) in schedule.powers.iter().enumerate() {
        let (arr, dep) = p.windows[i];
        let spec = &p.specs[i];
        for (h, &v) in row.iter().enumerate() {
            let inside = (arr..dep).contains(&h);
            if !v.is_finite() || v < -tol || v > spec.max_power_kw + tol || (!inside && v != 0.0) {
                return Err(Error::Contract(format!("agent {i} step {h}: power {v} violates box or window")));
            }
        }
        let delivered: f64 = row.iter().sum::<f64>() * spec.efficiency * grid.step_hours;
        let required = p.need[i] * spec.efficiency * grid.step_hours;
        if delivered + tol < required {
            return Err(Error::Contract(format!(
                "agent {i} receives {delivered} kWh but needs {required}"
            )));
        }
    }
    Ok(())
}

/// Full power from arrival until the requirement is met.
pub fn naive_schedule(grid: &GridConfig, inst: &Instance) -> Result<ScheduleMatrix> {
    let p = Prepared::new(grid, inst)?;
    p.check_feasible()?;
    let mut s = ScheduleMatrix::zeros(p.n_agents(), p.horizon);
    for i in 0..p.n_agents() {
        let mut left = p.need[i];
        for h in p.windows[i].0..p.windows[i].1 {
            let v = left.min(p.specs[i].max_power_kw);
            s.powers[i][h] = v;
            left -= v;
            if left <= 0.0 {
                break;
            }
        }
    }
    Ok(s)
}
