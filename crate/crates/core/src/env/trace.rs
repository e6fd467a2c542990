use std::fmt::Write as _;

use super::StepOutcome;

pub const TRACE_HEADER: &str = "episode,step,agent,action,power_kW,battery_kWh,price,network_cost,bill,reward";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode: usize,
    pub step: usize,
    pub agent: usize,
    pub action: f64,
    pub power_kw: f64,
    pub battery_kwh: f64,
    pub price: f64,
    pub network_cost: f64,
    pub bill: f64,
    pub reward: f64,
}

/// Accumulates per-agent step rows as CSV text.
#[derive(Debug, Clone)]
pub struct TraceWriter {
    buf: String,
    rows: usize,
}

impl Default for TraceWriter {
    fn default() -> Self {
        Self::new()
    }
}

impl TraceWriter {
    pub fn new() -> Self {
        Self {
            buf: format!("{TRACE_HEADER}\n"),
            rows: 0,
        }
    }

    pub fn push(&mut self, row: &TraceRow) {
        writeln!(
            self.buf,
            "{},{},{},{},{},{},{},{},{},{}",
            row.episode,
            row.step,
            row.agent,
            row.action,
            row.power_kw,
            row.battery_kwh,
            row.price,
            row.network_cost,
            row.bill,
            row.reward
        )
        .expect("writing to a String cannot fail");
        self.rows += 1;
    }

    pub fn record(&mut self, episode: usize, outcome: &StepOutcome) {
        let info = &outcome.info;
        for agent in 0..info.powers.len() {
            self.push(&TraceRow {
                episode,
                step: info.step,
                agent,
                action: info.actions[agent],
                power_kw: info.powers[agent],
                battery_kwh: info.batteries[agent],
                price: info.price,
                network_cost: info.network_cost,
                bill: info.bills[agent],
                reward: outcome.rewards[agent],
            });
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EvChargingEnv, GridConfig};

    #[test]
    fn one_row_per_agent_step() {
        let mut env = EvChargingEnv::new(GridConfig::with_agents(3)).unwrap();
        env.reset(0);
        let mut w = TraceWriter::new();
        for _ in 0..4 {
            let out = env.step(&[0.5, 0.5, 0.5]).unwrap();
            w.record(0, &out);
        }
        assert_eq!(w.rows(), 12);
        let text = w.into_string();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        assert_eq!(lines.count(), 12);
    }
}
