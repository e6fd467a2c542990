use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{fairness_ratio, mean, MetricsRecord};
use crate::{Error, Result};

/// `(base − new) / base · 100`.
pub fn percent_reduction(base: f64, new: f64) -> Result<f64> {
    if base == 0.0 || !base.is_finite() || !new.is_finite() {
        return Err(Error::Undefined(format!("percent reduction from {base} to {new}")));
    }
    Ok((base - new) / base * 100.0)
}

/// Aggregates of one algorithm's evaluation episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoSummary {
    pub algo: String,
    pub n_agents: usize,
    pub episodes: usize,
    pub mean_tv: f64,
    pub mean_cost: f64,
    pub mean_price: f64,
    pub mean_returns: Vec<f64>,
    pub fairness: Option<f64>,
}

impl AlgoSummary {
    pub fn from_records(algo: &str, records: &[MetricsRecord]) -> Result<Self> {
        let n = records.first().map(MetricsRecord::n_agents).unwrap_or(0);
        if records.is_empty() || records.iter().any(|r| r.n_agents() != n) {
            return Err(Error::Contract("records must be nonempty with a fixed agent count".into()));
        }
        let mean_returns: Vec<f64> = (0..n)
            .map(|i| mean(&records.iter().map(|r| r.returns[i]).collect::<Vec<_>>()))
            .collect();
        Ok(Self {
            algo: algo.to_string(),
            n_agents: n,
            episodes: records.len(),
            mean_tv: mean(&records.iter().map(MetricsRecord::mean_tv).collect::<Vec<_>>()),
            mean_cost: mean(&records.iter().map(|r| r.total_cost).collect::<Vec<_>>()),
            mean_price: mean(&records.iter().map(|r| r.avg_price).collect::<Vec<_>>()),
            fairness: fairness_ratio(&mean_returns).ok(),
            mean_returns,
        })
    }
}

/// CTDE relative to I-DDPG at one fleet size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub n_agents: usize,
    pub iddpg: AlgoSummary,
    pub ctde: AlgoSummary,
    pub tv_reduction_pct: f64,
    pub cost_reduction_pct: f64,
}

pub fn evaluation_summary(iddpg: &[MetricsRecord], ctde: &[MetricsRecord]) -> Result<Comparison> {
    let a = AlgoSummary::from_records("iddpg", iddpg)?;
    let b = AlgoSummary::from_records("ctde", ctde)?;
    if a.n_agents != b.n_agents || a.episodes != b.episodes {
        return Err(Error::Contract(format!(
            "mismatched evaluations: {} agents × {} episodes vs {} × {}",
            a.n_agents, a.episodes, b.n_agents, b.episodes
        )));
    }
    Ok(Comparison {
        n_agents: a.n_agents,
        tv_reduction_pct: percent_reduction(a.mean_tv, b.mean_tv)?,
        cost_reduction_pct: percent_reduction(a.mean_cost, b.mean_cost)?,
        iddpg: a,
        ctde: b,
    })
}

pub const COMPARISON_HEADER: &str = "n_agents,algo,mean_tv,mean_cost,mean_price,fairness";

pub fn comparison_csv(rows: &[Comparison]) -> String {
    let mut out = format!("{COMPARISON_HEADER}\n");
    for c in rows {
        for s in [&c.iddpg, &c.ctde] {
            let fair = s.fairness.map(|f| f.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{}", c.n_agents, s.algo, s.mean_tv, s.mean_cost, s.mean_price, fair);
        }
    }
    out
}

/// Aligned fairness-versus-fleet-size table.
pub fn fairness_table(rows: &[Comparison]) -> String {
    let fmt = |f: Option<f64>| f.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undef".into());
    let mut out = format!(
        "{:>8}  {:>10}  {:>10}  {:>8}  {:>8}\n",
        "agents", "iddpg", "ctde", "dTV%", "dcost%"
    );
    for c in rows {
        let _ = writeln!(
            out,
            "{:>8}  {:>10}  {:>10}  {:>8.2}  {:>8.2}",
            c.n_agents,
            fmt(c.iddpg.fairness),
            fmt(c.ctde.fairness),
            c.tv_reduction_pct,
            c.cost_reduction_pct
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(tv: f64, cost: f64, returns: Vec<f64>) -> MetricsRecord {
        MetricsRecord {
            episode: 0,
            tv: vec![tv; returns.len()],
            final_battery: vec![0.0; returns.len()],
            total_bill: vec![cost / returns.len() as f64; returns.len()],
            avg_price: 0.3,
            total_cost: cost,
            fairness: None,
            returns,
        }
    }

    #[test]
    fn reductions_match_reported_arithmetic() {
        assert!((percent_reduction(2.0, 1.28).unwrap() - 36.0).abs() < 1e-9);
        assert!((percent_reduction(10.0, 9.09).unwrap() - 9.1).abs() < 1e-9);
        assert!(percent_reduction(0.0, 1.0).is_err());
    }

    #[test]
    fn identical_sets_give_zero_deltas() {
        let r = vec![rec(1.5, 8.0, vec![-80.0, -100.0]), rec(2.5, 12.0, vec![-90.0, -70.0])];
        let c = evaluation_summary(&r, &r).unwrap();
        assert_eq!(c.tv_reduction_pct, 0.0);
        assert_eq!(c.cost_reduction_pct, 0.0);
        assert_eq!(c.iddpg.fairness, c.ctde.fairness);
        assert_eq!(c.iddpg.fairness, Some(85.0 / 85.0));
        let csv = comparison_csv(&[c.clone()]);
        assert_eq!(csv.lines().count(), 3);
        assert!(fairness_table(&[c]).contains("0.00"));
    }

    #[test]
    fn mismatched_sets_rejected() {
        let a = vec![rec(1.0, 1.0, vec![-1.0, -1.0])];
        let b = vec![rec(1.0, 1.0, vec![-1.0, -1.0, -1.0])];
        assert!(evaluation_summary(&a, &b).is_err());
        assert!(evaluation_summary(&a, &[]).is_err());
    }
}
