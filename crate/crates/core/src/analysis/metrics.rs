use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const METRICS_HEADER: &str = "episode,algo,agent,return,tv,final_battery_kWh,total_bill";

/// `(1/a_max)·Σ_{h≥1} |a^h − a^{h−1}|`.
pub fn total_variation(trace: &[f64], a_max: f64) -> Result<f64> {
    if trace.len() < 2 {
        return Err(Error::Domain(format!(
            "total variation needs at least 2 points, got {}",
            trace.len()
        )));
    }
    if !(a_max > 0.0) {
        return Err(Error::Domain(format!("a_max must be positive, got {a_max}")));
    }
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("trace contains non-finite entries".into()));
    }
    Ok(trace.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / a_max)
}

/// `|R_best| / |R_worst|` for same-signed nonzero returns.
pub fn fairness_ratio(returns: &[f64]) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::Undefined(format!("fairness needs at least 2 agents, got {}", returns.len())));
    }
    let all_neg = returns.iter().all(|&r| r < 0.0);
    let all_pos = returns.iter().all(|&r| r > 0.0);
    if !(all_neg || all_pos) || returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::Undefined(format!(
            "fairness undefined for zero, mixed-sign or non-finite returns {returns:?}"
        )));
    }
    let best = returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let worst = returns.iter().cloned().fold(f64::INFINITY, f64::min);
    let (num, den) = if all_neg { (best.abs(), worst.abs()) } else { (worst, best) };
    Ok(num / den)
}

/// Per-episode summary shared by training and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub episode: usize,
    pub returns: Vec<f64>,
    pub tv: Vec<f64>,
    pub final_battery: Vec<f64>,
    pub total_bill: Vec<f64>,
    pub avg_price: f64,
    pub total_cost: f64,
    pub fairness: Option<f64>,
}

impl MetricsRecord {
    pub fn n_agents(&self) -> usize {
        self.returns.len()
    }

    pub fn mean_return(&self) -> f64 {
        mean(&self.returns)
    }

    pub fn mean_tv(&self) -> f64 {
        mean(&self.tv)
    }

    /// One CSV line per agent, without header.
    pub fn csv_rows(&self, algo: &str, out: &mut String) {
        for i in 0..self.n_agents() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.episode, algo, i, self.returns[i], self.tv[i], self.final_battery[i], self.total_bill[i]
            );
        }
    }
}

pub fn metrics_csv(records: &[MetricsRecord], algo: &str) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        r.csv_rows(algo, &mut out);
    }
    out
}

/// Parses a metrics CSV back into records. Episode-level fields that the CSV
/// does not carry are rebuilt where possible (`fairness`) or left at zero.
pub fn parse_metrics_csv(text: &str) -> Result<(String, Vec<MetricsRecord>)> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(METRICS_HEADER) {
        return Err(Error::Serde("metrics CSV header mismatch".into()));
    }
    let mut algo = String::new();
    let mut out: Vec<MetricsRecord> = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Serde(format!("metrics CSV line {}: {line:?}", n + 2));
        if f.len() != 7 {
            return Err(bad());
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad());
        let episode: usize = f[0].parse().map_err(|_| bad())?;
        let agent: usize = f[2].parse().map_err(|_| bad())?;
        if algo.is_empty() {
            algo = f[1].to_string();
        } else if algo != f[1] {
            return Err(Error::Serde("metrics CSV mixes algorithms".into()));
        }
        if out.last().map(|r| r.episode) != Some(episode) {
            out.push(MetricsRecord {
                episode,
                returns: vec![],
                tv: vec![],
                final_battery: vec![],
                total_bill: vec![],
                avg_price: 0.0,
                total_cost: 0.0,
                fairness: None,
            });
        }
        let r = out.last_mut().unwrap();
        if agent != r.returns.len() {
            return Err(bad());
        }
        r.returns.push(num(3)?);
        r.tv.push(num(4)?);
        r.final_battery.push(num(5)?);
        r.total_bill.push(num(6)?);
    }
    for r in &mut out {
        r.total_cost = r.total_bill.iter().sum();
        r.fairness = fairness_ratio(&r.returns).ok();
    }
    Ok((algo, out))
}

/// Mean of a per-episode statistic.
pub fn metrics_mean(records: &[MetricsRecord], f: impl Fn(&MetricsRecord) -> f64) -> f64 {
    let v: Vec<f64> = records.iter().map(f).collect();
    mean(&v)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tv_examples() {
        assert_eq!(total_variation(&[2.0; 5], 6.6).unwrap(), 0.0);
        assert!((total_variation(&[0.0, 3.3, 3.3, 0.0], 6.6).unwrap() - 1.0).abs() < 1e-15);
        assert!(total_variation(&[], 6.6).is_err());
        assert!(total_variation(&[1.0], 6.6).is_err());
    }

    #[test]
    fn fairness_examples() {
        assert_eq!(fairness_ratio(&[-80.0, -80.0]).unwrap(), 1.0);
        assert_eq!(fairness_ratio(&[-80.0, -100.0]).unwrap(), 0.8);
        assert_eq!(fairness_ratio(&[-100.0, -80.0]).unwrap(), 0.8);
        assert_eq!(fairness_ratio(&[80.0, 100.0]).unwrap(), 0.8);
        assert!(matches!(fairness_ratio(&[-1.0, 2.0]), Err(Error::Undefined(_))));
        assert!(fairness_ratio(&[0.0, -1.0]).is_err());
        assert!(fairness_ratio(&[-1.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let r = MetricsRecord {
            episode: 3,
            returns: vec![-10.5, -0.1],
            tv: vec![1.0, 2.25],
            final_battery: vec![58.0, 59.5],
            total_bill: vec![3.0, 4.0],
            avg_price: 0.2,
            total_cost: 7.0,
            fairness: Some(0.1 / 10.5),
        };
        let csv = metrics_csv(std::slice::from_ref(&r), "ctde");
        assert!(csv.starts_with(METRICS_HEADER));
        let (algo, back) = parse_metrics_csv(&csv).unwrap();
        assert_eq!(algo, "ctde");
        assert_eq!(back[0].returns, r.returns);
        assert_eq!(back[0].total_bill, r.total_bill);
        assert_eq!(back[0].fairness, r.fairness);
    }

    proptest! {
        #[test]
        fn tv_nonnegative_and_shift_invariant(trace in prop::collection::vec(0.0..3.0f64, 2..40), shift in 0.0..3.0f64) {
            let tv = total_variation(&trace, 6.6).unwrap();
            prop_assert!(tv >= 0.0);
            let shifted: Vec<f64> = trace.iter().map(|v| v + shift).collect();
            prop_assert!((total_variation(&shifted, 6.6).unwrap() - tv).abs() < 1e-12);
        }

        #[test]
        fn fairness_bounded_and_permutation_invariant(mut r in prop::collection::vec(-500.0..-0.1f64, 2..12)) {
            let f = fairness_ratio(&r).unwrap();
            prop_assert!(f > 0.0 && f <= 1.0);
            r.reverse();
            prop_assert_eq!(fairness_ratio(&r).unwrap(), f);
        }
    }
}
