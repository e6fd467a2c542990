use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use evcharge::analysis::metrics_csv;
use evcharge::marl::{evaluate_with, Algorithm, CriticMode, DdpgAgent, EvalReport};
use evcharge::par::Exec;
use evcharge::{Error, Result};
use serde::Serialize;

use crate::artifacts::{load_config, resolve_out_dir, timestamp, write_json, write_text, Manifest};
use crate::{EvalArgs, EXIT_OK, SCHEMA_VERSION};

pub const AGENTS_FILE: &str = "eval_agents.csv";
pub const NETWORK_FILE: &str = "eval_network.csv";
pub const METRICS_FILE: &str = "eval_metrics.csv";
pub const TRACE_FILE: &str = "eval_trace.csv";
pub const SUMMARY_FILE: &str = "eval_summary.json";

#[derive(Serialize)]
struct EvalSummary<'a> {
    schema_version: u32,
    algo: &'a str,
    n_agents: usize,
    episodes: usize,
    seed: u64,
    mean_tv: f64,
    mean_cost: f64,
    mean_price: f64,
    fairness: Option<f64>,
    mean_returns: &'a [f64],
    demand_met: &'a [f64],
}

/// Loads `n` agents, inferring the critic layout from the stored widths.
pub fn load_agents(dir: &Path, n: usize) -> Result<(Vec<DdpgAgent>, CriticMode)> {
    if !dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("checkpoint directory {} not found", dir.display()),
        )));
    }
    if dir.join(format!("agent{n}_actor.json")).exists() {
        return Err(Error::Contract(format!("checkpoints hold more than the configured {n} agents")));
    }
    let mode = match DdpgAgent::load(dir, 0, n, CriticMode::Decentralized) {
        Ok(_) => CriticMode::Decentralized,
        Err(Error::Contract(_)) => CriticMode::Centralized,
        Err(e) => return Err(e),
    };
    let agents = (0..n).map(|i| DdpgAgent::load(dir, i, n, mode)).collect::<Result<Vec<_>>>()?;
    Ok((agents, mode))
}

/// Algorithm label from the training manifest next to the checkpoints, else from the critic layout.
fn algorithm_label(dir: &Path, mode: CriticMode) -> String {
    dir.parent()
        .and_then(|p| crate::Manifest::load(p).ok())
        .and_then(|m| m.algorithm)
        .and_then(|a| Algorithm::parse(&a).ok())
        .map(|a| a.name().to_string())
        .unwrap_or_else(|| {
            match mode {
                CriticMode::Centralized => Algorithm::Ctde,
                CriticMode::Decentralized => Algorithm::Iddpg,
            }
            .name()
            .to_string()
        })
}

pub fn agents_csv(rep: &EvalReport) -> String {
    let mut s = String::from("agent,step,avg_battery_kWh,avg_rate\n");
    for (i, (b, r)) in rep.mean_battery.iter().zip(&rep.mean_rate).enumerate() {
        for (h, (b, r)) in b.iter().zip(r).enumerate() {
            let _ = writeln!(s, "{i},{h},{b},{r}");
        }
    }
    s
}

pub fn network_csv(rep: &EvalReport) -> String {
    let mut s = String::from("step,avg_price,avg_cost\n");
    for (h, (p, c)) in rep.mean_price.iter().zip(&rep.mean_cost).enumerate() {
        let _ = writeln!(s, "{h},{p},{c}");
    }
    s
}

pub fn run(args: EvalArgs, argv: &[OsString], out: &mut dyn Write) -> Result<i32> {
    let started = timestamp();
    let cfg = load_config(&args.config)?;
    if args.episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let (agents, mode) = load_agents(&args.checkpoints, cfg.grid.n_agents)?;
    let algo = algorithm_label(&args.checkpoints, mode);
    let rep = evaluate_with(&agents, &cfg.grid, args.episodes, args.seed, Exec::default())?;

    let dir = resolve_out_dir(args.out.out_dir.as_deref());
    std::fs::create_dir_all(&dir)?;
    write_text(&dir.join(AGENTS_FILE), &agents_csv(&rep))?;
    write_text(&dir.join(NETWORK_FILE), &network_csv(&rep))?;
    write_text(&dir.join(METRICS_FILE), &metrics_csv(&rep.episodes, &algo))?;
    write_text(&dir.join(TRACE_FILE), &rep.trace)?;
    let fairness = rep.fairness();
    write_json(
        &dir.join(SUMMARY_FILE),
        &EvalSummary {
            schema_version: SCHEMA_VERSION,
            algo: &algo,
            n_agents: cfg.grid.n_agents,
            episodes: args.episodes,
            seed: args.seed,
            mean_tv: rep.mean_tv(),
            mean_cost: rep.mean_cost(),
            mean_price: rep.mean_price(),
            fairness,
            mean_returns: &rep.mean_returns,
            demand_met: &rep.demand_met,
        },
    )?;

    let mut m = Manifest::new("eval", argv, started);
    m.config_hash = Some(cfg.hash()?);
    m.seeds = vec![args.seed];
    m.algorithm = Some(algo.clone());
    m.n_agents = Some(cfg.grid.n_agents);
    m.outputs = [AGENTS_FILE, NETWORK_FILE, METRICS_FILE, TRACE_FILE, SUMMARY_FILE]
        .map(String::from)
        .to_vec();
    m.finish(&dir)?;

    let _ = writeln!(
        out,
        "{algo}: {} episodes, mean TV {:.4}, mean cost {:.3}, mean price {:.4}, fairness {}",
        args.episodes,
        rep.mean_tv(),
        rep.mean_cost(),
        rep.mean_price(),
        fairness.map(|f| format!("{f:.4}")).unwrap_or_else(|| "undef".into())
    );
    Ok(EXIT_OK)
}
