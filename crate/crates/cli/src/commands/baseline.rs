use std::ffi::OsString;
use std::io::Write;

use evcharge::baseline::{brute_force_oracle, naive_schedule, objective, solve_centralized, Instance, PgdOptions};
use evcharge::{Error, Result};
use serde::Serialize;

use crate::artifacts::{load_config, resolve_out_dir, timestamp, write_json, write_text, Manifest};
use crate::{BaselineArgs, EXIT_OK, SCHEMA_VERSION};

pub const SCHEDULE_FILE: &str = "baseline_schedule.csv";
pub const SUMMARY_FILE: &str = "baseline_summary.json";

#[derive(Serialize)]
struct BaselineSummary {
    schema_version: u32,
    feasible: bool,
    seed: u64,
    objective: Option<f64>,
    iterations: Option<usize>,
    converged: Option<bool>,
    restart_spread: Option<f64>,
    naive_objective: Option<f64>,
    oracle_objective: Option<f64>,
    windows: Vec<(usize, usize)>,
    initial_kwh: Vec<f64>,
    report: Option<String>,
}

pub fn run(args: BaselineArgs, argv: &[OsString], out: &mut dyn Write) -> Result<i32> {
    let started = timestamp();
    let cfg = load_config(&args.config)?;
    if !(args.tol > 0.0 && args.tol.is_finite()) {
        return Err(Error::Config(format!("tolerance must be positive, got {}", args.tol)));
    }
    let inst = Instance::sample(&cfg.grid, args.seed)?;
    let dir = resolve_out_dir(args.out.out_dir.as_deref());
    std::fs::create_dir_all(&dir)?;
    let mut m = Manifest::new("baseline", argv, started);
    m.config_hash = Some(cfg.hash()?);
    m.seeds = vec![args.seed];
    m.n_agents = Some(cfg.grid.n_agents);

    let opts = PgdOptions {
        seed: args.seed,
        ..PgdOptions::default()
    };
    let mut summary = BaselineSummary {
        schema_version: SCHEMA_VERSION,
        feasible: true,
        seed: args.seed,
        objective: None,
        iterations: None,
        converged: None,
        restart_spread: None,
        naive_objective: None,
        oracle_objective: None,
        windows: inst.windows.clone(),
        initial_kwh: inst.initial_kwh.clone(),
        report: None,
    };
    let sol = match solve_centralized(&cfg.grid, &inst, args.tol, opts) {
        Ok(s) => s,
        Err(Error::Infeasible(msg)) => {
            summary.feasible = false;
            summary.report = Some(msg.clone());
            write_json(&dir.join(SUMMARY_FILE), &summary)?;
            m.outputs = vec![SUMMARY_FILE.into()];
            m.finish(&dir)?;
            return Err(Error::Infeasible(msg));
        }
        Err(e) => return Err(e),
    };
    summary.objective = Some(sol.objective);
    summary.iterations = Some(sol.iterations);
    summary.converged = Some(sol.converged);
    summary.restart_spread = Some(sol.restart_spread());
    summary.naive_objective = Some(objective(&cfg.grid, &naive_schedule(&cfg.grid, &inst)?)?);
    if let Some(g) = args.grid_points {
        summary.oracle_objective = Some(brute_force_oracle(&cfg.grid, &inst, g)?.objective);
    }
    write_text(&dir.join(SCHEDULE_FILE), &sol.schedule.to_csv())?;
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    m.outputs = vec![SCHEDULE_FILE.into(), SUMMARY_FILE.into()];
    m.finish(&dir)?;
    let _ = writeln!(
        out,
        "objective {:.6} after {} iterations (restart spread {:.2e}, uncoordinated {:.6})",
        sol.objective,
        sol.iterations,
        sol.restart_spread(),
        summary.naive_objective.unwrap_or(f64::NAN)
    );
    Ok(EXIT_OK)
}
