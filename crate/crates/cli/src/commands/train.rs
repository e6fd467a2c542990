use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use evcharge::analysis::metrics_csv;
use evcharge::config::ExperimentConfig;
use evcharge::marl::{Algorithm, Trainer};
use evcharge::par::Exec;
use evcharge::Result;

use crate::artifacts::{load_config, resolve_out_dir, timestamp, write_text, Manifest};
use crate::{TrainArgs, EXIT_OK};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const CONFIG_FILE: &str = "config.toml";

pub fn run(args: TrainArgs, argv: &[OsString], out: &mut dyn Write) -> Result<i32> {
    let started = timestamp();
    let cfg = load_config(&args.config)?;
    let algo = Algorithm::parse(&args.algo)?;
    let config_text = std::fs::read_to_string(&args.config)?;
    let root = resolve_out_dir(args.out.out_dir.as_deref());
    let hash = cfg.hash()?;

    let mut seeds = args.seeds.clone();
    seeds.dedup();
    let single = seeds.len() == 1;
    let exec = if args.parallel_seeds { Exec::Parallel } else { Exec::Sequential };
    let results = exec.map_range(seeds.len(), |k| {
        let dir = if single { root.clone() } else { root.join(format!("seed-{}", seeds[k])) };
        let m = train_one(&cfg, algo, args.episodes, seeds[k], &dir, &config_text, argv, &started)?;
        Ok::<_, evcharge::Error>((dir, m))
    });

    let mut subdirs = Vec::new();
    for r in results {
        let (dir, summary) = r?;
        let _ = writeln!(out, "{}: {summary}", dir.display());
        subdirs.push(dir);
    }
    if !single {
        let mut m = Manifest::new("train", argv, started);
        m.config_hash = Some(hash);
        m.seeds = seeds.clone();
        m.algorithm = Some(algo.name().to_string());
        m.n_agents = Some(cfg.grid.n_agents);
        write_text(&root.join(CONFIG_FILE), &config_text)?;
        m.outputs.push(CONFIG_FILE.to_string());
        m.outputs
            .extend(seeds.iter().map(|s| format!("seed-{s}/{}", crate::artifacts::MANIFEST_FILE)));
        m.finish(&root)?;
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn train_one(
    cfg: &ExperimentConfig,
    algo: Algorithm,
    episodes: usize,
    seed: u64,
    dir: &Path,
    config_text: &str,
    argv: &[OsString],
    started: &str,
) -> Result<String> {
    std::fs::create_dir_all(dir)?;
    let run = Trainer::new(&cfg.grid, &cfg.train, algo, seed)?
        .with_exec(Exec::Sequential)
        .train(episodes)?;
    write_text(&dir.join(METRICS_FILE), &metrics_csv(&run.metrics, algo.name()))?;
    let ckpt = dir.join(CHECKPOINT_DIR);
    for a in &run.agents {
        a.save(&ckpt)?;
    }
    write_text(&dir.join(CONFIG_FILE), config_text)?;

    let mut m = Manifest::new("train", argv, started.to_string());
    m.config_hash = Some(cfg.hash()?);
    m.seeds = vec![seed];
    m.algorithm = Some(algo.name().to_string());
    m.n_agents = Some(cfg.grid.n_agents);
    m.outputs = vec![METRICS_FILE.into(), CONFIG_FILE.into()];
    for i in 0..cfg.grid.n_agents {
        for net in ["actor", "critic"] {
            for suffix in ["", "_target"] {
                m.outputs.push(format!("{CHECKPOINT_DIR}/agent{i}_{net}{suffix}.json"));
            }
        }
    }
    m.finish(dir)?;

    let tail = run.metrics.len().min(50);
    let last: Vec<f64> = run.metrics[run.metrics.len() - tail..].iter().map(|r| r.mean_return()).collect();
    let mean_tail = if tail == 0 { f64::NAN } else { last.iter().sum::<f64>() / tail as f64 };
    Ok(format!(
        "{} seed {seed}: {episodes} episodes, {} updates, mean return over last {tail} = {mean_tail:.3}",
        algo.name(),
        run.updates
    ))
}
