use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use evcharge::analysis::{comparison_csv, evaluation_summary, fairness_table, parse_metrics_csv, Comparison, MetricsRecord};
use evcharge::{Error, Result};
use serde::Serialize;

use crate::artifacts::{resolve_out_dir, timestamp, write_json, write_text, Manifest};
use crate::commands::eval::METRICS_FILE;
use crate::{CompareArgs, EXIT_OK, SCHEMA_VERSION};

pub const CSV_FILE: &str = "comparison.csv";
pub const JSON_FILE: &str = "comparison.json";

struct RunData {
    dir: PathBuf,
    algo: String,
    hash: Option<String>,
    records: Vec<MetricsRecord>,
}

#[derive(Serialize)]
struct ComparisonJson<'a> {
    schema_version: u32,
    runs: Vec<String>,
    comparisons: &'a [Comparison],
}

fn load_run(dir: &Path) -> Result<RunData> {
    let path = dir.join(METRICS_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let (algo, records) = parse_metrics_csv(&text)?;
    if records.is_empty() {
        return Err(Error::Contract(format!("{} holds no episodes", path.display())));
    }
    let hash = Manifest::load(dir).ok().and_then(|m| m.config_hash);
    Ok(RunData {
        dir: dir.to_path_buf(),
        algo,
        hash,
        records,
    })
}

/// Within each fleet size, the first I-DDPG run (else the first run) is the
/// reference and the first other run, preferring CTDE, is compared to it.
fn pair(group: &[RunData]) -> Result<(&RunData, &RunData)> {
    let r = group.iter().position(|g| g.algo == "iddpg").unwrap_or(0);
    let c = group
        .iter()
        .enumerate()
        .position(|(k, g)| k != r && g.algo == "ctde")
        .or_else(|| (0..group.len()).find(|&k| k != r))
        .ok_or_else(|| {
            Error::Config(format!(
                "{} is the only run with {} agents",
                group[r].dir.display(),
                group[r].records[0].n_agents()
            ))
        })?;
    Ok((&group[r], &group[c]))
}

pub fn run(args: CompareArgs, argv: &[OsString], out: &mut dyn Write) -> Result<i32> {
    let started = timestamp();
    let runs = args.runs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>>>()?;
    let mut groups: BTreeMap<usize, Vec<RunData>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.records[0].n_agents()).or_default().push(r);
    }
    let mut rows = Vec::new();
    for group in groups.values() {
        let (base, other) = pair(group)?;
        if base.hash != other.hash {
            return Err(Error::Config(format!(
                "{} and {} were produced from different configs",
                base.dir.display(),
                other.dir.display()
            )));
        }
        rows.push(evaluation_summary(&base.records, &other.records)?);
    }

    let dir = resolve_out_dir(args.out.out_dir.as_deref());
    std::fs::create_dir_all(&dir)?;
    write_text(&dir.join(CSV_FILE), &comparison_csv(&rows))?;
    write_json(
        &dir.join(JSON_FILE),
        &ComparisonJson {
            schema_version: SCHEMA_VERSION,
            runs: args.runs.iter().map(|p| p.display().to_string()).collect(),
            comparisons: &rows,
        },
    )?;
    let mut m = Manifest::new("compare", argv, started);
    m.outputs = vec![CSV_FILE.into(), JSON_FILE.into()];
    m.finish(&dir)?;
    let _ = write!(out, "{}", fairness_table(&rows));
    Ok(EXIT_OK)
}
