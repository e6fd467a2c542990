use std::io::Write;
use std::path::Path;

use evcharge::nn::{DenseNet, ForwardCache};
use evcharge::verify::{run_instance, run_suite_with, BackwardFn, Suite, SuiteReport};
use evcharge::Result;
use ndarray::ArrayView2;
use serde::Serialize;

use crate::artifacts::write_json;
use crate::{VerifyArgs, EXIT_OK, EXIT_PROPERTY, SCHEMA_VERSION};

#[derive(Serialize)]
struct VerifyJson<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a SuiteReport,
    passed: bool,
    total_steps: usize,
}

pub fn run(args: VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let backward = |net: &DenseNet, cache: &ForwardCache, up: ArrayView2<'_, f64>| net.backward(cache, up);
    run_verify_with(&args, &backward, out)
}

/// `verify` with a substitutable backward pass.
pub fn run_verify_with(args: &VerifyArgs, backward: &BackwardFn, out: &mut dyn Write) -> Result<i32> {
    let suite = Suite::parse(&args.suite)?;
    let report = match args.instance_seed {
        Some(s) => SuiteReport {
            suite,
            master_seed: args.seed,
            trials: vec![run_instance(suite, s, backward)?],
        },
        None => run_suite_with(suite, args.seed, args.trials, backward)?,
    };
    let _ = write!(out, "{}", report.table());
    if let Some(dir) = args.out_dir.as_deref() {
        write_report(dir, &report)?;
    }
    if report.passed() {
        return Ok(EXIT_OK);
    }
    for f in report.failures() {
        let _ = writeln!(
            out,
            "replay: evcharge verify --suite {} --instance-seed {}",
            suite.name(),
            f.instance_seed
        );
    }
    Ok(EXIT_PROPERTY)
}

fn write_report(dir: &Path, report: &SuiteReport) -> Result<()> {
    write_json(
        &dir.join(format!("verify_{}.json", report.suite.name())),
        &VerifyJson {
            schema_version: SCHEMA_VERSION,
            report,
            passed: report.passed(),
            total_steps: report.total_steps(),
        },
    )
}
