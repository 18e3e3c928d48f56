//! Executes scenarios and writes their artifacts.

use std::path::Path;

use safeqp::frameworks::Method;
use safeqp::sim::{compute_metrics, simulate_plant};

use crate::config::{RunPlan, ScenarioSpec};
use crate::error::{CliError, Result};
use crate::output::{
    write_summary, write_trajectory_csv, ExpectationOutcome, RunRecord, SummaryReport, SweepPoint,
};

/// Runs selected by `method` (all when `None`).
pub fn selected_runs(spec: &ScenarioSpec, method: Option<Method>) -> Vec<RunPlan> {
    spec.runs()
        .into_iter()
        .filter(|r| method.map_or(true, |m| r.method.method == m))
        .collect()
}

/// Simulates every selected run of `spec`, writing one CSV per run and
/// `<scenario>__summary.json` into `out_dir` (created if missing). Runs
/// execute on separate threads; solver failures are recorded per run.
pub fn run_scenario(
    spec: &ScenarioSpec,
    out_dir: impl AsRef<Path>,
    method: Option<Method>,
) -> Result<SummaryReport> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let runs = selected_runs(spec, method);
    let records: Vec<Result<RunRecord>> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|run| scope.spawn(move || execute(spec, run, out_dir)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    });
    let report = SummaryReport {
        runs: records.into_iter().collect::<Result<_>>()?,
        ..SummaryReport::default()
    };
    write_summary(&report, out_dir.join(format!("{}__summary.json", spec.id)))?;
    Ok(report)
}

fn execute(spec: &ScenarioSpec, run: &RunPlan, out_dir: &Path) -> Result<RunRecord> {
    let stem = run.file_stem(&spec.id);
    let csv = format!("{stem}.csv");
    let config_hash = spec.config_hash(run);
    let mut record = RunRecord {
        scenario: spec.id.clone(),
        method: run.method.method.name().to_string(),
        sweep: run
            .sweep
            .map(|(parameter, value)| SweepPoint { parameter, value }),
        csv: csv.clone(),
        config_hash: config_hash.clone(),
        metrics: None,
        error: None,
        expectations: None,
    };
    let plant = spec.plant.plant()?;
    let log = match simulate_plant(&plant, &spec.framework_config(run), &spec.sim) {
        Ok(log) => log.with_metadata(&spec.id, &config_hash),
        Err(e) => {
            record.error = Some(e.to_string());
            return Ok(record);
        }
    };
    write_trajectory_csv(&log, out_dir.join(&csv))?;
    record.error = log.aborted.clone();
    if !log.rows.is_empty() {
        let metrics = compute_metrics(&log, &plant.kind)?;
        record.expectations = spec
            .expect
            .get(record.method.as_str())
            .map(|e| ExpectationOutcome::check(e, &metrics));
        record.metrics = Some(metrics);
    }
    Ok(record)
}
