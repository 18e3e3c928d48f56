//! Trajectory CSVs and summary JSON.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use safeqp::qp::Status;
use safeqp::sim::{RunMetrics, TrajectoryLog};

use crate::config::{Expectation, SweepParameter};
use crate::error::{CliError, Result};

pub const SUMMARY_VERSION: &str = "1";

pub fn csv_header(log: &TrajectoryLog) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=log.state_dim).map(|i| format!("x{i}")));
    cols.extend((1..=log.input_dim).map(|i| format!("u{i}")));
    cols.push("V".into());
    cols.extend((1..=log.barrier_count).map(|i| format!("h{i}")));
    cols.push("delta1".into());
    cols.extend((1..=log.barrier_count).map(|i| format!("delta2_{i}")));
    cols.push("status".into());
    cols
}

/// Shortest decimal that parses back to the same value.
fn num(out: &mut String, v: f64) {
    write!(out, "{v:?}").expect("writing to a String");
}

pub fn trajectory_csv(log: &TrajectoryLog) -> String {
    let mut out = csv_header(log).join(",");
    out.push('\n');
    for row in &log.rows {
        num(&mut out, row.t);
        for &v in row
            .x
            .iter()
            .chain(row.u.iter())
            .chain([&row.v])
            .chain(&row.h)
            .chain([&row.delta1])
            .chain(&row.delta2)
        {
            out.push(',');
            num(&mut out, v);
        }
        out.push_str(match row.status {
            Status::Optimal => ",OPT\n",
            Status::Infeasible => ",INF\n",
        });
    }
    out
}

pub fn write_trajectory_csv(log: &TrajectoryLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trajectory_csv(log)).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: SweepParameter,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationOutcome {
    pub passed: bool,
    pub failures: Vec<String>,
}

impl ExpectationOutcome {
    pub fn check(expect: &Expectation, m: &RunMetrics) -> Self {
        let mut failures = Vec::new();
        if let Some(want) = expect.collision {
            if m.collision != want {
                failures.push(format!("collision = {}, expected {want}", m.collision));
            }
        }
        if let Some(max) = expect.max_infeasible_steps {
            if m.infeasible_step_count > max {
                failures.push(format!(
                    "{} infeasible steps, expected at most {max}",
                    m.infeasible_step_count
                ));
            }
        }
        if let Some(want) = expect.infeasible_after_start {
            let got = m.first_infeasible_time.is_some_and(|t| t > 0.0);
            if got != want {
                failures.push(format!(
                    "first infeasible time {:?}, expected after start = {want}",
                    m.first_infeasible_time
                ));
            }
        }
        if let Some(want) = expect.reaches_goal {
            if m.time_to_goal.is_some() != want {
                failures.push(format!(
                    "time to goal {:?}, expected reached = {want}",
                    m.time_to_goal
                ));
            }
        }
        if let Some(want) = expect.settles {
            if m.settling_time.is_some() != want {
                failures.push(format!(
                    "settling time {:?}, expected settled = {want}",
                    m.settling_time
                ));
            }
        }
        if m.aborted {
            failures.push("run aborted".into());
        }
        Self {
            passed: failures.is_empty(),
            failures,
        }
    }
}

/// One (scenario, method, sweep point) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepPoint>,
    pub csv: String,
    pub config_hash: String,
    pub metrics: Option<RunMetrics>,
    /// Why the run stopped early or never started.
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expectations: Option<ExpectationOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub version: String,
    pub runs: Vec<RunRecord>,
}

impl Default for SummaryReport {
    fn default() -> Self {
        Self {
            version: SUMMARY_VERSION.into(),
            runs: Vec::new(),
        }
    }
}

impl SummaryReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }
}

pub fn write_summary(report: &SummaryReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(report).expect("summary serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use safeqp::frameworks::Method;
    use safeqp::sim::LogRow;

    fn log(steps: usize, barriers: usize) -> TrajectoryLog {
        let rows = (0..steps)
            .map(|i| LogRow {
                t: i as f64 * 0.02,
                x: DVector::from_vec(vec![0.0, 20.0, 100.0 - 0.1 * i as f64]),
                u: DVector::from_vec(vec![-1234.5]),
                v: 100.0,
                h: vec![1.0 / 3.0; barriers],
                delta1: if i == 1 { f64::NAN } else { 1e-7 },
                delta2: vec![0.0; barriers],
                status: if i == 1 {
                    Status::Infeasible
                } else {
                    Status::Optimal
                },
            })
            .collect();
        TrajectoryLog {
            scenario_id: "t".into(),
            method: Method::SafetyFirst,
            config_hash: String::new(),
            dt: 0.02,
            state_dim: 3,
            input_dim: 1,
            barrier_count: barriers,
            rows,
            aborted: None,
        }
    }

    #[test]
    fn acc_csv_layout() {
        let text = trajectory_csv(&log(2, 1));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "t,x1,x2,x3,u1,V,h1,delta1,delta2_1,status");
        assert_eq!(lines[0].split(',').count(), 10);
        assert_eq!(
            lines[1],
            "0.0,0.0,20.0,100.0,-1234.5,100.0,0.3333333333333333,1e-7,0.0,OPT"
        );
        assert!(lines[2].ends_with(",NaN,0.0,INF"));
        for field in lines[1].split(',').take(9) {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v:?}"), field);
        }
    }

    #[test]
    fn multi_barrier_columns() {
        let header = csv_header(&log(1, 6)).join(",");
        assert!(header.contains("h1,h2,h3,h4,h5,h6,delta1,delta2_1"));
        assert!(header.ends_with("delta2_6,status"));
    }

    #[test]
    fn empty_summary() {
        assert_eq!(
            SummaryReport::default().to_json(),
            r#"{"version":"1","runs":[]}"#
        );
    }
}
