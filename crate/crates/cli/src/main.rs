use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use safeqp::frameworks::Method;
use safeqp_cli::config::{to_config_json, ScenarioSpec};
use safeqp_cli::output::RunRecord;
use safeqp_cli::runner::selected_runs;
use safeqp_cli::{builtin_scenarios, parse_config, run_scenario, CliError, Result};

#[derive(Parser)]
#[command(
    name = "safeqp",
    version,
    about = "Run CLF-CBF controller scenarios and write trajectory data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate scenarios, writing CSVs and summaries to --out.
    Run {
        /// Scenario config; the built-in scenarios when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Only these scenario ids (repeatable).
        #[arg(long)]
        scenario: Vec<String>,
        /// Only runs of this method.
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        out: PathBuf,
    },
    /// List scenario ids with their runs.
    ListScenarios {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print scenarios as JSON with every default filled in.
    Show {
        #[arg(long)]
        config: Option<PathBuf>,
        scenario: Vec<String>,
    },
}

fn load(config: Option<&PathBuf>) -> Result<Vec<ScenarioSpec>> {
    match config {
        Some(path) => parse_config(path),
        None => builtin_scenarios(),
    }
}

fn pick(all: Vec<ScenarioSpec>, ids: &[String]) -> Result<Vec<ScenarioSpec>> {
    if ids.is_empty() {
        return Ok(all);
    }
    ids.iter()
        .map(|id| {
            all.iter()
                .find(|s| &s.id == id)
                .cloned()
                .ok_or_else(|| CliError::config("--scenario", format!("no scenario `{id}`")))
        })
        .collect()
}

fn describe(rec: &RunRecord) -> String {
    let mut line = format!("{:<14} {:<34}", rec.method, rec.csv);
    if let Some(m) = &rec.metrics {
        let t = |v: Option<f64>| v.map_or("-".to_string(), |t| format!("{t:.2}"));
        line.push_str(&format!(
            " steps={} infeasible={} collision={} settle={} goal={}",
            m.steps,
            m.infeasible_step_count,
            m.collision,
            t(m.settling_time),
            t(m.time_to_goal)
        ));
    }
    if let Some(err) = &rec.error {
        line.push_str(&format!(" error: {err}"));
    }
    if let Some(e) = &rec.expectations {
        if e.passed {
            line.push_str(" [expected]");
        } else {
            line.push_str(&format!(" [unexpected: {}]", e.failures.join("; ")));
        }
    }
    line
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            scenario,
            method,
            out,
        } => {
            let specs = pick(load(config.as_ref())?, &scenario)?;
            if specs.iter().all(|s| selected_runs(s, method).is_empty()) {
                return Err(CliError::config("--method", "no run matches the selection"));
            }
            for spec in &specs {
                if selected_runs(spec, method).is_empty() {
                    continue;
                }
                println!("{}", spec.id);
                for rec in run_scenario(spec, &out, method)?.runs {
                    println!("  {}", describe(&rec));
                }
            }
        }
        Command::ListScenarios { config } => {
            for spec in load(config.as_ref())? {
                let runs: Vec<String> = spec.runs().iter().map(|r| r.file_stem(&spec.id)).collect();
                println!("{:<12} {}", spec.id, spec.description);
                for r in runs {
                    println!("    {r}");
                }
            }
        }
        Command::Validate { config } => {
            let specs = parse_config(&config)?;
            let runs: usize = specs.iter().map(|s| s.runs().len()).sum();
            println!(
                "{}: {} scenarios, {runs} runs",
                config.display(),
                specs.len()
            );
        }
        Command::Show { config, scenario } => {
            let specs = pick(load(config.as_ref())?, &scenario)?;
            println!("{}", to_config_json(&specs));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
