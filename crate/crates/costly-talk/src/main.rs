//! Command-line front end: run a scenario file, print reach tables, or run
//! the named reproduction suite.
//!
//! Exit codes: 0 all requested checks pass, 1 a check fails (with
//! machine-checkable witnesses in the report), 2 the scenario cannot be
//! parsed or describes an invalid game.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use costly_talk::reach::ReachTable;
use costly_talk::scenario::{
    self, run_proposition_suite, run_scenario, CheckSet, Scenario, ScenarioError,
};
use costly_talk::verify::GAIN_TOL;

/// Environment variable bounding the rayon worker pool.
const WORKERS_ENV: &str = "COSTLY_TALK_WORKERS";

#[derive(Parser)]
#[command(name = "costly-talk", version, about = "costly-signaling committee game lab")]
struct Cli {
    /// Override the grid step of the scenario file.
    #[arg(long, global = true)]
    grid_step: Option<f64>,
    /// Strict-gain tolerance for deviation checks.
    #[arg(long, global = true, default_value_t = GAIN_TOL)]
    tolerance: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Equilibrium,
    Strong,
    CoalitionProof,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a scenario and emit an experiment report.
    Run {
        /// Scenario file, or `builtin:<name>` for a bundled one.
        #[arg(long)]
        scenario: String,
        /// Checks to run (repeatable).
        #[arg(long, value_enum, default_values_t = [Check::Equilibrium])]
        checks: Vec<Check>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Print the reach table of a scenario's senders as CSV.
    Reach {
        #[arg(long)]
        scenario: String,
    },
    /// Run a named reproduction (or "all") and report REPRODUCED / FAILED.
    Suite {
        #[arg(long, default_value = "all")]
        prop: String,
    },
}

fn load(name: &str, grid_step: Option<f64>) -> Result<Scenario, ScenarioError> {
    let text = if let Some(builtin) = name.strip_prefix("builtin:") {
        scenario::BUNDLED
            .iter()
            .find(|(n, _)| *n == builtin)
            .map(|(_, t)| t.to_string())
            .ok_or_else(|| {
                ScenarioError::Parse(format!(
                    "no bundled scenario named {builtin:?}; available: {}",
                    scenario::BUNDLED
                        .iter()
                        .map(|(n, _)| *n)
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })?
    } else {
        std::fs::read_to_string(name).map_err(ScenarioError::Io)?
    };
    match grid_step {
        None => scenario::parse_scenario(&text),
        Some(step) => {
            let mut v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
            v["grid"]["step"] = serde_json::json!(step);
            scenario::parse_scenario(&v.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var(WORKERS_ENV) {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("{WORKERS_ENV} must be a positive integer, got {n:?}");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(passed) => {
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run {
            scenario,
            checks,
            out,
            format,
        } => {
            let scenario = load(&scenario, cli.grid_step)?;
            let all = checks.contains(&Check::All);
            let set = CheckSet {
                equilibrium: true,
                strong: all || checks.contains(&Check::Strong),
                coalition_proof: all || checks.contains(&Check::CoalitionProof),
            };
            let report = run_scenario(&scenario, set, cli.tolerance)?;
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&report)?,
                Format::Csv => scenario::report_to_csv(&scenario, &report)?,
            };
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => println!("{text}"),
            }
            let passed = report.verification.is_pbe_and_efficient()
                && report.strong.as_ref().map_or(true, |s| s.strong)
                && report
                    .coalition_proof
                    .as_ref()
                    .map_or(true, |c| c.coalition_proof);
            Ok(passed)
        }
        Command::Reach { scenario } => {
            let scenario = load(&scenario, cli.grid_step)?;
            let table = ReachTable::build(&scenario.game)?;
            println!("sender,state,reach_upper,reach_lower");
            for (j, rows) in table.rows.iter().enumerate() {
                for e in rows {
                    println!(
                        "{j},{},{},{}",
                        e.state,
                        e.upper.map_or(String::new(), |v| v.to_string()),
                        e.lower.map_or(String::new(), |v| v.to_string()),
                    );
                }
            }
            Ok(true)
        }
        Command::Suite { prop } => {
            let report = run_proposition_suite(&prop)?;
            for item in &report.items {
                let verdict = if item.reproduced { "REPRODUCED" } else { "FAILED" };
                println!("{verdict}  {}  ({})", item.name, item.detail);
            }
            Ok(report.all_reproduced())
        }
    }
}
