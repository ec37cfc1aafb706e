//! `marscopter`: run, validate and sweep octorotor control scenarios.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use marscopter_core::config::{Run, Scenario};
use marscopter_core::error::Error;
use marscopter_core::scenarios;
use marscopter_core::sim::{write_csv, write_metrics, Metrics};

#[derive(Parser, Debug)]
#[command(name = "marscopter", version, about = "Mars octorotor MPC/PID simulation runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Source {
    /// Scenario file (TOML).
    #[arg(long, short = 'c', conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Name of a shipped scenario (see `marscopter scenarios`).
    #[arg(long, short = 's')]
    scenario: Option<String>,
    /// Override a config entry, e.g. `--set mpc.horizon=60`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug, Clone)]
struct RunFlags {
    /// Output root; replaces `sim.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces `sim.controller`.
    #[arg(long, value_parser = ["mpc", "pid", "both"])]
    controller: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one scenario and write log.csv, metrics.json and config.toml.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Check every section of a scenario and print derived quantities.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// Run several scenarios in parallel.
    Sweep {
        /// Scenario files. Repeatable.
        #[arg(long = "config", short = 'c')]
        configs: Vec<PathBuf>,
        /// Shipped scenario names. Repeatable.
        #[arg(long = "scenario", short = 's')]
        names: Vec<String>,
        /// Every shipped scenario.
        #[arg(long)]
        all: bool,
        /// Applied to every scenario.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[command(flatten)]
        flags: RunFlags,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List the shipped scenarios.
    Scenarios,
}

/// Exit status for configuration problems; run failures use 1.
const EXIT_CONFIG: u8 = 2;

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { source, flags } => cmd_run(&source, &flags),
        Command::Validate { source } => cmd_validate(&source),
        Command::Sweep {
            configs,
            names,
            all,
            set,
            flags,
            jobs,
        } => cmd_sweep(configs, names, all, &set, &flags, jobs),
        Command::Scenarios => {
            for s in scenarios::list_scenarios() {
                println!("{:<16} {}\n{:<16} figure: {}", s.name, s.description, "", s.figure);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn overrides(set: &[String], flags: Option<&RunFlags>) -> Vec<String> {
    let mut all = set.to_vec();
    if let Some(f) = flags {
        if let Some(seed) = f.seed {
            all.push(format!("sim.seed={seed}"));
        }
        if let Some(c) = &f.controller {
            all.push(format!("sim.controller=\"{c}\""));
        }
    }
    all
}

fn load(config: Option<&Path>, name: Option<&str>, set: &[String]) -> Result<Scenario, Failure> {
    let loaded = match (config, name) {
        (Some(path), _) => Scenario::from_path(path, set),
        (None, Some(name)) => scenarios::load(name, set),
        (None, None) => return Err(Failure::Config(anyhow::anyhow!("give --config <file> or --scenario <name>"))),
    };
    let scenario = loaded.map_err(|e| Failure::Config(e.into()))?;
    let violations = scenario.violations();
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(Failure::Config(anyhow::anyhow!(
            "scenario `{}` is invalid:\n{}",
            scenario.name,
            list.join("\n")
        )));
    }
    Ok(scenario)
}

fn cmd_validate(source: &Source) -> Result<(), Failure> {
    let scenario = load(source.config.as_deref(), source.scenario.as_deref(), &source.set)?;
    println!("scenario `{}` is valid", scenario.name);
    println!("{}", scenario.report());
    Ok(())
}

fn cmd_run(source: &Source, flags: &RunFlags) -> Result<(), Failure> {
    let set = overrides(&source.set, Some(flags));
    let scenario = load(source.config.as_deref(), source.scenario.as_deref(), &set)?;
    let root = flags.out.clone().unwrap_or_else(|| scenario.output_dir.clone());
    let runs = simulate(&scenario)?;
    write_outputs(&root, &scenario, &runs)?;
    print_summary(&scenario, &runs);
    println!("outputs in {}", root.join(&scenario.name).display());
    Ok(())
}

/// Every requested controller must finish before anything is written.
fn simulate(scenario: &Scenario) -> Result<Vec<Run>, Failure> {
    let mut runs = Vec::new();
    for kind in scenario.controller.kinds() {
        match scenario.run(kind) {
            Ok(run) => runs.push(run),
            Err(failure) => {
                let t = failure.log.records.last().map(|r| r.t).unwrap_or(0.0);
                let err = anyhow::anyhow!(
                    "{} on `{}` failed after {} steps (t = {t:.2} s): {}",
                    kind,
                    scenario.name,
                    failure.log.records.len(),
                    failure.error
                );
                return Err(match failure.error {
                    Error::Invalid(_) | Error::InvalidParameter { .. } | Error::Config(_) => Failure::Config(err),
                    _ => Failure::Run(err),
                });
            }
        }
    }
    Ok(runs)
}

fn write_outputs(root: &Path, scenario: &Scenario, runs: &[Run]) -> anyhow::Result<()> {
    for run in runs {
        let dir = root.join(&scenario.name).join(run.kind.as_str());
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let csv = fs::File::create(dir.join("log.csv")).context("creating log.csv")?;
        write_csv(&run.log, BufWriter::new(csv))?;
        let json = fs::File::create(dir.join("metrics.json")).context("creating metrics.json")?;
        write_metrics(&run.metrics, BufWriter::new(json))?;
        fs::write(dir.join("config.toml"), &scenario.snapshot).context("writing config.toml")?;
    }
    Ok(())
}

fn rows(m: &Metrics) -> Vec<(&'static str, String)> {
    let [ox, oy, oz] = m.max_overshoot;
    let [px, py, pz] = m.max_overshoot_pct;
    vec![
        ("rms position error [m]", format!("{:.5}", m.rms_position_error)),
        ("max position error [m]", format!("{:.5}", m.max_position_error)),
        ("final position error [m]", format!("{:.5}", m.final_position_error)),
        ("overshoot x/y/z [m]", format!("{ox:.4}/{oy:.4}/{oz:.4}")),
        ("overshoot x/y/z [%]", format!("{px:.2}/{py:.2}/{pz:.2}")),
        ("settling time [s]", format!("{:.2}", m.settling_time)),
        ("control effort", format!("{:.4e}", m.control_effort)),
        ("constraint violations", m.constraint_violations.to_string()),
    ]
}

fn print_summary(scenario: &Scenario, runs: &[Run]) {
    println!("scenario `{}` (seed {})", scenario.name, scenario.settings.seed);
    let tables: Vec<Vec<(&str, String)>> = runs.iter().map(|r| rows(&r.metrics)).collect();
    print!("{:<26}", "metric");
    for r in runs {
        print!("{:>24}", r.kind.as_str());
    }
    println!();
    for i in 0..tables[0].len() {
        print!("{:<26}", tables[0][i].0);
        for t in &tables {
            print!("{:>24}", t[i].1);
        }
        println!();
    }
}

fn cmd_sweep(
    configs: Vec<PathBuf>,
    names: Vec<String>,
    all: bool,
    set: &[String],
    flags: &RunFlags,
    jobs: Option<usize>,
) -> Result<(), Failure> {
    let set = overrides(set, Some(flags));
    let mut list = Vec::new();
    for path in &configs {
        list.push(load(Some(path), None, &set)?);
    }
    let mut names = names;
    if all {
        names.extend(scenarios::list_scenarios().iter().map(|s| s.name.to_string()));
    }
    for name in &names {
        list.push(load(None, Some(name), &set)?);
    }
    if list.is_empty() {
        return Err(Failure::Config(anyhow::anyhow!("nothing to sweep: give --config, --scenario or --all")));
    }
    let workers = jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .clamp(1, list.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, anyhow::Result<Vec<Run>>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(scenario) = list.get(i) else { break };
                let root = flags.out.clone().unwrap_or_else(|| scenario.output_dir.clone());
                let outcome = match simulate(scenario) {
                    Ok(runs) => write_outputs(&root, scenario, &runs).map(|_| runs),
                    Err(Failure::Config(e)) | Err(Failure::Run(e)) => Err(e),
                };
                results.lock().expect("no worker panics while holding the lock").push((i, outcome));
            });
        }
    });
    let mut results = results.into_inner().expect("workers joined");
    results.sort_by_key(|(i, _)| *i);

    println!(
        "{:<18}{:<6}{:>14}{:>14}{:>16}{:>8}",
        "scenario", "ctrl", "rms [m]", "overshoot [m]", "effort", "viol"
    );
    let mut failures = 0;
    for (i, outcome) in &results {
        let name = &list[*i].name;
        match outcome {
            Ok(runs) => {
                for r in runs {
                    let m = &r.metrics;
                    let os = m.max_overshoot.iter().cloned().fold(0.0, f64::max);
                    println!(
                        "{:<18}{:<6}{:>14.5}{:>14.4}{:>16.4e}{:>8}",
                        name, r.kind.as_str(), m.rms_position_error, os, m.control_effort, m.constraint_violations
                    );
                }
            }
            Err(e) => {
                failures += 1;
                println!("{name:<18}FAILED: {e:#}");
            }
        }
    }
    if failures > 0 {
        return Err(Failure::Run(anyhow::anyhow!("{failures} of {} scenarios failed", list.len())));
    }
    Ok(())
}
