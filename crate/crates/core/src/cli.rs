//! Command-line front end. Exit status: 0 on success, 2 when a
//! verification or certification fails, 1 on any error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{self, WeightMatrix};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::scenario::{load_scenario, RunOptions, Scenario};
use crate::simulate::{self, analyze};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "faultsync", version, about = "Synchronization of linear agent networks that lost their spanning tree")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bicomponents and convex-combination weights, without simulating.
    Analyze(RunArgs),
    /// Agent admissibility and scale-free stability of the protocol.
    Certify(RunArgs),
    /// Simulate the closed-loop network and write the time series.
    Simulate(RunArgs),
    /// Simulate and compare measured behaviour against the predictions.
    Verify(RunArgs),
    /// Remove the scenario's faulty edges, then verify.
    Fault(RunArgs),
    /// Verify several scenarios concurrently.
    Sweep(SweepArgs),
    /// List the bundled scenarios, or write them to a directory.
    Fixtures {
        #[arg(long, value_name = "DIR")]
        export: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    /// Graphviz condensation graph (analyze only).
    Dot,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file, or `fixture:<name>` for a bundled scenario.
    pub scenario: String,
    #[command(flatten)]
    pub opts: SharedArgs,
    /// Output format; `simulate` defaults to csv, everything else to json.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct SharedArgs {
    /// Write output files here instead of printing to stdout.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for random initial states, overriding the scenario's.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pass threshold for verification reports.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Skip the certification gate before simulating.
    #[arg(long)]
    pub no_certify: bool,
    /// Remove the scenario's faulty edges first.
    #[arg(long)]
    pub apply_faults: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(required = true)]
    pub scenarios: Vec<String>,
    #[command(flatten)]
    pub opts: SharedArgs,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl SharedArgs {
    fn run_options(&self, apply_faults: bool) -> RunOptions {
        RunOptions {
            seed: self.seed,
            tolerance: self.tolerance,
            waive_certification: self.no_certify,
            apply_faults: apply_faults || self.apply_faults,
        }
    }
}

/// Resolves a path or `fixture:<name>`.
pub fn resolve_scenario(arg: &str) -> Result<Scenario> {
    match arg.strip_prefix("fixture:") {
        Some(name) => fixtures::load(name),
        None => load_scenario(Path::new(arg)),
    }
}

#[derive(Debug, Serialize)]
pub struct BicomponentSummary {
    pub nodes: Vec<usize>,
    pub basic: bool,
}

/// Output of `analyze`.
#[derive(Debug, Serialize)]
pub struct GraphAnalysis {
    pub scenario: String,
    pub nodes: usize,
    pub edges: usize,
    pub faults_applied: bool,
    pub spanning_tree: bool,
    pub k: usize,
    /// All bicomponents in block order, 1-based labels.
    pub bicomponents: Vec<BicomponentSummary>,
    pub beta: WeightMatrix,
}

/// One finished command: what to write and the exit status.
struct Output {
    file_name: String,
    contents: String,
    status: i32,
}

fn execute(command: &str, args: &RunArgs) -> Result<Output> {
    let scenario = resolve_scenario(&args.scenario)?;
    let id = scenario.id.clone();
    let format = args.format.unwrap_or(if command == "simulate" { Format::Csv } else { Format::Json });
    let allowed = match command {
        "analyze" => format != Format::Csv,
        "simulate" => format != Format::Dot,
        _ => format == Format::Json,
    };
    if !allowed {
        return Err(Error::InvalidArgument(format!("`{command}` cannot write {format:?} output")));
    }
    let opts = args.opts.run_options(command == "fault");
    let exp = scenario.experiment(&opts)?;
    Ok(match command {
        "analyze" => {
            if format == Format::Dot {
                return Ok(Output {
                    file_name: format!("{id}.dot"),
                    contents: exp.graph.condensation_dot(),
                    status: EXIT_OK,
                });
            }
            let partition = exp.graph.bicomponents();
            let beta = analysis::beta_weights(&exp.graph.block_decomposition())?;
            let summary = GraphAnalysis {
                scenario: id.clone(),
                nodes: exp.graph.node_count(),
                edges: exp.graph.edge_count(),
                faults_applied: opts.apply_faults,
                spanning_tree: exp.graph.has_spanning_tree(),
                k: partition.basic_count(),
                bicomponents: partition
                    .components()
                    .iter()
                    .map(|c| BicomponentSummary {
                        nodes: c.nodes.iter().map(|v| v + 1).collect(),
                        basic: c.basic,
                    })
                    .collect(),
                beta,
            };
            Output {
                file_name: format!("{id}.analysis.json"),
                contents: to_json(&summary),
                status: EXIT_OK,
            }
        }
        "certify" => {
            let cert = exp.certify(true)?;
            Output {
                file_name: format!("{id}.certification.json"),
                contents: to_json(&cert),
                status: if cert.passed { EXIT_OK } else { EXIT_FAILED },
            }
        }
        "simulate" => {
            let series = simulate::simulate(&exp.network()?, &exp.x0, exp.settings.horizon, exp.settings.step)?;
            match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    series.write_csv(&mut buf)?;
                    Output {
                        file_name: format!("{id}.timeseries.csv"),
                        contents: String::from_utf8(buf).expect("csv is utf-8"),
                        status: EXIT_OK,
                    }
                }
                _ => Output {
                    file_name: format!("{id}.timeseries.json"),
                    contents: series.to_json() + "\n",
                    status: EXIT_OK,
                },
            }
        }
        _ => {
            let report = analyze(&exp)?;
            Output {
                file_name: format!("{id}.report.json"),
                contents: report.to_json() + "\n",
                status: if report.passed { EXIT_OK } else { EXIT_FAILED },
            }
        }
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn emit(out: &Output, dir: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(&out.file_name), &out.contents)?;
        }
        None => stdout.write_all(out.contents.as_bytes())?,
    }
    Ok(())
}

fn sweep(args: &SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, args.scenarios.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Output>>>> = Mutex::new((0..args.scenarios.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(arg) = args.scenarios.get(i) else { break };
                let run = RunArgs {
                    scenario: arg.clone(),
                    opts: args.opts.clone(),
                    format: None,
                };
                let r = execute("verify", &run);
                results.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });

    let mut status = EXIT_OK;
    let mut seen = std::collections::BTreeSet::new();
    for (arg, r) in args.scenarios.iter().zip(results.into_inner().expect("no worker panicked")) {
        let r = r.expect("every scenario ran");
        let line = match r {
            Ok(out) if !seen.insert(out.file_name.clone()) => {
                status = EXIT_ERROR;
                format!("{arg}: error: duplicate scenario id")
            }
            Ok(out) => {
                if let Some(dir) = args.opts.out.as_deref() {
                    if let Err(e) = emit(&out, Some(dir), stdout) {
                        status = EXIT_ERROR;
                        let _ = writeln!(stderr, "{arg}: {e}");
                    }
                }
                if out.status != EXIT_OK && status == EXIT_OK {
                    status = out.status;
                }
                let verdict = if out.status == EXIT_OK { "passed" } else { "FAILED" };
                format!("{arg}: {verdict}")
            }
            Err(e) => {
                status = EXIT_ERROR;
                format!("{arg}: error: {e}")
            }
        };
        let _ = writeln!(stdout, "{line}");
    }
    status
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let (name, args) = match &cli.command {
        Command::Analyze(a) => ("analyze", a),
        Command::Certify(a) => ("certify", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Verify(a) => ("verify", a),
        Command::Fault(a) => ("fault", a),
        Command::Sweep(s) => return sweep(s, stdout, stderr),
        Command::Fixtures { export } => {
            let result = (|| -> Result<()> {
                for name in fixtures::names() {
                    match export {
                        Some(dir) => {
                            std::fs::create_dir_all(dir)?;
                            std::fs::write(dir.join(format!("{name}.json")), fixtures::source(name).unwrap_or_default())?;
                        }
                        None => writeln!(stdout, "{name}")?,
                    }
                }
                Ok(())
            })();
            return match result {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    EXIT_ERROR
                }
            };
        }
    };
    match execute(name, args).and_then(|out| emit(&out, args.opts.out.as_deref(), stdout).map(|_| out.status)) {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let cli = Cli::try_parse_from(std::iter::once("faultsync").chain(args.iter().copied())).unwrap();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let status = run(cli, &mut out, &mut err);
        (status, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn analyze_chain() {
        let (status, out, _) = run_args(&["analyze", "fixture:chain"]);
        assert_eq!(status, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["k"], 1);
        assert_eq!(v["beta"]["beta"], serde_json::json!([[1.0], [1.0]]));
    }

    #[test]
    fn bad_inputs_exit_with_one() {
        let (status, _, err) = run_args(&["verify", "fixture:missing"]);
        assert_eq!(status, EXIT_ERROR);
        assert!(err.contains("missing"));
        let (status, _, _) = run_args(&["certify", "fixture:chain", "--format", "csv"]);
        assert_eq!(status, EXIT_ERROR);
    }

    #[test]
    fn dot_output() {
        let (status, out, _) = run_args(&["analyze", "fixture:three_node_fault", "--format", "dot"]);
        assert_eq!(status, EXIT_OK);
        assert!(out.starts_with("digraph"));
    }
}
