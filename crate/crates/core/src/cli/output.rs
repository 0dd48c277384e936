//! Artifact writers for run directories.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Baseline, CliError, Decided, ExperimentPlan, ScenarioSource, SeriesRun};
use crate::cost_model::{round_latency, CostBreakdown};
use crate::fl::{Layout, TrainConfig};
use crate::optimizer::grid::GridResult;
use crate::optimizer::{check_feasibility, DecisionVector, FeasibilityReport, OptimizerConfig, TraceEntry};
use crate::scenario::config::{LoadedScenario, ScenarioFile};
use crate::scenario::Scenario;
use crate::sim::{write_metrics, write_timeline};

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| CliError::output(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::output(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::output(path, e))
}

/// `out/<label>/seed_<seed>`, created if missing.
pub fn seed_dir(out: &Path, label: &str, seed: u64) -> Result<PathBuf, CliError> {
    let dir = out.join(label).join(format!("seed_{seed}"));
    fs::create_dir_all(&dir).map_err(|e| CliError::output(&dir, e))?;
    Ok(dir)
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'static str,
    version: &'static str,
    plan: &'a ExperimentPlan,
    seeds: &'a [u64],
    series: Vec<String>,
    scenario: &'a ScenarioFile,
    /// Training settings of the first seed; later seeds differ only in `seed`.
    training: &'a TrainConfig,
    optimizer: &'a OptimizerConfig,
    model: Option<Layout>,
    parallel_feature: bool,
}

pub fn write_manifest(
    out: &Path,
    plan: &ExperimentPlan,
    source: &ScenarioSource,
    first: &LoadedScenario,
    seeds: &[u64],
    series: &[Baseline],
) -> Result<(), CliError> {
    let m = Manifest {
        name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        plan,
        seeds,
        series: series.iter().map(Baseline::label).collect(),
        scenario: &source.file,
        training: &first.training,
        optimizer: &first.optimizer,
        model: first.layout,
        parallel_feature: cfg!(feature = "parallel"),
    };
    write_json(&out.join("manifest.json"), &m)
}

#[derive(Serialize)]
struct DecisionFile<'a> {
    decision: &'a DecisionVector,
    feasible: bool,
    feasibility: Option<FeasibilityReport>,
    cost: Option<CostBreakdown>,
    iterations: Option<usize>,
    trace: Option<&'a [TraceEntry]>,
    fallback: Option<&'a str>,
    grid: Option<GridSummary<'a>>,
}

#[derive(Serialize)]
struct GridSummary<'a> {
    tau_round_s: f64,
    /// BCD τ^round over the grid optimum.
    bcd_over_grid: Option<f64>,
    evaluated: u64,
    decision: &'a DecisionVector,
}

pub fn write_decision(
    dir: &Path,
    scenario: &Scenario,
    decided: &Decided,
    grid: Option<&GridResult>,
) -> Result<(), CliError> {
    let feasibility = check_feasibility(scenario, &decided.decision).ok();
    let cost = round_latency(scenario, &decided.decision).ok();
    let file = DecisionFile {
        decision: &decided.decision,
        feasible: feasibility.as_ref().is_some_and(|r| r.all_pass()),
        feasibility,
        iterations: decided.optimize.as_ref().map(|o| o.iterations),
        trace: decided.optimize.as_ref().map(|o| o.trace.as_slice()),
        fallback: decided.fallback.as_deref(),
        grid: grid.map(|g| GridSummary {
            tau_round_s: g.tau_round_s,
            bcd_over_grid: cost.as_ref().map(|c| c.tau_round_s / g.tau_round_s),
            evaluated: g.evaluated,
            decision: &g.decision,
        }),
        cost,
    };
    write_json(&dir.join("decision.json"), &file)
}

#[derive(Deserialize)]
struct DecisionOnly {
    decision: DecisionVector,
}

/// The decision of a finished run in `dir`, if there is one.
pub fn read_decision(dir: &Path) -> Result<Option<DecisionVector>, CliError> {
    let path = dir.join("decision.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| CliError::output(&path, e))?;
    let d: DecisionOnly = serde_json::from_str(&text).map_err(|e| CliError::output(&path, e))?;
    Ok(Some(d.decision))
}

/// decision.json, metrics.csv and timeline.jsonl of one series run.
pub fn write_series(dir: &Path, scenario: &Scenario, run: &SeriesRun) -> Result<(), CliError> {
    write_decision(dir, scenario, &run.decided, None)?;
    let path = dir.join("metrics.csv");
    let f = File::create(&path).map_err(|e| CliError::output(&path, e))?;
    write_metrics(&run.experiment.records, BufWriter::new(f))?;
    let path = dir.join("timeline.jsonl");
    let f = File::create(&path).map_err(|e| CliError::output(&path, e))?;
    let mut w = BufWriter::new(f);
    write_timeline(&run.experiment.events, &mut w)?;
    w.flush().map_err(|e| CliError::output(&path, e))
}
