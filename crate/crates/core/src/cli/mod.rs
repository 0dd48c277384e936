//! Command line: experiment plans, runs and their artifacts.
//!
//! A run directory holds one subdirectory per series (baseline or offload
//! ratio) with one `seed_<n>` directory per seed:
//!
//! ```text
//! out/
//!   manifest.json
//!   summary.json
//!   optimized/seed_0/{metrics.csv, timeline.jsonl, decision.json}
//! ```

pub mod output;
pub mod summary;

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, AnalysisError};
use crate::optimizer::grid::grid_oracle;
use crate::optimizer::{optimize, DecisionVector, OptimizeError, OptimizeOutput, OptimizerConfig};
use crate::par::{self, Execution};
use crate::scenario::config::{build_scenario, LoadedScenario, ScenarioFile};
use crate::scenario::{Scenario, ScenarioError};
use crate::sim::{run_experiment, Experiment, LearningSetup, SimConfig, SimError};

pub use summary::{summarize, Crossing, Summary, Target};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Scenario(_) => "scenario",
            CliError::Optimize(_) => "optimize",
            CliError::Sim(_) => "simulate",
            CliError::Analysis(_) => "analysis",
            CliError::Output { .. } => "output",
        }
    }

    pub(crate) fn output(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Output {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Optimize,
    Simulate,
    Analyze,
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum BaselineArg {
    TerrestrialOnly,
    FullOffload,
    FixedRatio,
    Optimized,
}

/// How α is chosen. Every baseline still gets f_S and b optimized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "alpha")]
pub enum Baseline {
    TerrestrialOnly,
    /// α_k = α_k^max.
    FullOffload,
    FixedRatio(f64),
    Optimized,
}

impl Baseline {
    pub fn label(&self) -> String {
        match self {
            Baseline::TerrestrialOnly => "terrestrial_only".into(),
            Baseline::FullOffload => "full_offload".into(),
            Baseline::FixedRatio(r) => format!("alpha_{r}"),
            Baseline::Optimized => "optimized".into(),
        }
    }

    /// The α vector to pin, or `None` for the optimized series. Fixed ratios
    /// are capped at each client's α^max.
    pub fn pinned_alpha(&self, scenario: &Scenario) -> Option<Vec<f64>> {
        let per = |f: &dyn Fn(f64) -> f64| scenario.clients().iter().map(|c| f(c.max_offload_fraction)).collect();
        match *self {
            Baseline::TerrestrialOnly => Some(per(&|_| 0.0)),
            Baseline::FullOffload => Some(per(&|m| m)),
            Baseline::FixedRatio(r) => Some(per(&|m| r.min(m))),
            Baseline::Optimized => None,
        }
    }
}

/// The offload ratios of a sweep, followed by the optimized series.
pub const SWEEP_RATIOS: [f64; 4] = [0.0, 0.3, 0.4, 0.8];

/// Parsed `--seeds` value. A newtype so clap treats it as one value.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedList(pub Vec<u64>);

fn parse_seed_list(s: &str) -> Result<SeedList, String> {
    parse_seeds(s).map(SeedList)
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.parse().map_err(|e| format!("{part}: {e}"))?;
                let b: u64 = b.parse().map_err(|e| format!("{part}: {e}"))?;
                out.extend(a..b);
            }
            None => out.push(part.parse().map_err(|e| format!("{part}: {e}"))?),
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(out)
}

#[derive(Debug, Parser)]
#[command(name = "orbitfed", version, about = "Cooperative ground-satellite federated learning simulator")]
pub struct Args {
    /// Scenario TOML; the built-in reference scenario when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "simulate")]
    pub mode: Mode,
    #[arg(long, value_enum, default_value = "optimized")]
    pub baseline: BaselineArg,
    /// Offload ratio for `--baseline fixed_ratio`.
    #[arg(long)]
    pub alpha_fixed: Option<f64>,
    /// Overrides `training.rounds`.
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Comma-separated seeds or half-open ranges, e.g. `0..10` or `1,4,7`.
    /// Defaults to the scenario seed.
    #[arg(long, value_parser = parse_seed_list)]
    pub seeds: Option<SeedList>,
    /// Absolute accuracy target for the summary. Defaults to 90% of the best
    /// asymptotic accuracy per seed.
    #[arg(long)]
    pub target_acc: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// One mini-batch step per round.
    #[arg(long)]
    pub single_step: bool,
    /// Carry satellite batteries across rounds.
    #[arg(long)]
    pub persistent_battery: bool,
    /// Also solve each cluster by grid search (optimize mode, ≤ 3 clients per cluster).
    #[arg(long)]
    pub grid_oracle: bool,
    /// FedProx proximal weight μ; FedAvg when omitted.
    #[arg(long)]
    pub fedprox_mu: Option<f64>,
}

/// A fully resolved run request.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub scenario: Option<PathBuf>,
    pub mode: Mode,
    pub baseline: Baseline,
    pub fedprox_mu: Option<f64>,
    pub rounds: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub target_acc: Option<f64>,
    #[serde(skip)]
    pub out: PathBuf,
    pub single_step: bool,
    pub persistent_battery: bool,
    pub grid_oracle: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl Args {
    pub fn into_plan(self) -> Result<ExperimentPlan, CliError> {
        let baseline = match (self.baseline, self.alpha_fixed) {
            (BaselineArg::FixedRatio, Some(r)) => Baseline::FixedRatio(r),
            (BaselineArg::FixedRatio, None) => {
                return Err(CliError::Usage("--baseline fixed_ratio needs --alpha-fixed".into()))
            }
            (_, Some(_)) => {
                return Err(CliError::Usage("--alpha-fixed only applies to --baseline fixed_ratio".into()))
            }
            (BaselineArg::TerrestrialOnly, None) => Baseline::TerrestrialOnly,
            (BaselineArg::FullOffload, None) => Baseline::FullOffload,
            (BaselineArg::Optimized, None) => Baseline::Optimized,
        };
        if let Some(t) = self.target_acc {
            if !(0.0..=1.0).contains(&t) {
                return Err(CliError::Usage(format!("--target-acc must lie in [0, 1], got {t}")));
            }
        }
        if let Some(mu) = self.fedprox_mu {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(CliError::Usage(format!("--fedprox-mu must be non-negative, got {mu}")));
            }
        }
        Ok(ExperimentPlan {
            scenario: self.scenario,
            mode: self.mode,
            baseline,
            fedprox_mu: self.fedprox_mu,
            rounds: self.rounds,
            seeds: self.seeds.map(|s| s.0),
            target_acc: self.target_acc,
            out: self.out,
            single_step: self.single_step,
            persistent_battery: self.persistent_battery,
            grid_oracle: self.grid_oracle,
            execution: Execution::default(),
        })
    }
}

/// The parsed scenario file and the directory relative paths resolve against.
#[derive(Clone, Debug)]
pub struct ScenarioSource {
    pub file: ScenarioFile,
    pub base_dir: PathBuf,
}

impl ScenarioSource {
    pub fn open(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ScenarioError::io(p, e))?;
                let file = toml::from_str(&text).map_err(|e| ScenarioError::Config(format!("{}: {e}", p.display())))?;
                Ok(Self {
                    file,
                    base_dir: p.parent().map(Path::to_path_buf).unwrap_or_default(),
                })
            }
            None => Ok(Self {
                file: ScenarioFile::default(),
                base_dir: PathBuf::from("."),
            }),
        }
    }

    /// Builds the scenario with `seed` as both the data and the training seed,
    /// then applies the plan's training overrides.
    pub fn load(&self, seed: u64, plan: &ExperimentPlan) -> Result<LoadedScenario, CliError> {
        let mut file = self.file.clone();
        file.seed = seed;
        file.training.seed = seed;
        if let Some(r) = plan.rounds {
            file.training.rounds = r;
        }
        if let Some(mu) = plan.fedprox_mu {
            file.training.prox_mu = mu;
        }
        file.training.single_step |= plan.single_step;
        Ok(build_scenario(file, &self.base_dir)?)
    }

    pub fn seeds(&self, plan: &ExperimentPlan) -> Vec<u64> {
        plan.seeds.clone().unwrap_or_else(|| vec![self.file.seed])
    }
}

/// The decision a series runs with.
#[derive(Clone, Debug, Serialize)]
pub struct Decided {
    pub decision: DecisionVector,
    pub optimize: Option<OptimizeOutput>,
    /// Set when the optimizer failed for a pinned α and the run fell back to
    /// f_S^max with an equal bandwidth split.
    pub fallback: Option<String>,
}

pub fn decide(scenario: &Scenario, cfg: &OptimizerConfig, baseline: &Baseline) -> Result<Decided, CliError> {
    let mut cfg = cfg.clone();
    cfg.pinned_alpha = baseline.pinned_alpha(scenario);
    match optimize(scenario, &cfg, None) {
        Ok(out) => Ok(Decided {
            decision: out.decision.clone(),
            optimize: Some(out),
            fallback: None,
        }),
        Err(e) => match cfg.pinned_alpha {
            Some(alpha) => {
                let mut decision = DecisionVector::terrestrial(scenario);
                decision.alpha = alpha;
                Ok(Decided {
                    decision,
                    optimize: None,
                    fallback: Some(e.to_string()),
                })
            }
            None => Err(e.into()),
        },
    }
}

/// A requested fixed ratio must lie in [0, min_k α_k^max].
pub fn check_fixed_ratio(scenario: &Scenario, r: f64) -> Result<(), CliError> {
    let cap = scenario
        .clients()
        .iter()
        .map(|c| c.max_offload_fraction)
        .fold(f64::INFINITY, f64::min);
    if (0.0..=cap).contains(&r) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("fixed ratio {r} outside [0, {cap}]")))
    }
}

/// One series × seed run.
#[derive(Clone, Debug)]
pub struct SeriesRun {
    pub label: String,
    pub seed: u64,
    pub decided: Decided,
    pub experiment: Experiment,
}

pub fn learning_setup(loaded: &LoadedScenario) -> Option<LearningSetup> {
    match (loaded.layout, &loaded.test) {
        (Some(layout), Some(test)) if loaded.scenario.corpus().is_some() => Some(LearningSetup {
            layout,
            training: loaded.training.clone(),
            test: std::sync::Arc::new(test.clone()),
        }),
        _ => None,
    }
}

pub fn sim_config(plan: &ExperimentPlan) -> SimConfig {
    SimConfig {
        persistent_battery: plan.persistent_battery,
        execution: plan.execution,
    }
}

/// Decides and simulates one series for one seed.
pub fn run_series(
    loaded: &LoadedScenario,
    baseline: &Baseline,
    seed: u64,
    plan: &ExperimentPlan,
) -> Result<SeriesRun, CliError> {
    let mut opt = loaded.optimizer.clone();
    opt.execution = plan.execution;
    let decided = decide(&loaded.scenario, &opt, baseline)?;
    let experiment = run_experiment(
        &loaded.scenario,
        &decided.decision,
        learning_setup(loaded),
        sim_config(plan),
        loaded.training.rounds,
    )?;
    Ok(SeriesRun {
        label: baseline.label(),
        seed,
        decided,
        experiment,
    })
}

/// What `run` produced.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub out: PathBuf,
    pub labels: Vec<String>,
    pub summary: Option<Summary>,
}

fn series_for(plan: &ExperimentPlan) -> Vec<Baseline> {
    match plan.mode {
        Mode::Sweep => SWEEP_RATIOS
            .iter()
            .map(|&r| Baseline::FixedRatio(r))
            .chain([Baseline::Optimized])
            .collect(),
        _ => vec![plan.baseline],
    }
}

/// Executes `plan` and writes its artifacts.
pub fn run(plan: &ExperimentPlan) -> Result<RunReport, CliError> {
    let source = ScenarioSource::open(plan.scenario.as_deref())?;
    let seeds = source.seeds(plan);
    let series = series_for(plan);
    std::fs::create_dir_all(&plan.out).map_err(|e| CliError::output(&plan.out, e))?;
    let first = source.load(seeds[0], plan)?;
    if let (Baseline::FixedRatio(r), false) = (plan.baseline, plan.mode == Mode::Sweep) {
        check_fixed_ratio(&first.scenario, r)?;
    }
    output::write_manifest(&plan.out, plan, &source, &first, &seeds, &series)?;
    let labels: Vec<String> = series.iter().map(Baseline::label).collect();
    match plan.mode {
        Mode::Optimize => {
            for &seed in &seeds {
                let loaded = source.load(seed, plan)?;
                for b in &series {
                    let mut opt = loaded.optimizer.clone();
                    opt.execution = plan.execution;
                    let decided = decide(&loaded.scenario, &opt, b)?;
                    let grid = if plan.grid_oracle {
                        let s = &loaded.scenario;
                        if (0..s.num_clusters()).any(|j| s.members(j).len() > 3) {
                            return Err(CliError::Usage("--grid-oracle supports clusters of at most 3 clients".into()));
                        }
                        Some(grid_oracle(s, None, plan.execution)?)
                    } else {
                        None
                    };
                    let dir = output::seed_dir(&plan.out, &b.label(), seed)?;
                    output::write_decision(&dir, &loaded.scenario, &decided, grid.as_ref())?;
                }
            }
            Ok(RunReport {
                out: plan.out.clone(),
                labels,
                summary: None,
            })
        }
        Mode::Simulate | Mode::Sweep => {
            let jobs: Vec<(u64, Baseline)> = seeds
                .iter()
                .flat_map(|&s| series.iter().map(move |b| (s, *b)))
                .collect();
            let results = par::map(&jobs, plan.execution, |&(seed, b)| -> Result<(), CliError> {
                let loaded = source.load(seed, plan)?;
                let run = run_series(&loaded, &b, seed, plan)?;
                let dir = output::seed_dir(&plan.out, &run.label, seed)?;
                output::write_series(&dir, &loaded.scenario, &run)
            });
            results.into_iter().collect::<Result<Vec<_>, _>>()?;
            let target = match plan.target_acc {
                Some(t) => Target::Absolute(t),
                None => Target::default(),
            };
            let summary = summarize(&plan.out, target)?;
            output::write_json(&plan.out.join("summary.json"), &summary)?;
            Ok(RunReport {
                out: plan.out.clone(),
                labels,
                summary: Some(summary),
            })
        }
        Mode::Analyze => {
            for &seed in &seeds {
                let loaded = source.load(seed, plan)?;
                let learning = learning_setup(&loaded)
                    .ok_or_else(|| CliError::Usage("analyze needs a scenario with training data".into()))?;
                for b in &series {
                    let dir = output::seed_dir(&plan.out, &b.label(), seed)?;
                    let decision = match output::read_decision(&dir)? {
                        Some(d) => d,
                        None => {
                            let mut opt = loaded.optimizer.clone();
                            opt.execution = plan.execution;
                            decide(&loaded.scenario, &opt, b)?.decision
                        }
                    };
                    let report = analysis::analyze_run(
                        &loaded.scenario,
                        &decision,
                        learning.clone(),
                        sim_config(plan),
                        loaded.training.rounds,
                        ANALYZE_TRIALS,
                        ANALYZE_SAMPLES,
                    )?;
                    output::write_json(&dir.join("bounds.json"), &report)?;
                }
            }
            Ok(RunReport {
                out: plan.out.clone(),
                labels,
                summary: None,
            })
        }
    }
}

/// Random pairs and sample cap for L̂ and ρ̂ in analyze mode.
pub const ANALYZE_TRIALS: usize = 10_000;
pub const ANALYZE_SAMPLES: usize = 256;
