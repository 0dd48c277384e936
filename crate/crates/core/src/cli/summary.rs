//! Time-to-target-accuracy summaries of a run directory.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::Path;

use serde::{Serialize, Serializer};

use super::CliError;
use crate::sim::{read_metrics, MetricsRow};

/// Rounds averaged for a run's asymptotic accuracy.
pub const TAIL_ROUNDS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Target {
    Absolute(f64),
    /// This fraction of the best asymptotic accuracy any series reaches
    /// with the same seed.
    RelativeToBest(f64),
}

impl Default for Target {
    fn default() -> Self {
        Target::RelativeToBest(0.9)
    }
}

/// First round whose accuracy reaches the target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Crossing {
    Reached { round: usize, clock_s: f64 },
    NotReached,
}

impl Crossing {
    pub fn clock_s(&self) -> Option<f64> {
        match self {
            Crossing::Reached { clock_s, .. } => Some(*clock_s),
            Crossing::NotReached => None,
        }
    }
}

impl Serialize for Crossing {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Hit {
            round: usize,
            clock_s: f64,
        }
        match *self {
            Crossing::Reached { round, clock_s } => Hit { round, clock_s }.serialize(s),
            Crossing::NotReached => s.serialize_str("not reached"),
        }
    }
}

pub fn first_crossing(rows: &[MetricsRow], target: f64) -> Crossing {
    rows.iter()
        .find(|r| r.accuracy.is_some_and(|a| a >= target))
        .map_or(Crossing::NotReached, |r| Crossing::Reached {
            round: r.round,
            clock_s: r.clock_s,
        })
}

/// Mean accuracy over the last [`TAIL_ROUNDS`] rounds.
pub fn asymptotic_accuracy(rows: &[MetricsRow]) -> Option<f64> {
    let acc: Vec<f64> = rows.iter().filter_map(|r| r.accuracy).collect();
    if acc.is_empty() {
        return None;
    }
    let tail = &acc[acc.len().saturating_sub(TAIL_ROUNDS)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub target_accuracy: f64,
    pub time_to_target: Crossing,
    pub final_accuracy: Option<f64>,
    pub asymptotic_accuracy: Option<f64>,
    pub final_clock_s: f64,
    pub rounds: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesSummary {
    pub label: String,
    pub seeds: Vec<SeedSummary>,
    pub reached: usize,
    /// Mean over the seeds that reached the target.
    pub mean_time_to_target_s: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub target: Target,
    pub series: Vec<SeriesSummary>,
}

impl Summary {
    pub fn series(&self, label: &str) -> Option<&SeriesSummary> {
        self.series.iter().find(|s| s.label == label)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<20} {:>9} {:>16}  per seed", "series", "reached", "mean time (s)");
        for s in &self.series {
            let mean = s.mean_time_to_target_s.map_or("not reached".into(), |t| format!("{t:.1}"));
            let per: Vec<String> = s
                .seeds
                .iter()
                .map(|d| match d.time_to_target {
                    Crossing::Reached { clock_s, .. } => format!("{}:{clock_s:.0}", d.seed),
                    Crossing::NotReached => format!("{}:-", d.seed),
                })
                .collect();
            let _ = writeln!(
                out,
                "{:<20} {:>9} {:>16}  {}",
                s.label,
                format!("{}/{}", s.reached, s.seeds.len()),
                mean,
                per.join(" ")
            );
        }
        out
    }
}

fn sorted_dirs(dir: &Path) -> Result<Vec<(String, std::path::PathBuf)>, CliError> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(|e| CliError::output(dir, e))? {
        let e = e.map_err(|e| CliError::output(dir, e))?;
        if e.path().is_dir() {
            out.push((e.file_name().to_string_lossy().into_owned(), e.path()));
        }
    }
    out.sort();
    Ok(out)
}

/// Reads every `<series>/seed_<n>/metrics.csv` under `dir`.
pub fn collect_runs(dir: &Path) -> Result<Vec<(String, Vec<(u64, Vec<MetricsRow>)>)>, CliError> {
    let mut series = Vec::new();
    for (label, path) in sorted_dirs(dir)? {
        let mut runs = Vec::new();
        for (name, seed_path) in sorted_dirs(&path)? {
            let Some(seed) = name.strip_prefix("seed_").and_then(|s| s.parse::<u64>().ok()) else {
                continue;
            };
            let csv = seed_path.join("metrics.csv");
            if !csv.exists() {
                continue;
            }
            let f = File::open(&csv).map_err(|e| CliError::output(&csv, e))?;
            runs.push((seed, read_metrics(f)?));
        }
        runs.sort_by_key(|r| r.0);
        if !runs.is_empty() {
            series.push((label, runs));
        }
    }
    Ok(series)
}

/// Per series and seed: simulated seconds until the first round at or above
/// the target accuracy.
pub fn summarize(dir: &Path, target: Target) -> Result<Summary, CliError> {
    let runs = collect_runs(dir)?;
    let target_for = |seed: u64| -> f64 {
        match target {
            Target::Absolute(t) => t,
            Target::RelativeToBest(frac) => {
                let best = runs
                    .iter()
                    .flat_map(|(_, r)| r.iter().filter(|(s, _)| *s == seed))
                    .filter_map(|(_, rows)| asymptotic_accuracy(rows))
                    .fold(f64::NEG_INFINITY, f64::max);
                frac * best
            }
        }
    };
    let series = runs
        .iter()
        .map(|(label, seeds)| {
            let seeds: Vec<SeedSummary> = seeds
                .iter()
                .map(|(seed, rows)| {
                    let t = target_for(*seed);
                    SeedSummary {
                        seed: *seed,
                        target_accuracy: t,
                        time_to_target: first_crossing(rows, t),
                        final_accuracy: rows.last().and_then(|r| r.accuracy),
                        asymptotic_accuracy: asymptotic_accuracy(rows),
                        final_clock_s: rows.last().map_or(0.0, |r| r.clock_s),
                        rounds: rows.len(),
                    }
                })
                .collect();
            let hits: Vec<f64> = seeds.iter().filter_map(|s| s.time_to_target.clock_s()).collect();
            SeriesSummary {
                label: label.clone(),
                reached: hits.len(),
                mean_time_to_target_s: (!hits.is_empty()).then(|| hits.iter().sum::<f64>() / hits.len() as f64),
                seeds,
            }
        })
        .collect();
    Ok(Summary { target, series })
}
