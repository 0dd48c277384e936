//! Coverage schedules: how long each successive satellite dwells over a cluster.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageInterval {
    pub start_s: f64,
    pub end_s: f64,
}

impl CoverageInterval {
    pub fn dwell_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Either a fixed dwell `T` for every satellite, or an explicit list of
/// intervals for successive satellites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CoverageSchedule {
    FixedT { period_s: f64 },
    Intervals { intervals: Vec<CoverageInterval> },
}

impl CoverageSchedule {
    pub fn fixed(period_s: f64) -> Result<Self, ScenarioError> {
        if !(period_s > 0.0 && period_s.is_finite()) {
            return Err(ScenarioError::Coverage(format!(
                "coverage period must be positive, got {period_s}"
            )));
        }
        Ok(Self::FixedT { period_s })
    }

    pub fn from_intervals(intervals: Vec<CoverageInterval>) -> Result<Self, ScenarioError> {
        if intervals.is_empty() {
            return Err(ScenarioError::Coverage("coverage schedule has no intervals".into()));
        }
        for (i, iv) in intervals.iter().enumerate() {
            if !(iv.start_s.is_finite() && iv.end_s.is_finite()) || iv.end_s <= iv.start_s {
                return Err(ScenarioError::Coverage(format!(
                    "interval {i} [{}, {}) is empty or reversed",
                    iv.start_s, iv.end_s
                )));
            }
            if i > 0 {
                let prev = &intervals[i - 1];
                if iv.start_s < prev.start_s {
                    return Err(ScenarioError::Coverage(format!(
                        "interval {i} starts before interval {}",
                        i - 1
                    )));
                }
                if iv.start_s < prev.end_s {
                    return Err(ScenarioError::Coverage(format!(
                        "intervals {} and {i} overlap",
                        i - 1
                    )));
                }
            }
        }
        Ok(Self::Intervals { intervals })
    }

    /// Interval of the `i`-th satellite. Fixed-T schedules never run out.
    pub fn interval(&self, i: usize) -> Option<CoverageInterval> {
        match self {
            Self::FixedT { period_s } => Some(CoverageInterval {
                start_s: i as f64 * period_s,
                end_s: (i + 1) as f64 * period_s,
            }),
            Self::Intervals { intervals } => intervals.get(i).copied(),
        }
    }

    pub fn dwell_s(&self, i: usize) -> Option<f64> {
        match self {
            Self::FixedT { period_s } => Some(*period_s),
            Self::Intervals { intervals } => intervals.get(i).map(CoverageInterval::dwell_s),
        }
    }

    /// Mean dwell; the value used as `T` when optimizing.
    pub fn mean_s(&self) -> f64 {
        match self {
            Self::FixedT { period_s } => *period_s,
            Self::Intervals { intervals } => {
                intervals.iter().map(CoverageInterval::dwell_s).sum::<f64>() / intervals.len() as f64
            }
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            Self::FixedT { .. } => None,
            Self::Intervals { intervals } => Some(intervals.len()),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Self::FixedT { .. })
    }
}

/// Parses `index start_s end_s` rows (whitespace separated, `#` comments).
pub fn parse_coverage_schedule(text: &str) -> Result<CoverageSchedule, ScenarioError> {
    let mut intervals = Vec::new();
    let mut last_index: Option<i64> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |what: &str| ScenarioError::Coverage(format!("line {}: {what}", lineno + 1));
        if fields.len() != 3 {
            return Err(bad("expected `index start_s end_s`"));
        }
        let index: i64 = fields[0].parse().map_err(|_| bad("index is not an integer"))?;
        let start_s: f64 = fields[1].parse().map_err(|_| bad("start is not a number"))?;
        let end_s: f64 = fields[2].parse().map_err(|_| bad("end is not a number"))?;
        if let Some(prev) = last_index {
            if index <= prev {
                return Err(bad("satellite indices must increase"));
            }
        }
        last_index = Some(index);
        intervals.push(CoverageInterval { start_s, end_s });
    }
    CoverageSchedule::from_intervals(intervals)
}

pub fn load_coverage_schedule(path: &Path) -> Result<CoverageSchedule, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    parse_coverage_schedule(&text)
}

pub fn format_coverage_schedule(schedule: &CoverageSchedule, count: usize) -> String {
    let n = schedule.len().unwrap_or(count).min(count.max(schedule.len().unwrap_or(0)));
    let mut out = String::from("# index start_s end_s\n");
    for i in 0..n {
        if let Some(iv) = schedule.interval(i) {
            out.push_str(&format!("{i} {} {}\n", iv.start_s, iv.end_s));
        }
    }
    out
}

/// Synthesises a varying schedule: dwell times uniform in `[min_s, max_s]`,
/// separated by gaps uniform in `[0, max_gap_s]`.
pub fn synthetic_schedule(
    count: usize,
    min_s: f64,
    max_s: f64,
    max_gap_s: f64,
    seed: u64,
) -> Result<CoverageSchedule, ScenarioError> {
    if !(min_s > 0.0 && max_s >= min_s && max_gap_s >= 0.0) {
        return Err(ScenarioError::Coverage("invalid synthetic schedule bounds".into()));
    }
    let mut rng = rng::stream(seed, &[rng::tag::SCHEDULE]);
    let mut t = 0.0;
    let intervals = (0..count)
        .map(|_| {
            let dwell = if max_s > min_s { rng.gen_range(min_s..=max_s) } else { min_s };
            let iv = CoverageInterval {
                start_s: t,
                end_s: t + dwell,
            };
            let gap = if max_gap_s > 0.0 { rng.gen_range(0.0..=max_gap_s) } else { 0.0 };
            t += dwell + gap;
            iv
        })
        .collect();
    CoverageSchedule::from_intervals(intervals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_t_intervals() {
        let s = CoverageSchedule::fixed(360.0).unwrap();
        let iv = s.interval(3).unwrap();
        assert_eq!((iv.start_s, iv.end_s), (1080.0, 1440.0));
        assert_eq!(s.mean_s(), 360.0);
        assert!(CoverageSchedule::fixed(0.0).is_err());
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(parse_coverage_schedule("").is_err());
        assert!(parse_coverage_schedule("# nothing\n\n").is_err());
    }

    #[test]
    fn mean_dwell_of_varying_file() {
        let text = "0 0 400\n1 410 826\n2 830 1238\n";
        let s = parse_coverage_schedule(text).unwrap();
        assert!((s.mean_s() - 408.0).abs() < 1e-12);
        assert_eq!(s.len(), Some(3));
        assert_eq!(s.dwell_s(1), Some(416.0));
        assert_eq!(s.dwell_s(3), None);
    }

    #[test]
    fn overlap_and_order_are_rejected() {
        assert!(parse_coverage_schedule("0 0 100\n1 50 200\n").is_err());
        assert!(parse_coverage_schedule("0 100 200\n1 0 50\n").is_err());
        assert!(parse_coverage_schedule("1 0 100\n0 100 200\n").is_err());
        assert!(parse_coverage_schedule("0 0 100 7\n").is_err());
    }

    #[test]
    fn synthetic_round_trips_through_text() {
        let s = synthetic_schedule(25, 300.0, 500.0, 30.0, 4).unwrap();
        let text = format_coverage_schedule(&s, 25);
        let back = parse_coverage_schedule(&text).unwrap();
        assert_eq!(s, back);
    }
}
