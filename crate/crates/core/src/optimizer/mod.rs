//! Joint choice of offload ratios α, satellite frequencies f_S and client
//! bandwidths b by block coordinate descent.
//!
//! Each block is solved with the other two held fixed:
//! [`alpha::solve_alpha`], [`freq::solve_freq`] and
//! [`bandwidth::solve_bandwidth`]. [`bcd::optimize`] alternates them.

pub mod alpha;
pub mod bandwidth;
pub mod bcd;
pub mod bisect;
pub mod decision;
pub mod feasibility;
pub mod freq;
pub mod grid;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bcd::{optimize, BlockStep, OptimizeOutput, TraceEntry};
pub use bisect::{BisectConfig, BisectResult, BisectStatus};
pub use decision::DecisionVector;
pub use feasibility::{check_feasibility, ConstraintCheck, FeasibilityReport};

use crate::cost_model::CostError;
use crate::par::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Outer BCD iterations I.
    pub iterations: usize,
    /// Stop early once an iteration improves τ^round by less than this fraction.
    pub rel_tol: f64,
    pub bisect: BisectConfig,
    #[serde(skip)]
    pub execution: Execution,
    /// Keep α fixed at these values (client order) and optimize only f and b.
    pub pinned_alpha: Option<Vec<f64>>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            rel_tol: 1e-6,
            bisect: BisectConfig::default(),
            execution: Execution::default(),
            pinned_alpha: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("{block} block infeasible{}: {reason}", cluster_suffix(*.cluster))]
    Infeasible {
        block: &'static str,
        cluster: Option<usize>,
        reason: String,
        report: Option<Box<FeasibilityReport>>,
    },
    #[error(transparent)]
    Cost(#[from] CostError),
}

fn cluster_suffix(cluster: Option<usize>) -> String {
    cluster.map(|j| format!(" in cluster {j}")).unwrap_or_default()
}

impl OptimizeError {
    pub fn infeasible(block: &'static str, cluster: Option<usize>, reason: impl Into<String>) -> Self {
        Self::Infeasible {
            block,
            cluster,
            reason: reason.into(),
            report: None,
        }
    }

    pub fn with_report(self, report: FeasibilityReport) -> Self {
        match self {
            Self::Infeasible {
                block,
                cluster,
                reason,
                ..
            } => Self::Infeasible {
                block,
                cluster,
                reason,
                report: Some(Box::new(report)),
            },
            other => other,
        }
    }
}
