//! Round replay on a simulated clock.
//!
//! A [`Simulation`] applies the offload once, then runs rounds: clients train
//! on their retained samples while a chain of satellites trains on the
//! offloaded ones, handing model and data over the ISL when coverage ends.
//! Each cluster aggregates once both paths finish, and the ground station
//! averages the cluster models. Timing follows the cost model, generalized to
//! explicit coverage intervals.

pub mod engine;
pub mod timeline;

use serde::Serialize;
use thiserror::Error;

use crate::cost_model::{CostError, YCase};
use crate::fl::FlError;
use crate::par::Execution;
use crate::scenario::ScenarioError;

pub use engine::{run_experiment, Experiment, LearningSetup, Simulation};
pub use timeline::{read_metrics, sort_events, write_metrics, write_timeline, Event, MetricsRow};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cluster {cluster}: coverage schedule exhausted at satellite {index}")]
    ScheduleExhausted { cluster: u32, index: usize },
    #[error("cluster {cluster}: {reason}")]
    Stalled { cluster: u32, reason: String },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Fl(#[from] FlError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    /// Carry each chain position's residual battery into the next round
    /// instead of starting every round from E^original.
    pub persistent_battery: bool,
    pub execution: Execution,
}

/// Battery bookkeeping of one satellite for one round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub initial_j: f64,
    pub consumed_j: f64,
    /// Dwell × P^charge; zero for dark clusters.
    pub charged_j: f64,
    pub residual_j: f64,
}

impl EnergyLedger {
    pub fn new(initial_j: f64, consumed_j: f64, charged_j: f64) -> Self {
        Self {
            initial_j,
            consumed_j,
            charged_j,
            residual_j: initial_j - consumed_j + charged_j,
        }
    }
}

/// One satellite of a cluster's relay chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SatelliteRecord {
    /// Position in the coverage schedule.
    pub satellite: usize,
    /// Absolute arrival and departure on the simulated clock.
    pub arrival_s: f64,
    pub departure_s: f64,
    /// Seconds the satellite spends busy (handoff receive plus compute).
    pub busy_s: f64,
    pub compute_s: f64,
    pub cycles: f64,
    pub samples: usize,
    pub relay_only: bool,
    pub ledger: EnergyLedger,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterRecord {
    pub cluster: u32,
    pub handoffs: Vec<SatelliteRecord>,
    pub n_satellites_used: usize,
    pub y_case: YCase,
    pub y_s: f64,
    pub tau_rep_s: f64,
    pub tau_cluster_s: f64,
    pub total_cycles: f64,
    pub client_energy_j: Vec<f64>,
    /// Satellites whose residual fell below ψ.
    pub below_floor: usize,
}

impl ClusterRecord {
    pub fn computed_cycles(&self) -> f64 {
        self.handoffs.iter().map(|s| s.cycles).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub start_s: f64,
    pub tau_round_s: f64,
    /// Clock at the end of the round.
    pub clock_s: f64,
    pub clusters: Vec<ClusterRecord>,
    pub accuracy: Option<f64>,
    pub loss: Option<f64>,
}
