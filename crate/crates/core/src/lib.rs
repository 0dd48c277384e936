//! Cooperative federated learning over ground-to-satellite networks.
//!
//! Clients in remote clusters offload part of their non-sensitive data to the
//! LEO satellite currently covering their region. Clients and the satellite
//! train in parallel; when the satellite leaves, it hands the model and the
//! offloaded data to its successor over an inter-satellite link (ISL). Each
//! cluster then aggregates client and satellite models, and a ground station
//! averages the cluster models.
//!
//! The crate is organised as:
//!
//! - [`scenario`]: clusters, clients, datasets, partitioning and coverage schedules.
//! - [`cost_model`]: the latency and energy formulas composing one round's duration.
//! - [`optimizer`]: block-coordinate descent over offload ratios, satellite CPU
//!   frequency and uplink bandwidth.
//! - [`fl`]: models, local SGD updates and aggregation.
//! - [`sim`]: an event timeline that replays rounds on a simulated clock.
//! - [`analysis`]: convergence-bound quantities and their empirical check.
//! - [`cli`]: experiment plans, artifact writers and summaries.

pub mod analysis;
pub mod cli;
pub mod cost_model;
pub mod fl;
pub mod optimizer;
pub mod par;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use cost_model::{CostBreakdown, ModelFootprint};
pub use optimizer::DecisionVector;
pub use scenario::{ClientProfile, ClusterSpec, Scenario};
