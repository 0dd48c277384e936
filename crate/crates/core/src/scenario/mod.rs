//! The world being simulated: clusters of ground clients, the satellites that
//! serve them, client datasets and coverage schedules.
//!
//! A [`ScenarioSpec`] is a plain, editable description. [`validate_scenario`]
//! checks it and produces an immutable [`Scenario`] in which every cluster's
//! members are resolved to positions in the client list.

pub mod config;
pub mod coverage;
pub mod data;
pub mod offload;
pub mod partition;
pub mod reference;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::cost_model::{self, IslLinkParams, ModelFootprint};
pub use coverage::{CoverageInterval, CoverageSchedule};
pub use data::SampleSet;
pub use offload::apply_offload;
pub use partition::{partition_dataset, PartitionMode};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("data: {0}")]
    Data(String),
    #[error("coverage schedule: {0}")]
    Coverage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("offload: {0}")]
    Offload(String),
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl ScenarioError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Sample indices (into the scenario corpus) owned by one client.
///
/// `retained` is always `sensitive ∪ nonsensitive \ offloaded`, kept sorted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetHandle {
    pub sensitive: Vec<usize>,
    pub nonsensitive: Vec<usize>,
    pub offloaded: Vec<usize>,
    pub retained: Vec<usize>,
}

impl DatasetHandle {
    pub fn new(mut sensitive: Vec<usize>, mut nonsensitive: Vec<usize>) -> Self {
        sensitive.sort_unstable();
        nonsensitive.sort_unstable();
        let mut retained: Vec<usize> = sensitive.iter().chain(&nonsensitive).copied().collect();
        retained.sort_unstable();
        Self {
            sensitive,
            nonsensitive,
            offloaded: Vec::new(),
            retained,
        }
    }

    /// A dataset of `size` samples without a backing corpus, for
    /// optimization-only scenarios. The first `sensitive` indices are sensitive.
    pub fn synthetic(size: usize, sensitive: usize) -> Self {
        let sensitive = sensitive.min(size);
        Self::new((0..sensitive).collect(), (sensitive..size).collect())
    }

    /// |D_k|.
    pub fn len(&self) -> usize {
        self.sensitive.len() + self.nonsensitive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.sensitive.iter().chain(&self.nonsensitive).copied().collect();
        v.sort_unstable();
        v
    }
}

impl Serialize for DatasetHandle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("DatasetHandle", 4)?;
        st.serialize_field("size", &self.len())?;
        st.serialize_field("sensitive", &self.sensitive.len())?;
        st.serialize_field("offloaded", &self.offloaded.len())?;
        st.serialize_field("retained", &self.retained.len())?;
        st.end()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClientProfile {
    pub id: u32,
    pub cluster_id: u32,
    /// f_{C,k}, cycles per second.
    pub cpu_freq_hz: f64,
    /// m_{C,k}, cycles per sample.
    pub cycles_per_sample: f64,
    /// p_{C,k}, watts.
    pub tx_power_w: f64,
    /// α_k^max.
    pub max_offload_fraction: f64,
    /// δ, joules per round for local compute plus upload.
    pub energy_budget_j: f64,
    /// Overrides the cluster's shared uplink distance.
    pub sat_distance_m: Option<f64>,
    pub dataset: DatasetHandle,
}

impl ClientProfile {
    pub fn dataset_size(&self) -> usize {
        self.dataset.len()
    }
}

/// How the ISL rate is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IslSpec {
    Rate { isl_rate_bps: f64 },
    Link { isl_link: IslLinkParams },
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterSpec {
    pub id: u32,
    pub client_ids: Vec<u32>,
    /// B_j, hertz.
    pub bandwidth_hz: f64,
    pub sun_facing: bool,
    /// P_j^sun, watts.
    pub sun_power_w: f64,
    /// f_S^max.
    pub sat_max_freq_hz: f64,
    /// m_S.
    pub sat_cycles_per_sample: f64,
    /// p_{S,j}.
    pub sat_tx_power_w: f64,
    pub isl: IslSpec,
    /// E_j^original.
    pub sat_initial_energy_j: f64,
    /// ψ.
    pub sat_min_residual_j: f64,
    pub coverage: CoverageSchedule,
    /// τ_j^glob.
    pub glob_delay_s: f64,
    /// τ_j^sync.
    pub sync_delay_s: f64,
    /// A_j^max. `None` means Σ α_k^max |D_k|.
    pub max_offload_samples: Option<u64>,
    /// ξ.
    pub pathloss_exponent: f64,
    /// N_0, W/Hz.
    pub noise_density_w_per_hz: f64,
    /// Shared client-to-satellite distance, metres.
    pub sat_distance_m: f64,
    /// κ.
    pub energy_coeff: f64,
}

impl ClusterSpec {
    /// P_j^charge.
    pub fn charge_power_w(&self) -> f64 {
        if self.sun_facing {
            self.sun_power_w
        } else {
            0.0
        }
    }

    /// The coverage time used for optimization: T, or the mean dwell.
    pub fn period_s(&self) -> f64 {
        self.coverage.mean_s()
    }

    pub fn isl_rate_bps(&self) -> f64 {
        match &self.isl {
            IslSpec::Rate { isl_rate_bps } => *isl_rate_bps,
            IslSpec::Link { isl_link } => cost_model::isl_rate(isl_link),
        }
    }
}

/// Unvalidated scenario description.
#[derive(Clone, Debug)]
pub struct ScenarioSpec {
    pub clusters: Vec<ClusterSpec>,
    pub clients: Vec<ClientProfile>,
    pub footprint: ModelFootprint,
    /// Backing samples for the dataset handles, if any.
    pub corpus: Option<Arc<SampleSet>>,
    /// Seed for offload selection.
    pub seed: u64,
}

/// A validated, immutable scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    spec: ScenarioSpec,
    members: Vec<Vec<usize>>,
}

impl Scenario {
    pub fn clusters(&self) -> &[ClusterSpec] {
        &self.spec.clusters
    }

    pub fn cluster(&self, j: usize) -> &ClusterSpec {
        &self.spec.clusters[j]
    }

    pub fn clients(&self) -> &[ClientProfile] {
        &self.spec.clients
    }

    pub fn client(&self, k: usize) -> &ClientProfile {
        &self.spec.clients[k]
    }

    /// Positions (into [`Scenario::clients`]) of cluster `j`'s members.
    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    pub fn num_clusters(&self) -> usize {
        self.spec.clusters.len()
    }

    pub fn num_clients(&self) -> usize {
        self.spec.clients.len()
    }

    pub fn footprint(&self) -> &ModelFootprint {
        &self.spec.footprint
    }

    pub fn corpus(&self) -> Option<&Arc<SampleSet>> {
        self.spec.corpus.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    /// Cluster index (position) of client position `k`.
    pub fn cluster_of(&self, k: usize) -> usize {
        self.members
            .iter()
            .position(|m| m.contains(&k))
            .expect("validated scenarios assign every client")
    }

    /// A_j^max in samples.
    pub fn max_offload_samples(&self, j: usize) -> f64 {
        let capacity = self.offload_capacity(j);
        match self.spec.clusters[j].max_offload_samples {
            Some(a) => (a as f64).min(capacity),
            None => capacity,
        }
    }

    /// Σ_k α_k^max |D_k| over cluster `j`.
    pub fn offload_capacity(&self, j: usize) -> f64 {
        self.members[j]
            .iter()
            .map(|&k| {
                let c = &self.spec.clients[k];
                c.max_offload_fraction * c.dataset_size() as f64
            })
            .sum()
    }

    /// Uplink distance of client position `k`.
    pub fn distance_m(&self, k: usize) -> f64 {
        let c = &self.spec.clients[k];
        c.sat_distance_m
            .unwrap_or_else(|| self.spec.clusters[self.cluster_of(k)].sat_distance_m)
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    /// Returns the editable description, for deriving variants.
    pub fn into_spec(self) -> ScenarioSpec {
        self.spec
    }

    pub(crate) fn with_clients(&self, clients: Vec<ClientProfile>) -> Scenario {
        let mut spec = self.spec.clone();
        spec.clients = clients;
        Scenario {
            spec,
            members: self.members.clone(),
        }
    }
}

fn positive(errors: &mut Vec<String>, what: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errors.push(format!("{what} must be positive and finite, got {v}"));
    }
}

fn non_negative(errors: &mut Vec<String>, what: &str, v: f64) {
    if !(v >= 0.0 && v.is_finite()) {
        errors.push(format!("{what} must be non-negative and finite, got {v}"));
    }
}

/// Checks every invariant and resolves cluster membership.
pub fn validate_scenario(spec: ScenarioSpec) -> Result<Scenario, ScenarioError> {
    let mut errors = Vec::new();
    if spec.clusters.is_empty() {
        errors.push("scenario has no clusters".to_string());
    }

    let mut position: HashMap<u32, usize> = HashMap::new();
    for (i, c) in spec.clients.iter().enumerate() {
        if position.insert(c.id, i).is_some() {
            errors.push(format!("duplicate client id {}", c.id));
        }
        let who = format!("client {}", c.id);
        positive(&mut errors, &format!("{who} cpu_freq_hz"), c.cpu_freq_hz);
        positive(&mut errors, &format!("{who} cycles_per_sample"), c.cycles_per_sample);
        positive(&mut errors, &format!("{who} tx_power_w"), c.tx_power_w);
        positive(&mut errors, &format!("{who} energy_budget_j"), c.energy_budget_j);
        if !(0.0..=1.0).contains(&c.max_offload_fraction) {
            errors.push(format!(
                "{who}: offload fraction out of range ({})",
                c.max_offload_fraction
            ));
        }
        if let Some(d) = c.sat_distance_m {
            positive(&mut errors, &format!("{who} sat_distance_m"), d);
        }
        if c.dataset.is_empty() {
            errors.push(format!("{who} has an empty dataset"));
        }
        let ns = c.dataset.nonsensitive.len() as f64;
        if (c.max_offload_fraction * c.dataset.len() as f64).round_ties_even() > ns {
            errors.push(format!(
                "{who}: α^max |D| exceeds the {ns} non-sensitive samples"
            ));
        }
        if let Some(corpus) = &spec.corpus {
            if c.dataset.all().iter().any(|&i| i >= corpus.len()) {
                errors.push(format!("{who} references samples outside the corpus"));
            }
        }
    }

    let mut owner: HashMap<u32, u32> = HashMap::new();
    let mut cluster_ids: HashMap<u32, ()> = HashMap::new();
    let mut members = Vec::with_capacity(spec.clusters.len());
    for cl in &spec.clusters {
        let who = format!("cluster {}", cl.id);
        if cluster_ids.insert(cl.id, ()).is_some() {
            errors.push(format!("duplicate cluster id {}", cl.id));
        }
        if cl.client_ids.is_empty() {
            errors.push(format!("{who}: empty cluster"));
        }
        positive(&mut errors, &format!("{who} bandwidth_hz"), cl.bandwidth_hz);
        positive(&mut errors, &format!("{who} sat_max_freq_hz"), cl.sat_max_freq_hz);
        positive(&mut errors, &format!("{who} sat_cycles_per_sample"), cl.sat_cycles_per_sample);
        positive(&mut errors, &format!("{who} sat_tx_power_w"), cl.sat_tx_power_w);
        positive(&mut errors, &format!("{who} sat_initial_energy_j"), cl.sat_initial_energy_j);
        non_negative(&mut errors, &format!("{who} sat_min_residual_j"), cl.sat_min_residual_j);
        non_negative(&mut errors, &format!("{who} glob_delay_s"), cl.glob_delay_s);
        non_negative(&mut errors, &format!("{who} sync_delay_s"), cl.sync_delay_s);
        positive(&mut errors, &format!("{who} pathloss_exponent"), cl.pathloss_exponent);
        positive(&mut errors, &format!("{who} noise_density_w_per_hz"), cl.noise_density_w_per_hz);
        positive(&mut errors, &format!("{who} sat_distance_m"), cl.sat_distance_m);
        positive(&mut errors, &format!("{who} energy_coeff"), cl.energy_coeff);
        positive(&mut errors, &format!("{who} coverage period"), cl.period_s());
        if cl.sun_facing && !(cl.sun_power_w > 0.0) {
            errors.push(format!("{who}: sun-facing cluster needs sun_power_w > 0"));
        }
        if cl.sun_power_w < 0.0 {
            errors.push(format!("{who}: sun_power_w is negative"));
        }
        match &cl.isl {
            IslSpec::Rate { isl_rate_bps } => {
                positive(&mut errors, &format!("{who} isl_rate_bps"), *isl_rate_bps)
            }
            IslSpec::Link { isl_link } => {
                if let Err(e) = isl_link.validate() {
                    errors.push(format!("{who}: {e}"));
                }
            }
        }
        let mut m = Vec::with_capacity(cl.client_ids.len());
        for &cid in &cl.client_ids {
            if let Some(prev) = owner.insert(cid, cl.id) {
                errors.push(format!(
                    "client {cid} assigned to multiple clusters ({prev} and {})",
                    cl.id
                ));
            }
            match position.get(&cid) {
                Some(&p) => {
                    if spec.clients[p].cluster_id != cl.id {
                        errors.push(format!(
                            "client {cid} lists cluster {} but is a member of cluster {}",
                            spec.clients[p].cluster_id, cl.id
                        ));
                    }
                    m.push(p);
                }
                None => errors.push(format!("{who} references unknown client {cid}")),
            }
        }
        members.push(m);
    }
    for c in &spec.clients {
        if !owner.contains_key(&c.id) {
            errors.push(format!("client {} assigned to no cluster", c.id));
        }
    }
    if spec.footprint.param_count == 0 {
        errors.push("model footprint has zero parameters".to_string());
    }
    non_negative(&mut errors, "sample_bits", spec.footprint.sample_bits);

    if errors.is_empty() {
        Ok(Scenario { spec, members })
    } else {
        Err(ScenarioError::Invalid(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cluster(alpha_max: f64) -> ScenarioSpec {
        let mut spec = reference::ReferenceParams::default().without_data().spec(3);
        spec.clients.truncate(2);
        spec.clusters.truncate(1);
        spec.clusters[0].client_ids = vec![spec.clients[0].id, spec.clients[1].id];
        for c in &mut spec.clients {
            c.cluster_id = spec.clusters[0].id;
            c.max_offload_fraction = alpha_max;
        }
        spec
    }

    #[test]
    fn reference_scenario_is_valid() {
        let s = validate_scenario(reference::ReferenceParams::default().without_data().spec(1)).unwrap();
        assert_eq!(s.num_clusters(), 5);
        assert_eq!(s.num_clients(), 50);
        assert_eq!(s.clusters().iter().filter(|c| c.sun_facing).count(), 3);
    }

    #[test]
    fn empty_cluster_is_rejected() {
        let mut spec = one_cluster(0.8);
        spec.clusters[0].client_ids.clear();
        let err = validate_scenario(spec).unwrap_err().to_string();
        assert!(err.contains("empty cluster"), "{err}");
    }

    #[test]
    fn offload_fraction_above_one_is_rejected() {
        let err = validate_scenario(one_cluster(1.2)).unwrap_err().to_string();
        assert!(err.contains("offload fraction out of range"), "{err}");
    }

    #[test]
    fn duplicate_and_orphan_clients() {
        let mut spec = one_cluster(0.8);
        spec.clients[1].id = spec.clients[0].id;
        let err = validate_scenario(spec).unwrap_err().to_string();
        assert!(err.contains("duplicate client id"), "{err}");

        let mut spec = one_cluster(0.8);
        spec.clusters[0].client_ids.pop();
        let err = validate_scenario(spec).unwrap_err().to_string();
        assert!(err.contains("assigned to no cluster"), "{err}");
    }

    #[test]
    fn capacity_and_default_a_max() {
        let s = validate_scenario(one_cluster(0.5)).unwrap();
        assert_eq!(s.offload_capacity(0), 1200.0);
        assert_eq!(s.max_offload_samples(0), 1200.0);
    }
}
