//! Built-in scenarios: the Table I reference world and random small instances.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::coverage::CoverageSchedule;
use super::data::GaussianMixture;
use super::offload::mark_sensitive;
use super::partition::{partition_dataset, PartitionMode};
use super::{ClientProfile, ClusterSpec, DatasetHandle, IslSpec, ScenarioError, ScenarioSpec};
use crate::cost_model::ModelFootprint;
use crate::rng;

/// Synthetic training data attached to the reference scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceData {
    pub mixture: GaussianMixture,
    pub partition: PartitionMode,
    /// Defaults to 1 − α^max.
    pub sensitive_fraction: Option<f64>,
    pub test_samples: usize,
}

impl Default for ReferenceData {
    fn default() -> Self {
        Self {
            mixture: GaussianMixture {
                classes: 10,
                dim: 16,
                mean_scale: 1.0,
                class_means: None,
                noise_sigma: 1.0,
                seed: 0,
            },
            partition: PartitionMode::Shard {
                shards_per_client: 2,
                total_shards: None,
            },
            sensitive_fraction: None,
            test_samples: 2000,
        }
    }
}

/// Parameters of the reference scenario. Defaults follow Table I.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceParams {
    pub clusters: usize,
    pub clients_per_cluster: usize,
    pub samples_per_client: usize,
    pub sun_facing_clusters: usize,
    pub sun_power_w: f64,
    pub sat_max_freq_hz: f64,
    pub sat_cycles_per_sample: f64,
    pub sat_tx_power_w: f64,
    pub client_freq_range_hz: (f64, f64),
    pub client_cycles_per_sample: f64,
    pub client_power_range_w: (f64, f64),
    pub period_s: f64,
    pub isl_rate_bps: f64,
    pub pathloss_exponent: f64,
    pub noise_density_w_per_hz: f64,
    pub energy_coeff: f64,
    pub bandwidth_hz: f64,
    pub sat_initial_energy_j: f64,
    pub sat_min_residual_j: f64,
    pub max_offload_fraction: f64,
    pub sat_distance_m: f64,
    pub glob_delay_s: f64,
    pub sync_delay_s: f64,
    pub energy_budget_j: f64,
    pub sample_bits: f64,
    /// Parameter count used for S(w) in the cost model.
    pub footprint_params: u64,
    /// Draw one set of client profiles and reuse it in every cluster.
    pub homogeneous_clusters: bool,
    pub data: Option<ReferenceData>,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self {
            clusters: 5,
            clients_per_cluster: 10,
            samples_per_client: 1200,
            sun_facing_clusters: 3,
            sun_power_w: 5.0,
            sat_max_freq_hz: 1e10,
            sat_cycles_per_sample: 3e7,
            sat_tx_power_w: 10.0,
            client_freq_range_hz: (1e8, 3e8),
            client_cycles_per_sample: 3e7,
            client_power_range_w: (0.1, 0.3),
            period_s: 360.0,
            isl_rate_bps: 3.125e6,
            pathloss_exponent: 2.0,
            noise_density_w_per_hz: 3.98e-21,
            energy_coeff: 1e-28,
            bandwidth_hz: 10e6,
            sat_initial_energy_j: 500.0,
            sat_min_residual_j: 100.0,
            max_offload_fraction: 0.8,
            sat_distance_m: 784e3,
            glob_delay_s: 1.0,
            sync_delay_s: 1.0,
            energy_budget_j: 0.5,
            sample_bits: 6272.0,
            footprint_params: 100_000,
            homogeneous_clusters: true,
            data: Some(ReferenceData::default()),
        }
    }
}

impl ReferenceParams {
    pub fn without_data(mut self) -> Self {
        self.data = None;
        self
    }

    pub fn footprint(&self) -> ModelFootprint {
        ModelFootprint::new(self.footprint_params, 32, self.sample_bits)
    }

    fn cluster(&self, j: usize, client_ids: Vec<u32>) -> ClusterSpec {
        ClusterSpec {
            id: j as u32,
            client_ids,
            bandwidth_hz: self.bandwidth_hz,
            sun_facing: j < self.sun_facing_clusters,
            sun_power_w: self.sun_power_w,
            sat_max_freq_hz: self.sat_max_freq_hz,
            sat_cycles_per_sample: self.sat_cycles_per_sample,
            sat_tx_power_w: self.sat_tx_power_w,
            isl: IslSpec::Rate {
                isl_rate_bps: self.isl_rate_bps,
            },
            sat_initial_energy_j: self.sat_initial_energy_j,
            sat_min_residual_j: self.sat_min_residual_j,
            coverage: CoverageSchedule::FixedT {
                period_s: self.period_s,
            },
            glob_delay_s: self.glob_delay_s,
            sync_delay_s: self.sync_delay_s,
            max_offload_samples: None,
            pathloss_exponent: self.pathloss_exponent,
            noise_density_w_per_hz: self.noise_density_w_per_hz,
            sat_distance_m: self.sat_distance_m,
            energy_coeff: self.energy_coeff,
        }
    }

    /// Builds the scenario description without a corpus (sizes only).
    pub fn spec(&self, seed: u64) -> ScenarioSpec {
        let n = self.samples_per_client;
        let sensitive = self.sensitive_count();
        self.assemble(seed, |_, _| DatasetHandle::synthetic(n, sensitive))
    }

    fn sensitive_fraction(&self) -> f64 {
        self.data
            .as_ref()
            .and_then(|d| d.sensitive_fraction)
            .unwrap_or(1.0 - self.max_offload_fraction)
    }

    fn sensitive_count(&self) -> usize {
        super::offload::offload_count(self.sensitive_fraction(), self.samples_per_client)
    }

    fn assemble(&self, seed: u64, mut dataset: impl FnMut(usize, u32) -> DatasetHandle) -> ScenarioSpec {
        let mut profile_rng = rng::stream(seed, &[rng::tag::PROFILE]);
        let per = self.clients_per_cluster;
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let (f_lo, f_hi) = self.client_freq_range_hz;
            let (p_lo, p_hi) = self.client_power_range_w;
            (rng.gen_range(f_lo..=f_hi), rng.gen_range(p_lo..=p_hi))
        };
        let template: Vec<(f64, f64)> = (0..per).map(|_| draw(&mut profile_rng)).collect();
        let mut clients = Vec::with_capacity(self.clusters * per);
        let mut clusters = Vec::with_capacity(self.clusters);
        for j in 0..self.clusters {
            let mut ids = Vec::with_capacity(per);
            for i in 0..per {
                let id = (j * per + i) as u32;
                let (f, p) = if self.homogeneous_clusters {
                    template[i]
                } else {
                    draw(&mut profile_rng)
                };
                clients.push(ClientProfile {
                    id,
                    cluster_id: j as u32,
                    cpu_freq_hz: f,
                    cycles_per_sample: self.client_cycles_per_sample,
                    tx_power_w: p,
                    max_offload_fraction: self.max_offload_fraction,
                    energy_budget_j: self.energy_budget_j,
                    sat_distance_m: None,
                    dataset: dataset(j * per + i, id),
                });
                ids.push(id);
            }
            clusters.push(self.cluster(j, ids));
        }
        ScenarioSpec {
            clusters,
            clients,
            footprint: self.footprint(),
            corpus: None,
            seed,
        }
    }

    /// Builds the scenario with a synthetic, partitioned corpus and returns the
    /// held-out test set alongside it.
    pub fn spec_with_data(
        &self,
        seed: u64,
    ) -> Result<(ScenarioSpec, Option<super::SampleSet>), ScenarioError> {
        let Some(data) = &self.data else {
            return Ok((self.spec(seed), None));
        };
        let k = self.clusters * self.clients_per_cluster;
        let corpus = data.mixture.generate(k * self.samples_per_client, 0)?;
        let test = data.mixture.generate(data.test_samples, 1)?;
        let parts = partition_dataset(&corpus, k, data.partition, seed)?;
        let fraction = self.sensitive_fraction();
        let mut spec = self.assemble(seed, |pos, id| mark_sensitive(&parts[pos], fraction, seed, id));
        spec.corpus = Some(Arc::new(corpus));
        Ok((spec, Some(test)))
    }
}

/// A random small instance for solver tests and benches: `clusters` clusters
/// of `clients` clients with heterogeneous compute, power and dataset sizes.
pub fn random_instance(seed: u64, clusters: usize, clients: usize) -> ScenarioSpec {
    let mut r = rng::stream(seed, &[rng::tag::PROFILE, 99]);
    let base = ReferenceParams::default().without_data();
    let mut out_clients = Vec::new();
    let mut out_clusters = Vec::new();
    for j in 0..clusters {
        let mut cl = base.cluster(j, Vec::new());
        cl.sun_facing = r.gen_bool(0.5);
        cl.sat_max_freq_hz = r.gen_range(5e8..=1e10);
        cl.sat_initial_energy_j = r.gen_range(250.0..=800.0);
        cl.sat_min_residual_j = r.gen_range(50.0..=120.0);
        cl.bandwidth_hz = r.gen_range(1e6..=1e7);
        cl.coverage = CoverageSchedule::FixedT {
            period_s: r.gen_range(150.0..=500.0),
        };
        cl.glob_delay_s = r.gen_range(0.5..=2.0);
        cl.sync_delay_s = r.gen_range(0.5..=2.0);
        for i in 0..clients {
            let id = (j * clients + i) as u32;
            let size = r.gen_range(200..=1500usize);
            let alpha_max = r.gen_range(0.3..=0.9);
            let sensitive = size - (alpha_max * size as f64).ceil() as usize;
            out_clients.push(ClientProfile {
                id,
                cluster_id: j as u32,
                cpu_freq_hz: r.gen_range(1e8..=3e8),
                cycles_per_sample: base.client_cycles_per_sample,
                tx_power_w: r.gen_range(0.1..=0.3),
                max_offload_fraction: alpha_max,
                energy_budget_j: r.gen_range(0.45..=1.0),
                sat_distance_m: None,
                dataset: DatasetHandle::synthetic(size, sensitive),
            });
            cl.client_ids.push(id);
        }
        out_clusters.push(cl);
    }
    ScenarioSpec {
        clusters: out_clusters,
        clients: out_clients,
        footprint: base.footprint(),
        corpus: None,
        seed,
    }
}
