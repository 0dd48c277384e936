//! TOML scenario files.
//!
//! A file either builds on the reference world (optionally tweaked through
//! `[reference]` and `[[cluster_overrides]]`) or lists `[[clusters]]` and
//! `[[clients]]` explicitly. Training, optimizer and model settings live in
//! their own tables. Relative paths resolve against the file's directory.
//!
//! ```toml
//! seed = 3
//! [reference]
//! sat_initial_energy_j = 700.0
//! [[cluster_overrides]]
//! cluster = 4
//! schedule_file = "coverage/varying.txt"
//! [training]
//! rounds = 40
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::coverage::{load_coverage_schedule, CoverageSchedule};
use super::data::{load_csv, load_idx, GaussianMixture, SampleSet};
use super::offload::mark_sensitive;
use super::partition::{partition_dataset, PartitionMode};
use super::reference::ReferenceParams;
use super::{validate_scenario, ClientProfile, ClusterSpec, DatasetHandle, IslSpec, Scenario, ScenarioError, ScenarioSpec};
use crate::cost_model::{IslLinkParams, ModelFootprint};
use crate::fl::{Layout, TrainConfig};
use crate::optimizer::OptimizerConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub seed: u64,
    /// Reference-world parameters; used when no clusters are listed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cluster_overrides: Vec<ClusterOverride>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clusters: Vec<ClusterEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clients: Vec<ClientEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footprint: Option<FootprintEntry>,
    /// Defaults to an MLP with 32 hidden units sized to the data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Layout>,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

/// Changes applied to one reference cluster (by position).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterOverride {
    pub cluster: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sun_facing: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sat_initial_energy_j: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterEntry {
    pub id: u32,
    pub clients: Vec<u32>,
    pub bandwidth_hz: f64,
    pub sun_facing: bool,
    pub sun_power_w: f64,
    pub sat_max_freq_hz: f64,
    pub sat_cycles_per_sample: f64,
    pub sat_tx_power_w: f64,
    pub isl_rate_bps: f64,
    /// Derive the ISL rate from link parameters instead of `isl_rate_bps`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isl_link: Option<IslLinkParams>,
    pub sat_initial_energy_j: f64,
    pub sat_min_residual_j: f64,
    pub coverage_seconds: f64,
    /// Explicit coverage intervals; takes precedence over `coverage_seconds`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule_file: Option<PathBuf>,
    pub glob_delay_s: f64,
    pub sync_delay_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_offload_samples: Option<u64>,
    pub pathloss_exponent: f64,
    pub noise_density_w_per_hz: f64,
    pub sat_distance_m: f64,
    pub energy_coeff: f64,
}

impl Default for ClusterEntry {
    fn default() -> Self {
        let r = ReferenceParams::default();
        Self {
            id: 0,
            clients: Vec::new(),
            bandwidth_hz: r.bandwidth_hz,
            sun_facing: false,
            sun_power_w: r.sun_power_w,
            sat_max_freq_hz: r.sat_max_freq_hz,
            sat_cycles_per_sample: r.sat_cycles_per_sample,
            sat_tx_power_w: r.sat_tx_power_w,
            isl_rate_bps: r.isl_rate_bps,
            isl_link: None,
            sat_initial_energy_j: r.sat_initial_energy_j,
            sat_min_residual_j: r.sat_min_residual_j,
            coverage_seconds: r.period_s,
            schedule_file: None,
            glob_delay_s: r.glob_delay_s,
            sync_delay_s: r.sync_delay_s,
            max_offload_samples: None,
            pathloss_exponent: r.pathloss_exponent,
            noise_density_w_per_hz: r.noise_density_w_per_hz,
            sat_distance_m: r.sat_distance_m,
            energy_coeff: r.energy_coeff,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientEntry {
    pub id: u32,
    pub cpu_freq_hz: f64,
    pub cycles_per_sample: f64,
    pub tx_power_w: f64,
    pub max_offload_fraction: f64,
    pub energy_budget_j: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sat_distance_m: Option<f64>,
    /// Dataset size when the scenario has no `[data]` table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Defaults to 1 − α^max.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitive_fraction: Option<f64>,
}

impl Default for ClientEntry {
    fn default() -> Self {
        let r = ReferenceParams::default();
        Self {
            id: 0,
            cpu_freq_hz: 0.5 * (r.client_freq_range_hz.0 + r.client_freq_range_hz.1),
            cycles_per_sample: r.client_cycles_per_sample,
            tx_power_w: 0.5 * (r.client_power_range_w.0 + r.client_power_range_w.1),
            max_offload_fraction: r.max_offload_fraction,
            energy_budget_j: r.energy_budget_j,
            sat_distance_m: None,
            samples: None,
            sensitive_fraction: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    #[serde(default = "default_partition")]
    pub partition: PartitionMode,
}

fn default_partition() -> PartitionMode {
    PartitionMode::Iid
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        mixture: GaussianMixture,
        train_samples: usize,
        test_samples: usize,
    },
    Csv {
        train: PathBuf,
        test: PathBuf,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FootprintEntry {
    pub param_count: u64,
    pub bits_per_param: u32,
    pub sample_bits: f64,
}

impl Default for FootprintEntry {
    fn default() -> Self {
        let f = ReferenceParams::default().footprint();
        Self {
            param_count: f.param_count,
            bits_per_param: f.bits_per_param,
            sample_bits: f.sample_bits,
        }
    }
}

/// Everything a run needs from a scenario file.
#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub test: Option<SampleSet>,
    pub layout: Option<Layout>,
    pub training: TrainConfig,
    pub optimizer: OptimizerConfig,
    /// The parsed file, for manifests.
    pub file: ScenarioFile,
}

pub fn load_scenario_file(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}

pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<LoadedScenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
    build_scenario(file, base_dir)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn schedule(base: &Path, file: Option<&PathBuf>, seconds: Option<f64>) -> Result<Option<CoverageSchedule>, ScenarioError> {
    match (file, seconds) {
        (Some(f), _) => load_coverage_schedule(&resolve(base, f)).map(Some),
        (None, Some(t)) => CoverageSchedule::fixed(t).map(Some),
        (None, None) => Ok(None),
    }
}

/// Turns a parsed file into a validated scenario.
pub fn build_scenario(file: ScenarioFile, base_dir: &Path) -> Result<LoadedScenario, ScenarioError> {
    file.training
        .validate()
        .map_err(|e| ScenarioError::Config(e.to_string()))?;
    let (mut spec, test) = if file.clusters.is_empty() {
        if !file.clients.is_empty() || file.data.is_some() {
            return Err(ScenarioError::Config(
                "[[clients]] and [data] need explicit [[clusters]]".into(),
            ));
        }
        let params = file.reference.clone().unwrap_or_default();
        let (mut spec, test) = params.spec_with_data(file.seed)?;
        if let Some(fp) = file.footprint {
            spec.footprint = ModelFootprint::new(fp.param_count, fp.bits_per_param, fp.sample_bits);
        }
        (spec, test)
    } else {
        if file.reference.is_some() {
            return Err(ScenarioError::Config(
                "[reference] cannot be combined with explicit [[clusters]]".into(),
            ));
        }
        explicit_spec(&file, base_dir)?
    };
    for o in &file.cluster_overrides {
        let n = spec.clusters.len();
        let cl = spec
            .clusters
            .get_mut(o.cluster)
            .ok_or_else(|| ScenarioError::Config(format!("override for cluster {} of {n}", o.cluster)))?;
        if let Some(s) = schedule(base_dir, o.schedule_file.as_ref(), o.coverage_seconds)? {
            cl.coverage = s;
        }
        if let Some(v) = o.sun_facing {
            cl.sun_facing = v;
        }
        if let Some(e) = o.sat_initial_energy_j {
            cl.sat_initial_energy_j = e;
        }
    }
    let layout = file.model.or_else(|| {
        test.as_ref().map(|t| Layout::Mlp {
            inputs: t.dim(),
            hidden: 32,
            classes: t.num_classes(),
        })
    });
    if let (Some(l), Some(corpus)) = (layout, &spec.corpus) {
        if l.inputs() != corpus.dim() || l.classes() < corpus.num_classes() {
            return Err(ScenarioError::Config(format!(
                "model {} does not fit data with dim {} and {} classes",
                l.describe(),
                corpus.dim(),
                corpus.num_classes()
            )));
        }
    }
    let mut training = file.training.clone();
    training.seed = if training.seed == 0 { file.seed } else { training.seed };
    Ok(LoadedScenario {
        scenario: validate_scenario(spec)?,
        test,
        layout,
        training,
        optimizer: file.optimizer.clone(),
        file,
    })
}

fn load_data(section: &DataSection, base: &Path) -> Result<(SampleSet, SampleSet), ScenarioError> {
    match &section.source {
        DataSource::Synthetic {
            mixture,
            train_samples,
            test_samples,
        } => Ok((mixture.generate(*train_samples, 0)?, mixture.generate(*test_samples, 1)?)),
        DataSource::Csv { train, test } => {
            let train = load_csv(&resolve(base, train))?;
            let test = load_csv(&resolve(base, test))?;
            let classes = train.num_classes().max(test.num_classes());
            Ok((train.with_num_classes(classes), test.with_num_classes(classes)))
        }
        DataSource::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let train = load_idx(&resolve(base, train_images), &resolve(base, train_labels))?;
            let test = load_idx(&resolve(base, test_images), &resolve(base, test_labels))?;
            let classes = train.num_classes().max(test.num_classes());
            Ok((train.with_num_classes(classes), test.with_num_classes(classes)))
        }
    }
}

fn explicit_spec(file: &ScenarioFile, base: &Path) -> Result<(ScenarioSpec, Option<SampleSet>), ScenarioError> {
    let mut owner = std::collections::HashMap::new();
    for c in &file.clusters {
        for &k in &c.clients {
            if owner.insert(k, c.id).is_some() {
                return Err(ScenarioError::Config(format!("client {k} is listed in two clusters")));
            }
        }
    }
    let (corpus, test, parts) = match &file.data {
        Some(section) => {
            let (train, test) = load_data(section, base)?;
            let parts = partition_dataset(&train, file.clients.len(), section.partition, file.seed)?;
            (Some(Arc::new(train)), Some(test), Some(parts))
        }
        None => (None, None, None),
    };
    let mut clients = Vec::with_capacity(file.clients.len());
    for (pos, c) in file.clients.iter().enumerate() {
        let cluster_id = *owner
            .get(&c.id)
            .ok_or_else(|| ScenarioError::Config(format!("client {} belongs to no cluster", c.id)))?;
        let fraction = c.sensitive_fraction.unwrap_or(1.0 - c.max_offload_fraction);
        let dataset = match (&parts, c.samples) {
            (Some(p), _) => mark_sensitive(&p[pos], fraction, file.seed, c.id),
            (None, Some(n)) => DatasetHandle::synthetic(n, super::offload::offload_count(fraction, n)),
            (None, None) => {
                return Err(ScenarioError::Config(format!(
                    "client {} needs `samples` when there is no [data] table",
                    c.id
                )))
            }
        };
        clients.push(ClientProfile {
            id: c.id,
            cluster_id,
            cpu_freq_hz: c.cpu_freq_hz,
            cycles_per_sample: c.cycles_per_sample,
            tx_power_w: c.tx_power_w,
            max_offload_fraction: c.max_offload_fraction,
            energy_budget_j: c.energy_budget_j,
            sat_distance_m: c.sat_distance_m,
            dataset,
        });
    }
    let clusters = file
        .clusters
        .iter()
        .map(|c| {
            Ok(ClusterSpec {
                id: c.id,
                client_ids: c.clients.clone(),
                bandwidth_hz: c.bandwidth_hz,
                sun_facing: c.sun_facing,
                sun_power_w: c.sun_power_w,
                sat_max_freq_hz: c.sat_max_freq_hz,
                sat_cycles_per_sample: c.sat_cycles_per_sample,
                sat_tx_power_w: c.sat_tx_power_w,
                isl: match c.isl_link {
                    Some(isl_link) => IslSpec::Link { isl_link },
                    None => IslSpec::Rate {
                        isl_rate_bps: c.isl_rate_bps,
                    },
                },
                sat_initial_energy_j: c.sat_initial_energy_j,
                sat_min_residual_j: c.sat_min_residual_j,
                coverage: schedule(base, c.schedule_file.as_ref(), Some(c.coverage_seconds))?
                    .expect("a fixed period is always given"),
                glob_delay_s: c.glob_delay_s,
                sync_delay_s: c.sync_delay_s,
                max_offload_samples: c.max_offload_samples,
                pathloss_exponent: c.pathloss_exponent,
                noise_density_w_per_hz: c.noise_density_w_per_hz,
                sat_distance_m: c.sat_distance_m,
                energy_coeff: c.energy_coeff,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    let fp = file.footprint.unwrap_or_default();
    Ok((
        ScenarioSpec {
            clusters,
            clients,
            footprint: ModelFootprint::new(fp.param_count, fp.bits_per_param, fp.sample_bits),
            corpus,
            seed: file.seed,
        },
        test,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_reference_world() {
        let l = parse_scenario("", Path::new(".")).unwrap();
        assert_eq!(l.scenario.num_clusters(), 5);
        assert_eq!(l.scenario.num_clients(), 50);
        assert_eq!(l.test.as_ref().unwrap().len(), 2000);
        assert_eq!(l.layout, Some(Layout::Mlp { inputs: 16, hidden: 32, classes: 10 }));
    }

    #[test]
    fn overrides_and_reference_fields() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("cov.txt"), "0 0 400\n1 410 826\n2 830 1238\n").unwrap();
        let text = r#"
            seed = 4
            [reference]
            samples_per_client = 100
            sat_initial_energy_j = 700.0
            [[cluster_overrides]]
            cluster = 1
            schedule_file = "cov.txt"
            [training]
            rounds = 7
        "#;
        let l = parse_scenario(text, dir.path()).unwrap();
        assert_eq!(l.scenario.cluster(0).sat_initial_energy_j, 700.0);
        assert!((l.scenario.cluster(1).period_s() - 408.0).abs() < 1e-12);
        assert_eq!(l.training.rounds, 7);
        assert_eq!(l.training.seed, 4);
    }

    #[test]
    fn explicit_clusters_without_data() {
        let text = r#"
            [[clusters]]
            id = 9
            clients = [1, 2]
            sun_facing = true
            coverage_seconds = 300.0
            [[clients]]
            id = 1
            samples = 400
            [[clients]]
            id = 2
            samples = 800
            max_offload_fraction = 0.5
        "#;
        let l = parse_scenario(text, Path::new(".")).unwrap();
        let s = &l.scenario;
        assert_eq!(s.members(0), &[0, 1]);
        assert_eq!(s.client(1).dataset.sensitive.len(), 400);
        assert_eq!(s.cluster(0).period_s(), 300.0);
        assert!(l.test.is_none());
    }

    #[test]
    fn explicit_clusters_with_synthetic_data() {
        let text = r#"
            model = { family = "logistic", inputs = 5, classes = 3 }
            [[clusters]]
            clients = [0, 1, 2]
            [[clients]]
            id = 0
            [[clients]]
            id = 1
            [[clients]]
            id = 2
            [data]
            partition = { kind = "iid" }
            [data.source]
            kind = "synthetic"
            train_samples = 300
            test_samples = 60
            mixture = { classes = 3, dim = 5, noise_sigma = 1.0, seed = 2 }
        "#;
        let l = parse_scenario(text, Path::new(".")).unwrap();
        assert_eq!(l.scenario.client(2).dataset.len(), 100);
        assert_eq!(l.test.unwrap().len(), 60);
    }

    #[test]
    fn mistakes_are_reported() {
        assert!(parse_scenario("bogus = 1", Path::new(".")).is_err());
        let orphan = "[[clusters]]\nclients = [0]\n[[clients]]\nid = 0\nsamples = 10\n[[clients]]\nid = 1\nsamples = 10\n";
        assert!(parse_scenario(orphan, Path::new(".")).is_err());
        assert!(parse_scenario("[training]\nmomentum = 1.5\n", Path::new(".")).is_err());
    }
}
