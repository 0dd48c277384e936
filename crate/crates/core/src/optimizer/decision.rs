use serde::{Deserialize, Serialize};

use crate::cost_model::CostError;
use crate::scenario::Scenario;

/// The optimizer's variables. `alpha` and `bandwidth_hz` are indexed by client
/// position in [`Scenario::clients`], `sat_freq_hz` by cluster position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub alpha: Vec<f64>,
    pub sat_freq_hz: Vec<f64>,
    pub bandwidth_hz: Vec<f64>,
}

impl DecisionVector {
    /// α = 0, f_S = f_S^max and an equal bandwidth split.
    pub fn terrestrial(scenario: &Scenario) -> Self {
        let mut bandwidth_hz = vec![0.0; scenario.num_clients()];
        for j in 0..scenario.num_clusters() {
            let m = scenario.members(j);
            for &k in m {
                bandwidth_hz[k] = scenario.cluster(j).bandwidth_hz / m.len() as f64;
            }
        }
        Self {
            alpha: vec![0.0; scenario.num_clients()],
            sat_freq_hz: scenario.clusters().iter().map(|c| c.sat_max_freq_hz).collect(),
            bandwidth_hz,
        }
    }

    pub fn check_shape(&self, scenario: &Scenario) -> Result<(), CostError> {
        if self.alpha.len() != scenario.num_clients()
            || self.bandwidth_hz.len() != scenario.num_clients()
            || self.sat_freq_hz.len() != scenario.num_clusters()
        {
            return Err(CostError::InvalidInput(format!(
                "decision shape ({} α, {} b, {} f) does not match {} clients / {} clusters",
                self.alpha.len(),
                self.bandwidth_hz.len(),
                self.sat_freq_hz.len(),
                scenario.num_clients(),
                scenario.num_clusters()
            )));
        }
        Ok(())
    }

    pub fn cluster_alpha(&self, scenario: &Scenario, j: usize) -> Vec<f64> {
        scenario.members(j).iter().map(|&k| self.alpha[k]).collect()
    }

    pub fn cluster_bandwidth(&self, scenario: &Scenario, j: usize) -> Vec<f64> {
        scenario.members(j).iter().map(|&k| self.bandwidth_hz[k]).collect()
    }

    pub fn set_cluster_alpha(&mut self, scenario: &Scenario, j: usize, alpha: &[f64]) {
        for (&k, &a) in scenario.members(j).iter().zip(alpha) {
            self.alpha[k] = a;
        }
    }

    pub fn set_cluster_bandwidth(&mut self, scenario: &Scenario, j: usize, b: &[f64]) {
        for (&k, &v) in scenario.members(j).iter().zip(b) {
            self.bandwidth_hz[k] = v;
        }
    }
}
