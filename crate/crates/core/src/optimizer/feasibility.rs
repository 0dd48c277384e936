//! Constraint audit of a decision vector.

use serde::Serialize;

use super::DecisionVector;
use crate::cost_model::{self, CostError};
use crate::scenario::Scenario;

/// One constraint instance with its slack; `pass` iff `slack >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintCheck {
    /// "25b" … "25j".
    pub id: &'static str,
    pub subject: String,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub checks: Vec<ConstraintCheck>,
}

impl FeasibilityReport {
    fn push(&mut self, id: &'static str, subject: String, slack: f64) {
        let slack = if slack.is_nan() { f64::NEG_INFINITY } else { slack };
        let slack = slack.clamp(-f64::MAX, f64::MAX);
        self.checks.push(ConstraintCheck {
            id,
            subject,
            slack,
            pass: slack >= 0.0,
        });
    }

    /// True when every hard constraint holds. The learning-bound entry does not count.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().filter(|c| c.id != "25i").all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn min_slack(&self, id: &str) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.id == id)
            .map(|c| c.slack)
            .reduce(f64::min)
    }

    /// Adds the reporting-only learning constraint U ≤ ε.
    pub fn add_learning_bound(&mut self, bound: f64, epsilon: f64) {
        self.push("25i", format!("U = {bound:.6e} vs ε = {epsilon:.6e}"), epsilon - bound);
    }
}

/// Evaluates every hard constraint of the round-latency problem under `decision`.
pub fn check_feasibility(scenario: &Scenario, decision: &DecisionVector) -> Result<FeasibilityReport, CostError> {
    decision.check_shape(scenario)?;
    let mut r = FeasibilityReport::default();
    for j in 0..scenario.num_clusters() {
        let cl = scenario.cluster(j);
        let members = scenario.members(j);
        let mut b_sum = 0.0;
        for &k in members {
            let c = scenario.client(k);
            let a = decision.alpha[k];
            r.push("25b", format!("client {}", c.id), a.min(c.max_offload_fraction - a));
            let gamma = 1.0 - a;
            r.push("25c", format!("client {}", c.id), gamma.min(1.0 - a - gamma));
            let b = decision.bandwidth_hz[k];
            b_sum += b;
            let (_, e_local) = cost_model::client_compute(scenario, k, a);
            let e_agg = cost_model::client_uplink(scenario, k, b).map_or(f64::INFINITY, |(_, e)| e);
            r.push("25f", format!("client {}", c.id), c.energy_budget_j - (e_local + e_agg));
        }
        let f = decision.sat_freq_hz[j];
        r.push("25d", format!("cluster {}", cl.id), f.min(cl.sat_max_freq_hz - f));
        r.push("25e", format!("cluster {}", cl.id), cl.bandwidth_hz - b_sum);

        let alpha = decision.cluster_alpha(scenario, j);
        let a = cost_model::offloaded_samples(scenario, j, &alpha);
        r.push("25j", format!("cluster {}", cl.id), scenario.max_offload_samples(j) - a);

        let id = if cl.sun_facing { "25g" } else { "25h" };
        let (tau_trans, e_trans) = cost_model::cluster_transfer(scenario, j, a);
        let period = cl.period_s();
        match cost_model::satellite_chain(
            cl.sat_cycles_per_sample * a,
            period,
            tau_trans,
            e_trans,
            f,
            cl.energy_coeff,
        ) {
            Ok(chain) => {
                let p = cl.charge_power_w();
                let slack = |dwell: f64, energy: f64| cl.sat_initial_energy_j - energy + dwell * p - cl.sat_min_residual_j;
                for s in 0..chain.n_handoffs {
                    r.push(
                        id,
                        format!("cluster {} satellite {s}", cl.id),
                        slack(chain.full_dwell_s, chain.full_energy_j),
                    );
                }
                r.push(
                    id,
                    format!("cluster {} satellite {}", cl.id, chain.n_handoffs),
                    slack(chain.last_dwell_s, chain.last_energy_j),
                );
            }
            Err(e) => {
                let slack = if period <= tau_trans { period - tau_trans } else { -1.0 };
                r.push(id, format!("cluster {}: {e}", cl.id), slack.min(-f64::MIN_POSITIVE));
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::reference::ReferenceParams;
    use crate::scenario::validate_scenario;

    fn reference() -> Scenario {
        validate_scenario(ReferenceParams::default().without_data().spec(0)).unwrap()
    }

    #[test]
    fn terrestrial_reference_is_feasible() {
        let s = reference();
        let r = check_feasibility(&s, &DecisionVector::terrestrial(&s)).unwrap();
        assert!(r.all_pass(), "{:?}", r.failures().collect::<Vec<_>>());
        assert!(r.checks.iter().all(|c| c.slack.is_finite()));
    }

    #[test]
    fn residual_above_battery_fails() {
        let mut spec = ReferenceParams::default().without_data().spec(0);
        for c in &mut spec.clusters {
            c.sat_min_residual_j = 600.0;
            c.sun_facing = false;
        }
        let s = validate_scenario(spec).unwrap();
        let r = check_feasibility(&s, &DecisionVector::terrestrial(&s)).unwrap();
        assert!(r.min_slack("25h").unwrap() < 0.0);
        assert!(!r.all_pass());
    }

    #[test]
    fn full_bandwidth_has_zero_slack() {
        let s = reference();
        let mut d = DecisionVector::terrestrial(&s);
        d.bandwidth_hz[..10].fill(1e6);
        let r = check_feasibility(&s, &d).unwrap();
        let c = r.checks.iter().find(|c| c.id == "25e").unwrap();
        assert_eq!(c.slack, 0.0);
        assert!(c.pass);
    }
}
