//! Block coordinate descent over (α, f_S, b).

use serde::Serialize;

use super::alpha::{solve_alpha, ClusterTerms};
use super::bandwidth::{solve_bandwidth, solve_cluster_bandwidth};
use super::feasibility::{check_feasibility, FeasibilityReport};
use super::freq::{solve_cluster_freq, solve_freq, FreqInputs};
use super::{DecisionVector, OptimizeError, OptimizerConfig};
use crate::cost_model::{self, CostBreakdown};
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStep {
    Init,
    Alpha,
    Freq,
    Bandwidth,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub block: BlockStep,
    /// τ^round after the block.
    pub tau_round_s: f64,
    /// False when the block's proposal was worse or infeasible and was dropped.
    pub accepted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizeOutput {
    pub decision: DecisionVector,
    pub cost: CostBreakdown,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub report: FeasibilityReport,
}

/// α_k = α_k^max / 2 scaled into A_j^max and raised to the energy floor
/// (then moved toward that floor if the satellites cannot carry it),
/// b split equally (or at the energy floors when that is infeasible), f_S from
/// the frequency block.
pub fn initial_decision(scenario: &Scenario, cfg: &OptimizerConfig) -> Result<DecisionVector, OptimizeError> {
    let mut d = DecisionVector::terrestrial(scenario);
    match &cfg.pinned_alpha {
        Some(a) => {
            if a.len() != scenario.num_clients() {
                return Err(OptimizeError::infeasible(
                    "init",
                    None,
                    format!("{} pinned α values for {} clients", a.len(), scenario.num_clients()),
                ));
            }
            d.alpha.clone_from(a);
        }
        None => {
            for j in 0..scenario.num_clusters() {
                let members = scenario.members(j);
                let mut alpha: Vec<f64> = members
                    .iter()
                    .map(|&k| scenario.client(k).max_offload_fraction / 2.0)
                    .collect();
                let a = cost_model::offloaded_samples(scenario, j, &alpha);
                let cap = scenario.max_offload_samples(j);
                if a > cap {
                    alpha.iter_mut().for_each(|x| *x *= cap / a * (1.0 - 1e-12));
                }
                let b = d.cluster_bandwidth(scenario, j);
                let lower = ClusterTerms::new(scenario, j, &b)
                    .map(|t| t.lower)
                    .unwrap_or_else(|_| vec![0.0; alpha.len()]);
                for (x, lb) in alpha.iter_mut().zip(&lower) {
                    *x = x.max(*lb);
                }
                // Back off toward the energy floor while the satellites cannot carry the load.
                for _ in 0..60 {
                    let a = cost_model::offloaded_samples(scenario, j, &alpha);
                    if solve_cluster_freq(&FreqInputs::for_cluster(scenario, j, a), cfg.bisect).is_ok() {
                        break;
                    }
                    for (x, lb) in alpha.iter_mut().zip(&lower) {
                        *x = lb + 0.5 * (*x - lb);
                    }
                }
                d.set_cluster_alpha(scenario, j, &alpha);
            }
        }
    }
    for j in 0..scenario.num_clusters() {
        let b = d.cluster_bandwidth(scenario, j);
        let alpha = d.cluster_alpha(scenario, j);
        let ok = members_within_budget(scenario, j, &alpha, &b);
        if !ok {
            let b = solve_cluster_bandwidth(scenario, j, &alpha, scenario.cluster(j).sat_max_freq_hz, cfg.bisect)
                .map_err(|reason| OptimizeError::infeasible("init", Some(j), reason))?;
            d.set_cluster_bandwidth(scenario, j, &b);
        }
    }
    for (j, s) in solve_freq(scenario, &d, cfg)?.into_iter().enumerate() {
        d.sat_freq_hz[j] = s.freq_hz;
    }
    Ok(d)
}

fn members_within_budget(scenario: &Scenario, j: usize, alpha: &[f64], b: &[f64]) -> bool {
    scenario.members(j).iter().zip(alpha).zip(b).all(|((&k, &a), &bw)| {
        let (_, el) = cost_model::client_compute(scenario, k, a);
        cost_model::client_uplink(scenario, k, bw).is_ok_and(|(_, ea)| el + ea <= scenario.client(k).energy_budget_j)
    })
}

/// Evaluates `decision`, returning its cost when every hard constraint holds.
fn evaluate(scenario: &Scenario, decision: &DecisionVector) -> Result<(CostBreakdown, FeasibilityReport), OptimizeError> {
    let report = check_feasibility(scenario, decision)?;
    let cost = cost_model::round_latency(scenario, decision)?;
    Ok((cost, report))
}

/// Runs up to `cfg.iterations` rounds of α → f_S → b updates from `init`
/// (or [`initial_decision`]). A block's proposal replaces the current point
/// only if it is feasible and does not increase τ^round.
pub fn optimize(
    scenario: &Scenario,
    cfg: &OptimizerConfig,
    init: Option<DecisionVector>,
) -> Result<OptimizeOutput, OptimizeError> {
    let mut decision = match init {
        Some(d) => d,
        None => initial_decision(scenario, cfg)?,
    };
    let (mut cost, mut report) = evaluate(scenario, &decision)?;
    if !report.all_pass() {
        let failed: Vec<String> = report.failures().map(|c| format!("{} {}", c.id, c.subject)).collect();
        return Err(OptimizeError::infeasible(
            "init",
            None,
            format!("initial point violates {}", failed.join(", ")),
        )
        .with_report(report));
    }
    let mut trace = vec![TraceEntry {
        iteration: 0,
        block: BlockStep::Init,
        tau_round_s: cost.tau_round_s,
        accepted: true,
    }];
    let mut iterations = 0;
    for it in 1..=cfg.iterations {
        iterations = it;
        let before = cost.tau_round_s;
        for block in [BlockStep::Alpha, BlockStep::Freq, BlockStep::Bandwidth] {
            let proposal = match block {
                BlockStep::Alpha if cfg.pinned_alpha.is_some() => continue,
                BlockStep::Alpha => solve_alpha(scenario, &decision, cfg).map(|u| DecisionVector {
                    alpha: u.alpha,
                    sat_freq_hz: u.sat_freq_hz,
                    bandwidth_hz: decision.bandwidth_hz.clone(),
                }),
                BlockStep::Freq => solve_freq(scenario, &decision, cfg).map(|f| DecisionVector {
                    sat_freq_hz: f.into_iter().map(|s| s.freq_hz).collect(),
                    ..decision.clone()
                }),
                BlockStep::Bandwidth => solve_bandwidth(scenario, &decision, cfg).map(|per| {
                    let mut d = decision.clone();
                    for (j, b) in per.iter().enumerate() {
                        d.set_cluster_bandwidth(scenario, j, b);
                    }
                    d
                }),
                BlockStep::Init => unreachable!(),
            }
            .map_err(|e| e.with_report(report.clone()))?;
            let accepted = match evaluate(scenario, &proposal) {
                Ok((c, r)) if r.all_pass() && c.tau_round_s <= cost.tau_round_s => {
                    decision = proposal;
                    cost = c;
                    report = r;
                    true
                }
                _ => false,
            };
            trace.push(TraceEntry {
                iteration: it,
                block,
                tau_round_s: cost.tau_round_s,
                accepted,
            });
        }
        if before - cost.tau_round_s < cfg.rel_tol * before {
            break;
        }
    }
    Ok(OptimizeOutput {
        decision,
        cost,
        trace,
        iterations,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Execution;
    use crate::scenario::reference::{random_instance, ReferenceParams};
    use crate::scenario::validate_scenario;

    #[test]
    fn zero_iterations_returns_init() {
        let s = validate_scenario(ReferenceParams::default().without_data().spec(0)).unwrap();
        let cfg = OptimizerConfig {
            iterations: 0,
            ..Default::default()
        };
        let init = initial_decision(&s, &cfg).unwrap();
        let out = optimize(&s, &cfg, Some(init.clone())).unwrap();
        assert_eq!(out.decision, init);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn reference_improves_on_init_and_stays_feasible() {
        let s = validate_scenario(ReferenceParams::default().without_data().spec(0)).unwrap();
        let out = optimize(&s, &OptimizerConfig::default(), None).unwrap();
        assert!(out.report.all_pass());
        assert!(out.cost.tau_round_s < out.trace[0].tau_round_s);
        for w in out.trace.windows(2) {
            assert!(w[1].tau_round_s <= w[0].tau_round_s);
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let s = validate_scenario(random_instance(5, 3, 4)).unwrap();
        let par = optimize(&s, &OptimizerConfig::default(), None);
        let seq = optimize(
            &s,
            &OptimizerConfig {
                execution: Execution::Sequential,
                ..Default::default()
            },
            None,
        );
        match (par, seq) {
            (Ok(a), Ok(b)) => assert_eq!(a.decision, b.decision),
            (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
            _ => panic!("execution modes disagree on feasibility"),
        }
    }
}
