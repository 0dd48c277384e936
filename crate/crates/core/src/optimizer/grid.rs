//! Exhaustive grid search over (α, f_S, b) for small clusters.
//!
//! Used to check the BCD solution. Clusters do not interact, so each is
//! searched on its own and τ^round is the largest cluster optimum.
//!
//! For a fixed α the best f_S is the highest battery-feasible grid frequency:
//! τ_rep falls with f_S, and Y_j can only fall as the handoff count drops.
//! The search therefore scans f_S downwards from f_S^max and stops at the
//! first feasible point, then scans every bandwidth split.

use serde::{Deserialize, Serialize};

use super::bandwidth::Uplink;
use super::freq::FreqInputs;
use super::{DecisionVector, OptimizeError};
use crate::cost_model;
use crate::par::{self, Execution};
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub alpha_step: f64,
    /// Ratio between consecutive frequency grid points.
    pub freq_ratio: f64,
    /// The frequency grid spans [f_S^max / freq_span, f_S^max].
    pub freq_span: f64,
    /// Bandwidth is split in units of B / bandwidth_units.
    pub bandwidth_units: usize,
}

impl GridConfig {
    /// Step 1e-3 with 200 bandwidth units for two clients; three clients use
    /// α step 1e-2 and 40 units to keep the search within seconds.
    pub fn for_clients(n: usize) -> Self {
        let (alpha_step, bandwidth_units) = if n <= 2 { (1e-3, 200) } else { (1e-2, 40) };
        Self {
            alpha_step,
            freq_ratio: 1.001,
            freq_span: 1e4,
            bandwidth_units,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GridResult {
    pub tau_round_s: f64,
    pub decision: DecisionVector,
    pub cluster_tau_s: Vec<f64>,
    pub evaluated: u64,
}

/// All ways to split `units` into `parts` positive integers.
fn compositions(units: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![units]];
    }
    let mut out = Vec::new();
    for first in 1..=units.saturating_sub(parts - 1) {
        for mut rest in compositions(units - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

struct ClusterBest {
    tau: f64,
    alpha: Vec<f64>,
    freq: f64,
    bandwidth: Vec<f64>,
    evaluated: u64,
}

fn search_cluster(scenario: &Scenario, j: usize, cfg: GridConfig) -> Option<ClusterBest> {
    let cl = scenario.cluster(j);
    let members = scenario.members(j);
    let n = members.len();
    let period = cl.period_s();
    let b_total = cl.bandwidth_hz;
    let cap = scenario.max_offload_samples(j);

    let splits: Vec<Vec<f64>> = compositions(cfg.bandwidth_units, n)
        .into_iter()
        .map(|c| c.into_iter().map(|u| b_total * u as f64 / cfg.bandwidth_units as f64).collect())
        .collect();
    let ups: Vec<Uplink> = members.iter().map(|&k| Uplink::for_client(scenario, k)).collect();
    // (τ_agg, E_agg) per split and client.
    let agg: Vec<Vec<(f64, f64)>> = splits
        .iter()
        .map(|b| {
            ups.iter()
                .zip(b)
                .map(|(u, &v)| u.latency_energy(v).unwrap_or((f64::INFINITY, f64::INFINITY)))
                .collect()
        })
        .collect();

    let mut freqs = Vec::new();
    let mut f = cl.sat_max_freq_hz;
    while f >= cl.sat_max_freq_hz / cfg.freq_span {
        freqs.push(f);
        f /= cfg.freq_ratio;
    }

    let levels: Vec<Vec<f64>> = members
        .iter()
        .map(|&k| {
            let ub = scenario.client(k).max_offload_fraction;
            let steps = (ub / cfg.alpha_step + 1e-9).floor() as usize;
            let mut v: Vec<f64> = (0..=steps).map(|i| i as f64 * cfg.alpha_step).collect();
            if ub - v[steps] > 1e-12 {
                v.push(ub);
            }
            v
        })
        .collect();

    let overhead = cl.sync_delay_s + cl.glob_delay_s;
    let mut best: Option<ClusterBest> = None;
    let mut evaluated = 0u64;
    let mut idx = vec![0usize; n];
    let mut alpha = vec![0.0; n];
    let mut local = vec![(0.0, 0.0); n];
    let mut tau_agg = vec![0.0; n];
    'outer: loop {
        for i in 0..n {
            alpha[i] = levels[i][idx[i]];
        }
        let a = cost_model::offloaded_samples(scenario, j, &alpha);
        if a <= cap {
            let inp = FreqInputs::for_cluster(scenario, j, a);
            let bound = inp.tau_trans_s + inp.total_cycles / cl.sat_max_freq_hz + overhead;
            let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.tau);
            let f_star = if bound < incumbent {
                freqs.iter().copied().find(|&f| inp.feasible(f))
            } else {
                None
            };
            if let Some(f) = f_star {
                let chain = inp.chain(f).expect("feasible frequency has a chain");
                for (i, &k) in members.iter().enumerate() {
                    local[i] = cost_model::client_compute(scenario, k, alpha[i]);
                }
                let locals: Vec<f64> = local.iter().map(|l| l.0).collect();
                let mut best_y: Option<(f64, usize)> = None;
                for (s, row) in agg.iter().enumerate() {
                    evaluated += 1;
                    let mut ok = true;
                    for (i, &k) in members.iter().enumerate() {
                        if local[i].1 + row[i].1 > scenario.client(k).energy_budget_j {
                            ok = false;
                            break;
                        }
                        tau_agg[i] = row[i].0;
                    }
                    if !ok {
                        continue;
                    }
                    let (y, _) = cost_model::cluster_client_path(&locals, &tau_agg, period, chain.n_handoffs);
                    if best_y.is_none_or(|(v, _)| y < v) {
                        best_y = Some((y, s));
                    }
                }
                if let Some((y, s)) = best_y {
                    let tau = y.max(chain.tau_rep_s) + overhead;
                    if tau < incumbent {
                        best = Some(ClusterBest {
                            tau,
                            alpha: alpha.clone(),
                            freq: f,
                            bandwidth: splits[s].clone(),
                            evaluated: 0,
                        });
                    }
                }
            }
        }
        // Odometer over α levels.
        for i in 0..n {
            idx[i] += 1;
            if idx[i] < levels[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    best.map(|mut b| {
        b.evaluated = evaluated;
        b
    })
}

/// Brute-force optimum of τ^round. Intended for clusters of at most three clients.
pub fn grid_oracle(scenario: &Scenario, cfg: Option<GridConfig>, exec: Execution) -> Result<GridResult, OptimizeError> {
    let results = par::map_range(scenario.num_clusters(), exec, |j| {
        let c = cfg.unwrap_or_else(|| GridConfig::for_clients(scenario.members(j).len()));
        search_cluster(scenario, j, c)
    });
    let mut decision = DecisionVector::terrestrial(scenario);
    let mut cluster_tau_s = Vec::new();
    let mut evaluated = 0;
    for (j, r) in results.into_iter().enumerate() {
        let r = r.ok_or_else(|| OptimizeError::infeasible("grid", Some(j), "no grid point is feasible"))?;
        decision.set_cluster_alpha(scenario, j, &r.alpha);
        decision.set_cluster_bandwidth(scenario, j, &r.bandwidth);
        decision.sat_freq_hz[j] = r.freq;
        cluster_tau_s.push(r.tau);
        evaluated += r.evaluated;
    }
    Ok(GridResult {
        tau_round_s: cluster_tau_s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        decision,
        cluster_tau_s,
        evaluated,
    })
}
