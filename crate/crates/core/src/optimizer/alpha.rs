//! Offload ratios: how many samples each cluster ships to its satellite and
//! how that total is split among the clients.

use super::bandwidth::Uplink;
use super::bisect::{bisect_predicate, BisectConfig};
use super::freq::{solve_cluster_freq, FreqInputs};
use super::{DecisionVector, OptimizeError, OptimizerConfig};
use crate::cost_model::{self, ClusterCost};
use crate::par;
use crate::scenario::Scenario;

/// Per-client quantities of one cluster that the α subproblem needs, in member order.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTerms {
    /// |D_k|.
    pub size: Vec<f64>,
    /// m_C|D_k| / f_C: local time when nothing is offloaded.
    pub work: Vec<f64>,
    /// Smallest α the energy budget allows at the current bandwidth.
    pub lower: Vec<f64>,
    /// α_k^max.
    pub upper: Vec<f64>,
    /// τ_agg at the current bandwidth.
    pub agg: Vec<f64>,
    pub period_s: f64,
}

impl ClusterTerms {
    pub fn new(scenario: &Scenario, j: usize, bandwidth: &[f64]) -> Result<Self, String> {
        let members = scenario.members(j);
        let mut t = ClusterTerms {
            size: Vec::with_capacity(members.len()),
            work: Vec::with_capacity(members.len()),
            lower: Vec::with_capacity(members.len()),
            upper: Vec::with_capacity(members.len()),
            agg: Vec::with_capacity(members.len()),
            period_s: scenario.cluster(j).period_s(),
        };
        for (&k, &b) in members.iter().zip(bandwidth) {
            let c = scenario.client(k);
            let size = c.dataset_size() as f64;
            let (agg, e_agg) = Uplink::for_client(scenario, k)
                .latency_energy(b)
                .ok_or_else(|| format!("client {} has no usable uplink at {b} Hz", c.id))?;
            let budget = c.energy_budget_j - e_agg;
            if !(budget >= 0.0) {
                return Err(format!("client {} exceeds its energy budget on the upload alone", c.id));
            }
            let (_, full) = cost_model::client_compute(scenario, k, 0.0);
            let mut lb = if full > 0.0 { (1.0 - budget / full).max(0.0) } else { 0.0 };
            let mut step = f64::EPSILON;
            while cost_model::client_compute(scenario, k, lb).1 + e_agg > c.energy_budget_j {
                lb = (lb + step).min(1.0);
                step *= 2.0;
                if lb >= 1.0 {
                    break;
                }
            }
            if lb > c.max_offload_fraction {
                return Err(format!(
                    "client {} must offload {lb:.4} of its data to meet its energy budget, above α^max = {}",
                    c.id, c.max_offload_fraction
                ));
            }
            t.size.push(size);
            t.work.push(c.cycles_per_sample * size / c.cpu_freq_hz);
            t.lower.push(lb);
            t.upper.push(c.max_offload_fraction);
            t.agg.push(agg);
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.size.len()
    }

    pub fn is_empty(&self) -> bool {
        self.size.is_empty()
    }

    pub fn total(&self, alpha: &[f64]) -> f64 {
        alpha.iter().zip(&self.size).map(|(a, s)| a * s).sum()
    }

    pub fn min_total(&self) -> f64 {
        self.total(&self.lower)
    }

    pub fn max_total(&self) -> f64 {
        self.total(&self.upper)
    }

    pub fn local_times(&self, alpha: &[f64]) -> Vec<f64> {
        alpha.iter().zip(&self.work).map(|(a, w)| (1.0 - a) * w).collect()
    }

    pub fn client_path(&self, alpha: &[f64], n_handoffs: u64) -> f64 {
        cost_model::cluster_client_path(&self.local_times(alpha), &self.agg, self.period_s, n_handoffs).0
    }
}

/// Moves α along `to - from` by the fraction that lands the total on `target`.
fn interpolate(t: &ClusterTerms, from: &[f64], to: &[f64], target: f64) -> Vec<f64> {
    let (s0, s1) = (t.total(from), t.total(to));
    let w = if s1 != s0 { ((target - s0) / (s1 - s0)).clamp(0.0, 1.0) } else { 0.0 };
    from.iter().zip(to).map(|(a, b)| a + w * (b - a)).collect()
}

/// Min-max equalization of the local times: α_k = clamp(1 − ν/work_k) with Σ α_k|D_k| = A.
pub fn equalize_local(t: &ClusterTerms, total: f64, cfg: BisectConfig) -> Vec<f64> {
    if total <= t.min_total() {
        return t.lower.clone();
    }
    if total >= t.max_total() {
        return t.upper.clone();
    }
    let at = |nu: f64| -> Vec<f64> {
        t.work
            .iter()
            .zip(&t.lower)
            .zip(&t.upper)
            .map(|((&w, &lb), &ub)| (1.0 - nu / w).clamp(lb, ub))
            .collect()
    };
    let top = t.work.iter().copied().fold(0.0, f64::max);
    let r = bisect_predicate(|nu| t.total(&at(nu)) >= total, 0.0, top, cfg);
    let hi = at(r.x);
    match r.x_fail {
        Some(bad) => interpolate(t, &at(bad), &hi, total),
        None => hi,
    }
}

/// Allocation for the case where the slowest client finishes inside slot `slot`
/// and every upload must end by T(slot + 1): the smallest common completion
/// value ν is found first, then leftover samples are spread over the headroom.
pub fn equalize_slot(t: &ClusterTerms, total: f64, slot: f64, cfg: BisectConfig) -> Option<Vec<f64>> {
    let start = t.period_s * slot;
    let deadline = t.period_s * (slot + 1.0);
    let floor_at = |nu: f64| -> Option<Vec<f64>> {
        let mut v = Vec::with_capacity(t.len());
        for k in 0..t.len() {
            if start + t.agg[k] > nu {
                return None;
            }
            let a = (1.0 - (nu - t.agg[k]) / t.work[k]).max(t.lower[k]);
            if a > t.upper[k] {
                return None;
            }
            v.push(a);
        }
        Some(v)
    };
    let ok = |nu: f64| floor_at(nu).is_some_and(|v| t.total(&v) <= total);
    if !ok(deadline) {
        return None;
    }
    let lowest = (0..t.len()).map(|k| start + t.agg[k]).fold(f64::NEG_INFINITY, f64::max);
    let nu = bisect_predicate(ok, deadline, lowest, cfg).x;
    let base = floor_at(nu)?;
    let surplus = total - t.total(&base);
    let room: f64 = (0..t.len()).map(|k| (t.upper[k] - base[k]) * t.size[k]).sum();
    if surplus <= 0.0 || room <= 0.0 {
        return Some(base);
    }
    let share = (surplus / room).min(1.0);
    Some((0..t.len()).map(|k| base[k] + share * (t.upper[k] - base[k])).collect())
}

/// Lowers the largest ratios until Σ α_k|D_k| ≤ `cap` holds in floating point.
fn enforce_cap(t: &ClusterTerms, alpha: &mut [f64], cap: f64) {
    for _ in 0..64 {
        let excess = t.total(alpha) - cap;
        if excess <= 0.0 {
            return;
        }
        let k = (0..alpha.len())
            .filter(|&k| alpha[k] > t.lower[k])
            .max_by(|&a, &b| (alpha[a] * t.size[a]).total_cmp(&(alpha[b] * t.size[b])));
        let Some(k) = k else { return };
        let cut = excess / t.size[k] * (1.0 + 1e-12) + f64::EPSILON * alpha[k];
        alpha[k] = (alpha[k] - cut).max(t.lower[k]);
    }
}

/// Best α split of `total` offloaded samples for a cluster whose satellites
/// need `n_handoffs` handoffs. Minimizes Y_j over the three completion cases.
pub fn solve_alpha_within_cluster(
    t: &ClusterTerms,
    total: f64,
    n_handoffs: u64,
    cfg: BisectConfig,
) -> Result<Vec<f64>, String> {
    if total > t.max_total() * (1.0 + 1e-12) {
        return Err(format!(
            "offload total {total} exceeds the clients' capacity {}",
            t.max_total()
        ));
    }
    let first = equalize_local(t, total, cfg);
    let tau_max = t.local_times(&first).into_iter().fold(0.0, f64::max);
    if tau_max <= t.period_s * n_handoffs as f64 {
        return Ok(first);
    }
    let slot = (tau_max / t.period_s).floor();
    let y_first = t.client_path(&first, n_handoffs);
    Ok(match equalize_slot(t, total, slot, cfg) {
        Some(second) if t.client_path(&second, n_handoffs) < y_first => second,
        _ => first,
    })
}

/// A candidate α block result for one cluster.
#[derive(Clone, Debug)]
struct Candidate {
    alpha: Vec<f64>,
    freq_hz: f64,
    cost: ClusterCost,
}

struct ClusterProblem<'a> {
    scenario: &'a Scenario,
    j: usize,
    terms: ClusterTerms,
    bandwidth: Vec<f64>,
    cap: f64,
    cfg: BisectConfig,
}

impl ClusterProblem<'_> {
    fn freq(&self, total: f64) -> Option<(f64, u64)> {
        let inp = FreqInputs::for_cluster(self.scenario, self.j, total);
        let f = solve_cluster_freq(&inp, self.cfg).ok()?.freq_hz;
        Some((f, inp.chain(f).ok()?.n_handoffs))
    }

    /// Case-1 gap max τ_local − T·N at offload total `total`, with f at its best.
    fn case1_gap(&self, total: f64) -> Option<f64> {
        let (_, n) = self.freq(total)?;
        let a = equalize_local(&self.terms, total, self.cfg);
        let tau_max = self.terms.local_times(&a).into_iter().fold(0.0, f64::max);
        Some(tau_max - self.terms.period_s * n as f64)
    }

    fn evaluate(&self, total: f64) -> Option<Candidate> {
        let (_, n) = self.freq(total)?;
        let mut alpha = solve_alpha_within_cluster(&self.terms, total, n, self.cfg).ok()?;
        enforce_cap(&self.terms, &mut alpha, self.cap);
        let actual = cost_model::offloaded_samples(self.scenario, self.j, &alpha);
        let (f, _) = self.freq(actual)?;
        let cost = cost_model::cluster_cost(self.scenario, self.j, &alpha, f, &self.bandwidth).ok()?;
        Some(Candidate {
            alpha,
            freq_hz: f,
            cost,
        })
    }
}

/// Per-cluster α and the satellite frequency chosen alongside it.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaUpdate {
    /// Client order.
    pub alpha: Vec<f64>,
    pub sat_freq_hz: Vec<f64>,
}

fn solve_cluster_alpha(
    scenario: &Scenario,
    j: usize,
    decision: &DecisionVector,
    cfg: BisectConfig,
) -> Result<(Vec<f64>, f64), String> {
    let bandwidth = decision.cluster_bandwidth(scenario, j);
    let terms = ClusterTerms::new(scenario, j, &bandwidth)?;
    let cap = scenario.max_offload_samples(j).min(terms.max_total());
    let a_min = terms.min_total();
    if a_min > cap {
        return Err(format!(
            "energy budgets force {a_min:.1} offloaded samples but at most {cap:.1} are allowed"
        ));
    }
    let p = ClusterProblem {
        scenario,
        j,
        terms,
        bandwidth,
        cap,
        cfg,
    };

    // A^up: where the slowest client's local time meets T·N.
    let up = bisect_predicate(|a| p.case1_gap(a).is_some_and(|g| g > 0.0), a_min, cap, cfg);
    let a_up = up.x_fail.unwrap_or(up.x);

    // Balance the client path Y_j against the satellite path τ_rep.
    let balance = bisect_predicate(
        |a| p.evaluate(a).is_some_and(|c| c.cost.y_j_s >= c.cost.tau_rep_s),
        a_min,
        a_up,
        cfg,
    );

    let current = cost_model::offloaded_samples(scenario, j, &decision.cluster_alpha(scenario, j));
    let mut points = vec![balance.x, a_min, a_up, current.clamp(a_min, cap)];
    points.extend(balance.x_fail);
    let best = points
        .into_iter()
        .filter_map(|a| p.evaluate(a))
        .min_by(|x, y| x.cost.tau_cluster_s.total_cmp(&y.cost.tau_cluster_s))
        .ok_or_else(|| "no offload total admits a feasible satellite frequency".to_string())?;
    Ok((best.alpha, best.freq_hz))
}

/// α block: every cluster independently, b fixed. The satellite frequency is
/// re-solved for each candidate offload total, so f is returned alongside α.
pub fn solve_alpha(
    scenario: &Scenario,
    decision: &DecisionVector,
    cfg: &OptimizerConfig,
) -> Result<AlphaUpdate, OptimizeError> {
    let per_cluster = par::map_range(scenario.num_clusters(), cfg.execution, |j| {
        solve_cluster_alpha(scenario, j, decision, cfg.bisect)
            .map_err(|reason| OptimizeError::infeasible("alpha", Some(j), reason))
    });
    let mut out = AlphaUpdate {
        alpha: decision.alpha.clone(),
        sat_freq_hz: decision.sat_freq_hz.clone(),
    };
    for (j, r) in per_cluster.into_iter().enumerate() {
        let (alpha, f) = r?;
        for (&k, a) in scenario.members(j).iter().zip(alpha) {
            out.alpha[k] = a;
        }
        out.sat_freq_hz[j] = f;
    }
    Ok(out)
}
