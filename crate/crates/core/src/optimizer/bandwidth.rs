//! Uplink bandwidth split within each cluster.

use super::bisect::{bisect_predicate, BisectConfig};
use super::{DecisionVector, OptimizeError, OptimizerConfig};
use crate::cost_model::{self, YCase};
use crate::par;
use crate::scenario::Scenario;

/// One client's uplink channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uplink {
    pub size_bits: f64,
    pub tx_power_w: f64,
    pub distance_m: f64,
    pub pathloss_exponent: f64,
    pub noise_density: f64,
}

impl Uplink {
    pub fn for_client(scenario: &Scenario, k: usize) -> Self {
        let cl = scenario.cluster(scenario.cluster_of(k));
        Self {
            size_bits: scenario.footprint().size_bits,
            tx_power_w: scenario.client(k).tx_power_w,
            distance_m: scenario.distance_m(k),
            pathloss_exponent: cl.pathloss_exponent,
            noise_density: cl.noise_density_w_per_hz,
        }
    }

    /// (τ_agg, E_agg) on `b` Hz; `None` when the upload never finishes.
    pub fn latency_energy(&self, b: f64) -> Option<(f64, f64)> {
        cost_model::uplink_agg_latency_energy(
            self.size_bits,
            b,
            self.tx_power_w,
            self.distance_m,
            self.pathloss_exponent,
            self.noise_density,
        )
        .ok()
    }

    pub fn latency(&self, b: f64) -> f64 {
        self.latency_energy(b).map_or(f64::INFINITY, |(t, _)| t)
    }

    /// The limit of τ_agg as b → ∞: S·ln2 / (p d^−ξ / N_0).
    pub fn saturation_latency(&self) -> f64 {
        let c = self.tx_power_w * self.distance_m.powf(-self.pathloss_exponent) / self.noise_density;
        self.size_bits * std::f64::consts::LN_2 / c
    }

    /// Smallest b with τ_agg(b) ≤ `target`, or `None` if no finite b suffices.
    pub fn bandwidth_for_latency(&self, target: f64, cfg: BisectConfig) -> Option<f64> {
        if !(target > self.saturation_latency()) {
            return None;
        }
        let mut hi = 1e3;
        while self.latency(hi) > target {
            hi *= 2.0;
            if hi > 1e30 {
                return None;
            }
        }
        let r = bisect_predicate(|b| self.latency(b) <= target, hi, hi * 1e-15, cfg);
        Some(r.x)
    }
}

/// Smallest bandwidth keeping client `k` within its energy budget at offload ratio `alpha`.
pub fn min_bandwidth(scenario: &Scenario, k: usize, alpha: f64, cfg: BisectConfig) -> Result<f64, String> {
    let up = Uplink::for_client(scenario, k);
    let (_, e_local) = cost_model::client_compute(scenario, k, alpha);
    let budget = scenario.client(k).energy_budget_j - e_local;
    if !(budget > 0.0) {
        return Err(format!(
            "client {} spends its whole energy budget on local training",
            scenario.client(k).id
        ));
    }
    up.bandwidth_for_latency(budget / up.tx_power_w, cfg)
        .filter(|&b| up.latency_energy(b).is_some_and(|(_, e)| e_local + e <= scenario.client(k).energy_budget_j))
        .ok_or_else(|| {
            format!(
                "client {} cannot upload within its energy budget at any bandwidth",
                scenario.client(k).id
            )
        })
}

/// Equalizes X_k + τ_agg,k(b_k) subject to b_k ≥ floor_k and Σ b_k ≤ B.
fn equalize(ups: &[Uplink], start: &[f64], floor: &[f64], total: f64, cfg: BisectConfig) -> Vec<f64> {
    let alloc = |nu: f64| -> Vec<f64> {
        ups.iter()
            .zip(start)
            .zip(floor)
            .map(|((u, &x), &fl)| match u.bandwidth_for_latency(nu - x, cfg) {
                Some(b) => b.max(fl),
                None => f64::INFINITY,
            })
            .collect()
    };
    let sum = |b: &[f64]| b.iter().sum::<f64>();
    let mut lo = start.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut hi = ups
        .iter()
        .zip(start)
        .zip(floor)
        .map(|((u, &x), &fl)| x + u.latency(fl))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut best = floor.to_vec();
    let window = (1.0 - cfg.rel_eps) * total;
    if sum(&best) >= window {
        return best;
    }
    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let b = alloc(mid);
        let s = sum(&b);
        if s > total {
            lo = mid;
        } else {
            hi = mid;
            best = b;
            if s >= window {
                break;
            }
        }
    }
    best
}

/// Bandwidth split for cluster `j` at fixed α (member order) and f_S.
pub fn solve_cluster_bandwidth(
    scenario: &Scenario,
    j: usize,
    alpha: &[f64],
    freq_hz: f64,
    cfg: BisectConfig,
) -> Result<Vec<f64>, String> {
    let members = scenario.members(j);
    let cl = scenario.cluster(j);
    let total = cl.bandwidth_hz;
    let ups: Vec<Uplink> = members.iter().map(|&k| Uplink::for_client(scenario, k)).collect();
    let b_min = members
        .iter()
        .zip(alpha)
        .map(|(&k, &a)| min_bandwidth(scenario, k, a, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let need: f64 = b_min.iter().sum();
    if need > total {
        return Err(format!(
            "energy budgets need {need:.4e} Hz of uplink bandwidth but only {total:.4e} Hz is available"
        ));
    }
    let tau_local: Vec<f64> = members
        .iter()
        .zip(alpha)
        .map(|(&k, &a)| cost_model::client_compute(scenario, k, a).0)
        .collect();
    let a = cost_model::offloaded_samples(scenario, j, alpha);
    let (tau_trans, e_trans) = cost_model::cluster_transfer(scenario, j, a);
    let period = cl.period_s();
    let chain = cost_model::satellite_chain(
        cl.sat_cycles_per_sample * a,
        period,
        tau_trans,
        e_trans,
        freq_hz,
        cl.energy_coeff,
    )
    .map_err(|e| e.to_string())?;
    let n = chain.n_handoffs;

    let y_of = |b: &[f64]| -> (f64, YCase) {
        let agg: Vec<f64> = ups.iter().zip(b).map(|(u, &v)| u.latency(v)).collect();
        cost_model::cluster_client_path(&tau_local, &agg, period, n)
    };

    let zeros = vec![0.0; members.len()];
    let mut best = equalize(&ups, &zeros, &b_min, total, cfg);
    let best_y = y_of(&best).0;

    let max_local = tau_local.iter().copied().fold(0.0, f64::max);
    if max_local > period * n as f64 {
        // Uploads may start at the slot boundary T·s instead of at time zero.
        let slot = (max_local / period).floor();
        let deadline = period * (slot + 1.0);
        let start: Vec<f64> = tau_local.iter().map(|&t| t.max(period * slot)).collect();
        let floors: Option<Vec<f64>> = ups
            .iter()
            .zip(&start)
            .zip(&b_min)
            .map(|((u, &x), &bm)| u.bandwidth_for_latency(deadline - x, cfg).map(|b| b.max(bm)))
            .collect();
        if let Some(floors) = floors {
            if floors.iter().sum::<f64>() <= total {
                let cand = equalize(&ups, &start, &floors, total, cfg);
                if y_of(&cand).0 < best_y {
                    best = cand;
                }
            }
        }
    }
    Ok(best)
}

/// Bandwidth block for every cluster, α and f_S fixed. Returns per-cluster splits in member order.
pub fn solve_bandwidth(
    scenario: &Scenario,
    decision: &DecisionVector,
    cfg: &OptimizerConfig,
) -> Result<Vec<Vec<f64>>, OptimizeError> {
    par::map_range(scenario.num_clusters(), cfg.execution, |j| {
        let alpha = decision.cluster_alpha(scenario, j);
        solve_cluster_bandwidth(scenario, j, &alpha, decision.sat_freq_hz[j], cfg.bisect)
            .map_err(|reason| OptimizeError::infeasible("b", Some(j), reason))
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::reference::ReferenceParams;
    use crate::scenario::validate_scenario;

    fn uplink() -> Uplink {
        Uplink {
            size_bits: 3.2e6,
            tx_power_w: 0.2,
            distance_m: 784e3,
            pathloss_exponent: 2.0,
            noise_density: 3.98e-21,
        }
    }

    #[test]
    fn inverse_of_latency() {
        let u = uplink();
        let cfg = BisectConfig {
            rel_eps: 1e-10,
            max_iter: 300,
        };
        for b in [1e4, 1e5, 1e6, 5e6] {
            let t = u.latency(b);
            let back = u.bandwidth_for_latency(t, cfg).unwrap();
            assert!((back - b).abs() / b < 1e-8, "{b} -> {back}");
            assert!(u.latency(back) <= t);
        }
        assert!(u.bandwidth_for_latency(u.saturation_latency() * 0.999, cfg).is_none());
    }

    #[test]
    fn reference_split_respects_floors_and_total() {
        let s = validate_scenario(ReferenceParams::default().without_data().spec(1)).unwrap();
        let alpha = vec![0.5; 10];
        let cfg = BisectConfig::default();
        let b = solve_cluster_bandwidth(&s, 0, &alpha, 1e10, cfg).unwrap();
        assert!(b.iter().sum::<f64>() <= 10e6);
        for (i, &k) in s.members(0).iter().enumerate() {
            let bm = min_bandwidth(&s, k, 0.5, cfg).unwrap();
            assert!(b[i] >= bm);
            let (_, el) = cost_model::client_compute(&s, k, 0.5);
            let (_, ea) = cost_model::client_uplink(&s, k, b[i]).unwrap();
            assert!(el + ea <= s.client(k).energy_budget_j);
        }
    }

    #[test]
    fn equal_channels_get_equal_shares() {
        let ups = vec![uplink(); 4];
        let b = equalize(&ups, &[0.0; 4], &[1e3; 4], 4e6, BisectConfig::default());
        for v in &b {
            assert!((v - 1e6).abs() / 1e6 < 1e-4, "{b:?}");
        }
    }
}
