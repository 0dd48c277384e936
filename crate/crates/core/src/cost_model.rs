//! Latency and energy of one global round.
//!
//! Everything here is a pure function of its inputs. The low-level helpers
//! take plain numbers so they can be reused by the optimizer's inner loops;
//! [`cluster_cost`] and [`round_latency`] compose them for a whole scenario.

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::optimizer::DecisionVector;
use crate::scenario::{ClientProfile, Scenario};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

/// Size of the exchanged model and of one offloaded sample, in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFootprint {
    pub param_count: u64,
    pub bits_per_param: u32,
    /// S(w).
    pub size_bits: f64,
    /// q.
    pub sample_bits: f64,
}

impl ModelFootprint {
    pub fn new(param_count: u64, bits_per_param: u32, sample_bits: f64) -> Self {
        Self {
            param_count,
            bits_per_param,
            size_bits: param_count as f64 * f64::from(bits_per_param),
            sample_bits,
        }
    }
}

/// Parameters of an inter-satellite link when its rate is derived, not given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IslLinkParams {
    pub bandwidth_hz: f64,
    pub rx_gain: f64,
    pub tx_gain: f64,
    pub pathloss: f64,
    pub noise_density_w_per_hz: f64,
    pub tx_power_w: f64,
}

impl IslLinkParams {
    pub fn validate(&self) -> Result<(), CostError> {
        let fields = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("rx_gain", self.rx_gain),
            ("tx_gain", self.tx_gain),
            ("pathloss", self.pathloss),
            ("noise_density_w_per_hz", self.noise_density_w_per_hz),
            ("tx_power_w", self.tx_power_w),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CostError::InvalidInput(format!("ISL {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn snr(&self) -> f64 {
        self.tx_power_w * self.rx_gain * self.tx_gain / (self.pathloss * self.noise_density_w_per_hz)
    }
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// m·n / f: seconds to process `samples` samples.
pub fn local_latency(cycles_per_sample: f64, samples: f64, freq_hz: f64) -> f64 {
    cycles_per_sample * samples / freq_hz
}

/// κ·m·n·f².
pub fn local_energy(kappa: f64, cycles_per_sample: f64, samples: f64, freq_hz: f64) -> f64 {
    kappa * cycles_per_sample * samples * freq_hz * freq_hz
}

/// Local computation time of a client processing the fraction `gamma` of its data.
pub fn client_local_latency(
    profile: &ClientProfile,
    gamma: f64,
    dataset_size: usize,
) -> Result<f64, CostError> {
    check_gamma(gamma)?;
    Ok(local_latency(
        profile.cycles_per_sample,
        gamma * dataset_size as f64,
        profile.cpu_freq_hz,
    ))
}

/// Local computation energy of a client processing the fraction `gamma`.
pub fn client_local_energy(
    profile: &ClientProfile,
    kappa: f64,
    gamma: f64,
    dataset_size: usize,
) -> Result<f64, CostError> {
    check_gamma(gamma)?;
    Ok(local_energy(
        kappa,
        profile.cycles_per_sample,
        gamma * dataset_size as f64,
        profile.cpu_freq_hz,
    ))
}

fn check_gamma(gamma: f64) -> Result<(), CostError> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(CostError::InvalidInput(format!("gamma must lie in (0, 1], got {gamma}")))
    }
}

/// ℬ·log2(1 + SNR).
pub fn isl_rate(link: &IslLinkParams) -> f64 {
    link.bandwidth_hz * log2_1p(link.snr())
}

/// (S(w) + q·A) / Q.
pub fn isl_transfer_latency(model: &ModelFootprint, offloaded_samples: f64, rate_bps: f64) -> f64 {
    (model.size_bits + model.sample_bits * offloaded_samples) / rate_bps
}

pub fn isl_transfer_energy(tau_trans_s: f64, sat_tx_power_w: f64) -> f64 {
    sat_tx_power_w * tau_trans_s
}

/// N_j = ⌊C / ((T − τ_trans) f)⌋ for total satellite cycles C.
pub fn handoff_count(
    total_cycles: f64,
    period_s: f64,
    tau_trans_s: f64,
    freq_hz: f64,
) -> Result<u64, CostError> {
    if period_s <= tau_trans_s {
        return Err(CostError::Infeasible(format!(
            "coverage time {period_s} s does not exceed the ISL transfer time {tau_trans_s} s"
        )));
    }
    if total_cycles <= 0.0 {
        return Ok(0);
    }
    if !(freq_hz > 0.0) {
        return Err(CostError::Infeasible(
            "satellite frequency is zero while samples are offloaded".into(),
        ));
    }
    let n = (total_cycles / ((period_s - tau_trans_s) * freq_hz)).floor();
    if !n.is_finite() || n > u32::MAX as f64 {
        return Err(CostError::Infeasible(format!("handoff count {n} is unbounded")));
    }
    Ok(n as u64)
}

/// Which satellite of a chain a dwell/energy figure refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SatelliteRole {
    /// One of the first N_j satellites, busy for the whole coverage time.
    Full,
    Last,
}

/// The relay chain serving one cluster in one round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SatelliteChain {
    pub n_handoffs: u64,
    pub total_cycles: f64,
    pub remaining_cycles: f64,
    pub freq_hz: f64,
    pub period_s: f64,
    pub tau_trans_s: f64,
    pub e_trans_j: f64,
    pub full_dwell_s: f64,
    pub full_energy_j: f64,
    pub last_dwell_s: f64,
    pub last_energy_j: f64,
    /// τ_rep = T·N + remaining/f + τ_trans.
    pub tau_rep_s: f64,
}

impl SatelliteChain {
    pub fn dwell_and_energy(&self, role: SatelliteRole) -> (f64, f64) {
        match role {
            SatelliteRole::Full => (self.full_dwell_s, self.full_energy_j),
            SatelliteRole::Last => (self.last_dwell_s, self.last_energy_j),
        }
    }

    /// Σ of per-satellite energy over the chain.
    pub fn total_energy_j(&self) -> f64 {
        self.n_handoffs as f64 * self.full_energy_j + self.last_energy_j
    }

    /// Number of satellites taking part (N_j + 1).
    pub fn satellites(&self) -> u64 {
        self.n_handoffs + 1
    }
}

/// Builds the chain for `total_cycles = m_S·A` at frequency `freq_hz`.
pub fn satellite_chain(
    total_cycles: f64,
    period_s: f64,
    tau_trans_s: f64,
    e_trans_j: f64,
    freq_hz: f64,
    kappa: f64,
) -> Result<SatelliteChain, CostError> {
    let n = handoff_count(total_cycles, period_s, tau_trans_s, freq_hz)?;
    let window = period_s - tau_trans_s;
    let remaining = if total_cycles > 0.0 {
        total_cycles - n as f64 * window * freq_hz
    } else {
        0.0
    };
    if remaining < -1e-9 * total_cycles.max(1.0) {
        return Err(CostError::InvalidInput(format!(
            "negative remaining cycles {remaining} for N = {n}"
        )));
    }
    let remaining = remaining.max(0.0);
    let last_compute = if remaining > 0.0 { remaining / freq_hz } else { 0.0 };
    Ok(SatelliteChain {
        n_handoffs: n,
        total_cycles,
        remaining_cycles: remaining,
        freq_hz,
        period_s,
        tau_trans_s,
        e_trans_j,
        full_dwell_s: period_s,
        full_energy_j: kappa * window * freq_hz.powi(3) + e_trans_j,
        last_dwell_s: last_compute + tau_trans_s,
        last_energy_j: kappa * remaining * freq_hz * freq_hz + e_trans_j,
        tau_rep_s: period_s * n as f64 + last_compute + tau_trans_s,
    })
}

/// Uplink time and energy: S / (b·log2(1 + p d^−ξ / (b N_0))) and p·τ.
pub fn uplink_agg_latency_energy(
    size_bits: f64,
    bandwidth_hz: f64,
    tx_power_w: f64,
    distance_m: f64,
    pathloss_exponent: f64,
    noise_density: f64,
) -> Result<(f64, f64), CostError> {
    if !(bandwidth_hz > 0.0) {
        return Err(CostError::Infeasible(format!("bandwidth {bandwidth_hz} Hz is not positive")));
    }
    let snr = tx_power_w * distance_m.powf(-pathloss_exponent) / (bandwidth_hz * noise_density);
    let rate = bandwidth_hz * log2_1p(snr);
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(CostError::Infeasible(format!(
            "uplink rate underflows (SNR = {snr}); upload would never finish"
        )));
    }
    let tau = size_bits / rate;
    Ok((tau, tx_power_w * tau))
}

/// Which branch of the client-path formula produced Y_j.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize)]
pub enum YCase {
    Case1,
    Case2,
    Case3,
}

impl YCase {
    pub fn as_u8(self) -> u8 {
        match self {
            YCase::Case1 => 1,
            YCase::Case2 => 2,
            YCase::Case3 => 3,
        }
    }
}

impl Serialize for YCase {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

/// Y_j from per-client local and upload times.
///
/// Case 1 if every client finishes before the last satellite arrives;
/// Case 2 if all uploads fit in the coverage slot after the slowest client
/// finishes; Case 3 otherwise, waiting for the next satellite.
pub fn cluster_client_path(
    tau_local: &[f64],
    tau_agg: &[f64],
    period_s: f64,
    n_handoffs: u64,
) -> (f64, YCase) {
    let max_local = tau_local.iter().copied().fold(0.0, f64::max);
    let max_agg = tau_agg.iter().copied().fold(0.0, f64::max);
    let tn = period_s * n_handoffs as f64;
    if max_local <= tn {
        return (tn + max_agg, YCase::Case1);
    }
    let slot = (max_local / period_s).floor();
    let start = period_s * slot;
    let v2 = tau_local
        .iter()
        .zip(tau_agg)
        .map(|(&l, &a)| start.max(l) + a)
        .fold(0.0, f64::max);
    if v2 <= period_s * (slot + 1.0) {
        (v2, YCase::Case2)
    } else {
        (period_s * (slot + 1.0) + max_agg, YCase::Case3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SatelliteCost {
    pub dwell_s: f64,
    pub energy_j: f64,
}

/// Everything derived for one cluster under a decision.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterCost {
    pub offloaded_samples: f64,
    pub tau_local_s: Vec<f64>,
    pub e_local_j: Vec<f64>,
    pub tau_agg_s: Vec<f64>,
    pub e_agg_j: Vec<f64>,
    pub tau_trans_s: f64,
    pub e_trans_j: f64,
    pub n_handoffs: u64,
    pub tau_rep_s: f64,
    pub y_j_s: f64,
    pub y_case: YCase,
    pub tau_c_s: f64,
    pub tau_s_s: f64,
    /// max(τ_C, τ_S) + τ_glob.
    pub tau_cluster_s: f64,
    pub satellites: Vec<SatelliteCost>,
    #[serde(skip)]
    pub chain: SatelliteChain,
}

/// Per-cluster breakdown plus the round latency.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub clusters: Vec<ClusterCost>,
    pub tau_round_s: f64,
}

/// Client-side quantities for one client: (τ_local, E_local).
pub fn client_compute(scenario: &Scenario, k: usize, alpha: f64) -> (f64, f64) {
    let c = scenario.client(k);
    let kappa = scenario.cluster(scenario.cluster_of(k)).energy_coeff;
    let samples = (1.0 - alpha) * c.dataset_size() as f64;
    (
        local_latency(c.cycles_per_sample, samples, c.cpu_freq_hz),
        local_energy(kappa, c.cycles_per_sample, samples, c.cpu_freq_hz),
    )
}

/// Upload time and energy of client position `k` on bandwidth `b`.
pub fn client_uplink(scenario: &Scenario, k: usize, b: f64) -> Result<(f64, f64), CostError> {
    let cl = scenario.cluster(scenario.cluster_of(k));
    uplink_agg_latency_energy(
        scenario.footprint().size_bits,
        b,
        scenario.client(k).tx_power_w,
        scenario.distance_m(k),
        cl.pathloss_exponent,
        cl.noise_density_w_per_hz,
    )
}

/// Transfer time and energy of the ISL relay for `offloaded` samples in cluster `j`.
pub fn cluster_transfer(scenario: &Scenario, j: usize, offloaded: f64) -> (f64, f64) {
    let cl = scenario.cluster(j);
    let tau = isl_transfer_latency(scenario.footprint(), offloaded, cl.isl_rate_bps());
    (tau, isl_transfer_energy(tau, cl.sat_tx_power_w))
}

/// Σ α_k |D_k| for cluster `j`, with `alpha` indexed by member order.
pub fn offloaded_samples(scenario: &Scenario, j: usize, alpha: &[f64]) -> f64 {
    scenario
        .members(j)
        .iter()
        .zip(alpha)
        .map(|(&k, &a)| a * scenario.client(k).dataset_size() as f64)
        .sum()
}

/// Costs of cluster `j`. `alpha` and `bandwidth` are indexed by member order.
pub fn cluster_cost(
    scenario: &Scenario,
    j: usize,
    alpha: &[f64],
    freq_hz: f64,
    bandwidth: &[f64],
) -> Result<ClusterCost, CostError> {
    let members = scenario.members(j);
    if alpha.len() != members.len() || bandwidth.len() != members.len() {
        return Err(CostError::InvalidInput(format!(
            "cluster {j}: decision has {} α and {} b for {} members",
            alpha.len(),
            bandwidth.len(),
            members.len()
        )));
    }
    let cl = scenario.cluster(j);
    let period = cl.period_s();
    let mut tau_local = Vec::with_capacity(members.len());
    let mut e_local = Vec::with_capacity(members.len());
    let mut tau_agg = Vec::with_capacity(members.len());
    let mut e_agg = Vec::with_capacity(members.len());
    for (i, &k) in members.iter().enumerate() {
        let (t, e) = client_compute(scenario, k, alpha[i]);
        tau_local.push(t);
        e_local.push(e);
        let (t, e) = client_uplink(scenario, k, bandwidth[i])?;
        tau_agg.push(t);
        e_agg.push(e);
    }
    let a = offloaded_samples(scenario, j, alpha);
    let (tau_trans, e_trans) = cluster_transfer(scenario, j, a);
    let chain = satellite_chain(
        cl.sat_cycles_per_sample * a,
        period,
        tau_trans,
        e_trans,
        freq_hz,
        cl.energy_coeff,
    )?;
    let (y, y_case) = cluster_client_path(&tau_local, &tau_agg, period, chain.n_handoffs);
    let tau_c = cl.sync_delay_s + y;
    let tau_s = cl.sync_delay_s + chain.tau_rep_s;
    let mut satellites = vec![
        SatelliteCost {
            dwell_s: chain.full_dwell_s,
            energy_j: chain.full_energy_j,
        };
        chain.n_handoffs as usize
    ];
    satellites.push(SatelliteCost {
        dwell_s: chain.last_dwell_s,
        energy_j: chain.last_energy_j,
    });
    Ok(ClusterCost {
        offloaded_samples: a,
        tau_local_s: tau_local,
        e_local_j: e_local,
        tau_agg_s: tau_agg,
        e_agg_j: e_agg,
        tau_trans_s: tau_trans,
        e_trans_j: e_trans,
        n_handoffs: chain.n_handoffs,
        tau_rep_s: chain.tau_rep_s,
        y_j_s: y,
        y_case,
        tau_c_s: tau_c,
        tau_s_s: tau_s,
        tau_cluster_s: tau_c.max(tau_s) + cl.glob_delay_s,
        satellites,
        chain,
    })
}

/// The full per-round breakdown under `decision`.
pub fn round_latency(scenario: &Scenario, decision: &DecisionVector) -> Result<CostBreakdown, CostError> {
    decision.check_shape(scenario)?;
    let clusters = (0..scenario.num_clusters())
        .map(|j| {
            let alpha = decision.cluster_alpha(scenario, j);
            let b = decision.cluster_bandwidth(scenario, j);
            cluster_cost(scenario, j, &alpha, decision.sat_freq_hz[j], &b)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let tau_round_s = clusters
        .iter()
        .map(|c| c.tau_cluster_s)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CostBreakdown { clusters, tau_round_s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn local_latency_and_energy_examples() {
        assert!(rel(local_latency(3e7, 600.0, 2e8), 90.0) < 1e-15);
        assert!(rel(local_latency(3e7, 600.0, 1e8), 180.0) < 1e-15);
        assert!(rel(local_latency(3e7, 600.0, 3e8), 60.0) < 1e-15);
        assert!(rel(local_energy(1e-28, 3e7, 600.0, 2e8), 0.072) < 1e-12);
        assert_eq!(local_energy(1e-28, 3e7, 0.0, 2e8), 0.0);
        let e1 = local_energy(1e-28, 3e7, 600.0, 2e8) * local_latency(3e7, 600.0, 2e8).powi(2);
        let e2 = local_energy(1e-28, 3e7, 600.0, 4e8) * local_latency(3e7, 600.0, 4e8).powi(2);
        assert!(rel(e1, e2) < 1e-12);
    }

    #[test]
    fn isl_rate_examples() {
        let mut link = IslLinkParams {
            bandwidth_hz: 1e6,
            rx_gain: 1.0,
            tx_gain: 1.0,
            pathloss: 1.0,
            noise_density_w_per_hz: 1.0,
            tx_power_w: 1.0,
        };
        assert!(rel(isl_rate(&link), 1e6) < 1e-12);
        link.tx_power_w = 3.0;
        assert!(rel(isl_rate(&link), 2e6) < 1e-12);
    }

    #[test]
    fn worked_chain_example() {
        let fp = ModelFootprint::new(100_000, 32, 6272.0);
        let tau = isl_transfer_latency(&fp, 6000.0, 3.125e6);
        assert!((tau - 13.06624).abs() < 1e-9);
        assert!((isl_transfer_energy(tau, 10.0) - 130.6624).abs() < 1e-9);
        let chain = satellite_chain(3e7 * 6000.0, 360.0, tau, 10.0 * tau, 2e8, 1e-28).unwrap();
        assert_eq!(chain.n_handoffs, 2);
        assert!((chain.last_dwell_s - 219.2).abs() < 0.05);
        assert!((chain.tau_rep_s - 939.2).abs() < 0.05);
        assert_eq!(chain.full_dwell_s, 360.0);
        let fast = satellite_chain(3e7 * 6000.0, 360.0, tau, 10.0 * tau, 1e9, 1e-28).unwrap();
        assert_eq!(fast.n_handoffs, 0);
        assert!(rel(fast.last_dwell_s, 180.0 + tau) < 1e-12);
    }

    #[test]
    fn zero_offload_is_model_relay_only() {
        let fp = ModelFootprint::new(100_000, 32, 6272.0);
        let tau = isl_transfer_latency(&fp, 0.0, 3.125e6);
        assert_eq!(tau, 3.2e6 / 3.125e6);
        let chain = satellite_chain(0.0, 360.0, tau, 10.0 * tau, 2e8, 1e-28).unwrap();
        assert_eq!(chain.n_handoffs, 0);
        assert_eq!(chain.tau_rep_s, tau);
        assert_eq!(handoff_count(0.0, 360.0, 13.0, 2e8).unwrap(), 0);
        assert!(handoff_count(1.0, 10.0, 13.0, 2e8).is_err());
    }

    #[test]
    fn uplink_example() {
        let (tau, e) = uplink_agg_latency_energy(3.2e6, 1e6, 0.2, 784e3, 2.0, 3.98e-21).unwrap();
        assert!((tau - 0.502).abs() < 1e-3, "{tau}");
        assert!((e - 0.1004).abs() < 1e-3, "{e}");
        assert!(uplink_agg_latency_energy(3.2e6, 1e6, 0.0, 784e3, 2.0, 3.98e-21).is_err());
    }

    #[test]
    fn client_path_cases() {
        let (y, c) = cluster_client_path(&[90.0], &[0.5], 360.0, 0);
        assert_eq!((y, c), (90.5, YCase::Case2));
        let (y, c) = cluster_client_path(&[359.9], &[0.5], 360.0, 0);
        assert!((y - 360.5).abs() < 1e-12);
        assert_eq!(c, YCase::Case3);
        let (y, c) = cluster_client_path(&[100.0, 200.0], &[0.5, 0.7], 360.0, 1);
        assert!((y - 360.7).abs() < 1e-12);
        assert_eq!(c, YCase::Case1);
    }

    #[test]
    fn client_latency_rejects_bad_gamma() {
        let spec = crate::scenario::reference::ReferenceParams::default().without_data().spec(0);
        let c = &spec.clients[0];
        assert!(client_local_latency(c, 0.0, 1200).is_err());
        assert!(client_local_latency(c, 1.5, 1200).is_err());
        let t = client_local_latency(c, 0.5, 1200).unwrap();
        assert!(rel(t, 3e7 * 600.0 / c.cpu_freq_hz) < 1e-15);
    }

    #[test]
    fn unit_audit_magnitudes() {
        // cycles / (cycles/s) lands in seconds within a plausible range.
        let t = local_latency(3e7, 1200.0, 1e8);
        assert!((1.0..1e4).contains(&t));
        // J·s²/cycle³ · cycles · (cycles/s)² = J.
        let e = local_energy(1e-28, 3e7, 1200.0, 3e8);
        assert!((1e-3..10.0).contains(&e));
        let (tau, _) = uplink_agg_latency_energy(3.2e6, 1e6, 0.1, 784e3, 2.0, 3.98e-21).unwrap();
        assert!((1e-3..10.0).contains(&tau));
    }

    proptest! {
        #[test]
        fn exactly_one_case(
            locals in prop::collection::vec(0.0f64..2000.0, 1..6),
            aggs in prop::collection::vec(0.0f64..20.0, 6),
            period in 50.0f64..600.0,
            n in 0u64..6,
        ) {
            let aggs = &aggs[..locals.len()];
            let (y, case) = cluster_client_path(&locals, aggs, period, n);
            let max_local = locals.iter().copied().fold(0.0, f64::max);
            let max_agg = aggs.iter().copied().fold(0.0, f64::max);
            let c1 = max_local <= period * n as f64;
            let s = (max_local / period).floor();
            let v2 = locals.iter().zip(aggs).map(|(&l, &a)| (period * s).max(l) + a).fold(0.0, f64::max);
            let c2 = !c1 && v2 <= period * (s + 1.0);
            let c3 = !c1 && !c2;
            prop_assert_eq!([c1, c2, c3].iter().filter(|&&b| b).count(), 1);
            let expected = match case {
                YCase::Case1 => { prop_assert!(c1); period * n as f64 + max_agg }
                YCase::Case2 => { prop_assert!(c2); v2 }
                YCase::Case3 => { prop_assert!(c3); period * (s + 1.0) + max_agg }
            };
            prop_assert_eq!(y, expected);
            prop_assert!(y >= max_local);
        }

        #[test]
        fn chain_monotone_in_offload(a in 0.0f64..20_000.0, extra in 0.0f64..5000.0, f in 1e8f64..1e10) {
            let fp = ModelFootprint::new(100_000, 32, 6272.0);
            let build = |a: f64| {
                let tau = isl_transfer_latency(&fp, a, 3.125e6);
                satellite_chain(3e7 * a, 360.0, tau, 10.0 * tau, f, 1e-28)
            };
            if let (Ok(x), Ok(y)) = (build(a), build(a + extra)) {
                prop_assert!(y.n_handoffs >= x.n_handoffs);
                prop_assert!(y.tau_rep_s >= x.tau_rep_s - 1e-9 * x.tau_rep_s);
            }
        }

        #[test]
        fn ledger_identity(a in 1.0f64..20_000.0, f in 1e8f64..1e10) {
            let fp = ModelFootprint::new(100_000, 32, 6272.0);
            let tau = isl_transfer_latency(&fp, a, 3.125e6);
            let e_trans = 10.0 * tau;
            let c = satellite_chain(3e7 * a, 360.0, tau, e_trans, f, 1e-28).unwrap();
            let n = c.n_handoffs as f64;
            let expected = n * (1e-28 * (360.0 - tau) * f.powi(3) + e_trans)
                + 1e-28 * c.remaining_cycles * f * f + e_trans;
            prop_assert!(rel(c.total_energy_j(), expected) < 1e-12);
        }

        #[test]
        fn uplink_decreasing_in_bandwidth(b in 1e4f64..1e7, db in 1.0f64..1e6, p in 0.05f64..0.5) {
            let (t1, _) = uplink_agg_latency_energy(3.2e6, b, p, 784e3, 2.0, 3.98e-21).unwrap();
            let (t2, _) = uplink_agg_latency_energy(3.2e6, b + db, p, 784e3, 2.0, 3.98e-21).unwrap();
            prop_assert!(t2 < t1);
        }
    }
}
