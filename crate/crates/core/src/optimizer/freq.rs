//! Satellite CPU frequency: the fastest setting every satellite's battery allows.

use serde::Serialize;

use super::bisect::{bisect_predicate, BisectConfig};
use super::{DecisionVector, OptimizeError, OptimizerConfig};
use crate::cost_model::{self, satellite_chain, SatelliteChain};
use crate::par;
use crate::scenario::Scenario;

/// Inputs of the frequency subproblem for one cluster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreqInputs {
    /// m_S · A.
    pub total_cycles: f64,
    pub period_s: f64,
    pub tau_trans_s: f64,
    pub e_trans_j: f64,
    pub kappa: f64,
    pub f_max_hz: f64,
    pub e_orig_j: f64,
    pub psi_j: f64,
    /// P^charge: P^sun when sun-facing, else 0.
    pub p_charge_w: f64,
}

impl FreqInputs {
    pub fn for_cluster(scenario: &Scenario, j: usize, offloaded: f64) -> Self {
        let cl = scenario.cluster(j);
        let (tau, e) = cost_model::cluster_transfer(scenario, j, offloaded);
        Self {
            total_cycles: cl.sat_cycles_per_sample * offloaded,
            period_s: cl.period_s(),
            tau_trans_s: tau,
            e_trans_j: e,
            kappa: cl.energy_coeff,
            f_max_hz: cl.sat_max_freq_hz,
            e_orig_j: cl.sat_initial_energy_j,
            psi_j: cl.sat_min_residual_j,
            p_charge_w: cl.charge_power_w(),
        }
    }

    pub fn chain(&self, f: f64) -> Result<SatelliteChain, cost_model::CostError> {
        satellite_chain(
            self.total_cycles,
            self.period_s,
            self.tau_trans_s,
            self.e_trans_j,
            f,
            self.kappa,
        )
    }

    /// Residual-energy slack E − E_local + dwell·P − ψ of one satellite.
    pub fn slack(&self, dwell_s: f64, energy_j: f64) -> f64 {
        self.e_orig_j - energy_j + dwell_s * self.p_charge_w - self.psi_j
    }

    /// Smallest battery slack over the whole chain at frequency `f`.
    pub fn min_slack(&self, f: f64) -> Option<f64> {
        let c = self.chain(f).ok()?;
        let last = self.slack(c.last_dwell_s, c.last_energy_j);
        Some(if c.n_handoffs > 0 {
            last.min(self.slack(c.full_dwell_s, c.full_energy_j))
        } else {
            last
        })
    }

    pub fn feasible(&self, f: f64) -> bool {
        f > 0.0 && f <= self.f_max_hz && self.min_slack(f).is_some_and(|s| s >= 0.0)
    }

    /// Slack of a lone satellite doing all the work (N = 0) at frequency `f`.
    pub fn single_satellite_slack(&self, f: f64) -> f64 {
        let c = self.total_cycles;
        self.e_orig_j - self.kappa * c * f * f - self.e_trans_j
            + (c / f + self.tau_trans_s) * self.p_charge_w
            - self.psi_j
    }

    /// Slack of a satellite busy for the whole coverage time at frequency `f`.
    pub fn full_satellite_slack(&self, f: f64) -> f64 {
        self.e_orig_j - self.kappa * (self.period_s - self.tau_trans_s) * f.powi(3) - self.e_trans_j
            + self.period_s * self.p_charge_w
            - self.psi_j
    }

    /// m_S·A / (T − τ_trans): the slowest frequency that finishes in one pass.
    pub fn single_pass_freq(&self) -> f64 {
        self.total_cycles / (self.period_s - self.tau_trans_s)
    }
}

/// min{f_max, ∛(max{E − E_trans + T·P − ψ, 0} / (κ(T − τ_trans)))}.
pub fn lemma2_closed_form(inp: &FreqInputs) -> f64 {
    let budget = (inp.e_orig_j - inp.e_trans_j + inp.period_s * inp.p_charge_w - inp.psi_j).max(0.0);
    let f = (budget / (inp.kappa * (inp.period_s - inp.tau_trans_s))).cbrt();
    inp.f_max_hz.min(f)
}

/// The same quantity as [`lemma2_closed_form`], found by bisecting the
/// full-satellite energy constraint on `[0, f_max]`.
pub fn full_satellite_bisection(inp: &FreqInputs, cfg: BisectConfig) -> f64 {
    let r = bisect_predicate(|f| inp.full_satellite_slack(f) >= 0.0, 0.0, inp.f_max_hz, cfg);
    match r.x_fail {
        Some(bad) if r.is_bracketed() => 0.5 * (r.x + bad),
        _ => r.x,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqBranch {
    /// Nothing offloaded: the satellites only relay the model.
    RelayOnly,
    /// One satellite finishes within its pass; bisection on its battery.
    SinglePass,
    /// Several satellites share the work; closed form.
    MultiPass,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreqSolution {
    pub freq_hz: f64,
    pub branch: FreqBranch,
    /// Set when the final battery check had to lower the frequency.
    pub reduced: bool,
}

/// Highest feasible satellite frequency for one cluster.
pub fn solve_cluster_freq(inp: &FreqInputs, cfg: BisectConfig) -> Result<FreqSolution, String> {
    if inp.period_s <= inp.tau_trans_s {
        return Err(format!(
            "ISL transfer ({:.3} s) does not fit in the coverage time ({:.3} s)",
            inp.tau_trans_s, inp.period_s
        ));
    }
    if inp.total_cycles <= 0.0 {
        return if inp.feasible(inp.f_max_hz) {
            Ok(FreqSolution {
                freq_hz: inp.f_max_hz,
                branch: FreqBranch::RelayOnly,
                reduced: false,
            })
        } else {
            Err("the model relay alone violates the satellite battery constraint".into())
        };
    }
    let nu_l = inp.single_pass_freq();
    let (mut f, branch) = if inp.f_max_hz >= nu_l && inp.single_satellite_slack(nu_l) >= 0.0 {
        let r = bisect_predicate(|f| inp.single_satellite_slack(f) >= 0.0, nu_l, inp.f_max_hz, cfg);
        (r.x, FreqBranch::SinglePass)
    } else {
        let mut f = lemma2_closed_form(inp);
        if f >= nu_l {
            // Stay in the multi-pass regime the closed form was derived for.
            f = nu_l * (1.0 - 1e-9);
        }
        (f, FreqBranch::MultiPass)
    };
    let mut reduced = false;
    if !inp.feasible(f) {
        if !(f > 0.0) {
            return Err("no positive satellite frequency satisfies the battery constraint".into());
        }
        let floor = f * 1e-6;
        if !inp.feasible(floor) {
            return Err("no positive satellite frequency satisfies the battery constraint".into());
        }
        f = bisect_predicate(|x| inp.feasible(x), floor, f, cfg).x;
        reduced = true;
    }
    Ok(FreqSolution {
        freq_hz: f,
        branch,
        reduced,
    })
}

/// Frequency block: every cluster independently, α and b fixed.
pub fn solve_freq(
    scenario: &Scenario,
    decision: &DecisionVector,
    cfg: &OptimizerConfig,
) -> Result<Vec<FreqSolution>, OptimizeError> {
    par::map_range(scenario.num_clusters(), cfg.execution, |j| {
        let alpha = decision.cluster_alpha(scenario, j);
        let a = cost_model::offloaded_samples(scenario, j, &alpha);
        solve_cluster_freq(&FreqInputs::for_cluster(scenario, j, a), cfg.bisect)
            .map_err(|reason| OptimizeError::infeasible("f", Some(j), reason))
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lemma_example(p: f64) -> FreqInputs {
        FreqInputs {
            total_cycles: 3e7 * 6000.0,
            period_s: 360.0,
            tau_trans_s: 13.066,
            e_trans_j: 130.66,
            kappa: 1e-28,
            f_max_hz: 4e8,
            e_orig_j: 500.0,
            psi_j: 100.0,
            p_charge_w: p,
        }
    }

    #[test]
    fn lemma2_examples() {
        let sun = lemma_example(5.0);
        let raw = ((500.0f64 - 130.66 + 1800.0 - 100.0) / (1e-28 * (360.0 - 13.066))).cbrt();
        assert!((raw - 3.91e9).abs() / 3.91e9 < 0.01);
        assert_eq!(lemma2_closed_form(&sun), 4e8);
        let dark = lemma_example(0.0);
        assert_eq!(lemma2_closed_form(&dark), 4e8);
        let mut starved = dark;
        starved.psi_j = 500.0 - 130.66;
        starved.f_max_hz = 1e12;
        assert_eq!(lemma2_closed_form(&starved), 0.0);
        let mut charging = starved;
        charging.p_charge_w = 5.0;
        let expected = (360.0f64 * 5.0 / (1e-28 * (360.0 - 13.066))).cbrt();
        assert!((lemma2_closed_form(&charging) - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn multi_pass_solution_is_feasible() {
        let inp = lemma_example(0.0);
        let s = solve_cluster_freq(&inp, BisectConfig::default()).unwrap();
        assert_eq!(s.branch, FreqBranch::MultiPass);
        assert!(inp.feasible(s.freq_hz));
    }

    #[test]
    fn single_pass_hits_the_battery_limit() {
        let mut inp = lemma_example(0.0);
        inp.total_cycles = 3e7 * 1000.0;
        inp.f_max_hz = 1e10;
        let s = solve_cluster_freq(&inp, BisectConfig::default()).unwrap();
        assert_eq!(s.branch, FreqBranch::SinglePass);
        let slack = inp.single_satellite_slack(s.freq_hz);
        assert!(slack >= 0.0 && slack < 1e-3, "{slack}");
    }

    #[test]
    fn zero_offload_runs_at_max() {
        let mut inp = lemma_example(0.0);
        inp.total_cycles = 0.0;
        let s = solve_cluster_freq(&inp, BisectConfig::default()).unwrap();
        assert_eq!((s.freq_hz, s.branch), (4e8, FreqBranch::RelayOnly));
    }

    #[test]
    fn transfer_longer_than_coverage_is_infeasible() {
        let mut inp = lemma_example(0.0);
        inp.tau_trans_s = 400.0;
        assert!(solve_cluster_freq(&inp, BisectConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn sun_never_hurts(e in 200.0f64..900.0, cycles in 1e9f64..5e11, f_max in 1e8f64..1e11) {
            let mut dark = lemma_example(0.0);
            dark.e_orig_j = e;
            dark.total_cycles = cycles;
            dark.f_max_hz = f_max;
            let mut sun = dark;
            sun.p_charge_w = 5.0;
            prop_assert!(lemma2_closed_form(&sun) >= lemma2_closed_form(&dark));
            if let (Ok(d), Ok(s)) = (
                solve_cluster_freq(&dark, BisectConfig::default()),
                solve_cluster_freq(&sun, BisectConfig::default()),
            ) {
                prop_assert!(dark.feasible(d.freq_hz) && sun.feasible(s.freq_hz));
            }
        }
    }
}
