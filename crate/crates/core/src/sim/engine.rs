//! The round loop.

use std::sync::Arc;

use serde_json::json;

use super::timeline::{kind, sort_events, Event};
use super::{ClusterRecord, EnergyLedger, RoundRecord, SatelliteRecord, SimConfig, SimError};
use crate::cost_model::{self, YCase};
use crate::fl::{self, global_aggregate, intra_cluster_aggregate, Layout, LocalPass, ModelParams, TrainConfig};
use crate::optimizer::{check_feasibility, DecisionVector};
use crate::par;
use crate::rng;
use crate::scenario::offload::satellite_dataset;
use crate::scenario::{apply_offload, SampleSet, Scenario};

/// What the simulation trains and how it is evaluated.
#[derive(Clone, Debug)]
pub struct LearningSetup {
    pub layout: Layout,
    pub training: TrainConfig,
    pub test: Arc<SampleSet>,
}

/// One satellite of the chain, times relative to the end of the sync delay.
#[derive(Clone, Debug)]
struct ChainSat {
    arrival: f64,
    dwell: f64,
    busy: f64,
    compute: f64,
    cycles: f64,
    relay_only: bool,
}

#[derive(Clone, Debug)]
struct ClusterTiming {
    sats: Vec<ChainSat>,
    total_cycles: f64,
    tau_trans: f64,
    e_trans: f64,
    tau_rep: f64,
    tau_local: Vec<f64>,
    e_client: Vec<f64>,
    upload_end: Vec<f64>,
    y: f64,
    y_case: YCase,
    /// Schedule entries this round touched.
    consumed: usize,
}

/// Walks the coverage schedule from `cursor` for cluster `j`.
///
/// Each satellite first receives model and data over the ISL (τ_trans), then
/// computes until its coverage ends or the work runs out. A satellite whose
/// dwell does not exceed τ_trans only relays. Clients upload to whichever
/// satellite covers them once they finish, as in the three-case Y_j formula.
fn cluster_timing(
    scenario: &Scenario,
    j: usize,
    decision: &DecisionVector,
    cursor: usize,
) -> Result<ClusterTiming, SimError> {
    let cl = scenario.cluster(j);
    let alpha = decision.cluster_alpha(scenario, j);
    let bandwidth = decision.cluster_bandwidth(scenario, j);
    let f = decision.sat_freq_hz[j];
    let dwell = |i: usize| {
        cl.coverage.dwell_s(cursor + i).ok_or(SimError::ScheduleExhausted {
            cluster: cl.id,
            index: cursor + i,
        })
    };
    let a = cost_model::offloaded_samples(scenario, j, &alpha);
    let total_cycles = cl.sat_cycles_per_sample * a;
    let (tau_trans, e_trans) = cost_model::cluster_transfer(scenario, j, a);
    if total_cycles > 0.0 && !(f > 0.0) {
        return Err(SimError::Stalled {
            cluster: cl.id,
            reason: "samples are offloaded but the satellite frequency is zero".into(),
        });
    }
    if cl.coverage.is_fixed() && cl.period_s() <= tau_trans {
        return Err(cost_model::CostError::Infeasible(format!(
            "coverage time {} s does not exceed the ISL transfer time {tau_trans} s",
            cl.period_s()
        ))
        .into());
    }

    let mut sats = Vec::new();
    let mut remaining = total_cycles;
    let mut t = 0.0;
    let tau_rep = loop {
        let d = dwell(sats.len())?;
        let window = d - tau_trans;
        if window <= 0.0 {
            sats.push(ChainSat {
                arrival: t,
                dwell: d,
                busy: d,
                compute: 0.0,
                cycles: 0.0,
                relay_only: true,
            });
            t += d;
            continue;
        }
        let cap = window * f;
        if remaining < cap || total_cycles == 0.0 {
            let compute = if remaining > 0.0 { remaining / f } else { 0.0 };
            sats.push(ChainSat {
                arrival: t,
                dwell: d,
                busy: tau_trans + compute,
                compute,
                cycles: remaining,
                relay_only: false,
            });
            break t + tau_trans + compute;
        }
        sats.push(ChainSat {
            arrival: t,
            dwell: d,
            busy: d,
            compute: window,
            cycles: cap,
            relay_only: false,
        });
        remaining -= cap;
        t += d;
    };

    let members = scenario.members(j);
    let mut tau_local = Vec::with_capacity(members.len());
    let mut tau_agg = Vec::with_capacity(members.len());
    let mut e_client = Vec::with_capacity(members.len());
    for (i, &k) in members.iter().enumerate() {
        let (tl, el) = cost_model::client_compute(scenario, k, alpha[i]);
        let (ta, ea) = cost_model::client_uplink(scenario, k, bandwidth[i])?;
        tau_local.push(tl);
        tau_agg.push(ta);
        e_client.push(el + ea);
    }
    let max_local = tau_local.iter().copied().fold(0.0, f64::max);
    let max_agg = tau_agg.iter().copied().fold(0.0, f64::max);
    let last = sats.len() - 1;
    let a_last = sats[last].arrival;
    let (y, y_case, upload_end, consumed) = if max_local <= a_last {
        let ends: Vec<f64> = tau_agg.iter().map(|&g| a_last + g).collect();
        (a_last + max_agg, YCase::Case1, ends, sats.len())
    } else {
        // Slot s: the satellite whose coverage contains the slowest client's finish.
        let mut s = last;
        let mut start = a_last;
        let mut next = a_last + sats[last].dwell;
        while next <= max_local {
            s += 1;
            start = next;
            next += dwell(s)?;
        }
        let ends: Vec<f64> = tau_local.iter().zip(&tau_agg).map(|(&l, &g)| start.max(l) + g).collect();
        let v2 = ends.iter().copied().fold(0.0, f64::max);
        if v2 <= next {
            (v2, YCase::Case2, ends, s + 1)
        } else {
            dwell(s + 1)?;
            let ends = tau_agg.iter().map(|&g| next + g).collect();
            (next + max_agg, YCase::Case3, ends, s + 2)
        }
    };
    Ok(ClusterTiming {
        sats,
        total_cycles,
        tau_trans,
        e_trans,
        tau_rep,
        tau_local,
        e_client,
        upload_end,
        y,
        y_case,
        consumed,
    })
}

/// State carried between rounds.
#[derive(Clone, Debug)]
pub struct Simulation {
    scenario: Scenario,
    decision: DecisionVector,
    learning: Option<LearningSetup>,
    cfg: SimConfig,
    model: Option<ModelParams>,
    clock_s: f64,
    round: usize,
    cursors: Vec<usize>,
    batteries: Vec<Vec<f64>>,
    decision_feasible: bool,
}

struct ClusterOutcome {
    record: ClusterRecord,
    events: Vec<Event>,
    model: Option<ModelParams>,
    consumed: usize,
    residuals: Vec<f64>,
}

impl Simulation {
    /// Applies the offload of `decision` (done once, before training) and
    /// initializes the global model.
    pub fn new(
        scenario: &Scenario,
        decision: DecisionVector,
        learning: Option<LearningSetup>,
        cfg: SimConfig,
    ) -> Result<Self, SimError> {
        decision.check_shape(scenario)?;
        let decision_feasible = check_feasibility(scenario, &decision)?.all_pass();
        let offloaded = apply_offload(scenario, &decision.alpha)?;
        let model = match &learning {
            Some(l) => {
                l.training.validate()?;
                let corpus = scenario
                    .corpus()
                    .ok_or_else(|| fl::FlError::EmptyData("learning needs a scenario corpus".into()))?;
                if corpus.dim() != l.layout.inputs() {
                    return Err(fl::FlError::Shape(format!(
                        "corpus dim {} vs model {}",
                        corpus.dim(),
                        l.layout.describe()
                    ))
                    .into());
                }
                Some(fl::init_model(l.layout, l.training.seed))
            }
            None => None,
        };
        let j = scenario.num_clusters();
        Ok(Self {
            scenario: offloaded,
            decision,
            learning,
            cfg,
            model,
            clock_s: 0.0,
            round: 0,
            cursors: vec![0; j],
            batteries: vec![Vec::new(); j],
            decision_feasible,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn model(&self) -> Option<&ModelParams> {
        self.model.as_ref()
    }

    pub fn clock_s(&self) -> f64 {
        self.clock_s
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Whether the decision passed every hard constraint when the run started.
    pub fn decision_feasible(&self) -> bool {
        self.decision_feasible
    }

    /// Accuracy and loss of the current global model.
    pub fn evaluate(&self) -> Result<Option<(f64, f64)>, SimError> {
        match (&self.model, &self.learning) {
            (Some(m), Some(l)) => Ok(Some(fl::evaluate(m, &l.test)?)),
            _ => Ok(None),
        }
    }

    fn run_cluster(&self, j: usize, t0: f64) -> Result<ClusterOutcome, SimError> {
        let s = &self.scenario;
        let cl = s.cluster(j);
        let timing = cluster_timing(s, j, &self.decision, self.cursors[j])?;
        let base = t0 + cl.sync_delay_s;
        let f = self.decision.sat_freq_hz[j];
        let charge = cl.charge_power_w();
        let round = self.round;

        // Learning: satellite pass segmented by the cycles each satellite runs.
        let union = satellite_dataset(s, j);
        let mut sat_samples = vec![0usize; timing.sats.len()];
        let mut sat_model = None;
        let mut client_models = Vec::new();
        if let (Some(w), Some(l)) = (&self.model, &self.learning) {
            let corpus = s.corpus().expect("checked at construction");
            let seed = l.training.seed;
            if !union.is_empty() {
                let mut m = w.clone();
                let mut r = rng::stream(seed, &[rng::tag::SATELLITE, round as u64, u64::from(cl.id)]);
                let eta = l.training.lr.rate(round);
                let mut pass = LocalPass::new(w, corpus, &union, l.training.batch_size_satellite, eta, &l.training, &mut r)?;
                let mut done = 0.0;
                for (i, sat) in timing.sats.iter().enumerate() {
                    let before = pass.processed();
                    done += sat.cycles;
                    if i + 1 == timing.sats.len() {
                        pass.finish(&mut m)?;
                    } else if timing.total_cycles > 0.0 {
                        let upto = (done / timing.total_cycles * pass.len() as f64).round() as usize;
                        pass.advance(&mut m, upto)?;
                    }
                    sat_samples[i] = pass.processed() - before;
                }
                sat_model = Some(m);
            }
            client_models = par::map(s.members(j), self.cfg.execution, |&k| {
                let c = s.client(k);
                if c.dataset.retained.is_empty() {
                    return Ok(w.clone());
                }
                let mut r = rng::stream(seed, &[rng::tag::CLIENT, round as u64, u64::from(c.id)]);
                fl::local_update(w, corpus, &c.dataset.retained, l.training.batch_size_client, &l.training, round, &mut r)
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        }
        let model = match sat_model.as_ref().or(self.model.as_ref()) {
            Some(_) if !client_models.is_empty() => {
                let sizes: Vec<usize> = s.members(j).iter().map(|&k| s.client(k).dataset_size()).collect();
                let alpha_q: Vec<f64> = s
                    .members(j)
                    .iter()
                    .map(|&k| {
                        let d = &s.client(k).dataset;
                        d.offloaded.len() as f64 / d.len() as f64
                    })
                    .collect();
                Some(intra_cluster_aggregate(sat_model.as_ref(), &client_models, &alpha_q, &sizes)?)
            }
            _ => None,
        };

        // Ledger and events.
        let mut events = Vec::new();
        let mut handoffs = Vec::with_capacity(timing.sats.len());
        let mut residuals = Vec::with_capacity(timing.sats.len());
        let mut below_floor = 0;
        for (i, sat) in timing.sats.iter().enumerate() {
            let initial = if self.cfg.persistent_battery {
                self.batteries[j].get(i).copied().unwrap_or(cl.sat_initial_energy_j)
            } else {
                cl.sat_initial_energy_j
            };
            let consumed = cl.energy_coeff * sat.cycles * f * f + timing.e_trans;
            let ledger = EnergyLedger::new(initial, consumed, sat.busy * charge);
            if ledger.residual_j < cl.sat_min_residual_j {
                below_floor += 1;
            }
            residuals.push(ledger.residual_j);
            let index = self.cursors[j] + i;
            let arrival = base + sat.arrival;
            let detail = json!({
                "round": round,
                "satellite": index,
                "dwell_s": sat.dwell,
                "compute_s": sat.compute,
                "cycles": sat.cycles,
                "samples": sat_samples[i],
                "consumed_j": ledger.consumed_j,
                "charged_j": ledger.charged_j,
                "residual_j": ledger.residual_j,
            });
            events.push(Event {
                t_s: arrival,
                cluster: Some(cl.id),
                kind: kind::HANDOFF,
                detail,
            });
            if sat.relay_only {
                events.push(Event {
                    t_s: arrival,
                    cluster: Some(cl.id),
                    kind: kind::RELAY_ONLY,
                    detail: json!({
                        "round": round,
                        "satellite": index,
                        "dwell_s": sat.dwell,
                        "tau_trans_s": timing.tau_trans,
                    }),
                });
            }
            handoffs.push(SatelliteRecord {
                satellite: index,
                arrival_s: arrival,
                departure_s: arrival + sat.dwell,
                busy_s: sat.busy,
                compute_s: sat.compute,
                cycles: sat.cycles,
                samples: sat_samples[i],
                relay_only: sat.relay_only,
                ledger,
            });
        }
        events.push(Event {
            t_s: base + timing.tau_rep,
            cluster: Some(cl.id),
            kind: kind::SATELLITE_DONE,
            detail: json!({ "round": round, "cycles": timing.total_cycles, "samples": union.len() }),
        });
        for (i, &k) in s.members(j).iter().enumerate() {
            let id = s.client(k).id;
            events.push(Event {
                t_s: base + timing.tau_local[i],
                cluster: Some(cl.id),
                kind: kind::CLIENT_LOCAL_DONE,
                detail: json!({ "round": round, "client": id, "samples": s.client(k).dataset.retained.len() }),
            });
            events.push(Event {
                t_s: base + timing.upload_end[i],
                cluster: Some(cl.id),
                kind: kind::CLIENT_UPLOAD_DONE,
                detail: json!({ "round": round, "client": id, "energy_j": timing.e_client[i] }),
            });
        }
        let ready = base + timing.y.max(timing.tau_rep);
        events.push(Event {
            t_s: ready,
            cluster: Some(cl.id),
            kind: kind::CLUSTER_AGGREGATE,
            detail: json!({ "round": round, "y_case": timing.y_case.as_u8(), "y_s": timing.y, "tau_rep_s": timing.tau_rep }),
        });
        let tau_cluster = ready + cl.glob_delay_s - t0;
        Ok(ClusterOutcome {
            record: ClusterRecord {
                cluster: cl.id,
                n_satellites_used: handoffs.len(),
                handoffs,
                y_case: timing.y_case,
                y_s: timing.y,
                tau_rep_s: timing.tau_rep,
                tau_cluster_s: tau_cluster,
                total_cycles: timing.total_cycles,
                client_energy_j: timing.e_client,
                below_floor,
            },
            events,
            model,
            consumed: timing.consumed,
            residuals,
        })
    }

    /// Runs one round and returns its record and timeline events.
    pub fn run_round(&mut self) -> Result<(RoundRecord, Vec<Event>), SimError> {
        let t0 = self.clock_s;
        let outcomes = par::map_range(self.scenario.num_clusters(), self.cfg.execution, |j| self.run_cluster(j, t0))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let tau_round = outcomes
            .iter()
            .map(|o| o.record.tau_cluster_s)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut events = vec![Event {
            t_s: t0,
            cluster: None,
            kind: kind::ROUND_START,
            detail: json!({ "round": self.round }),
        }];
        let mut clusters = Vec::with_capacity(outcomes.len());
        let mut models = Vec::with_capacity(outcomes.len());
        for (j, o) in outcomes.into_iter().enumerate() {
            events.extend(o.events);
            self.cursors[j] += o.consumed;
            if self.cfg.persistent_battery {
                let cap = self.scenario.cluster(j).sat_initial_energy_j;
                let b = &mut self.batteries[j];
                for (i, r) in o.residuals.into_iter().enumerate() {
                    let r = r.min(cap);
                    match b.get_mut(i) {
                        Some(slot) => *slot = r,
                        None => b.push(r),
                    }
                }
            }
            models.extend(o.model);
            clusters.push(o.record);
        }
        if !models.is_empty() {
            self.model = Some(global_aggregate(&models)?);
        }
        let metrics = self.evaluate()?;
        self.clock_s = t0 + tau_round;
        events.push(Event {
            t_s: self.clock_s,
            cluster: None,
            kind: kind::GLOBAL_AGGREGATE,
            detail: json!({
                "round": self.round,
                "accuracy": metrics.map(|m| m.0),
                "loss": metrics.map(|m| m.1),
            }),
        });
        sort_events(&mut events);
        let record = RoundRecord {
            round: self.round,
            start_s: t0,
            tau_round_s: tau_round,
            clock_s: self.clock_s,
            clusters,
            accuracy: metrics.map(|m| m.0),
            loss: metrics.map(|m| m.1),
        };
        self.round += 1;
        Ok((record, events))
    }
}

/// Records and merged timeline of a whole run.
#[derive(Clone, Debug)]
pub struct Experiment {
    /// Accuracy and loss of the initial model, if learning is attached.
    pub initial: Option<(f64, f64)>,
    pub records: Vec<RoundRecord>,
    pub events: Vec<Event>,
    pub decision_feasible: bool,
}

impl Experiment {
    /// (clock, accuracy) after every round.
    pub fn accuracy_series(&self) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.accuracy.map(|a| (r.clock_s, a)))
            .collect()
    }
}

/// Preprocessing, then `rounds` rounds.
pub fn run_experiment(
    scenario: &Scenario,
    decision: &DecisionVector,
    learning: Option<LearningSetup>,
    cfg: SimConfig,
    rounds: usize,
) -> Result<Experiment, SimError> {
    let mut sim = Simulation::new(scenario, decision.clone(), learning, cfg)?;
    let initial = sim.evaluate()?;
    let mut records = Vec::with_capacity(rounds);
    let mut events = Vec::new();
    for _ in 0..rounds {
        let (r, e) = sim.run_round()?;
        records.push(r);
        events.extend(e);
    }
    Ok(Experiment {
        initial,
        records,
        events,
        decision_feasible: sim.decision_feasible(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{optimize, OptimizerConfig};
    use crate::par::Execution;
    use crate::scenario::coverage::{CoverageInterval, CoverageSchedule};
    use crate::scenario::reference::{random_instance, ReferenceParams};
    use crate::scenario::validate_scenario;

    fn reference() -> Scenario {
        validate_scenario(ReferenceParams::default().without_data().spec(0)).unwrap()
    }

    fn optimized(s: &Scenario) -> DecisionVector {
        optimize(s, &OptimizerConfig::default(), None).unwrap().decision
    }

    #[test]
    fn fixed_t_matches_cost_model() {
        for seed in 0..15 {
            let s = validate_scenario(random_instance(seed, 2, 3)).unwrap();
            let Ok(out) = optimize(&s, &OptimizerConfig::default(), None) else {
                continue;
            };
            let exp = run_experiment(&s, &out.decision, None, SimConfig::default(), 3).unwrap();
            let cost = cost_model::round_latency(&s, &out.decision).unwrap();
            for r in &exp.records {
                assert!((r.tau_round_s - cost.tau_round_s).abs() <= 1e-9 * cost.tau_round_s);
                for (c, cc) in r.clusters.iter().zip(&cost.clusters) {
                    assert_eq!(c.n_satellites_used as u64, cc.n_handoffs + 1);
                    assert_eq!(c.y_case, cc.y_case);
                    assert!((c.tau_cluster_s - cc.tau_cluster_s).abs() <= 1e-9 * cc.tau_cluster_s);
                }
            }
        }
    }

    #[test]
    fn terrestrial_has_no_satellite_compute() {
        let s = reference();
        let d = DecisionVector::terrestrial(&s);
        let exp = run_experiment(&s, &d, None, SimConfig::default(), 1).unwrap();
        for c in &exp.records[0].clusters {
            assert_eq!(c.n_satellites_used, 1);
            assert_eq!(c.computed_cycles(), 0.0);
        }
        assert!(exp.events.iter().all(|e| e.detail.get("cycles").is_none_or(|c| c == 0.0)));
    }

    #[test]
    fn two_handoffs_use_three_satellites() {
        // 6000 offloaded samples at 2e8 Hz: τ_trans = 13.066 s, N = 2, τ_rep ≈ 939.2 s.
        let s = reference();
        let mut d = DecisionVector::terrestrial(&s);
        d.alpha.fill(0.5);
        d.sat_freq_hz.fill(2e8);
        let cost = cost_model::round_latency(&s, &d).unwrap();
        assert_eq!(cost.clusters[0].n_handoffs, 2);
        let exp = run_experiment(&s, &d, None, SimConfig::default(), 1).unwrap();
        let c = &exp.records[0].clusters[0];
        assert_eq!(c.n_satellites_used, 3);
        assert!((c.tau_rep_s - 939.2).abs() < 0.05);
        assert!((c.tau_rep_s - cost.clusters[0].tau_rep_s).abs() < 1e-9 * c.tau_rep_s);
        let arrivals: Vec<f64> = c.handoffs.iter().map(|h| h.arrival_s).collect();
        assert_eq!(arrivals, vec![1.0, 361.0, 721.0]);
    }

    #[test]
    fn short_interval_is_relay_only() {
        let mut spec = ReferenceParams::default().without_data().spec(0);
        spec.clusters[0].coverage = CoverageSchedule::from_intervals(vec![
            CoverageInterval { start_s: 0.0, end_s: 5.0 },
            CoverageInterval { start_s: 5.0, end_s: 400.0 },
            CoverageInterval { start_s: 400.0, end_s: 800.0 },
            CoverageInterval { start_s: 800.0, end_s: 1200.0 },
        ])
        .unwrap();
        let s = validate_scenario(spec).unwrap();
        let mut d = DecisionVector::terrestrial(&s);
        d.alpha[..10].fill(0.5);
        d.sat_freq_hz[0] = 2e9;
        let exp = run_experiment(&s, &d, None, SimConfig::default(), 1).unwrap();
        let c = &exp.records[0].clusters[0];
        assert!(c.handoffs[0].relay_only);
        assert_eq!(c.handoffs[0].cycles, 0.0);
        assert!(exp
            .events
            .iter()
            .any(|e| e.kind == kind::RELAY_ONLY && e.cluster == Some(0)));
        assert!((c.computed_cycles() - c.total_cycles).abs() <= 1e-9 * c.total_cycles);
    }

    #[test]
    fn varying_schedule_conserves_cycles() {
        let mut spec = ReferenceParams::default().without_data().spec(1);
        // Dwells alternate 380 s and 436 s (mean 408 s) with 20 s gaps.
        let mut t = 0.0;
        let iv: Vec<CoverageInterval> = (0..400)
            .map(|i| {
                let d = if i % 2 == 0 { 380.0 } else { 436.0 };
                let v = CoverageInterval { start_s: t, end_s: t + d };
                t += d + 20.0;
                v
            })
            .collect();
        let varying = CoverageSchedule::from_intervals(iv).unwrap();
        assert_eq!(varying.mean_s(), 408.0);
        for c in &mut spec.clusters {
            c.coverage = varying.clone();
        }
        let s = validate_scenario(spec).unwrap();
        let fixed = reference();
        // Three satellites per round at T = 360 s, two under the varying schedule.
        let mut d = DecisionVector::terrestrial(&fixed);
        d.alpha.fill(0.5);
        d.sat_freq_hz.fill(2.5e8);
        let a = run_experiment(&fixed, &d, None, SimConfig::default(), 2).unwrap();
        let b = run_experiment(&s, &d, None, SimConfig::default(), 2).unwrap();
        let count = |e: &Experiment| e.records.iter().flat_map(|r| &r.clusters).map(|c| c.n_satellites_used).sum::<usize>();
        assert_ne!(count(&a), count(&b));
        for (ra, rb) in a.records.iter().zip(&b.records) {
            for (ca, cb) in ra.clusters.iter().zip(&rb.clusters) {
                assert_eq!(ca.total_cycles, cb.total_cycles);
                assert!((cb.computed_cycles() - cb.total_cycles).abs() <= 1e-9 * cb.total_cycles.max(1.0));
            }
        }
    }

    #[test]
    fn equal_intervals_match_fixed_t() {
        let fixed = reference();
        let mut spec = fixed.clone().into_spec();
        let iv: Vec<CoverageInterval> = (0..200)
            .map(|i| CoverageInterval {
                start_s: 360.0 * i as f64,
                end_s: 360.0 * (i + 1) as f64,
            })
            .collect();
        for c in &mut spec.clusters {
            c.coverage = CoverageSchedule::from_intervals(iv.clone()).unwrap();
        }
        let s = validate_scenario(spec).unwrap();
        let d = optimized(&fixed);
        let a = run_experiment(&fixed, &d, None, SimConfig::default(), 3).unwrap();
        let b = run_experiment(&s, &d, None, SimConfig::default(), 3).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert!((ra.tau_round_s - rb.tau_round_s).abs() < 1e-9 * ra.tau_round_s);
        }
    }

    #[test]
    fn exhausted_schedule_is_an_error() {
        let mut spec = ReferenceParams::default().without_data().spec(0);
        spec.clusters[0].coverage =
            CoverageSchedule::from_intervals(vec![CoverageInterval { start_s: 0.0, end_s: 100.0 }]).unwrap();
        let s = validate_scenario(spec).unwrap();
        let mut d = DecisionVector::terrestrial(&s);
        d.alpha[..10].fill(0.8);
        d.sat_freq_hz[0] = 1e9;
        let err = run_experiment(&s, &d, None, SimConfig::default(), 1).unwrap_err();
        assert!(matches!(err, SimError::ScheduleExhausted { .. }), "{err}");
    }

    #[test]
    fn ledger_identity_and_persistent_battery() {
        let s = reference();
        let d = optimized(&s);
        for persistent in [false, true] {
            let cfg = SimConfig {
                persistent_battery: persistent,
                execution: Execution::Sequential,
            };
            let exp = run_experiment(&s, &d, None, cfg, 4).unwrap();
            for r in &exp.records {
                for c in &r.clusters {
                    for h in &c.handoffs {
                        let l = h.ledger;
                        let scale = l.initial_j.abs().max(l.consumed_j).max(l.charged_j);
                        assert!((l.residual_j - (l.initial_j - l.consumed_j + l.charged_j)).abs() <= 1e-9 * scale);
                    }
                    if !persistent {
                        assert_eq!(c.below_floor, 0);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_rounds_only_preprocess() {
        let s = reference();
        let exp = run_experiment(&s, &DecisionVector::terrestrial(&s), None, SimConfig::default(), 0).unwrap();
        assert!(exp.records.is_empty() && exp.events.is_empty());
    }

    #[test]
    fn learning_is_deterministic_and_handoff_invariant() {
        let mut p = ReferenceParams::default();
        p.samples_per_client = 60;
        p.clusters = 2;
        p.clients_per_cluster = 3;
        let (spec, test) = p.spec_with_data(2).unwrap();
        let s = validate_scenario(spec).unwrap();
        let setup = LearningSetup {
            layout: Layout::Mlp { inputs: 16, hidden: 8, classes: 10 },
            training: TrainConfig::default(),
            test: Arc::new(test.unwrap()),
        };
        let mut d = DecisionVector::terrestrial(&s);
        d.alpha.fill(0.5);
        d.sat_freq_hz.fill(1e6);
        let run = |d: &DecisionVector, exec| {
            let cfg = SimConfig { persistent_battery: false, execution: exec };
            run_experiment(&s, d, Some(setup.clone()), cfg, 2).unwrap()
        };
        let a = run(&d, Execution::Parallel);
        let b = run(&d, Execution::Sequential);
        assert_eq!(a.records, b.records);
        assert!(a.records[0].clusters[0].n_satellites_used > 1);
        // A faster satellite finishes in one dwell; the learned model is unchanged.
        let mut fast = d.clone();
        fast.sat_freq_hz.fill(1e10);
        let c = run(&fast, Execution::Parallel);
        assert_eq!(c.records[0].clusters[0].n_satellites_used, 1);
        assert_eq!(a.records[1].accuracy, c.records[1].accuracy);
        assert_eq!(a.records[1].loss, c.records[1].loss);
    }
}
