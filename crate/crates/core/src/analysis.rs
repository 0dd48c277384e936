//! Convergence-bound quantities: sample variances, Ω, Γ_R and the bound U,
//! plus empirical estimates of the smoothness constant L and the data
//! variability ρ.
//!
//! L̂ and ρ̂ are maxima over random pairs, so they are lower bounds on the true
//! constants, and F* is the best objective value observed along a run. The
//! resulting U is reported, not certified.

use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::fl::{FlError, Layout, LrSchedule, ModelParams, TrainConfig};
use crate::optimizer::DecisionVector;
use crate::par::{self, Execution};
use crate::rng;
use crate::scenario::data::GaussianMixture;
use crate::scenario::offload::satellite_dataset;
use crate::scenario::reference::{ReferenceData, ReferenceParams};
use crate::scenario::{apply_offload, validate_scenario, PartitionMode, SampleSet, Scenario, ScenarioError};
use crate::sim::{LearningSetup, SimConfig, SimError, Simulation};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("sample variance needs at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("bound inputs: {0}")]
    Invalid(String),
    #[error(transparent)]
    Fl(#[from] FlError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Unbiased sample variance of the feature vectors (squared Euclidean
/// distance to the mean, divided by n − 1).
pub fn sample_variance(set: &SampleSet) -> Result<f64, AnalysisError> {
    let all: Vec<usize> = (0..set.len()).collect();
    subset_variance(set, &all)
}

/// [`sample_variance`] of the samples at `indices`.
pub fn subset_variance(set: &SampleSet, indices: &[usize]) -> Result<f64, AnalysisError> {
    let n = indices.len();
    if n < 2 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    let mut mean = vec![0.0; set.dim()];
    for &i in indices {
        for (m, x) in mean.iter_mut().zip(set.features(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let ss: f64 = indices
        .iter()
        .map(|&i| set.features(i).iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
        .sum();
    Ok(ss / (n - 1) as f64)
}

/// One dataset's contribution to Ω: its size |D|, the batch size λ used on
/// it and its sample variance V.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BatchTerm {
    pub samples: usize,
    pub batch: usize,
    pub variance: f64,
}

impl BatchTerm {
    /// (1 − λ/|D|)·(|D| − 1)ρ/λ·V. Sets of fewer than two samples contribute 0.
    pub fn contribution(&self, rho: f64) -> f64 {
        if self.samples < 2 {
            return 0.0;
        }
        let n = self.samples as f64;
        let l = self.batch as f64;
        (1.0 - l / n) * ((n - 1.0) * rho / l) * self.variance
    }
}

/// Terms of one cluster: each client's retained set and the satellite's
/// offloaded union (absent when nothing was offloaded).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterBatchTerms {
    pub clients: Vec<BatchTerm>,
    pub satellite: Option<BatchTerm>,
}

/// Batch terms of an offloaded scenario with batch sizes clamped to each set.
pub fn batch_terms(
    scenario: &Scenario,
    batch_client: usize,
    batch_satellite: usize,
) -> Result<Vec<ClusterBatchTerms>, AnalysisError> {
    let corpus = scenario
        .corpus()
        .ok_or_else(|| AnalysisError::Invalid("sample variances need a scenario corpus".into()))?;
    let term = |idx: &[usize], batch: usize| -> Result<BatchTerm, AnalysisError> {
        let variance = if idx.len() >= 2 { subset_variance(corpus, idx)? } else { 0.0 };
        Ok(BatchTerm {
            samples: idx.len(),
            batch: batch.clamp(1, idx.len().max(1)),
            variance,
        })
    };
    (0..scenario.num_clusters())
        .map(|j| {
            let clients = scenario
                .members(j)
                .iter()
                .map(|&k| term(&scenario.client(k).dataset.retained, batch_client))
                .collect::<Result<Vec<_>, _>>()?;
            let union = satellite_dataset(scenario, j);
            let satellite = if union.is_empty() {
                None
            } else {
                Some(term(&union, batch_satellite)?)
            };
            Ok(ClusterBatchTerms { clients, satellite })
        })
        .collect()
}

/// Everything the bound needs. Batch sizes are the same in every round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundInputs {
    pub lr: LrSchedule,
    pub rounds: usize,
    pub smoothness: f64,
    pub rho: f64,
    pub clusters: Vec<ClusterBatchTerms>,
    /// Σ_j Σ_k |D_k|.
    pub total_samples: usize,
    pub f0: f64,
    pub f_star: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let mut errs = Vec::new();
        if self.rounds == 0 {
            errs.push("rounds must be positive".to_string());
        }
        if !(self.smoothness > 0.0 && self.smoothness.is_finite()) {
            errs.push(format!("smoothness must be positive, got {}", self.smoothness));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            errs.push(format!("rho must be non-negative, got {}", self.rho));
        }
        if self.total_samples == 0 {
            errs.push("total sample count is zero".to_string());
        }
        let terms = self
            .clusters
            .iter()
            .flat_map(|c| c.clients.iter().chain(&c.satellite));
        for t in terms {
            if t.samples > 0 && !(1..=t.samples).contains(&t.batch) {
                errs.push(format!("batch {} outside [1, {}]", t.batch, t.samples));
            }
            if !(t.variance >= 0.0 && t.variance.is_finite()) {
                errs.push(format!("variance must be non-negative, got {}", t.variance));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(AnalysisError::Invalid(errs.join("; ")))
        }
    }

    /// Whether η_r ≤ 1/(2L) holds in every round.
    pub fn premise_holds(&self) -> bool {
        let cap = 1.0 / (2.0 * self.smoothness);
        (0..self.rounds).all(|r| self.lr.rate(r) <= cap * (1.0 + 1e-12))
    }
}

/// Ω of Theorem 1.
pub fn omega(inputs: &BoundInputs) -> Result<f64, AnalysisError> {
    inputs.validate()?;
    let per_round: f64 = inputs
        .clusters
        .iter()
        .map(|c| {
            c.clients.iter().map(|t| t.contribution(inputs.rho)).sum::<f64>()
                + c.satellite.map_or(0.0, |t| t.contribution(inputs.rho))
        })
        .sum();
    Ok(2.0 / inputs.total_samples as f64 * inputs.rounds as f64 * per_round)
}

/// Γ_R = Σ_{r<R} η_r.
pub fn gamma(lr: &LrSchedule, rounds: usize) -> f64 {
    (0..rounds).map(|r| lr.rate(r)).sum()
}

pub fn sum_eta_sq(lr: &LrSchedule, rounds: usize) -> f64 {
    (0..rounds).map(|r| lr.rate(r).powi(2)).sum()
}

/// U = 2(F⁰ − F*)/Γ_R + 2LΩ·Σ η_r²/Γ_R.
pub fn convergence_bound(inputs: &BoundInputs, omega: f64) -> f64 {
    let g = gamma(&inputs.lr, inputs.rounds);
    2.0 * (inputs.f0 - inputs.f_star) / g
        + 2.0 * inputs.smoothness * omega * sum_eta_sq(&inputs.lr, inputs.rounds) / g
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn random_point(r: &mut impl Rng, dim: usize) -> Vec<f64> {
    let scale = 10f64.powf(r.gen_range(-2.0..=0.0)) / (dim as f64).sqrt();
    (0..dim).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect()
}

/// Largest ‖g(w) − g(v)‖/‖w − v‖ over `trials` random pairs, followed by a
/// few power-iteration refinements of the best pairs' directions. Pairs at
/// zero distance are skipped.
pub fn max_gradient_ratio<E, G>(dim: usize, trials: usize, seed: u64, exec: Execution, grad: G) -> Result<f64, E>
where
    E: Send,
    G: Fn(&[f64]) -> Result<Vec<f64>, E> + Sync + Send,
{
    const REFINE_PAIRS: usize = 4;
    const REFINE_STEPS: usize = 5;
    let ratio = |w: &[f64], gw: &[f64], v: &[f64]| -> Result<Option<(f64, Vec<f64>)>, E> {
        let d = norm_diff(w, v);
        if d == 0.0 {
            return Ok(None);
        }
        let gv = grad(v)?;
        Ok(Some((norm_diff(gw, &gv) / d, gv)))
    };
    let results = par::map_range(trials, exec, |t| -> Result<(f64, usize), E> {
        let mut r = rng::stream(seed, &[rng::tag::ANALYSIS, 0, t as u64]);
        let w = random_point(&mut r, dim);
        let u = random_point(&mut r, dim);
        let step = 10f64.powf(r.gen_range(-4.0..=0.0));
        let un = u.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let v: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a + step * b / un).collect();
        let gw = grad(&w)?;
        Ok((ratio(&w, &gw, &v)?.map_or(0.0, |x| x.0), t))
    });
    let mut scored = results.into_iter().collect::<Result<Vec<_>, E>>()?;
    let mut best = scored.iter().map(|s| s.0).fold(0.0, f64::max);
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let refined = par::map(&scored[..scored.len().min(REFINE_PAIRS)], exec, |&(_, t)| -> Result<f64, E> {
        let mut r = rng::stream(seed, &[rng::tag::ANALYSIS, 0, t as u64]);
        let w = random_point(&mut r, dim);
        let u = random_point(&mut r, dim);
        let step = 10f64.powf(r.gen_range(-4.0..=0.0));
        let gw = grad(&w)?;
        let mut dir = u;
        let mut top = 0.0f64;
        for _ in 0..REFINE_STEPS {
            let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(n > 0.0 && n.is_finite()) {
                break;
            }
            let v: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a + step * b / n).collect();
            let Some((q, gv)) = ratio(&w, &gw, &v)? else { break };
            top = top.max(q);
            dir = gv.iter().zip(&gw).map(|(a, b)| a - b).collect();
        }
        Ok(top)
    });
    for q in refined {
        best = best.max(q?);
    }
    Ok(best)
}

/// Largest ‖∇ℓ(x; w) − ∇ℓ(x'; w)‖/‖x − x'‖ over sample pairs at a few random
/// weight vectors. Every pair is visited when there are at most `trials` of
/// them; otherwise `trials` random pairs are drawn.
pub fn max_sample_ratio(
    layout: Layout,
    data: &SampleSet,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<f64, AnalysisError> {
    const POINTS: u64 = 4;
    let n = data.len();
    if n < 2 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    let total_pairs = n * (n - 1) / 2;
    let pairs: Vec<(usize, usize)> = if total_pairs <= trials {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut r = rng::stream(seed, &[rng::tag::ANALYSIS, 2]);
        (0..trials)
            .map(|_| {
                let s = sample_indices(&mut r, n, 2);
                (s.index(0), s.index(1))
            })
            .collect()
    };
    let mut best = 0.0f64;
    for p in 0..POINTS {
        let mut r = rng::stream(seed, &[rng::tag::ANALYSIS, 1, p]);
        let model = ModelParams {
            layout,
            values: random_point(&mut r, layout.param_count()),
        };
        let ratios = par::map(&pairs, exec, |&(i, j)| -> Result<f64, FlError> {
            let d = norm_diff(data.features(i), data.features(j));
            if d == 0.0 {
                return Ok(0.0);
            }
            let (_, gi) = model.loss_and_grad(data, &[i])?;
            let (_, gj) = model.loss_and_grad(data, &[j])?;
            Ok(norm_diff(&gi, &gj) / d)
        });
        for q in ratios {
            best = best.max(q?);
        }
    }
    Ok(best)
}

/// Empirical L̂ and ρ̂. Both are lower bounds on the true constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothnessEstimate {
    pub l_hat: f64,
    pub rho_hat: f64,
    pub trials: usize,
}

/// L̂ of the mean loss over `data` and ρ̂ over its sample pairs.
pub fn estimate_smoothness_and_rho(
    layout: Layout,
    data: &SampleSet,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<SmoothnessEstimate, AnalysisError> {
    let all: Vec<usize> = (0..data.len()).collect();
    let l_hat = max_gradient_ratio(layout.param_count(), trials, seed, exec, |w| {
        let m = ModelParams {
            layout,
            values: w.to_vec(),
        };
        m.loss_and_grad(data, &all).map(|(_, g)| g)
    })?;
    let rho_hat = max_sample_ratio(layout, data, trials, seed, exec)?;
    Ok(SmoothnessEstimate { l_hat, rho_hat, trials })
}

/// F(w) = (1/J) Σ_j F_j(w), with F_j the mean loss over every sample of
/// cluster j, and its gradient.
pub fn global_objective(scenario: &Scenario, model: &ModelParams) -> Result<(f64, Vec<f64>), AnalysisError> {
    let corpus = scenario
        .corpus()
        .ok_or_else(|| AnalysisError::Invalid("objective needs a scenario corpus".into()))?;
    let j = scenario.num_clusters();
    let mut f = 0.0;
    let mut grad = vec![0.0; model.len()];
    for c in 0..j {
        let idx: Vec<usize> = scenario
            .members(c)
            .iter()
            .flat_map(|&k| scenario.client(k).dataset.all())
            .collect();
        let (fj, gj) = model.loss_and_grad(corpus, &idx)?;
        f += fj / j as f64;
        for (g, x) in grad.iter_mut().zip(gj) {
            *g += x / j as f64;
        }
    }
    Ok((f, grad))
}

/// F(w^r) for r = 0..=R and ‖∇F(w^r)‖² for r < R along one simulated run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub objective: Vec<f64>,
    pub grad_sq: Vec<f64>,
    pub etas: Vec<f64>,
}

impl Trajectory {
    /// (1/Γ_R) Σ η_r ‖∇F(w^r)‖².
    pub fn weighted_grad_sq(&self) -> f64 {
        let g: f64 = self.etas.iter().sum();
        self.etas.iter().zip(&self.grad_sq).map(|(e, s)| e * s).sum::<f64>() / g
    }

    pub fn best_objective(&self) -> f64 {
        self.objective.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn measure_trajectory(
    scenario: &Scenario,
    decision: &DecisionVector,
    learning: LearningSetup,
    cfg: SimConfig,
    rounds: usize,
) -> Result<Trajectory, AnalysisError> {
    let lr = learning.training.lr;
    let mut sim = Simulation::new(scenario, decision.clone(), Some(learning), cfg)?;
    let mut out = Trajectory {
        objective: Vec::with_capacity(rounds + 1),
        grad_sq: Vec::with_capacity(rounds),
        etas: (0..rounds).map(|r| lr.rate(r)).collect(),
    };
    for _ in 0..=rounds {
        let model = sim.model().expect("learning attached");
        let (f, g) = global_objective(sim.scenario(), model)?;
        out.objective.push(f);
        if out.grad_sq.len() == rounds {
            break;
        }
        out.grad_sq.push(g.iter().map(|x| x * x).sum());
        sim.run_round()?;
    }
    Ok(out)
}

/// A small multinomial-logistic problem for checking the bound.
#[derive(Clone, Debug)]
pub struct ToyProblem {
    pub scenario: Scenario,
    pub decision: DecisionVector,
    pub layout: Layout,
    pub test: Arc<SampleSet>,
    /// λ_C and λ_S; `usize::MAX` means full batches.
    pub batch_client: usize,
    pub batch_satellite: usize,
    /// Random pairs used for L̂ and ρ̂.
    pub trials: usize,
}

impl ToyProblem {
    /// 2 clusters × 3 clients × 40 samples of a 3-class, 4-dimensional
    /// Gaussian mixture; each client offloads 40% of its data.
    pub fn convex(seed: u64) -> Result<Self, AnalysisError> {
        let mut p = ReferenceParams::default();
        p.clusters = 2;
        p.clients_per_cluster = 3;
        p.samples_per_client = 40;
        p.sun_facing_clusters = 1;
        p.max_offload_fraction = 0.5;
        p.data = Some(ReferenceData {
            mixture: GaussianMixture {
                classes: 3,
                dim: 4,
                mean_scale: 1.0,
                class_means: None,
                noise_sigma: 1.0,
                seed,
            },
            partition: PartitionMode::Iid,
            sensitive_fraction: Some(0.5),
            test_samples: 60,
        });
        let (spec, test) = p.spec_with_data(seed)?;
        let scenario = validate_scenario(spec)?;
        let mut decision = DecisionVector::terrestrial(&scenario);
        decision.alpha = vec![0.4; scenario.num_clients()];
        Ok(Self {
            scenario,
            decision,
            layout: Layout::Logistic { inputs: 4, classes: 3 },
            test: Arc::new(test.expect("reference data attached")),
            batch_client: usize::MAX,
            batch_satellite: usize::MAX,
            trials: 2000,
        })
    }

    pub fn with_batches(mut self, client: usize, satellite: usize) -> Self {
        self.batch_client = client;
        self.batch_satellite = satellite;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedCheck {
    pub seed: u64,
    pub f0: f64,
    pub f_star: f64,
    pub lhs: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub rounds: usize,
    pub estimate: SmoothnessEstimate,
    pub eta0: f64,
    pub terms: Vec<ClusterBatchTerms>,
    pub omega: f64,
    pub gamma: f64,
    pub sum_eta_sq: f64,
    pub seeds: Vec<SeedCheck>,
    pub lhs_mean: f64,
    pub bound_mean: f64,
    pub all_hold: bool,
    pub note: &'static str,
}

pub const UNCERTIFIED: &str = "reported, not certified: L and rho are empirical lower bounds and F* is the best observed objective";

/// Runs single-step training with η_r = η_0/(1 + r), η_0 = 1/(2L̂), once per
/// seed, and compares (1/Γ_R) Σ η_r ‖∇F(w^r)‖² against U.
pub fn verify_bound_empirically(toy: &ToyProblem, rounds: usize, seeds: &[u64]) -> Result<EmpiricalReport, AnalysisError> {
    if rounds == 0 || seeds.is_empty() {
        return Err(AnalysisError::Invalid("need at least one round and one seed".into()));
    }
    let corpus = toy
        .scenario
        .corpus()
        .ok_or_else(|| AnalysisError::Invalid("toy scenario has no corpus".into()))?;
    let used: Vec<usize> = toy.scenario.clients().iter().flat_map(|c| c.dataset.all()).collect();
    let estimate = estimate_smoothness_and_rho(
        toy.layout,
        &corpus.subset(&used),
        toy.trials,
        toy.scenario.seed(),
        Execution::default(),
    )?;
    let eta0 = 1.0 / (2.0 * estimate.l_hat);
    let lr = LrSchedule::Decay { eta0 };
    let offloaded = apply_offload(&toy.scenario, &toy.decision.alpha)?;
    let terms = batch_terms(&offloaded, toy.batch_client, toy.batch_satellite)?;
    let total_samples = toy.scenario.clients().iter().map(|c| c.dataset_size()).sum();
    let mut checks = Vec::with_capacity(seeds.len());
    let mut om = 0.0;
    for &seed in seeds {
        let training = TrainConfig {
            lr,
            batch_size_client: toy.batch_client,
            batch_size_satellite: toy.batch_satellite,
            momentum: 0.0,
            prox_mu: 0.0,
            rounds,
            seed,
            single_step: true,
        };
        let learning = LearningSetup {
            layout: toy.layout,
            training,
            test: toy.test.clone(),
        };
        let traj = measure_trajectory(&toy.scenario, &toy.decision, learning, SimConfig::default(), rounds)?;
        let inputs = BoundInputs {
            lr,
            rounds,
            smoothness: estimate.l_hat,
            rho: estimate.rho_hat,
            clusters: terms.clone(),
            total_samples,
            f0: traj.objective[0],
            f_star: traj.best_objective(),
        };
        om = omega(&inputs)?;
        let bound = convergence_bound(&inputs, om);
        let lhs = traj.weighted_grad_sq();
        checks.push(SeedCheck {
            seed,
            f0: inputs.f0,
            f_star: inputs.f_star,
            lhs,
            bound,
            holds: lhs <= bound,
        });
    }
    let n = checks.len() as f64;
    Ok(EmpiricalReport {
        rounds,
        estimate,
        eta0,
        terms,
        omega: om,
        gamma: gamma(&lr, rounds),
        sum_eta_sq: sum_eta_sq(&lr, rounds),
        lhs_mean: checks.iter().map(|c| c.lhs).sum::<f64>() / n,
        bound_mean: checks.iter().map(|c| c.bound).sum::<f64>() / n,
        all_hold: checks.iter().all(|c| c.holds),
        seeds: checks,
        note: UNCERTIFIED,
    })
}

/// Bound report for one configured run: V terms, Ω, Γ_R, U, L̂, ρ̂ and the
/// measured left-hand side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunBoundReport {
    pub rounds: usize,
    pub lr: LrSchedule,
    pub batch_client: usize,
    pub batch_satellite: usize,
    pub single_step: bool,
    /// V_{C,k} per cluster, in member order.
    pub v_client: Vec<Vec<f64>>,
    /// V_{S,j}; `None` when the cluster offloads nothing.
    pub v_satellite: Vec<Option<f64>>,
    pub estimate: SmoothnessEstimate,
    /// Samples the estimate was computed on.
    pub estimate_samples: usize,
    pub omega: f64,
    pub gamma: f64,
    pub sum_eta_sq: f64,
    pub f0: f64,
    pub f_star: f64,
    pub bound: f64,
    pub measured_lhs: f64,
    pub holds: bool,
    /// Whether η_r ≤ 1/(2L̂) in every round.
    pub premise_holds: bool,
    pub note: &'static str,
}

/// Replays `rounds` rounds of `learning` under `decision` and evaluates the
/// bound with batch sizes taken from the training configuration. L̂ and ρ̂
/// come from at most `max_samples` samples and `trials` random pairs.
pub fn analyze_run(
    scenario: &Scenario,
    decision: &DecisionVector,
    learning: LearningSetup,
    cfg: SimConfig,
    rounds: usize,
    trials: usize,
    max_samples: usize,
) -> Result<RunBoundReport, AnalysisError> {
    if rounds == 0 {
        return Err(AnalysisError::Invalid("need at least one round".into()));
    }
    let corpus = scenario
        .corpus()
        .ok_or_else(|| AnalysisError::Invalid("analysis needs a scenario corpus".into()))?;
    let mut used: Vec<usize> = scenario.clients().iter().flat_map(|c| c.dataset.all()).collect();
    used.sort_unstable();
    if used.len() > max_samples {
        let mut r = rng::stream(scenario.seed(), &[rng::tag::ANALYSIS, 3]);
        let mut pick: Vec<usize> = sample_indices(&mut r, used.len(), max_samples)
            .into_iter()
            .map(|i| used[i])
            .collect();
        pick.sort_unstable();
        used = pick;
    }
    let estimate = estimate_smoothness_and_rho(
        learning.layout,
        &corpus.subset(&used),
        trials,
        scenario.seed(),
        cfg.execution,
    )?;
    let training = learning.training.clone();
    let offloaded = apply_offload(scenario, &decision.alpha)?;
    let terms = batch_terms(&offloaded, training.batch_size_client, training.batch_size_satellite)?;
    let traj = measure_trajectory(scenario, decision, learning, cfg, rounds)?;
    let inputs = BoundInputs {
        lr: training.lr,
        rounds,
        smoothness: estimate.l_hat,
        rho: estimate.rho_hat,
        clusters: terms,
        total_samples: scenario.clients().iter().map(|c| c.dataset_size()).sum(),
        f0: traj.objective[0],
        f_star: traj.best_objective(),
    };
    let om = omega(&inputs)?;
    let bound = convergence_bound(&inputs, om);
    let measured_lhs = traj.weighted_grad_sq();
    Ok(RunBoundReport {
        rounds,
        lr: training.lr,
        batch_client: training.batch_size_client,
        batch_satellite: training.batch_size_satellite,
        single_step: training.single_step,
        v_client: inputs
            .clusters
            .iter()
            .map(|c| c.clients.iter().map(|t| t.variance).collect())
            .collect(),
        v_satellite: inputs.clusters.iter().map(|c| c.satellite.map(|t| t.variance)).collect(),
        estimate,
        estimate_samples: used.len(),
        omega: om,
        gamma: gamma(&inputs.lr, rounds),
        sum_eta_sq: sum_eta_sq(&inputs.lr, rounds),
        f0: inputs.f0,
        f_star: inputs.f_star,
        bound,
        measured_lhs,
        holds: measured_lhs <= bound,
        premise_holds: inputs.premise_holds(),
        note: UNCERTIFIED,
    })
}
