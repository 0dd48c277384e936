//! Local mini-batch SGD with momentum and an optional proximal term.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FlError, ModelParams};
use crate::scenario::SampleSet;

/// Learning rate per round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant { eta: f64 },
    /// η_r = η_0 / (1 + r).
    Decay { eta0: f64 },
}

impl LrSchedule {
    pub fn rate(&self, round: usize) -> f64 {
        match *self {
            LrSchedule::Constant { eta } => eta,
            LrSchedule::Decay { eta0 } => eta0 / (1.0 + round as f64),
        }
    }

    pub fn initial(&self) -> f64 {
        self.rate(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: LrSchedule,
    /// λ_C: mini-batch size on clients (clamped to the local set).
    pub batch_size_client: usize,
    /// λ_S: mini-batch size on the satellite.
    pub batch_size_satellite: usize,
    pub momentum: f64,
    /// μ of the FedProx term μ/2·‖w − w^r‖²; 0 disables it.
    pub prox_mu: f64,
    pub rounds: usize,
    pub seed: u64,
    /// One mini-batch step per round instead of a pass over the local set.
    pub single_step: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: LrSchedule::Constant { eta: 0.05 },
            batch_size_client: 32,
            batch_size_satellite: 32,
            momentum: 0.9,
            prox_mu: 0.0,
            rounds: 50,
            seed: 0,
            single_step: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), FlError> {
        let mut errs = Vec::new();
        let eta = self.lr.initial();
        if !(eta >= 0.0 && eta.is_finite()) {
            errs.push(format!("learning rate must be non-negative and finite, got {eta}"));
        }
        if self.batch_size_client == 0 || self.batch_size_satellite == 0 {
            errs.push("batch sizes must be positive".to_string());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            errs.push(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.prox_mu >= 0.0 && self.prox_mu.is_finite()) {
            errs.push(format!("prox_mu must be non-negative, got {}", self.prox_mu));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(FlError::Config(errs.join("; ")))
        }
    }
}

/// One local pass over a shuffled sample list, processed in fixed batches.
///
/// Batch boundaries depend only on the order and batch size, so a pass can be
/// advanced in arbitrary segments (one per serving satellite) and produce the
/// same model as a single uninterrupted call.
pub struct LocalPass<'a> {
    data: &'a SampleSet,
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
    eta: f64,
    momentum: f64,
    mu: f64,
    anchor: Vec<f64>,
    velocity: Vec<f64>,
    grad: Vec<f64>,
    steps: usize,
}

impl<'a> LocalPass<'a> {
    /// `indices` are shuffled with `rng`. With `single_step`, only the first
    /// batch of the shuffled order is kept.
    pub fn new(
        model: &ModelParams,
        data: &'a SampleSet,
        indices: &[usize],
        batch: usize,
        eta: f64,
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, FlError> {
        if indices.is_empty() {
            return Err(FlError::EmptyData("local update over no samples".into()));
        }
        let batch = batch.clamp(1, indices.len());
        let mut order = indices.to_vec();
        order.shuffle(rng);
        if cfg.single_step {
            order.truncate(batch);
        }
        Ok(Self {
            data,
            order,
            cursor: 0,
            batch,
            eta,
            momentum: cfg.momentum,
            mu: cfg.prox_mu,
            anchor: if cfg.prox_mu > 0.0 { model.values.clone() } else { Vec::new() },
            velocity: vec![0.0; model.len()],
            grad: vec![0.0; model.len()],
            steps: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn processed(&self) -> usize {
        self.cursor
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn step(&mut self, model: &mut ModelParams, end: usize) -> Result<(), FlError> {
        let batch = &self.order[self.cursor..end];
        model.accumulate_grad(self.data, batch, &mut self.grad)?;
        if self.mu > 0.0 {
            for ((g, w), a) in self.grad.iter_mut().zip(&model.values).zip(&self.anchor) {
                *g += self.mu * (w - a);
            }
        }
        if let Some(i) = self.grad.iter().position(|g| !g.is_finite()) {
            return Err(FlError::NonFinite(format!(
                "gradient entry {i} is {} at step {} (samples {}..{end})",
                self.grad[i], self.steps, self.cursor
            )));
        }
        for ((w, v), g) in model.values.iter_mut().zip(&mut self.velocity).zip(&self.grad) {
            *v = self.momentum * *v + g;
            *w -= self.eta * *v;
        }
        self.cursor = end;
        self.steps += 1;
        Ok(())
    }

    /// Runs every full batch ending at or before sample `upto` of the pass.
    pub fn advance(&mut self, model: &mut ModelParams, upto: usize) -> Result<(), FlError> {
        let upto = upto.min(self.order.len());
        while self.cursor + self.batch <= upto {
            self.step(model, self.cursor + self.batch)?;
        }
        Ok(())
    }

    /// Completes the pass, including a trailing partial batch.
    pub fn finish(&mut self, model: &mut ModelParams) -> Result<(), FlError> {
        self.advance(model, self.order.len())?;
        if self.cursor < self.order.len() {
            self.step(model, self.order.len())?;
        }
        Ok(())
    }
}

/// One local update (Eq. 6 applied over a pass, or once in single-step mode)
/// starting from `model`.
pub fn local_update(
    model: &ModelParams,
    data: &SampleSet,
    indices: &[usize],
    batch: usize,
    cfg: &TrainConfig,
    round: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ModelParams, FlError> {
    let mut out = model.clone();
    let mut pass = LocalPass::new(model, data, indices, batch, cfg.lr.rate(round), cfg, rng)?;
    pass.finish(&mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::{init_model, Layout};
    use crate::rng;
    use crate::scenario::data::GaussianMixture;
    use proptest::prelude::*;

    fn toy(n: usize, seed: u64) -> SampleSet {
        GaussianMixture {
            classes: 3,
            dim: 4,
            mean_scale: 2.0,
            class_means: None,
            noise_sigma: 0.5,
            seed,
        }
        .generate(n, 0)
        .unwrap()
    }

    fn r(seed: u64) -> ChaCha8Rng {
        rng::stream(seed, &[rng::tag::CLIENT, 0, 0])
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let d = toy(50, 1);
        let m = init_model(Layout::Mlp { inputs: 4, hidden: 5, classes: 3 }, 2);
        let cfg = TrainConfig {
            lr: LrSchedule::Constant { eta: 0.0 },
            prox_mu: 0.3,
            ..Default::default()
        };
        let idx: Vec<usize> = (0..50).collect();
        assert_eq!(local_update(&m, &d, &idx, 8, &cfg, 0, &mut r(0)).unwrap(), m);
    }

    #[test]
    fn single_sample_step_matches_gradient() {
        let d = toy(10, 3);
        let m = init_model(Layout::Logistic { inputs: 4, classes: 3 }, 0);
        let cfg = TrainConfig {
            lr: LrSchedule::Constant { eta: 0.1 },
            single_step: true,
            ..Default::default()
        };
        let out = local_update(&m, &d, &[4], 1, &cfg, 0, &mut r(0)).unwrap();
        let (_, g) = m.loss_and_grad(&d, &[4]).unwrap();
        for ((a, b), gi) in out.values.iter().zip(&m.values).zip(&g) {
            assert!((a - (b - 0.1 * gi)).abs() < 1e-12);
        }
    }

    #[test]
    fn full_batch_descends_below_inverse_smoothness() {
        let d = toy(60, 5);
        let idx: Vec<usize> = (0..60).collect();
        let mut m = init_model(Layout::Logistic { inputs: 4, classes: 3 }, 1);
        // Softmax cross-entropy is (max ‖x̃‖² / 2)-smooth.
        let l = (0..60)
            .map(|i| 1.0 + d.features(i).iter().map(|x| x * x).sum::<f64>())
            .fold(0.0, f64::max)
            / 2.0;
        let cfg = TrainConfig {
            lr: LrSchedule::Constant { eta: 0.9 / l },
            momentum: 0.0,
            ..Default::default()
        };
        let mut prev = m.loss(&d, &idx).unwrap();
        for round in 0..20 {
            m = local_update(&m, &d, &idx, 60, &cfg, round, &mut r(round as u64)).unwrap();
            let now = m.loss(&d, &idx).unwrap();
            assert!(now < prev, "round {round}: {now} >= {prev}");
            prev = now;
        }
    }

    #[test]
    fn fedprox_zero_is_bit_identical() {
        let d = toy(80, 2);
        let idx: Vec<usize> = (0..80).collect();
        let m = init_model(Layout::Mlp { inputs: 4, hidden: 6, classes: 3 }, 3);
        let a = TrainConfig::default();
        let b = TrainConfig { prox_mu: 0.0, ..a.clone() };
        let x = local_update(&m, &d, &idx, 16, &a, 2, &mut r(9)).unwrap();
        let y = local_update(&m, &d, &idx, 16, &b, 2, &mut r(9)).unwrap();
        assert!(x.values.iter().zip(&y.values).all(|(p, q)| p.to_bits() == q.to_bits()));
        let c = TrainConfig { prox_mu: 0.5, ..a };
        assert_ne!(local_update(&m, &d, &idx, 16, &c, 2, &mut r(9)).unwrap(), x);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let d = SampleSet::new(vec![f64::NAN, 1.0], vec![0], 2).unwrap().with_num_classes(2);
        let m = init_model(Layout::Logistic { inputs: 2, classes: 2 }, 0);
        let err = local_update(&m, &d, &[0], 1, &TrainConfig::default(), 0, &mut r(0)).unwrap_err();
        assert!(matches!(err, FlError::NonFinite(_)), "{err}");
    }

    #[test]
    fn decay_schedule() {
        let s = LrSchedule::Decay { eta0: 0.6 };
        assert_eq!(s.rate(0), 0.6);
        assert!((s.rate(2) - 0.2).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn segmented_pass_matches_single_call(cuts in proptest::collection::vec(0usize..100, 0..6), seed in 0u64..50) {
            let d = toy(100, seed);
            let idx: Vec<usize> = (0..100).collect();
            let m = init_model(Layout::Logistic { inputs: 4, classes: 3 }, seed);
            let cfg = TrainConfig::default();
            let whole = local_update(&m, &d, &idx, 7, &cfg, 1, &mut r(seed)).unwrap();
            let mut cuts = cuts;
            cuts.sort_unstable();
            let mut seg = m.clone();
            let mut pass = LocalPass::new(&m, &d, &idx, 7, cfg.lr.rate(1), &cfg, &mut r(seed)).unwrap();
            for c in cuts {
                pass.advance(&mut seg, c).unwrap();
            }
            pass.finish(&mut seg).unwrap();
            prop_assert_eq!(seg, whole);
        }
    }
}
