//! Model families with hand-written gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FlError;
use crate::rng;
use crate::scenario::SampleSet;

/// Shape of a model. Parameters are stored flat, weights row-major then biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Layout {
    /// Multinomial logistic regression: W (classes × inputs), b (classes).
    Logistic { inputs: usize, classes: usize },
    /// One tanh hidden layer: W1, b1, W2, b2.
    Mlp { inputs: usize, hidden: usize, classes: usize },
}

impl Layout {
    pub fn param_count(&self) -> usize {
        match *self {
            Layout::Logistic { inputs, classes } => inputs * classes + classes,
            Layout::Mlp { inputs, hidden, classes } => inputs * hidden + hidden + hidden * classes + classes,
        }
    }

    pub fn inputs(&self) -> usize {
        match *self {
            Layout::Logistic { inputs, .. } | Layout::Mlp { inputs, .. } => inputs,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            Layout::Logistic { classes, .. } | Layout::Mlp { classes, .. } => classes,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Layout::Logistic { inputs, classes } => format!("logistic {inputs}->{classes}"),
            Layout::Mlp { inputs, hidden, classes } => format!("mlp {inputs}->{hidden}->{classes}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layout: Layout,
    pub values: Vec<f64>,
}

/// Small uniform initialization, U(−1/√fan_in, 1/√fan_in) for weights, zero biases.
pub fn init_model(layout: Layout, seed: u64) -> ModelParams {
    let mut r = rng::stream(seed, &[rng::tag::INIT]);
    let mut values = Vec::with_capacity(layout.param_count());
    let mut fill = |rows: usize, cols: usize, values: &mut Vec<f64>| {
        let s = 1.0 / (cols as f64).sqrt();
        values.extend((0..rows * cols).map(|_| r.gen_range(-s..s)));
        values.extend(std::iter::repeat_n(0.0, rows));
    };
    match layout {
        Layout::Logistic { inputs, classes } => fill(classes, inputs, &mut values),
        Layout::Mlp { inputs, hidden, classes } => {
            fill(hidden, inputs, &mut values);
            fill(classes, hidden, &mut values);
        }
    }
    ModelParams { layout, values }
}

/// Numerically stable softmax in place; returns log Σ exp(z).
fn softmax(z: &mut [f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
    m + s.ln()
}

/// y = W x + b for W stored row-major (rows × x.len()).
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        *o = b[i] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
}

/// Scratch buffers reused across samples.
struct Scratch {
    hidden: Vec<f64>,
    logits: Vec<f64>,
    raw: Vec<f64>,
    dhidden: Vec<f64>,
}

impl ModelParams {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self) -> Result<(), FlError> {
        if self.values.len() != self.layout.param_count() {
            return Err(FlError::Shape(format!(
                "{} values for layout {} ({} expected)",
                self.values.len(),
                self.layout.describe(),
                self.layout.param_count()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(FlError::NonFinite(format!("parameter {i} is {}", self.values[i])));
        }
        Ok(())
    }

    fn scratch(&self) -> Scratch {
        let hidden = match self.layout {
            Layout::Mlp { hidden, .. } => hidden,
            Layout::Logistic { .. } => 0,
        };
        Scratch {
            hidden: vec![0.0; hidden],
            logits: vec![0.0; self.layout.classes()],
            raw: vec![0.0; self.layout.classes()],
            dhidden: vec![0.0; hidden],
        }
    }

    /// Raw logits into `s.raw`, class probabilities into `s.logits`; returns log-partition.
    fn forward(&self, x: &[f64], s: &mut Scratch) -> f64 {
        let v = &self.values;
        match self.layout {
            Layout::Logistic { inputs, classes } => {
                let (w, b) = v.split_at(inputs * classes);
                affine(w, b, x, &mut s.logits);
            }
            Layout::Mlp { inputs, hidden, classes } => {
                let (w1, rest) = v.split_at(inputs * hidden);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden * classes);
                affine(w1, b1, x, &mut s.hidden);
                s.hidden.iter_mut().for_each(|h| *h = h.tanh());
                affine(w2, b2, &s.hidden, &mut s.logits);
            }
        }
        s.raw.copy_from_slice(&s.logits);
        softmax(&mut s.logits)
    }

    /// Cross-entropy of one sample; adds `scale` × its gradient to `grad`.
    fn sample_grad(&self, x: &[f64], y: usize, scale: f64, grad: &mut [f64], s: &mut Scratch) -> f64 {
        let loss = self.forward(x, s) - s.raw[y];
        s.logits[y] -= 1.0;
        let dz = &s.logits;
        match self.layout {
            Layout::Logistic { inputs, classes } => {
                let (gw, gb) = grad.split_at_mut(inputs * classes);
                for c in 0..classes {
                    let d = scale * dz[c];
                    gb[c] += d;
                    for (g, xi) in gw[c * inputs..(c + 1) * inputs].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            Layout::Mlp { inputs, hidden, classes } => {
                let w2 = &self.values[inputs * hidden + hidden..inputs * hidden + hidden + hidden * classes];
                let (gw1, rest) = grad.split_at_mut(inputs * hidden);
                let (gb1, rest) = rest.split_at_mut(hidden);
                let (gw2, gb2) = rest.split_at_mut(hidden * classes);
                s.dhidden.iter_mut().for_each(|v| *v = 0.0);
                for c in 0..classes {
                    let d = scale * dz[c];
                    gb2[c] += d;
                    let row = &w2[c * hidden..(c + 1) * hidden];
                    for h in 0..hidden {
                        gw2[c * hidden + h] += d * s.hidden[h];
                        s.dhidden[h] += d * row[h];
                    }
                }
                for h in 0..hidden {
                    let da = s.dhidden[h] * (1.0 - s.hidden[h] * s.hidden[h]);
                    gb1[h] += da;
                    for (g, xi) in gw1[h * inputs..(h + 1) * inputs].iter_mut().zip(x) {
                        *g += da * xi;
                    }
                }
            }
        }
        loss
    }

    /// Mean cross-entropy over `indices` of `data` and its gradient.
    pub fn loss_and_grad(&self, data: &SampleSet, indices: &[usize]) -> Result<(f64, Vec<f64>), FlError> {
        let mut grad = vec![0.0; self.values.len()];
        let loss = self.accumulate_grad(data, indices, &mut grad)?;
        Ok((loss, grad))
    }

    /// Like [`Self::loss_and_grad`] but writes into a caller-owned buffer.
    pub fn accumulate_grad(&self, data: &SampleSet, indices: &[usize], grad: &mut [f64]) -> Result<f64, FlError> {
        if indices.is_empty() {
            return Err(FlError::EmptyData("gradient over an empty batch".into()));
        }
        self.check_data(data)?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / indices.len() as f64;
        let mut s = self.scratch();
        let mut loss = 0.0;
        for &i in indices {
            loss += self.sample_grad(data.features(i), data.label(i) as usize, scale, grad, &mut s);
        }
        Ok(loss * scale)
    }

    /// Mean cross-entropy over `indices` (no gradient).
    pub fn loss(&self, data: &SampleSet, indices: &[usize]) -> Result<f64, FlError> {
        if indices.is_empty() {
            return Err(FlError::EmptyData("loss over an empty set".into()));
        }
        self.check_data(data)?;
        let mut s = self.scratch();
        let mut total = 0.0;
        for &i in indices {
            total += self.forward(data.features(i), &mut s) - s.raw[data.label(i) as usize];
        }
        Ok(total / indices.len() as f64)
    }

    fn check_data(&self, data: &SampleSet) -> Result<(), FlError> {
        if data.dim() != self.layout.inputs() || data.num_classes() > self.layout.classes() {
            return Err(FlError::Shape(format!(
                "data has dim {} and {} classes but model is {}",
                data.dim(),
                data.num_classes(),
                self.layout.describe()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut s = self.scratch();
        self.forward(x, &mut s);
        s.logits
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (c, &p)| if p > best.1 { (c, p) } else { best })
            .0
    }
}

/// Top-1 accuracy and mean cross-entropy on `test`.
pub fn evaluate(model: &ModelParams, test: &SampleSet) -> Result<(f64, f64), FlError> {
    if test.is_empty() {
        return Err(FlError::EmptyData("test set is empty".into()));
    }
    let idx: Vec<usize> = (0..test.len()).collect();
    let loss = model.loss(test, &idx)?;
    let correct = idx.iter().filter(|&&i| model.predict(test.features(i)) == test.label(i) as usize).count();
    Ok((correct as f64 / test.len() as f64, loss))
}
