//! Feature-space real-vs-fake probe: a small rectifier MLP (or plain logistic
//! model when no hidden layers are configured) trained with binary
//! cross-entropy and AdamW under a step learning-rate schedule.
//!
//! The positive class is `Fake` throughout.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curation::CuratedSplit;
use crate::error::{Error, Result};
use crate::feature::FeatureSet;
use crate::rng;

const TRAIN_STREAM: u64 = 0x7472_6169_6e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub step_every: usize,
    pub step_gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub betas: [f64; 2],
    pub eps_adam: f64,
    pub dropout: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 5e-5,
            step_every: 5,
            step_gamma: 0.1,
            epochs: 30,
            batch_size: 64,
            betas: [0.9, 0.999],
            eps_adam: 1e-8,
            dropout: 0.1,
            hidden: vec![64],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if self.step_every == 0 || !(self.step_gamma > 0.0) {
            return bad("step_every and step_gamma must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !self.betas.iter().all(|b| (0.0..1.0).contains(b)) || !(self.eps_adam > 0.0) {
            return bad("betas must lie in [0, 1) and eps_adam must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        Ok(())
    }
}

/// Step schedule: `learning_rate · step_gamma^⌊epoch / step_every⌋`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.learning_rate * libm::pow(cfg.step_gamma, (epoch / cfg.step_every) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProbeRepr {
    dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    dropout: f64,
}

/// Parameters live in one flat vector: per layer, the row-major
/// `out × in` weight matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProbeRepr", into = "ProbeRepr")]
pub struct ProbeModel {
    dims: Vec<usize>,
    params: Vec<f64>,
    dropout: f64,
}

impl TryFrom<ProbeRepr> for ProbeModel {
    type Error = Error;

    fn try_from(r: ProbeRepr) -> Result<Self> {
        let layers = r.dims.len().saturating_sub(1);
        if r.weights.len() != layers || r.biases.len() != layers {
            return Err(Error::Config("probe: layer count disagrees with dims".into()));
        }
        let mut model = ProbeModel::zeros(&r.dims, r.dropout)?;
        for l in 0..layers {
            let (w, b) = model.layer_mut(l);
            if r.weights[l].len() != w.len() || r.biases[l].len() != b.len() {
                return Err(Error::Config(format!("probe: layer {l} has the wrong shape")));
            }
            w.copy_from_slice(&r.weights[l]);
            b.copy_from_slice(&r.biases[l]);
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("probe: non-finite parameter".into()));
        }
        Ok(model)
    }
}

impl From<ProbeModel> for ProbeRepr {
    fn from(m: ProbeModel) -> Self {
        let layers = m.layers();
        ProbeRepr {
            weights: (0..layers).map(|l| m.layer(l).0.to_vec()).collect(),
            biases: (0..layers).map(|l| m.layer(l).1.to_vec()).collect(),
            dims: m.dims,
            dropout: m.dropout,
        }
    }
}

impl ProbeModel {
    /// All-zero parameters. `dims` runs input → hidden… → 1.
    pub fn zeros(dims: &[usize], dropout: f64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) || *dims.last().unwrap() != 1 {
            return Err(Error::Config(
                "probe: dims must be [input, hidden.., 1] with positive sizes".into(),
            ));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config("probe: dropout must lie in [0, 1)".into()));
        }
        let n = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            dims: dims.to_vec(),
            params: vec![0.0; n],
            dropout,
        })
    }

    /// Weights uniform in ±1/√fan_in, biases zero.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], dropout: f64, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(dims, dropout)?;
        for l in 0..model.layers() {
            let bound = 1.0 / libm::sqrt(model.dims[l] as f64);
            let (w, _) = model.layer_mut(l);
            for v in w.iter_mut() {
                *v = (rng.random::<f64>() * 2.0 - 1.0) * bound;
            }
        }
        Ok(model)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offset(&self, layer: usize) -> usize {
        self.dims.windows(2).take(layer).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// (weights, biases) of `layer`.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (i, o) = (self.dims[layer], self.dims[layer + 1]);
        let s = self.offset(layer);
        self.params[s..s + i * o + o].split_at(i * o)
    }

    fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let (i, o) = (self.dims[layer], self.dims[layer + 1]);
        let s = self.offset(layer);
        self.params[s..s + i * o + o].split_at_mut(i * o)
    }

    /// Inference logit (dropout off).
    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut a = x.to_vec();
        for l in 0..self.layers() {
            let (w, b) = self.layer(l);
            let mut z: Vec<f64> = b.to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * a.len()..(o + 1) * a.len()];
                *zo += row.iter().zip(&a).map(|(p, q)| p * q).sum::<f64>();
            }
            if l + 1 < self.layers() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = z;
        }
        a[0]
    }

    /// Mean BCE over the batch and its gradient with respect to every
    /// parameter. Dropout is applied only when `dropout_rng` is given.
    pub fn loss_and_grad<R: Rng + ?Sized>(
        &self,
        xs: &[&[f64]],
        targets: &[f64],
        mut dropout_rng: Option<&mut R>,
    ) -> Result<(f64, Vec<f64>)> {
        let layers = self.layers();
        let keep_scale = 1.0 / (1.0 - self.dropout);
        // Per sample: the input to each layer, and the masked-derivative factor of each hidden unit.
        let mut inputs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(xs.len());
        let mut gates: Vec<Vec<Vec<f64>>> = Vec::with_capacity(xs.len());
        let mut logits = Vec::with_capacity(xs.len());
        for x in xs {
            if x.len() != self.input_dim() {
                return Err(Error::DimMismatch {
                    expected: self.input_dim(),
                    found: x.len(),
                });
            }
            let mut acts = vec![x.to_vec()];
            let mut gate = Vec::with_capacity(layers.saturating_sub(1));
            for l in 0..layers {
                let (w, b) = self.layer(l);
                let a = &acts[l];
                let mut z: Vec<f64> = b.to_vec();
                for (o, zo) in z.iter_mut().enumerate() {
                    let row = &w[o * a.len()..(o + 1) * a.len()];
                    *zo += row.iter().zip(a).map(|(p, q)| p * q).sum::<f64>();
                }
                if l + 1 < layers {
                    let mut g = Vec::with_capacity(z.len());
                    for v in z.iter_mut() {
                        let mut keep = 1.0;
                        if self.dropout > 0.0 {
                            if let Some(r) = dropout_rng.as_deref_mut() {
                                keep = if r.random::<f64>() < self.dropout {
                                    0.0
                                } else {
                                    keep_scale
                                };
                            }
                        }
                        let active = if *v > 0.0 { 1.0 } else { 0.0 };
                        *v = v.max(0.0) * keep;
                        g.push(active * keep);
                    }
                    gate.push(g);
                    acts.push(z);
                } else {
                    logits.push(z[0]);
                }
            }
            inputs.push(acts);
            gates.push(gate);
        }
        let (loss, dlogits) = bce_loss(&logits, targets)?;

        let mut grad = vec![0.0; self.params.len()];
        let offsets: Vec<usize> = (0..layers).map(|l| self.offset(l)).collect();
        for (s, &dl) in dlogits.iter().enumerate() {
            let mut delta = vec![dl];
            for l in (0..layers).rev() {
                let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
                let a = &inputs[s][l];
                let (w, _) = self.layer(l);
                let base = offsets[l];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let gw = &mut grad[base + o * n_in..base + (o + 1) * n_in];
                    for (g, av) in gw.iter_mut().zip(a) {
                        *g += d * av;
                    }
                    grad[base + n_in * n_out + o] += d;
                }
                if l > 0 {
                    let gate = &gates[s][l - 1];
                    let mut prev = vec![0.0; n_in];
                    for (i, p) in prev.iter_mut().enumerate() {
                        if gate[i] == 0.0 {
                            continue;
                        }
                        let mut acc = 0.0;
                        for o in 0..n_out {
                            acc += w[o * n_in + i] * delta[o];
                        }
                        *p = acc * gate[i];
                    }
                    delta = prev;
                }
            }
        }
        Ok((loss, grad))
    }
}

/// Mean binary cross-entropy in logit form and its gradient `(σ(z) − y)/n`.
/// Targets may be soft, in `[0, 1]`.
pub fn bce_loss(logits: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.is_empty() {
        return Err(Error::EmptyInput("bce_loss"));
    }
    if logits.len() != targets.len() {
        return Err(Error::DimMismatch {
            expected: logits.len(),
            found: targets.len(),
        });
    }
    if targets.iter().any(|y| !(0.0..=1.0).contains(y)) {
        return Err(Error::Config("bce_loss: targets must lie in [0, 1]".into()));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(targets) {
        loss += z.max(0.0) - z * y + libm::log1p(libm::exp(-z.abs()));
        grad.push((sigmoid(z) - y) / n);
    }
    Ok((loss / n, grad))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One AdamW update. Decay multiplies parameters by `1 − lr·wd` and never
/// enters the moment estimates.
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::DimMismatch {
            expected: params.len(),
            found: grads.len(),
        });
    }
    if !(lr > 0.0) {
        return Err(Error::Config("adamw: learning rate must be positive".into()));
    }
    state.t += 1;
    let [b1, b2] = cfg.betas;
    let t = state.t as f64;
    let c1 = 1.0 - libm::pow(b1, t);
    let c2 = 1.0 - libm::pow(b2, t);
    let decay = 1.0 - lr * cfg.weight_decay;
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] = params[i] * decay - lr * m_hat / (libm::sqrt(v_hat) + cfg.eps_adam);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,lr,mean_loss\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{}", e.epoch, e.lr, e.mean_loss);
        }
        s
    }
}

fn as_rows(set: &FeatureSet) -> Vec<Vec<f64>> {
    set.iter().map(|r| r.vector_f64()).collect()
}

/// Trains on `train_real` (target 0) and `train_fake` (target 1).
pub fn train_probe(split: &CuratedSplit, cfg: &TrainConfig) -> Result<(ProbeModel, TrainingLog)> {
    train_on(&split.train_real, &split.train_fake, cfg)
}

pub fn train_on(reals: &FeatureSet, fakes: &FeatureSet, cfg: &TrainConfig) -> Result<(ProbeModel, TrainingLog)> {
    cfg.validate()?;
    if reals.is_empty() || fakes.is_empty() {
        return Err(Error::SingleClass);
    }
    if reals.dim() != fakes.dim() {
        return Err(Error::DimMismatch {
            expected: reals.dim(),
            found: fakes.dim(),
        });
    }
    let mut xs = as_rows(reals);
    xs.extend(as_rows(fakes));
    let ys: Vec<f64> = (0..xs.len()).map(|i| if i < reals.len() { 0.0 } else { 1.0 }).collect();

    let mut dims = vec![reals.dim()];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(1);
    let mut rng = rng::stream(cfg.seed, TRAIN_STREAM);
    let mut model = ProbeModel::init(&dims, cfg.dropout, &mut rng)?;
    let mut state = OptimizerState::new(model.params.len());
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut log = TrainingLog::default();

    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<f64> = batch.iter().map(|&i| ys[i]).collect();
            let (loss, grad) = model.loss_and_grad(&bx, &by, Some(&mut rng))?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("probe: loss became {loss} in epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            adamw_step(&mut model.params, &grad, &mut state, cfg, lr)?;
        }
        log.epochs.push(EpochLog {
            epoch,
            lr,
            mean_loss: total / xs.len() as f64,
        });
    }
    if model.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("probe: parameters diverged".into()));
    }
    Ok((model, log))
}

pub fn predict_logits(model: &ProbeModel, set: &FeatureSet) -> Result<Vec<f64>> {
    if set.dim() != model.input_dim() {
        return Err(Error::DimMismatch {
            expected: model.input_dim(),
            found: set.dim(),
        });
    }
    Ok(set.iter().map(|r| model.logit(&r.vector_f64())).collect())
}

/// P(fake) per record, dropout off.
pub fn predict_scores(model: &ProbeModel, set: &FeatureSet) -> Result<Vec<f64>> {
    Ok(predict_logits(model, set)?.into_iter().map(sigmoid).collect())
}

/// Inputs and (possibly soft) targets for gradient checking.
#[derive(Debug, Clone)]
pub struct Batch {
    pub xs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

pub const GRAD_CHECK_STEP: f64 = 1e-5;
const REL_ERR_FLOOR: f64 = 1e-6;

/// Largest relative disagreement between the analytic gradient and central
/// differences, `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check(model: &ProbeModel, batch: &Batch) -> Result<f64> {
    grad_check_with_step(model, batch, GRAD_CHECK_STEP)
}

pub fn grad_check_with_step(model: &ProbeModel, batch: &Batch, h: f64) -> Result<f64> {
    let (analytic, numeric) = gradients(model, batch, h)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_ERR_FLOOR))
        .fold(0.0, f64::max))
}

/// (analytic, central-difference) gradients.
pub fn gradients(model: &ProbeModel, batch: &Batch, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let xs: Vec<&[f64]> = batch.xs.iter().map(Vec::as_slice).collect();
    let no_dropout: Option<&mut rand_chacha::ChaCha8Rng> = None;
    let (_, analytic) = model.loss_and_grad(&xs, &batch.targets, no_dropout)?;
    let loss_at = |m: &ProbeModel| -> Result<f64> {
        let logits: Vec<f64> = batch.xs.iter().map(|x| m.logit(x)).collect();
        Ok(bce_loss(&logits, &batch.targets)?.0)
    };
    let mut probe = model.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..model.params.len() {
        let orig = probe.params[i];
        probe.params[i] = orig + h;
        let up = loss_at(&probe)?;
        probe.params[i] = orig - h;
        let down = loss_at(&probe)?;
        probe.params[i] = orig;
        numeric.push((up - down) / (2.0 * h));
    }
    Ok((analytic, numeric))
}
