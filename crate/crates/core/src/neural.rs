//! One-hidden-layer ReLU network with inverted dropout and a sigmoid output,
//! trained with Adam on mean BCE plus an L2 penalty on the weight matrices.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{roc_auc, RankedPredictions};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel<S> {
    pub input_dim: usize,
    pub hidden: usize,
    /// hidden x input, row-major.
    pub w1: Vec<S>,
    pub b1: Vec<S>,
    pub w2: Vec<S>,
    pub b2: S,
    pub dropout: f64,
    pub mode: Mode,
}

/// Per-unit multipliers on the hidden activations: 0 for dropped units,
/// `1/(1-p)` for kept ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<S>(pub Vec<S>);

impl<S: Scalar> DropoutMask<S> {
    pub fn sample<R: Rng + ?Sized>(hidden: usize, p: f64, rng: &mut R) -> Self {
        let keep = S::lit(1.0 / (1.0 - p));
        DropoutMask((0..hidden).map(|_| if rng.random::<f64>() < p { S::zero() } else { keep }).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient<S> {
    pub w1: Vec<S>,
    pub b1: Vec<S>,
    pub w2: Vec<S>,
    pub b2: S,
}

impl<S: Scalar> MlpGradient<S> {
    fn zeros_like(m: &MlpModel<S>) -> Self {
        MlpGradient { w1: vec![S::zero(); m.w1.len()], b1: vec![S::zero(); m.hidden], w2: vec![S::zero(); m.hidden], b2: S::zero() }
    }

    pub fn all_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).all(|g| g.is_finite()) && self.b2.is_finite()
    }
}

impl<S: Scalar> MlpModel<S> {
    pub fn zeros(input_dim: usize, hidden: usize, dropout: f64) -> Self {
        MlpModel {
            input_dim,
            hidden,
            w1: vec![S::zero(); input_dim * hidden],
            b1: vec![S::zero(); hidden],
            w2: vec![S::zero(); hidden],
            b2: S::zero(),
            dropout,
            mode: Mode::Eval,
        }
    }

    /// He-uniform weights, bound `sqrt(6 / fan_in)`; zero biases.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden: usize, dropout: f64, rng: &mut R) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::InvalidConfig("network dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidConfig(format!("dropout must lie in [0,1), got {dropout}")));
        }
        let mut m = Self::zeros(input_dim, hidden, dropout);
        let a1 = (6.0 / input_dim as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = S::lit(rng.random_range(-a1..a1)));
        let a2 = (6.0 / hidden as f64).sqrt();
        m.w2.iter_mut().for_each(|w| *w = S::lit(rng.random_range(-a2..a2)));
        Ok(m)
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    fn check_input(&self, x: &[S]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(())
    }

    fn hidden_pre(&self, x: &[S]) -> Vec<S> {
        (0..self.hidden).map(|j| dot(&self.w1[j * self.input_dim..(j + 1) * self.input_dim], x) + self.b1[j]).collect()
    }

    /// Output logit with an explicit mask (`None` means no dropout).
    pub fn logit_with_mask(&self, x: &[S], mask: Option<&DropoutMask<S>>) -> Result<S> {
        self.check_input(x)?;
        let pre = self.hidden_pre(x);
        let mut z = self.b2;
        for j in 0..self.hidden {
            let mut a = pre[j].max(S::zero());
            if let Some(m) = mask {
                a = a * m.0[j];
            }
            z = z + self.w2[j] * a;
        }
        Ok(z)
    }

    /// `||W1||^2 + ||W2||^2`.
    pub fn weight_sq_norm(&self) -> S {
        self.w1.iter().chain(&self.w2).fold(S::zero(), |acc, &w| acc + w * w)
    }

    fn params_mut(&mut self) -> [&mut [S]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, std::slice::from_mut(&mut self.b2)]
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + 2 * self.hidden + 1
    }

    pub fn all_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).all(|w| w.is_finite()) && self.b2.is_finite()
    }
}

/// Probability of the positive class. In train mode with dropout, `rng`
/// draws the mask; in eval mode the pass is deterministic.
pub fn forward<S: Scalar, R: Rng + ?Sized>(model: &MlpModel<S>, x: &[S], rng: Option<&mut R>) -> Result<S> {
    let mask = match (model.mode, model.dropout > 0.0, rng) {
        (Mode::Train, true, Some(rng)) => Some(DropoutMask::sample(model.hidden, model.dropout, rng)),
        (Mode::Train, true, None) => {
            return Err(Error::InvalidConfig("train-mode forward with dropout needs an rng".into()))
        }
        _ => None,
    };
    Ok(model.logit_with_mask(x, mask.as_ref())?.sigmoid())
}

/// Eval-mode probability without an rng.
pub fn predict<S: Scalar>(model: &MlpModel<S>, x: &[S]) -> Result<S> {
    Ok(model.logit_with_mask(x, None)?.sigmoid())
}

/// Mean BCE + `(lambda/2)(||W1||^2 + ||W2||^2)` and its exact gradient. When
/// `masks` is given, sample `i` uses `masks[i]`.
pub fn loss_and_grad<S: Scalar>(
    model: &MlpModel<S>,
    xs: &[&[S]],
    ys: &[u8],
    masks: Option<&[DropoutMask<S>]>,
    lambda: S,
) -> Result<(S, MlpGradient<S>)> {
    if xs.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if xs.len() != ys.len() || masks.is_some_and(|m| m.len() != xs.len()) {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let n = S::lit(xs.len() as f64);
    let (d, h) = (model.input_dim, model.hidden);
    let mut g = MlpGradient::zeros_like(model);
    let mut loss = S::zero();
    let mut act = vec![S::zero(); h];
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        model.check_input(x)?;
        let pre = model.hidden_pre(x);
        let mask = masks.map(|m| &m[i].0);
        let mut z = model.b2;
        for j in 0..h {
            let m = mask.map_or(S::one(), |m| m[j]);
            act[j] = pre[j].max(S::zero()) * m;
            z = z + model.w2[j] * act[j];
        }
        loss = loss - if y == 1 { z.log_sigmoid() } else { (-z).log_sigmoid() };
        let dz = (z.sigmoid() - S::lit(y as f64)) / n;
        g.b2 = g.b2 + dz;
        for j in 0..h {
            g.w2[j] = g.w2[j] + dz * act[j];
            if pre[j] > S::zero() {
                let dh = dz * model.w2[j] * mask.map_or(S::one(), |m| m[j]);
                if dh != S::zero() {
                    g.b1[j] = g.b1[j] + dh;
                    for (gw, &xv) in g.w1[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *gw = *gw + dh * xv;
                    }
                }
            }
        }
    }
    for (gw, &w) in g.w1.iter_mut().zip(&model.w1) {
        *gw = *gw + lambda * w;
    }
    for (gw, &w) in g.w2.iter_mut().zip(&model.w2) {
        *gw = *gw + lambda * w;
    }
    let loss = loss / n + lambda * S::lit(0.5) * model.weight_sq_norm();
    Ok((loss, g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<S> {
    pub m: Vec<S>,
    pub v: Vec<S>,
    pub step: u64,
    pub lr: f64,
    /// L2 coefficient; the gradient passed to [`adam_step`] already includes it.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(model: &MlpModel<S>, lr: f64, weight_decay: f64) -> Self {
        let n = model.n_params();
        AdamState { m: vec![S::zero(); n], v: vec![S::zero(); n], step: 0, lr, weight_decay, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam update in place.
pub fn adam_step<S: Scalar>(state: &mut AdamState<S>, model: &mut MlpModel<S>, grads: &MlpGradient<S>) -> Result<()> {
    if !grads.all_finite() {
        return Err(Error::NonFinite { context: "mlp gradient", iteration: state.step as usize });
    }
    if state.m.len() != model.n_params() {
        return Err(Error::DimensionMismatch { expected: model.n_params(), got: state.m.len() });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (S::lit(state.beta1), S::lit(state.beta2));
    let c1 = S::one() - b1.powi(t);
    let c2 = S::one() - b2.powi(t);
    let (lr, eps) = (S::lit(state.lr), S::lit(state.eps));
    let grad_groups: [&[S]; 4] = [&grads.w1, &grads.b1, &grads.w2, std::slice::from_ref(&grads.b2)];
    let mut k = 0;
    for (params, gs) in model.params_mut().into_iter().zip(grad_groups) {
        for (p, &g) in params.iter_mut().zip(gs) {
            let m = b1 * state.m[k] + (S::one() - b1) * g;
            let v = b2 * state.v[k] + (S::one() - b2) * g * g;
            state.m[k] = m;
            state.v[k] = v;
            *p = *p - lr * (m / c1) / ((v / c2).sqrt() + eps);
            k += 1;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHyperparams {
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_batch() -> usize {
    64
}
fn default_max_epochs() -> usize {
    200
}
fn default_patience() -> usize {
    10
}

impl Default for MlpHyperparams {
    fn default() -> Self {
        MlpHyperparams {
            hidden: 32,
            dropout: 0.2,
            lr: 1e-3,
            weight_decay: 1e-4,
            batch_size: default_batch(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Dense examples for [`train_mlp`].
#[derive(Debug, Clone, Copy)]
pub struct Examples<'a, S> {
    pub xs: &'a [Vec<S>],
    pub ys: &'a [u8],
}

fn mean_bce<S: Scalar>(model: &MlpModel<S>, data: Examples<'_, S>) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in data.xs.iter().zip(data.ys) {
        let z = model.logit_with_mask(x, None)?;
        total -= if y == 1 { z.log_sigmoid() } else { (-z).log_sigmoid() }.as_f64();
    }
    Ok(total / data.xs.len() as f64)
}

/// Mini-batch Adam with per-epoch seeded shuffling. Early stopping watches
/// validation AUC (validation loss if validation holds a single class, train
/// loss if it is empty) and returns the best checkpoint in eval mode.
pub fn train_mlp<S: Scalar>(
    train: Examples<'_, S>,
    val: Examples<'_, S>,
    hp: &MlpHyperparams,
    seed: u64,
) -> Result<(MlpModel<S>, TrainingLog)> {
    if train.xs.is_empty() {
        return Err(Error::Empty("mlp training set"));
    }
    if train.xs.len() != train.ys.len() || val.xs.len() != val.ys.len() {
        return Err(Error::DimensionMismatch { expected: train.xs.len(), got: train.ys.len() });
    }
    if hp.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input_dim = train.xs[0].len();
    let mut model = MlpModel::<S>::init(input_dim, hp.hidden, hp.dropout, &mut rng)?;
    let mut adam = AdamState::new(&model, hp.lr, hp.weight_decay);
    let lambda = S::lit(hp.weight_decay);
    let val_two_class = val.ys.contains(&0) && val.ys.contains(&1);

    let mut order: Vec<usize> = (0..train.xs.len()).collect();
    let mut best = (f64::NEG_INFINITY, model.clone(), 0usize);
    let mut log = TrainingLog { epochs: Vec::new(), best_epoch: 0, stopped_early: false };
    let mut since_best = 0;
    for epoch in 0..hp.max_epochs {
        model.set_mode(Mode::Train);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(hp.batch_size) {
            let xs: Vec<&[S]> = batch.iter().map(|&i| train.xs[i].as_slice()).collect();
            let ys: Vec<u8> = batch.iter().map(|&i| train.ys[i]).collect();
            let masks: Option<Vec<DropoutMask<S>>> = (hp.dropout > 0.0)
                .then(|| batch.iter().map(|_| DropoutMask::sample(hp.hidden, hp.dropout, &mut rng)).collect());
            let (loss, g) = loss_and_grad(&model, &xs, &ys, masks.as_deref(), lambda)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { context: "mlp loss", iteration: epoch });
            }
            loss_sum += loss.as_f64() * batch.len() as f64;
            adam_step(&mut adam, &mut model, &g)?;
        }
        model.set_mode(Mode::Eval);
        let train_loss = loss_sum / train.xs.len() as f64;
        let (val_auc, val_loss) = if val.xs.is_empty() {
            (None, None)
        } else {
            let auc = if val_two_class {
                let scores = val.xs.iter().map(|x| predict(&model, x)).collect::<Result<Vec<S>>>()?;
                Some(roc_auc(&RankedPredictions::new(scores, val.ys.to_vec())?)?)
            } else {
                None
            };
            (auc, Some(mean_bce(&model, val)?))
        };
        let score = val_auc.or(val_loss.map(|l| -l)).unwrap_or(-train_loss);
        log.epochs.push(EpochLog { epoch, train_loss, val_auc, val_loss });
        if score > best.0 {
            best = (score, model.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hp.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    let (_, mut model, best_epoch) = best;
    model.set_mode(Mode::Eval);
    log.best_epoch = best_epoch;
    Ok((model, log))
}
