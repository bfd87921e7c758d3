//! L2-regularized logistic regression on sparse features.
//!
//! Objective: mean binary cross-entropy + `||w||^2 / (2 C n)`, bias not
//! penalized. Training is full-batch gradient descent with a backtracking
//! (Armijo) line search from a zero initialization, so it is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::scalar::Scalar;

pub const DEFAULT_MAX_ITER: usize = 1_000;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel<S> {
    pub weights: Vec<S>,
    pub bias: S,
    /// Inverse regularization strength.
    #[serde(rename = "C")]
    pub c: S,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_space_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticGradient<S> {
    pub weights: Vec<S>,
    pub bias: S,
}

impl<S: Scalar> LogisticGradient<S> {
    pub fn inf_norm(&self) -> S {
        self.weights.iter().fold(self.bias.abs(), |m, g| m.max(g.abs()))
    }

    fn sq_norm(&self) -> S {
        self.weights.iter().fold(self.bias * self.bias, |acc, &g| acc + g * g)
    }
}

impl<S: Scalar> LogisticModel<S> {
    pub fn zeros(dim: usize, c: S) -> Self {
        LogisticModel { weights: vec![S::zero(); dim], bias: S::zero(), c, feature_space_ref: None }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &SparseVector<S>) -> Result<S> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        Ok(x.dot(&self.weights) + self.bias)
    }

    /// Regularized objective.
    pub fn loss(&self, vectors: &[SparseVector<S>], labels: &[u8]) -> S {
        let n = S::lit(vectors.len() as f64);
        let data: S = vectors
            .iter()
            .zip(labels)
            .map(|(x, &y)| {
                let z = x.dot(&self.weights) + self.bias;
                // -log sigmoid(z) for y = 1, -log sigmoid(-z) for y = 0
                if y == 1 {
                    -z.log_sigmoid()
                } else {
                    -(-z).log_sigmoid()
                }
            })
            .sum();
        let reg = self.weights.iter().fold(S::zero(), |acc, &w| acc + w * w) / (S::lit(2.0) * self.c * n);
        data / n + reg
    }

    fn stepped(&self, g: &LogisticGradient<S>, step: S) -> Self {
        LogisticModel {
            weights: self.weights.iter().zip(&g.weights).map(|(&w, &d)| w - step * d).collect(),
            bias: self.bias - step * g.bias,
            c: self.c,
            feature_space_ref: self.feature_space_ref.clone(),
        }
    }
}

/// `sigmoid(w . x + b)`.
pub fn predict_proba<S: Scalar>(model: &LogisticModel<S>, x: &SparseVector<S>) -> Result<S> {
    Ok(model.logit(x)?.sigmoid())
}

/// Analytic gradient of the regularized objective.
pub fn gradient<S: Scalar>(model: &LogisticModel<S>, vectors: &[SparseVector<S>], labels: &[u8]) -> LogisticGradient<S> {
    let n = S::lit(vectors.len() as f64);
    let mut gw = vec![S::zero(); model.dim()];
    let mut gb = S::zero();
    for (x, &y) in vectors.iter().zip(labels) {
        let z = x.dot(&model.weights) + model.bias;
        let r = z.sigmoid() - S::lit(y as f64);
        for (i, v) in x.iter() {
            gw[i] = gw[i] + r * v;
        }
        gb = gb + r;
    }
    let reg = S::one() / (model.c * n);
    for (g, &w) in gw.iter_mut().zip(&model.weights) {
        *g = *g / n + w * reg;
    }
    LogisticGradient { weights: gw, bias: gb / n }
}

fn check_inputs<S: Scalar>(vectors: &[SparseVector<S>], labels: &[u8], c: S) -> Result<usize> {
    if vectors.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: vectors.len(), got: labels.len() });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass(if pos == 0 { 0 } else { 1 }));
    }
    if !(c > S::zero()) {
        return Err(Error::InvalidConfig(format!("C must be positive, got {c}")));
    }
    let dim = vectors[0].dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: v.dim() });
    }
    Ok(dim)
}

pub fn train_logreg<S: Scalar>(
    vectors: &[SparseVector<S>],
    labels: &[u8],
    c: S,
    max_iter: usize,
    tol: S,
) -> Result<LogisticModel<S>> {
    train_logreg_traced(vectors, labels, c, max_iter, tol).map(|(m, _)| m)
}

/// Like [`train_logreg`], also returning the objective after every accepted step
/// (the first entry is the objective at the zero initialization).
pub fn train_logreg_traced<S: Scalar>(
    vectors: &[SparseVector<S>],
    labels: &[u8],
    c: S,
    max_iter: usize,
    tol: S,
) -> Result<(LogisticModel<S>, Vec<S>)> {
    let dim = check_inputs(vectors, labels, c)?;
    let mut model = LogisticModel::zeros(dim, c);
    let mut loss = model.loss(vectors, labels);
    let mut trace = vec![loss];
    let mut step = S::one();
    let half = S::lit(0.5);
    let min_step = S::lit(1e-20);
    for iteration in 0..max_iter {
        let g = gradient(&model, vectors, labels);
        if !g.inf_norm().is_finite() {
            return Err(Error::NonFinite { context: "logistic gradient", iteration });
        }
        if g.inf_norm() < tol {
            break;
        }
        let g2 = g.sq_norm();
        step = step * S::lit(2.0);
        loop {
            let candidate = model.stepped(&g, step);
            let cand_loss = candidate.loss(vectors, labels);
            if cand_loss.is_finite() && cand_loss <= loss - half * step * g2 {
                model = candidate;
                loss = cand_loss;
                break;
            }
            step = step * half;
            if step < min_step {
                // No representable descent step left.
                return Ok((model, trace));
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite { context: "logistic loss", iteration });
        }
        trace.push(loss);
    }
    Ok((model, trace))
}
