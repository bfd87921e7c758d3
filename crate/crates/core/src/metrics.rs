//! Ranking metrics over scored instances: ROC AUC, average precision,
//! recall@k, cumulative accuracy profile ratio and cumulative decile ranks.
//!
//! Tie handling is fixed so results are reproducible bit for bit:
//! average ranks for AUC, tied scores form one threshold for AP and the CAP
//! curve, and recall@k / deciles break ties by input order.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_RECALL_K: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPredictions<S> {
    scores: Vec<S>,
    labels: Vec<u8>,
}

impl<S: Scalar> RankedPredictions<S> {
    pub fn new(scores: Vec<S>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: scores.len(), got: labels.len() });
        }
        if scores.is_empty() {
            return Err(Error::Empty("predictions"));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidConfig("labels must be 0 or 1".into()));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidConfig("NaN score".into()));
        }
        Ok(RankedPredictions { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn n_neg(&self) -> usize {
        self.len() - self.n_pos()
    }

    pub fn scores(&self) -> &[S] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    fn cmp_desc(&self, a: usize, b: usize) -> Ordering {
        self.scores[b].partial_cmp(&self.scores[a]).expect("no NaN scores")
    }

    /// Indices by descending score, ties in input order.
    pub fn order_desc(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.cmp_desc(a, b));
        idx
    }

    /// Descending order split into groups of equal score, as
    /// (group size, positives in group).
    fn tie_groups(&self) -> Vec<(usize, usize)> {
        let order = self.order_desc();
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut prev: Option<S> = None;
        for i in order {
            let pos = self.labels[i] as usize;
            match (prev, groups.last_mut()) {
                (Some(p), Some(g)) if p == self.scores[i] => {
                    g.0 += 1;
                    g.1 += pos;
                }
                _ => groups.push((1, pos)),
            }
            prev = Some(self.scores[i]);
        }
        groups
    }

    fn require_both(&self) -> Result<()> {
        match (self.n_pos(), self.n_neg()) {
            (0, _) => Err(Error::SingleClass(0)),
            (_, 0) => Err(Error::SingleClass(1)),
            _ => Ok(()),
        }
    }
}

/// Mann-Whitney statistic with average ranks for tied scores.
pub fn roc_auc<S: Scalar>(preds: &RankedPredictions<S>) -> Result<f64> {
    preds.require_both()?;
    let n_pos = preds.n_pos() as f64;
    let n_neg = preds.n_neg() as f64;
    // Ascending ranks: walk the descending groups from the back.
    let groups = preds.tie_groups();
    let mut rank_sum = 0.0;
    let mut below = 0usize;
    for &(size, pos) in groups.iter().rev() {
        let avg_rank = below as f64 + (size as f64 + 1.0) / 2.0;
        rank_sum += avg_rank * pos as f64;
        below += size;
    }
    Ok((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Sum over descending thresholds of (recall increase) x precision.
pub fn average_precision<S: Scalar>(preds: &RankedPredictions<S>) -> Result<f64> {
    let total_pos = preds.n_pos();
    if total_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0;
    for (size, pos) in preds.tie_groups() {
        seen += size;
        if pos > 0 {
            tp += pos;
            ap += (pos as f64 / total_pos as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

/// Share of all positives among the `k` highest scores (`k > n` means `n`).
/// Ties at the boundary are resolved by input order.
pub fn recall_at_k<S: Scalar>(preds: &RankedPredictions<S>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let total = preds.n_pos();
    if total == 0 {
        return Err(Error::NoPositives);
    }
    let hits = preds.order_desc().into_iter().take(k).filter(|&i| preds.labels[i] == 1).count();
    Ok(hits as f64 / total as f64)
}

/// Points of the cumulative accuracy profile: (share of ranked data, share
/// of positives captured), starting at (0, 0), one point per tie group.
pub fn cap_curve<S: Scalar>(preds: &RankedPredictions<S>) -> Result<Vec<(f64, f64)>> {
    let total_pos = preds.n_pos();
    if total_pos == 0 {
        return Err(Error::NoPositives);
    }
    let n = preds.len() as f64;
    let mut pts = vec![(0.0, 0.0)];
    let (mut seen, mut pos) = (0usize, 0usize);
    for (size, p) in preds.tie_groups() {
        seen += size;
        pos += p;
        pts.push((seen as f64 / n, pos as f64 / total_pos as f64));
    }
    Ok(pts)
}

/// Accuracy ratio `(A - 1/2) / (A_perfect - 1/2)` from the trapezoidal area
/// `A` under the CAP curve, with `A_perfect = 1 - pi/2`.
pub fn cap_ratio<S: Scalar>(preds: &RankedPredictions<S>) -> Result<f64> {
    preds.require_both()?;
    let pts = cap_curve(preds)?;
    let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
    let pi = preds.n_pos() as f64 / preds.len() as f64;
    let perfect = 1.0 - pi / 2.0;
    Ok((area - 0.5) / (perfect - 0.5))
}

/// Cumulative share of positives in the top 1..10 deciles; decile `i`
/// ends at rank `ceil(i n / 10)`.
pub fn decile_ranks<S: Scalar>(preds: &RankedPredictions<S>) -> Result<Vec<f64>> {
    let total = preds.n_pos();
    if total == 0 {
        return Err(Error::NoPositives);
    }
    let n = preds.len();
    let order = preds.order_desc();
    let mut out = Vec::with_capacity(10);
    let mut hits = 0usize;
    let mut start = 0usize;
    for i in 1..=10 {
        let end = (i * n).div_ceil(10);
        hits += order[start..end].iter().filter(|&&k| preds.labels[k] == 1).count();
        out.push(hits as f64 / total as f64);
        start = end;
    }
    Ok(out)
}

/// (false positive rate, true positive rate) per tie-group threshold.
pub fn roc_curve<S: Scalar>(preds: &RankedPredictions<S>) -> Result<Vec<(f64, f64)>> {
    preds.require_both()?;
    let (p, n) = (preds.n_pos() as f64, preds.n_neg() as f64);
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (size, pos) in preds.tie_groups() {
        tp += pos;
        fp += size - pos;
        pts.push((fp as f64 / n, tp as f64 / p));
    }
    Ok(pts)
}

pub fn write_curve_csv(path: &Path, header: &str, points: &[(f64, f64)]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for (x, y) in points {
        writeln!(w, "{x},{y}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub n: usize,
    pub n_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub ap: f64,
    pub recall_at_k: f64,
    pub k: usize,
    pub cap_ratio: f64,
    pub cumulative_decile: Vec<f64>,
    pub counts: Counts,
}

impl MetricsReport {
    pub fn compute<S: Scalar>(preds: &RankedPredictions<S>, k: usize) -> Result<Self> {
        Ok(MetricsReport {
            auc: roc_auc(preds)?,
            ap: average_precision(preds)?,
            recall_at_k: recall_at_k(preds, k)?,
            k,
            cap_ratio: cap_ratio(preds)?,
            cumulative_decile: decile_ranks(preds)?,
            counts: Counts { n: preds.len(), n_pos: preds.n_pos() },
        })
    }
}
