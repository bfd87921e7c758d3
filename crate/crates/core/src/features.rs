//! Sparse binary and TF-IDF featurization over unigrams and bigrams, and
//! chi-squared univariate feature selection.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textprep::TokenizedDoc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector<S> {
    indices: Vec<usize>,
    values: Vec<S>,
    dim: usize,
}

impl<S: Scalar> SparseVector<S> {
    /// Builds a vector from strictly increasing indices below `dim`.
    pub fn new(indices: Vec<usize>, values: Vec<S>, dim: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: indices.len(), got: values.len() });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("sparse indices must be strictly increasing".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::DimensionMismatch { expected: dim, got: last + 1 });
            }
        }
        Ok(SparseVector { indices, values, dim })
    }

    /// Collects unordered (index, value) pairs, summing duplicates.
    pub fn from_pairs(mut pairs: Vec<(usize, S)>, dim: usize) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut indices: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut values: Vec<S> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            debug_assert!(i < dim);
            if indices.last() == Some(&i) {
                let last = values.last_mut().expect("parallel vectors");
                *last = *last + v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        SparseVector { indices, values, dim }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, S)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot(&self, dense: &[S]) -> S {
        self.iter().fold(S::zero(), |acc, (i, v)| acc + v * dense[i])
    }

    pub fn norm(&self) -> S {
        self.values.iter().fold(S::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn to_dense(&self) -> Vec<S> {
        let mut out = vec![S::zero(); self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn scaled(&self, factor: S) -> Self {
        SparseVector { indices: self.indices.clone(), values: self.values.iter().map(|&v| v * factor).collect(), dim: self.dim }
    }
}

/// Unigrams followed by adjacent bigrams ("tok_a tok_b").
pub fn extract_grams(doc: &TokenizedDoc) -> Vec<String> {
    let mut grams: Vec<String> = doc.tokens.clone();
    grams.extend(doc.tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    grams
}

/// Grams of a multi-year history: the per-year gram lists joined together.
/// Bigrams never span two years.
pub fn history_grams(slots: &[TokenizedDoc]) -> Vec<String> {
    slots.iter().flat_map(extract_grams).collect()
}

/// Gram inventory of the training documents with document frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    features: Vec<String>,
    doc_freq: Vec<u64>,
    n_docs: u64,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl FeatureSpace {
    /// Ids are assigned in lexicographic gram order.
    pub fn fit<'a, I>(training_docs: I) -> Self
    where
        I: IntoIterator<Item = &'a Vec<String>>,
    {
        let mut df: HashMap<&str, u64> = HashMap::new();
        let mut n_docs = 0u64;
        for grams in training_docs {
            n_docs += 1;
            let mut seen: Vec<&str> = grams.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for g in seen {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(&str, u64)> = df.into_iter().collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let features: Vec<String> = entries.iter().map(|e| e.0.to_string()).collect();
        let doc_freq = entries.iter().map(|e| e.1).collect();
        let mut space = FeatureSpace { features, doc_freq, n_docs, index: HashMap::new() };
        space.reindex();
        space
    }

    pub fn reindex(&mut self) {
        self.index = self.features.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn id(&self, gram: &str) -> Option<usize> {
        self.index.get(gram).copied()
    }

    pub fn feature(&self, id: usize) -> &str {
        &self.features[id]
    }

    pub fn doc_freq(&self, id: usize) -> u64 {
        self.doc_freq[id]
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        for (id, (feat, df)) in self.features.iter().zip(&self.doc_freq).enumerate() {
            writeln!(w, "{feat}\t{id}\t{df}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Presence indicator over the feature space; unseen grams are ignored.
pub fn binarize<S: Scalar>(grams: &[String], space: &FeatureSpace) -> SparseVector<S> {
    let mut ids: Vec<usize> = grams.iter().filter_map(|g| space.id(g)).collect();
    ids.sort_unstable();
    ids.dedup();
    let values = vec![S::one(); ids.len()];
    SparseVector { indices: ids, values, dim: space.dim() }
}

/// TF-IDF weighting with smoothed idf `ln((1 + n) / (1 + df)) + 1`, raw
/// counts as tf and L2 normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub space: FeatureSpace,
    idf: Vec<f64>,
}

impl TfidfModel {
    pub fn fit<'a, I>(training_docs: I) -> Self
    where
        I: IntoIterator<Item = &'a Vec<String>>,
    {
        Self::from_space(FeatureSpace::fit(training_docs))
    }

    pub fn from_space(space: FeatureSpace) -> Self {
        let n = space.n_docs() as f64;
        let idf = space.doc_freq.iter().map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0).collect();
        TfidfModel { space, idf }
    }

    pub fn idf(&self, id: usize) -> f64 {
        self.idf[id]
    }

    pub fn transform<S: Scalar>(&self, grams: &[String]) -> SparseVector<S> {
        let mut counts: HashMap<usize, u32> = HashMap::new();
        for g in grams {
            if let Some(id) = self.space.id(g) {
                *counts.entry(id).or_insert(0) += 1;
            }
        }
        let mut pairs: Vec<(usize, f64)> = counts.into_iter().map(|(id, tf)| (id, tf as f64 * self.idf[id])).collect();
        // Fixed summation order keeps the norm bitwise reproducible.
        pairs.sort_unstable_by_key(|p| p.0);
        let norm = pairs.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
        let pairs = pairs
            .into_iter()
            .map(|(id, v)| (id, S::lit(if norm > 0.0 { v / norm } else { 0.0 })))
            .collect();
        SparseVector::from_pairs(pairs, self.space.dim())
    }
}

pub fn tfidf_transform<S: Scalar>(grams: &[String], model: &TfidfModel) -> SparseVector<S> {
    model.transform(grams)
}

/// Top-k features by chi-squared score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelector {
    pub scores: Vec<f64>,
    /// Selected ids in increasing order; position = index in projected vectors.
    pub selected: Vec<usize>,
}

impl FeatureSelector {
    pub fn k(&self) -> usize {
        self.selected.len()
    }

    /// Selected ids ordered by descending score (ties by lower id).
    pub fn ranked(&self) -> Vec<usize> {
        let mut r = self.selected.clone();
        r.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        r
    }

    pub fn project<S: Scalar>(&self, v: &SparseVector<S>) -> SparseVector<S> {
        let pos: HashMap<usize, usize> = self.selected.iter().enumerate().map(|(p, &id)| (id, p)).collect();
        let pairs = v.iter().filter_map(|(i, x)| pos.get(&i).map(|&p| (p, x))).collect();
        SparseVector::from_pairs(pairs, self.selected.len())
    }

    /// "feature<TAB>score" for the selected features, best first.
    pub fn write_tsv(&self, path: &Path, space: &FeatureSpace) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        for id in self.ranked() {
            writeln!(w, "{}\t{}", space.feature(id), self.scores[id]).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Chi-squared statistic between per-class feature mass and the mass
/// expected from class proportions; keeps the `k` best features.
pub fn chi2_select<S: Scalar>(vectors: &[SparseVector<S>], labels: &[u8], k: usize) -> Result<FeatureSelector> {
    if vectors.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: vectors.len(), got: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass(if n_pos == 0 { 0 } else { 1 }));
    }
    let dim = vectors.first().map(|v| v.dim()).unwrap_or(0);
    let mut observed = [vec![0.0f64; dim], vec![0.0f64; dim]];
    for (v, &l) in vectors.iter().zip(labels) {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.dim() });
        }
        let row = &mut observed[(l == 1) as usize];
        for (i, x) in v.iter() {
            row[i] += x.as_f64();
        }
    }
    let n = labels.len() as f64;
    let class_prob = [n_neg as f64 / n, n_pos as f64 / n];
    let scores: Vec<f64> = (0..dim)
        .map(|f| {
            let total = observed[0][f] + observed[1][f];
            (0..2)
                .map(|c| {
                    let expected = class_prob[c] * total;
                    if expected > 0.0 {
                        (observed[c][f] - expected).powi(2) / expected
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k.min(dim));
    order.sort_unstable();
    Ok(FeatureSelector { scores, selected: order })
}
