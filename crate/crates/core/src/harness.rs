//! Experiment orchestration: model wiring, hyperparameter search, the
//! tune-then-retrain protocol and result reporting.
//!
//! An experiment runs in two phases. Phase one trains every trial on data up
//! to `split.train_cutoff_year` and scores it on `split.validation_years`;
//! phase two retrains the best assignment on data up to
//! `final_train_cutoff_year` and evaluates each of `split.test_years`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus, Company};
use crate::embeddings::{load_embedding_table, train_skipgram, EmbeddingTable, SkipGramConfig, WordVectors};
use crate::error::{Error, Result};
use crate::features::{chi2_select, history_grams, FeatureSelector, SparseVector, TfidfModel};
use crate::linear::{predict_proba, train_logreg, LogisticModel, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::metrics::{roc_auc, MetricsReport, RankedPredictions, DEFAULT_RECALL_K};
use crate::neural::{predict, train_mlp, Examples, MlpHyperparams, MlpModel, TrainingLog};
use crate::sampling::{build_eval_set, build_training_set, undersample_indices, FirmYearInstance, SplitSpec};
use crate::textprep::{apply_vocab, build_vocab, slot_tokens, TokenizedDoc, Vocabulary, DEFAULT_MAX_VOCAB};

/// Number of features the binary model keeps.
pub const BINARY_K: usize = 20;
/// Share of negatives after undersampling on the classical path.
pub const MAJORITY_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Binary,
    Tfidf,
    W2v,
    ImportedEmbedding,
}

impl ModelKind {
    pub fn is_classical(self) -> bool {
        matches!(self, ModelKind::Binary | ModelKind::Tfidf)
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Binary => "Binary",
            ModelKind::Tfidf => "TF-IDF",
            ModelKind::W2v => "W2V",
            ModelKind::ImportedEmbedding => "Imported",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamDomain {
    Values(Vec<f64>),
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
    /// Inclusive integer range.
    IntRange { low: i64, high: i64 },
}

impl ParamDomain {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            ParamDomain::Values(v) => !v.is_empty() && v.iter().all(|x| x.is_finite()),
            ParamDomain::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            ParamDomain::LogUniform { low, high } => *low > 0.0 && high.is_finite() && low <= high,
            ParamDomain::IntRange { low, high } => low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("empty or invalid domain for `{name}`")))
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ParamDomain::Values(v) => v[rng.random_range(0..v.len())],
            ParamDomain::Uniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.random_range(*low..*high)
                }
            }
            ParamDomain::LogUniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.random_range(low.ln()..high.ln()).exp()
                }
            }
            ParamDomain::IntRange { low, high } => rng.random_range(*low..=*high) as f64,
        }
    }
}

/// Named parameter domains; iteration order is the key order.
pub type HyperparameterSpace = BTreeMap<String, ParamDomain>;
pub type Assignment = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Search {
    Grid,
    Random { n_trials: usize },
}

/// Every trial assignment, in evaluation order.
pub fn enumerate_trials(space: &HyperparameterSpace, search: Search, seed: u64) -> Result<Vec<Assignment>> {
    if space.is_empty() {
        return Err(Error::InvalidConfig("hyperparameter space is empty".into()));
    }
    for (name, d) in space {
        d.validate(name)?;
    }
    match search {
        Search::Grid => {
            let mut trials = vec![Assignment::new()];
            for (name, d) in space {
                let ParamDomain::Values(values) = d else {
                    return Err(Error::InvalidConfig(format!("grid search needs explicit values for `{name}`")));
                };
                trials = trials
                    .into_iter()
                    .flat_map(|t| {
                        values.iter().map(move |&v| {
                            let mut t = t.clone();
                            t.insert(name.clone(), v);
                            t
                        })
                    })
                    .collect();
            }
            Ok(trials)
        }
        Search::Random { n_trials } => {
            if n_trials == 0 {
                return Err(Error::InvalidConfig("random search needs n_trials >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..n_trials).map(|_| space.iter().map(|(k, d)| (k.clone(), d.sample(&mut rng))).collect()).collect())
        }
    }
}

fn param(a: &Assignment, name: &str) -> Result<f64> {
    a.get(name).copied().ok_or_else(|| Error::InvalidConfig(format!("assignment lacks `{name}`")))
}

fn count_param(a: &Assignment, name: &str) -> Result<Option<usize>> {
    match a.get(name) {
        None => Ok(None),
        Some(&v) if v >= 1.0 && v.fract() == 0.0 => Ok(Some(v as usize)),
        Some(&v) => Err(Error::InvalidConfig(format!("`{name}` must be a positive integer, got {v}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalHyperparams {
    #[serde(rename = "C")]
    pub c: f64,
    /// Features kept by chi-squared selection.
    pub k: usize,
}

impl ClassicalHyperparams {
    pub fn from_assignment(kind: ModelKind, a: &Assignment) -> Result<Self> {
        let c = param(a, "C")?;
        let k = match (kind, count_param(a, "k")?) {
            (ModelKind::Binary, None) => BINARY_K,
            (ModelKind::Binary, Some(k)) if k == BINARY_K => BINARY_K,
            (ModelKind::Binary, Some(k)) => {
                return Err(Error::InvalidConfig(format!("the binary model keeps {BINARY_K} features, got k = {k}")))
            }
            (_, Some(k)) => k,
            (_, None) => return Err(Error::InvalidConfig("tfidf assignment lacks `k`".into())),
        };
        Ok(ClassicalHyperparams { c, k })
    }
}

pub fn mlp_hyperparams(a: &Assignment) -> Result<MlpHyperparams> {
    let d = MlpHyperparams::default();
    Ok(MlpHyperparams {
        hidden: count_param(a, "hidden")?.ok_or_else(|| Error::InvalidConfig("assignment lacks `hidden`".into()))?,
        dropout: a.get("dropout").copied().unwrap_or(0.0),
        lr: param(a, "lr")?,
        weight_decay: a.get("weight_decay").copied().unwrap_or(0.0),
        batch_size: count_param(a, "batch_size")?.unwrap_or(d.batch_size),
        max_epochs: count_param(a, "max_epochs")?.unwrap_or(d.max_epochs),
        patience: count_param(a, "patience")?.unwrap_or(d.patience),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPaths {
    #[serde(default)]
    pub reports: Option<PathBuf>,
    #[serde(default)]
    pub bankruptcies: Option<PathBuf>,
    #[serde(default)]
    pub embedding_table: Option<PathBuf>,
    pub out_dir: PathBuf,
}

fn default_final_cutoff() -> i32 {
    2017
}
fn default_max_vocab() -> usize {
    DEFAULT_MAX_VOCAB
}
fn default_recall_k() -> usize {
    DEFAULT_RECALL_K
}
fn default_holdout() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model_kind: ModelKind,
    pub split: SplitSpec,
    #[serde(default = "default_final_cutoff")]
    pub final_train_cutoff_year: i32,
    pub space: HyperparameterSpace,
    pub search: Search,
    pub seed: u64,
    pub paths: ExperimentPaths,
    #[serde(default)]
    pub skipgram: SkipGramConfig,
    #[serde(default = "default_max_vocab")]
    pub max_vocab: usize,
    #[serde(default = "default_recall_k")]
    pub recall_k: usize,
    /// Share of the training set held out for MLP early stopping.
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
}

impl ExperimentConfig {
    /// A config with the default search space for `kind`.
    pub fn new(kind: ModelKind, history_len: usize, out_dir: impl Into<PathBuf>) -> Self {
        let values = |v: &[f64]| ParamDomain::Values(v.to_vec());
        let mut space = HyperparameterSpace::new();
        match kind {
            ModelKind::Binary => {
                space.insert("C".into(), values(&[0.01, 0.1, 1.0, 10.0, 100.0]));
            }
            ModelKind::Tfidf => {
                space.insert("C".into(), values(&[0.1, 1.0, 10.0, 100.0]));
                space.insert("k".into(), values(&[1_000.0, 10_000.0, 25_000.0]));
            }
            ModelKind::W2v | ModelKind::ImportedEmbedding => {
                space.insert("hidden".into(), values(&[16.0, 64.0]));
                space.insert("dropout".into(), values(&[0.0, 0.3]));
                space.insert("lr".into(), values(&[1e-3]));
                space.insert("weight_decay".into(), values(&[1e-4]));
            }
        }
        ExperimentConfig {
            model_kind: kind,
            split: SplitSpec { history_len, ..SplitSpec::default() },
            final_train_cutoff_year: default_final_cutoff(),
            space,
            search: Search::Grid,
            seed: 0,
            paths: ExperimentPaths { out_dir: out_dir.into(), ..Default::default() },
            skipgram: SkipGramConfig::default(),
            max_vocab: DEFAULT_MAX_VOCAB,
            recall_k: DEFAULT_RECALL_K,
            holdout_fraction: default_holdout(),
        }
    }

    /// Split used by the retraining phase.
    pub fn final_split(&self) -> SplitSpec {
        SplitSpec { train_cutoff_year: self.final_train_cutoff_year, validation_years: Vec::new(), ..self.split.clone() }
    }

    /// Checks everything that can be checked before any training.
    pub fn validate(&self) -> Result<Vec<Assignment>> {
        self.split.validate()?;
        self.final_split().validate()?;
        if self.split.validation_years.is_empty() || self.split.test_years.is_empty() {
            return Err(Error::InvalidConfig("validation and test years must be non-empty".into()));
        }
        let first_test = *self.split.test_years.iter().min().expect("non-empty");
        if self.final_train_cutoff_year >= first_test {
            return Err(Error::InvalidConfig(format!(
                "final training cutoff {} must precede test year {first_test}",
                self.final_train_cutoff_year
            )));
        }
        if self.final_train_cutoff_year < self.split.train_cutoff_year {
            return Err(Error::InvalidConfig("final cutoff precedes the tuning cutoff".into()));
        }
        if self.recall_k == 0 || self.max_vocab == 0 {
            return Err(Error::InvalidConfig("recall_k and max_vocab must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::InvalidConfig("holdout_fraction must lie in [0, 1)".into()));
        }
        if self.model_kind == ModelKind::ImportedEmbedding && self.paths.embedding_table.is_none() {
            return Err(Error::InvalidConfig("imported_embedding needs paths.embedding_table".into()));
        }
        let trials = enumerate_trials(&self.space, self.search, self.seed)?;
        for t in &trials {
            if self.model_kind.is_classical() {
                ClassicalHyperparams::from_assignment(self.model_kind, t)?;
            } else {
                mlp_hyperparams(t)?;
            }
        }
        Ok(trials)
    }
}

/// Provenance of a fitted artifact: what training data it saw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataTag {
    pub n_instances: usize,
    pub n_positive: usize,
    pub max_anchor: NaiveDate,
}

impl DataTag {
    pub fn of(instances: &[FirmYearInstance]) -> Result<Self> {
        let max_anchor = instances.iter().map(|i| i.window_start).max().ok_or(Error::Empty("training instances"))?;
        Ok(DataTag {
            n_instances: instances.len(),
            n_positive: instances.iter().filter(|i| i.is_positive()).count(),
            max_anchor,
        })
    }
}

/// Fails unless every evaluation anchor is strictly later than the latest
/// training anchor.
pub fn check_temporal_split(tag: &DataTag, eval: &[FirmYearInstance]) -> Result<()> {
    match eval.iter().map(|i| i.window_start).min() {
        Some(first) if first <= tag.max_anchor => Err(Error::Leakage(format!(
            "evaluation anchor {first} does not follow training anchor {}",
            tag.max_anchor
        ))),
        _ => Ok(()),
    }
}

/// Tokenized history slots per instance.
pub fn tokenize_slots(instances: &[FirmYearInstance]) -> Vec<Vec<TokenizedDoc>> {
    instances.par_iter().map(|i| i.history.iter().map(|h| slot_tokens(h)).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalScorer {
    pub model_kind: ModelKind,
    pub vocab: Vocabulary,
    /// Feature space plus idf; the binary model ignores the idf.
    pub tfidf: TfidfModel,
    pub selector: FeatureSelector,
    pub model: LogisticModel<f64>,
    pub hyperparams: ClassicalHyperparams,
    pub trained_on: DataTag,
}

impl ClassicalScorer {
    fn featurize(&self, slots: &[TokenizedDoc]) -> SparseVector<f64> {
        let mapped: Vec<TokenizedDoc> = slots.iter().map(|d| apply_vocab(d, &self.vocab)).collect();
        let grams = history_grams(&mapped);
        let full = match self.model_kind {
            ModelKind::Binary => crate::features::binarize(&grams, &self.tfidf.space),
            _ => self.tfidf.transform(&grams),
        };
        self.selector.project(&full)
    }

    pub fn score_tokenized(&self, slots: &[Vec<TokenizedDoc>]) -> Result<Vec<f64>> {
        slots.par_iter().map(|s| predict_proba(&self.model, &self.featurize(s))).collect()
    }

    /// Selected features, best chi-squared score first.
    pub fn selected_features(&self) -> Vec<String> {
        self.selector.ranked().into_iter().map(|id| self.tfidf.space.feature(id).to_string()).collect()
    }

    fn reindex(&mut self) {
        self.vocab.reindex();
        self.tfidf.space.reindex();
    }
}

/// Training statistics for the classical path, shared by all trials of a phase.
pub struct ClassicalData {
    kind: ModelKind,
    vocab: Vocabulary,
    tfidf: TfidfModel,
    vectors: Vec<SparseVector<f64>>,
    labels: Vec<u8>,
    tag: DataTag,
}

impl ClassicalData {
    /// Undersamples to the 90/10 ratio, then fits vocabulary, feature space
    /// and idf on what remains.
    pub fn prepare(
        kind: ModelKind,
        instances: &[FirmYearInstance],
        slots: &[Vec<TokenizedDoc>],
        seed: u64,
        max_vocab: usize,
    ) -> Result<Self> {
        if !kind.is_classical() {
            return Err(Error::InvalidConfig(format!("{kind:?} is not a classical model")));
        }
        let rows = undersample_indices(instances, MAJORITY_FRACTION, seed)?;
        let train_instances: Vec<FirmYearInstance> = rows.iter().map(|&r| instances[r].clone()).collect();
        let train_slots: Vec<&Vec<TokenizedDoc>> = rows.iter().map(|&r| &slots[r]).collect();

        let vocab = build_vocab(train_slots.iter().flat_map(|s| s.iter()), max_vocab);
        let grams: Vec<Vec<String>> = train_slots
            .par_iter()
            .map(|s| history_grams(&s.iter().map(|d| apply_vocab(d, &vocab)).collect::<Vec<_>>()))
            .collect();
        let tfidf = TfidfModel::fit(&grams);
        let vectors: Vec<SparseVector<f64>> = grams
            .par_iter()
            .map(|g| match kind {
                ModelKind::Binary => crate::features::binarize(g, &tfidf.space),
                _ => tfidf.transform(g),
            })
            .collect();
        let labels = train_instances.iter().map(|i| i.label).collect();
        Ok(ClassicalData { kind, vocab, tfidf, vectors, labels, tag: DataTag::of(&train_instances)? })
    }

    pub fn fit(&self, hp: ClassicalHyperparams) -> Result<ClassicalScorer> {
        let selector = chi2_select(&self.vectors, &self.labels, hp.k)?;
        let projected: Vec<SparseVector<f64>> = self.vectors.iter().map(|v| selector.project(v)).collect();
        let model = train_logreg(&projected, &self.labels, hp.c, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
        Ok(ClassicalScorer {
            model_kind: self.kind,
            vocab: self.vocab.clone(),
            tfidf: self.tfidf.clone(),
            selector,
            model,
            hyperparams: hp,
            trained_on: self.tag.clone(),
        })
    }
}

/// Undersample, build vocabulary and features, select, fit logistic regression.
pub fn classical_pipeline(
    kind: ModelKind,
    instances: &[FirmYearInstance],
    hp: ClassicalHyperparams,
    seed: u64,
    max_vocab: usize,
) -> Result<ClassicalScorer> {
    ClassicalData::prepare(kind, instances, &tokenize_slots(instances), seed, max_vocab)?.fit(hp)
}

/// Source of per-slot document vectors.
#[derive(Clone, Copy)]
pub enum Embedder<'a> {
    W2v(&'a WordVectors<f64>),
    Table(&'a EmbeddingTable<f64>),
}

impl Embedder<'_> {
    /// Concatenated slot embeddings per instance, oldest slot first.
    pub fn embed(&self, instances: &[FirmYearInstance], slots: Option<&[Vec<TokenizedDoc>]>) -> Result<Vec<Vec<f64>>> {
        match self {
            Embedder::W2v(wv) => {
                let owned;
                let slots = match slots {
                    Some(s) => s,
                    None => {
                        owned = tokenize_slots(instances);
                        &owned
                    }
                };
                Ok(slots.par_iter().map(|s| s.iter().flat_map(|d| wv.embed(d).vector).collect()).collect())
            }
            Embedder::Table(table) => {
                let mut missing = Vec::new();
                let mut out = Vec::with_capacity(instances.len());
                for inst in instances {
                    let mut x = Vec::with_capacity(table.dim * inst.history.len());
                    for s in 0..inst.history.len() {
                        let key = inst.slot_key(s);
                        match table.get(&key) {
                            Some(e) => x.extend_from_slice(&e.vector),
                            None => missing.push(key),
                        }
                    }
                    out.push(x);
                }
                if missing.is_empty() {
                    Ok(out)
                } else {
                    Err(Error::MissingKeys(missing))
                }
            }
        }
    }
}

/// Per-feature z-scoring fitted on training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(xs: &[Vec<f64>]) -> Self {
        let d = xs.first().map_or(0, Vec::len);
        let n = xs.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for x in xs {
            mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for x in xs {
            var.iter_mut().zip(x.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m) * (v - m));
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingScorer {
    pub model_kind: ModelKind,
    pub history_len: usize,
    /// Word-vector file next to the scorer (W2V) or embedding table path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors_ref: Option<String>,
    pub standardizer: Standardizer,
    pub model: MlpModel<f64>,
    pub hyperparams: MlpHyperparams,
    pub seed: u64,
    pub training_log: TrainingLog,
    pub trained_on: DataTag,
}

impl EmbeddingScorer {
    pub fn score_embedded(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| predict(&self.model, &self.standardizer.apply(x))).collect()
    }
}

/// Stratified seeded holdout; returns (fit rows, holdout rows), both sorted.
pub fn holdout_split(labels: &[u8], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hold = Vec::new();
    for class in [0u8, 1] {
        let rows: Vec<usize> = labels.iter().enumerate().filter(|(_, &l)| l == class).map(|(k, _)| k).collect();
        let mut n = (fraction * rows.len() as f64).round() as usize;
        if fraction > 0.0 && n == 0 && rows.len() >= 2 {
            n = 1;
        }
        hold.extend(index::sample(&mut rng, rows.len(), n).into_iter().map(|p| rows[p]));
    }
    hold.sort_unstable();
    let held: HashSet<usize> = hold.iter().copied().collect();
    let fit = (0..labels.len()).filter(|k| !held.contains(k)).collect();
    (fit, hold)
}

/// Embedded training inputs shared by all trials of a phase.
pub struct EmbeddedData {
    kind: ModelKind,
    history_len: usize,
    vectors_ref: Option<String>,
    xs: Vec<Vec<f64>>,
    ys: Vec<u8>,
    tag: DataTag,
}

impl EmbeddedData {
    pub fn new(
        kind: ModelKind,
        instances: &[FirmYearInstance],
        xs: Vec<Vec<f64>>,
        vectors_ref: Option<String>,
    ) -> Result<Self> {
        let history_len = instances.first().map_or(0, |i| i.history.len());
        Ok(EmbeddedData {
            kind,
            history_len,
            vectors_ref,
            xs,
            ys: instances.iter().map(|i| i.label).collect(),
            tag: DataTag::of(instances)?,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.xs.first().map_or(0, Vec::len)
    }

    pub fn fit(&self, hp: &MlpHyperparams, seed: u64, holdout_fraction: f64) -> Result<EmbeddingScorer> {
        let (fit_rows, hold_rows) = holdout_split(&self.ys, holdout_fraction, seed);
        let raw_fit: Vec<Vec<f64>> = fit_rows.iter().map(|&r| self.xs[r].clone()).collect();
        let standardizer = Standardizer::fit(&raw_fit);
        let fit_x: Vec<Vec<f64>> = raw_fit.iter().map(|x| standardizer.apply(x)).collect();
        let fit_y: Vec<u8> = fit_rows.iter().map(|&r| self.ys[r]).collect();
        let hold_x: Vec<Vec<f64>> = hold_rows.iter().map(|&r| standardizer.apply(&self.xs[r])).collect();
        let hold_y: Vec<u8> = hold_rows.iter().map(|&r| self.ys[r]).collect();
        let (model, training_log) =
            train_mlp(Examples { xs: &fit_x, ys: &fit_y }, Examples { xs: &hold_x, ys: &hold_y }, hp, seed)?;
        Ok(EmbeddingScorer {
            model_kind: self.kind,
            history_len: self.history_len,
            vectors_ref: self.vectors_ref.clone(),
            standardizer,
            model,
            hyperparams: hp.clone(),
            seed,
            training_log,
            trained_on: self.tag.clone(),
        })
    }
}

/// Embed every history slot, concatenate, train the MLP. No undersampling.
pub fn embedding_pipeline(
    embedder: Embedder<'_>,
    instances: &[FirmYearInstance],
    hp: &MlpHyperparams,
    seed: u64,
    holdout_fraction: f64,
) -> Result<EmbeddingScorer> {
    let kind = match embedder {
        Embedder::W2v(_) => ModelKind::W2v,
        Embedder::Table(_) => ModelKind::ImportedEmbedding,
    };
    let xs = embedder.embed(instances, None)?;
    EmbeddedData::new(kind, instances, xs, None)?.fit(hp, seed, holdout_fraction)
}

/// Documents for skip-gram training: each distinct report in the training
/// histories, once, in instance order.
pub fn skipgram_corpus(instances: &[FirmYearInstance], slots: &[Vec<TokenizedDoc>]) -> Vec<TokenizedDoc> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (inst, s) in instances.iter().zip(slots) {
        let h = inst.history.len() as i32;
        for (k, (text, doc)) in inst.history.iter().zip(s).enumerate() {
            let doc_year = inst.year - h + 1 + k as i32;
            if text != crate::textprep::MISSING && seen.insert((inst.company_id.clone(), doc_year)) {
                docs.push(doc.clone());
            }
        }
    }
    docs
}

pub fn train_word_vectors(
    instances: &[FirmYearInstance],
    slots: &[Vec<TokenizedDoc>],
    config: &SkipGramConfig,
    max_vocab: usize,
) -> Result<(crate::embeddings::SkipGramModel<f64>, Vec<f64>)> {
    let docs = skipgram_corpus(instances, slots);
    let vocab = build_vocab(&docs, max_vocab);
    let (model, trace) = train_skipgram::<f64>(&docs, &vocab, config)?;
    Ok((model, trace.epoch_losses))
}

/// A trained model of any kind, as persisted in `model.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Scorer {
    Classical(ClassicalScorer),
    Embedding(EmbeddingScorer),
}

/// Side inputs needed to score with an embedding model.
#[derive(Debug, Default)]
pub struct Resources {
    pub word_vectors: Option<WordVectors<f64>>,
    pub table: Option<EmbeddingTable<f64>>,
}

impl Scorer {
    pub fn model_kind(&self) -> ModelKind {
        match self {
            Scorer::Classical(s) => s.model_kind,
            Scorer::Embedding(s) => s.model_kind,
        }
    }

    pub fn trained_on(&self) -> &DataTag {
        match self {
            Scorer::Classical(s) => &s.trained_on,
            Scorer::Embedding(s) => &s.trained_on,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// Reads a scorer and the side inputs it references (resolved relative
    /// to the scorer file's directory).
    pub fn load(path: &Path) -> Result<(Scorer, Resources)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scorer: Scorer = serde_json::from_str(&text)?;
        let mut res = Resources::default();
        match &mut scorer {
            Scorer::Classical(s) => s.reindex(),
            Scorer::Embedding(s) => {
                if let Some(r) = &s.vectors_ref {
                    let p = path.parent().unwrap_or(Path::new(".")).join(r);
                    match s.model_kind {
                        ModelKind::W2v => res.word_vectors = Some(WordVectors::read_vec(&p)?),
                        _ => res.table = Some(load_embedding_table(&p)?),
                    }
                }
            }
        }
        Ok((scorer, res))
    }

    pub fn score(&self, instances: &[FirmYearInstance], res: &Resources) -> Result<Vec<f64>> {
        match self {
            Scorer::Classical(s) => s.score_tokenized(&tokenize_slots(instances)),
            Scorer::Embedding(s) => {
                let embedder = match s.model_kind {
                    ModelKind::W2v => Embedder::W2v(
                        res.word_vectors.as_ref().ok_or(Error::InvalidConfig("word vectors not loaded".into()))?,
                    ),
                    _ => Embedder::Table(res.table.as_ref().ok_or(Error::InvalidConfig("embedding table not loaded".into()))?),
                };
                s.score_embedded(&embedder.embed(instances, None)?)
            }
        }
    }
}

/// Scores instances and computes the metric suite.
pub fn evaluate(scores: Vec<f64>, instances: &[FirmYearInstance], k: usize) -> Result<MetricsReport> {
    let preds = RankedPredictions::new(scores, instances.iter().map(|i| i.label).collect())?;
    MetricsReport::compute(&preds, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearAuc {
    pub year: i32,
    pub auc: f64,
    /// Validation instances in that year; the objective's weight.
    pub n: usize,
}

/// Instance-weighted mean of per-year AUCs.
pub fn weighted_objective(per_year: &[YearAuc]) -> Result<f64> {
    let total: usize = per_year.iter().map(|y| y.n).sum();
    if total == 0 {
        return Err(Error::Empty("validation years"));
    }
    Ok(per_year.iter().map(|y| y.auc * y.n as f64).sum::<f64>() / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub id: usize,
    pub assignment: Assignment,
    pub validation: Vec<YearAuc>,
    pub objective: Option<f64>,
    pub artifacts: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Evaluates every trial (possibly in parallel) and returns the index of the
/// best one together with all results. Ties go to the earlier trial.
pub fn tune<F>(trials: &[Assignment], evaluate: F) -> Result<(usize, Vec<TrialResult>)>
where
    F: Fn(usize, &Assignment) -> Result<Vec<YearAuc>> + Sync,
{
    if trials.is_empty() {
        return Err(Error::InvalidConfig("no trials to run".into()));
    }
    let results: Vec<TrialResult> = trials
        .par_iter()
        .enumerate()
        .map(|(id, a)| {
            let outcome = evaluate(id, a).and_then(|v| weighted_objective(&v).map(|o| (v, o)));
            let (validation, objective, error) = match outcome {
                Ok((v, o)) if o.is_finite() => (v, Some(o), None),
                Ok((v, o)) => (v, None, Some(format!("non-finite objective {o}"))),
                Err(e) => (Vec::new(), None, Some(e.to_string())),
            };
            TrialResult { id, assignment: a.clone(), validation, objective, artifacts: trial_dir_name(id), error }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for r in &results {
        if let Some(o) = r.objective {
            if best.is_none_or(|(_, b)| o > b) {
                best = Some((r.id, o));
            }
        }
    }
    match best {
        Some((id, _)) => Ok((id, results)),
        None => Err(Error::AllTrialsFailed(
            results.iter().map(|r| format!("trial {}: {}", r.id, r.error.clone().unwrap_or_default())).collect(),
        )),
    }
}

fn trial_dir_name(id: usize) -> String {
    format!("trials/{id:03}")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearReport {
    pub year: i32,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub model_kind: ModelKind,
    pub history_len: usize,
    pub seed: u64,
    pub best_trial: TrialResult,
    pub trials: Vec<TrialResult>,
    pub final_trained_on: DataTag,
    /// Chi-squared selection of the final classical model, best first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_features: Option<Vec<String>>,
    pub test: Vec<YearReport>,
}

impl ExperimentReport {
    pub fn test_year(&self, year: i32) -> Option<&MetricsReport> {
        self.test.iter().find(|y| y.year == year).map(|y| &y.metrics)
    }
}

pub fn load_companies(config: &ExperimentConfig) -> Result<Vec<Company>> {
    match (&config.paths.reports, &config.paths.bankruptcies) {
        (Some(r), Some(b)) => {
            let loaded = load_corpus(r, b)?;
            log::info!("loaded {} companies ({:?})", loaded.companies.len(), loaded.warnings);
            Ok(loaded.companies)
        }
        _ => Err(Error::InvalidConfig("paths.reports and paths.bankruptcies are required".into())),
    }
}

/// Loads the corpus named in the config and runs [`run_experiment_on`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let companies = load_companies(config).map_err(Error::in_stage("load-corpus"))?;
    run_experiment_on(&companies, config)
}

/// What one phase trains on, ready for repeated fitting.
enum PhaseData {
    Classical(ClassicalData),
    Embedded(EmbeddedData),
}

impl PhaseData {
    fn fit(&self, config: &ExperimentConfig, a: &Assignment) -> Result<Scorer> {
        match self {
            PhaseData::Classical(d) => Ok(Scorer::Classical(d.fit(ClassicalHyperparams::from_assignment(config.model_kind, a)?)?)),
            PhaseData::Embedded(d) => {
                Ok(Scorer::Embedding(d.fit(&mlp_hyperparams(a)?, config.seed, config.holdout_fraction)?))
            }
        }
    }
}

/// Evaluation inputs in the form the phase's scorers consume.
enum EvalInputs {
    Tokenized(Vec<Vec<TokenizedDoc>>),
    Embedded(Vec<Vec<f64>>),
}

impl EvalInputs {
    fn score(&self, scorer: &Scorer) -> Result<Vec<f64>> {
        match (self, scorer) {
            (EvalInputs::Tokenized(t), Scorer::Classical(s)) => s.score_tokenized(t),
            (EvalInputs::Embedded(x), Scorer::Embedding(s)) => s.score_embedded(x),
            _ => Err(Error::InvalidConfig("scorer does not match the prepared inputs".into())),
        }
    }
}

struct Phase {
    data: PhaseData,
    evals: Vec<(i32, Vec<FirmYearInstance>, EvalInputs)>,
}

fn prepare_phase(
    companies: &[Company],
    config: &ExperimentConfig,
    split: &SplitSpec,
    eval_years: &[i32],
    dir: &Path,
    table: Option<&EmbeddingTable<f64>>,
) -> Result<Phase> {
    let train = build_training_set(companies, split).map_err(Error::in_stage("build-training-set"))?;
    let tag = DataTag::of(&train)?;
    let mut evals = Vec::new();
    for &year in eval_years {
        let set = build_eval_set(companies, year, split).map_err(Error::in_stage("build-eval-set"))?;
        check_temporal_split(&tag, &set)?;
        evals.push((year, set));
    }
    log::info!(
        "{}: {} training instances ({} positive), eval sizes {:?}",
        dir.display(),
        tag.n_instances,
        tag.n_positive,
        evals.iter().map(|(y, s)| (*y, s.len())).collect::<Vec<_>>()
    );
    let needs_tokens = config.model_kind != ModelKind::ImportedEmbedding;
    let train_slots = if needs_tokens { tokenize_slots(&train) } else { Vec::new() };
    let (data, evals) = match config.model_kind {
        ModelKind::Binary | ModelKind::Tfidf => {
            let data = ClassicalData::prepare(config.model_kind, &train, &train_slots, config.seed, config.max_vocab)
                .map_err(Error::in_stage("prepare-features"))?;
            let evals = evals.into_iter().map(|(y, s)| {
                let t = tokenize_slots(&s);
                (y, s, EvalInputs::Tokenized(t))
            });
            (PhaseData::Classical(data), evals.collect())
        }
        ModelKind::W2v => {
            let (sg, losses) = train_word_vectors(&train, &train_slots, &config.skipgram, config.max_vocab)
                .map_err(Error::in_stage("train-word-vectors"))?;
            log::info!("skip-gram epoch losses {losses:?}");
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            sg.write_vec(&dir.join("embeddings.vec"))?;
            let wv = WordVectors::from_model(&sg);
            let embedder = Embedder::W2v(&wv);
            let xs = embedder.embed(&train, Some(&train_slots))?;
            let data = EmbeddedData::new(ModelKind::W2v, &train, xs, Some("embeddings.vec".into()))?;
            let evals = evals
                .into_iter()
                .map(|(y, s)| embedder.embed(&s, None).map(|x| (y, s, EvalInputs::Embedded(x))))
                .collect::<Result<_>>()?;
            (PhaseData::Embedded(data), evals)
        }
        ModelKind::ImportedEmbedding => {
            let table = table.ok_or(Error::InvalidConfig("embedding table not loaded".into()))?;
            let embedder = Embedder::Table(table);
            let xs = embedder.embed(&train, None).map_err(Error::in_stage("embed-training-set"))?;
            let table_ref = config.paths.embedding_table.as_ref().map(|p| {
                std::path::absolute(p).unwrap_or_else(|_| p.clone()).display().to_string()
            });
            let data = EmbeddedData::new(ModelKind::ImportedEmbedding, &train, xs, table_ref)?;
            let evals = evals
                .into_iter()
                .map(|(y, s)| embedder.embed(&s, None).map(|x| (y, s, EvalInputs::Embedded(x))))
                .collect::<Result<_>>()
                .map_err(Error::in_stage("embed-eval-set"))?;
            (PhaseData::Embedded(data), evals)
        }
    };
    Ok(Phase { data, evals })
}

fn load_table(config: &ExperimentConfig) -> Result<Option<EmbeddingTable<f64>>> {
    match config.model_kind {
        ModelKind::ImportedEmbedding => {
            let p = config.paths.embedding_table.as_ref().ok_or(Error::InvalidConfig("paths.embedding_table".into()))?;
            Ok(Some(load_embedding_table::<f64>(p).map_err(Error::in_stage("load-embedding-table"))?))
        }
        _ => Ok(None),
    }
}

/// Phase one: every trial trained up to the tuning cutoff and scored on the
/// validation years. Writes `trials/<id>/` and `tuning/best.json`.
pub fn run_tuning(companies: &[Company], config: &ExperimentConfig) -> Result<(TrialResult, Vec<TrialResult>)> {
    let trials = config.validate()?;
    let out = &config.paths.out_dir;
    write_json(&out.join("experiment.json"), config)?;
    let table = load_table(config)?;
    let tuning = prepare_phase(companies, config, &config.split, &config.split.validation_years, &out.join("tuning"), table.as_ref())?;
    let (best, results) = tune(&trials, |id, a| {
        let dir = out.join(trial_dir_name(id));
        write_json(&dir.join("config.json"), a)?;
        let mut scorer = tuning.data.fit(config, a)?;
        if let Scorer::Embedding(s) = &mut scorer {
            if s.model_kind == ModelKind::W2v {
                s.vectors_ref = Some("../../tuning/embeddings.vec".into());
            }
        }
        scorer.save(&dir.join("model.json"))?;
        let mut per_year = Vec::new();
        for (year, set, inputs) in &tuning.evals {
            let preds = RankedPredictions::new(inputs.score(&scorer)?, set.iter().map(|i| i.label).collect())?;
            per_year.push(YearAuc { year: *year, auc: roc_auc(&preds)?, n: set.len() });
        }
        let objective = weighted_objective(&per_year)?;
        write_json(&dir.join("report.json"), &serde_json::json!({ "validation": per_year, "objective": objective }))?;
        log::info!("trial {id} {a:?}: objective {objective:.4}");
        Ok(per_year)
    })
    .map_err(Error::in_stage("tune"))?;
    let best_trial = results[best].clone();
    write_json(&out.join("tuning").join("best.json"), &best_trial)?;
    log::info!("best trial {best} with objective {:?}", best_trial.objective);
    Ok((best_trial, results))
}

/// Phase two: retrains `assignment` up to the final cutoff and evaluates
/// every test year. Writes `final/model.json` and `final/report_<year>.json`.
pub fn run_final(companies: &[Company], config: &ExperimentConfig, assignment: &Assignment) -> Result<(Scorer, Vec<YearReport>)> {
    config.validate()?;
    let table = load_table(config)?;
    let final_dir = config.paths.out_dir.join("final");
    let phase = prepare_phase(companies, config, &config.final_split(), &config.split.test_years, &final_dir, table.as_ref())?;
    let scorer = phase.data.fit(config, assignment).map_err(Error::in_stage("final-train"))?;
    scorer.save(&final_dir.join("model.json"))?;
    let mut test = Vec::new();
    for (year, set, inputs) in &phase.evals {
        check_temporal_split(scorer.trained_on(), set)?;
        let metrics = evaluate(inputs.score(&scorer)?, set, config.recall_k).map_err(Error::in_stage("evaluate"))?;
        write_json(&final_dir.join(format!("report_{year}.json")), &metrics)?;
        test.push(YearReport { year: *year, metrics });
    }
    Ok((scorer, test))
}

/// Runs both phases on an in-memory corpus and writes the artifact tree
/// under `config.paths.out_dir`, including `report.json` and `report.md`.
pub fn run_experiment_on(companies: &[Company], config: &ExperimentConfig) -> Result<ExperimentReport> {
    let (best_trial, trials) = run_tuning(companies, config)?;
    let (scorer, test) = run_final(companies, config, &best_trial.assignment)?;
    let selected_features = match &scorer {
        Scorer::Classical(s) => Some(s.selected_features()),
        Scorer::Embedding(_) => None,
    };
    let report = ExperimentReport {
        model_kind: config.model_kind,
        history_len: config.split.history_len,
        seed: config.seed,
        best_trial,
        trials,
        final_trained_on: scorer.trained_on().clone(),
        selected_features,
        test,
    };
    let out = &config.paths.out_dir;
    write_json(&out.join("report.json"), &report)?;
    fs::write(out.join("report.md"), render_markdown(std::slice::from_ref(&report)))
        .map_err(|e| Error::io(out.join("report.md"), e))?;
    Ok(report)
}

/// Metrics as rows, one column per experiment, each cell listing the test
/// years in order as `first (second ...)`.
pub fn render_markdown(reports: &[ExperimentReport]) -> String {
    let mut s = String::new();
    let header: Vec<String> = reports.iter().map(|r| format!("{} (H={})", r.model_kind.label(), r.history_len)).collect();
    let _ = writeln!(s, "| metric | {} |", header.join(" | "));
    let _ = writeln!(s, "|---|{}", "---|".repeat(reports.len()));
    let cell = |r: &ExperimentReport, f: &dyn Fn(&MetricsReport) -> f64| {
        let vals: Vec<String> = r.test.iter().map(|y| format!("{:.2}", f(&y.metrics))).collect();
        match vals.split_first() {
            Some((first, rest)) if !rest.is_empty() => format!("{first} ({})", rest.join(", ")),
            Some((first, _)) => first.clone(),
            None => "-".into(),
        }
    };
    let k = reports.first().and_then(|r| r.test.first()).map_or(DEFAULT_RECALL_K, |y| y.metrics.k);
    type Row = (String, Box<dyn Fn(&MetricsReport) -> f64>);
    let rows: Vec<Row> = {
        let mut rows: Vec<Row> = vec![
            ("AUC".into(), Box::new(|m: &MetricsReport| m.auc)),
            ("AP".into(), Box::new(|m: &MetricsReport| m.ap)),
            (format!("recall@{k}"), Box::new(|m: &MetricsReport| m.recall_at_k)),
            ("CAP".into(), Box::new(|m: &MetricsReport| m.cap_ratio)),
        ];
        for d in 0..5 {
            rows.push((format!("decile {}", d + 1), Box::new(move |m: &MetricsReport| m.cumulative_decile[d])));
        }
        rows
    };
    for (name, f) in &rows {
        let cells: Vec<String> = reports.iter().map(|r| cell(r, f.as_ref())).collect();
        let _ = writeln!(s, "| {name} | {} |", cells.join(" | "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(v: &[f64]) -> ParamDomain {
        ParamDomain::Values(v.to_vec())
    }

    #[test]
    fn grid_is_cross_product_in_key_order() {
        let mut space = HyperparameterSpace::new();
        space.insert("b".into(), values(&[1.0, 2.0]));
        space.insert("a".into(), values(&[10.0, 20.0, 30.0]));
        let t = enumerate_trials(&space, Search::Grid, 0).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t[0], Assignment::from([("a".into(), 10.0), ("b".into(), 1.0)]));
        assert_eq!(t[1], Assignment::from([("a".into(), 10.0), ("b".into(), 2.0)]));
    }

    #[test]
    fn empty_space_rejected() {
        assert!(enumerate_trials(&HyperparameterSpace::new(), Search::Grid, 0).is_err());
        let mut space = HyperparameterSpace::new();
        space.insert("C".into(), values(&[]));
        assert!(enumerate_trials(&space, Search::Grid, 0).is_err());
        let mut cfg = ExperimentConfig::new(ModelKind::Binary, 1, "unused");
        cfg.space.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn random_search_is_seeded_and_in_range() {
        let mut space = HyperparameterSpace::new();
        space.insert("lr".into(), ParamDomain::LogUniform { low: 1e-4, high: 1e-1 });
        space.insert("hidden".into(), ParamDomain::IntRange { low: 8, high: 64 });
        let a = enumerate_trials(&space, Search::Random { n_trials: 20 }, 5).unwrap();
        assert_eq!(a, enumerate_trials(&space, Search::Random { n_trials: 20 }, 5).unwrap());
        for t in &a {
            assert!((1e-4..=1e-1).contains(&t["lr"]));
            assert!((8.0..=64.0).contains(&t["hidden"]) && t["hidden"].fract() == 0.0);
        }
        assert!(enumerate_trials(&space, Search::Grid, 0).is_err());
    }

    #[test]
    fn binary_fixes_k() {
        let a = Assignment::from([("C".into(), 1.0)]);
        assert_eq!(ClassicalHyperparams::from_assignment(ModelKind::Binary, &a).unwrap().k, BINARY_K);
        let bad = Assignment::from([("C".into(), 1.0), ("k".into(), 50.0)]);
        assert!(ClassicalHyperparams::from_assignment(ModelKind::Binary, &bad).is_err());
        assert_eq!(ClassicalHyperparams::from_assignment(ModelKind::Tfidf, &bad).unwrap().k, 50);
        assert!(ClassicalHyperparams::from_assignment(ModelKind::Tfidf, &a).is_err());
    }

    #[test]
    fn single_point_grid_and_first_seen_ties() {
        let one = vec![Assignment::from([("C".into(), 1.0)])];
        let (best, _) = tune(&one, |_, _| Ok(vec![YearAuc { year: 2017, auc: 0.6, n: 10 }])).unwrap();
        assert_eq!(best, 0);
        let three: Vec<Assignment> = (0..3).map(|i| Assignment::from([("C".into(), i as f64)])).collect();
        let (best, _) = tune(&three, |id, _| Ok(vec![YearAuc { year: 2017, auc: if id == 0 { 0.5 } else { 0.7 }, n: 1 }])).unwrap();
        assert_eq!(best, 1);
    }

    #[test]
    fn all_failures_are_aggregated() {
        let two: Vec<Assignment> = (0..2).map(|i| Assignment::from([("C".into(), i as f64)])).collect();
        match tune(&two, |id, _| Err(Error::InvalidConfig(format!("boom {id}")))) {
            Err(Error::AllTrialsFailed(causes)) => {
                assert_eq!(causes.len(), 2);
                assert!(causes[1].contains("boom 1"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn objective_weights_by_count() {
        let single = [YearAuc { year: 2017, auc: 0.8, n: 40 }];
        assert_eq!(weighted_objective(&single).unwrap(), 0.8);
        let two = [YearAuc { year: 2017, auc: 0.8, n: 30 }, YearAuc { year: 2018, auc: 0.6, n: 10 }];
        assert!((weighted_objective(&two).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn holdout_is_stratified() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 10 == 0)).collect();
        let (fit, hold) = holdout_split(&labels, 0.1, 3);
        assert_eq!(fit.len() + hold.len(), 100);
        assert_eq!(hold.iter().filter(|&&r| labels[r] == 1).count(), 1);
        assert_eq!(hold.len(), 10);
        assert_eq!(holdout_split(&labels, 0.1, 3), (fit, hold));
    }

    #[test]
    fn final_cutoff_must_precede_tests() {
        let mut cfg = ExperimentConfig::new(ModelKind::Binary, 1, "unused");
        assert!(cfg.validate().is_ok());
        cfg.final_train_cutoff_year = 2019;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn imported_needs_table() {
        let cfg = ExperimentConfig::new(ModelKind::ImportedEmbedding, 3, "unused");
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn leakage_tag_check() {
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        let tag = DataTag { n_instances: 1, n_positive: 0, max_anchor: d("2015-06-01") };
        let inst = |start: &str| FirmYearInstance {
            company_id: "1".into(),
            year: 2017,
            window_start: d(start),
            window_end: d(start),
            label: 0,
            history: vec!["x".into()],
            imputed: false,
        };
        assert!(check_temporal_split(&tag, &[inst("2017-03-01")]).is_ok());
        assert!(matches!(check_temporal_split(&tag, &[inst("2015-06-01")]), Err(Error::Leakage(_))));
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(s.apply(&[2.0, 5.0]), vec![0.0, 0.0]);
        assert_eq!(s.apply(&[3.0, 6.0]), vec![1.0, 1.0]);
    }
}
