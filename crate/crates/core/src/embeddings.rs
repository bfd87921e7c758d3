//! Skip-gram word vectors with negative sampling, mean-pooled document
//! embeddings and the import path for externally computed document vectors.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};
use crate::textprep::{TokenizedDoc, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly towards `lr * 1e-4`.
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig { dim: 100, window: 5, negatives: 5, epochs: 5, lr: 0.025, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramModel<S> {
    dim: usize,
    /// Word ("input") vectors, row-major |V| x dim.
    input: Vec<S>,
    /// Context ("output") vectors, row-major |V| x dim.
    output: Vec<S>,
    pub vocab: Vocabulary,
}

impl<S: Scalar> SkipGramModel<S> {
    /// Inputs uniform in (-0.5/d, 0.5/d), outputs zero.
    pub fn initialize(vocab: Vocabulary, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f64;
        let input = (0..vocab.len() * dim).map(|_| S::lit(rng.random_range(-half..half))).collect();
        let output = vec![S::zero(); vocab.len() * dim];
        SkipGramModel { dim, input, output, vocab }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_vector(&self, id: usize) -> &[S] {
        &self.input[id * self.dim..(id + 1) * self.dim]
    }

    pub fn output_vector(&self, id: usize) -> &[S] {
        &self.output[id * self.dim..(id + 1) * self.dim]
    }

    pub fn input_vector_mut(&mut self, id: usize) -> &mut [S] {
        let d = self.dim;
        &mut self.input[id * d..(id + 1) * d]
    }

    pub fn output_vector_mut(&mut self, id: usize) -> &mut [S] {
        let d = self.dim;
        &mut self.output[id * d..(id + 1) * d]
    }

    pub fn vector(&self, token: &str) -> Option<&[S]> {
        self.vocab.id(token).map(|id| self.input_vector(id))
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (va, vb) = (self.vector(a)?, self.vector(b)?);
        Some(cosine(va, vb))
    }

    /// word2vec text format: "N d" header, then "token v1 ... vd".
    pub fn write_vec(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.vocab.len(), self.dim).map_err(io)?;
        for (id, tok) in self.vocab.tokens().iter().enumerate() {
            write!(w, "{tok}").map_err(io)?;
            for v in self.input_vector(id) {
                write!(w, " {v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Word vectors read back from the `.vec` text format; enough to embed
/// documents.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors<S> {
    pub dim: usize,
    pub index: std::collections::HashMap<String, usize>,
    pub vectors: Vec<Vec<S>>,
}

impl<S: Scalar> WordVectors<S> {
    pub fn from_model(model: &SkipGramModel<S>) -> Self {
        WordVectors {
            dim: model.dim,
            index: model.vocab.tokens().iter().enumerate().map(|(i, t)| (t.clone(), i)).collect(),
            vectors: (0..model.vocab.len()).map(|i| model.input_vector(i).to_vec()).collect(),
        }
    }

    pub fn read_vec(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let file = path.display().to_string();
        let bad = |line: usize, msg: &str| Error::Malformed { file: file.clone(), line, msg: msg.into() };
        let mut lines = BufReader::new(f).lines();
        let header = lines.next().ok_or_else(|| bad(1, "empty file"))?.map_err(|e| Error::io(path, e))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| bad(1, "bad header"))?;
        let dim: usize = parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| bad(1, "bad header"))?;
        let mut index = std::collections::HashMap::with_capacity(n);
        let mut vectors = Vec::with_capacity(n);
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut it = line.split(' ');
            let tok = it.next().ok_or_else(|| bad(k + 2, "empty row"))?;
            let v: Vec<S> = it
                .map(|x| x.parse::<f64>().map(S::lit))
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(k + 2, "bad number"))?;
            if v.len() != dim {
                return Err(bad(k + 2, "wrong vector length"));
            }
            index.insert(tok.to_string(), vectors.len());
            vectors.push(v);
        }
        if vectors.len() != n {
            return Err(bad(1, "row count differs from header"));
        }
        Ok(WordVectors { dim, index, vectors })
    }

    /// Mean vector over all token occurrences; unknown tokens use `_UNK_`
    /// when present and are skipped otherwise.
    pub fn embed(&self, doc: &TokenizedDoc) -> DocEmbedding<S> {
        let unk = self.index.get(crate::textprep::UNK).copied();
        let mut acc = vec![S::zero(); self.dim];
        let mut count = 0usize;
        for t in &doc.tokens {
            if let Some(id) = self.index.get(t).copied().or(unk) {
                for (a, &v) in acc.iter_mut().zip(&self.vectors[id]) {
                    *a = *a + v;
                }
                count += 1;
            }
        }
        if count > 0 {
            let n = S::lit(count as f64);
            acc.iter_mut().for_each(|a| *a = *a / n);
        }
        DocEmbedding { vector: acc, source: EmbeddingSource::TrainedW2v }
    }
}

pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    let (ab, aa, bb) = (dot(a, b).as_f64(), dot(a, a).as_f64(), dot(b, b).as_f64());
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// Gradient of one (center, context, negatives) loss term with respect to
/// the parameter rows it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient<S> {
    pub center: Vec<S>,
    pub context: Vec<S>,
    pub negatives: Vec<Vec<S>>,
}

/// `-log sigmoid(u_ctx . v_ctr) - sum_n log sigmoid(-u_n . v_ctr)` and its
/// gradient. Rows are treated as distinct parameters even if ids repeat.
pub fn pair_loss_and_grad<S: Scalar>(
    model: &SkipGramModel<S>,
    center: usize,
    context: usize,
    negatives: &[usize],
) -> (S, PairGradient<S>) {
    let v = model.input_vector(center);
    let u = model.output_vector(context);
    let z = dot(u, v);
    let mut loss = -z.log_sigmoid();
    let gpos = z.sigmoid() - S::one();
    let mut g_center: Vec<S> = u.iter().map(|&x| gpos * x).collect();
    let g_context = v.iter().map(|&x| gpos * x).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for &n in negatives {
        let un = model.output_vector(n);
        let zn = dot(un, v);
        loss = loss - (-zn).log_sigmoid();
        let gn = zn.sigmoid();
        for (g, &x) in g_center.iter_mut().zip(un) {
            *g = *g + gn * x;
        }
        g_negs.push(v.iter().map(|&x| gn * x).collect());
    }
    (loss, PairGradient { center: g_center, context: g_context, negatives: g_negs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramTrace {
    /// Mean pair loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains skip-gram vectors on vocabulary-mapped documents.
///
/// Every (center, context) pair within `window` positions is one SGD step
/// on the negative-sampling objective with `negatives` draws from the
/// unigram^0.75 distribution. Sequential and deterministic for a given seed.
pub fn train_skipgram<S: Scalar>(
    docs: &[TokenizedDoc],
    vocab: &Vocabulary,
    config: &SkipGramConfig,
) -> Result<(SkipGramModel<S>, SkipGramTrace)> {
    if config.dim == 0 || config.window == 0 {
        return Err(Error::InvalidConfig("dim and window must be positive".into()));
    }
    let id_docs: Vec<Vec<usize>> = docs.iter().map(|d| vocab.ids(d)).filter(|d| d.len() > 1).collect();
    let total_tokens: usize = id_docs.iter().map(Vec::len).sum();
    if total_tokens == 0 {
        return Err(Error::Empty("skip-gram corpus"));
    }
    let mut counts = vec![0u64; vocab.len()];
    for d in &id_docs {
        for &t in d {
            counts[t] += 1;
        }
    }
    let noise = WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;

    let mut model = SkipGramModel::<S>::initialize(vocab.clone(), config.dim, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let d = config.dim;
    let planned = (total_tokens * config.epochs).max(1) as f64;
    let min_lr = config.lr * 1e-4;
    let mut processed = 0usize;
    let mut grad_center = vec![S::zero(); d];
    let mut center_vec = vec![S::zero(); d];
    let mut targets: Vec<(usize, S)> = Vec::with_capacity(config.negatives + 1);
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut pairs = 0usize;
        for doc in &id_docs {
            for (i, &center) in doc.iter().enumerate() {
                let lr = S::lit((config.lr * (1.0 - processed as f64 / planned)).max(min_lr));
                processed += 1;
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window).min(doc.len() - 1);
                for (j, &context) in doc.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    targets.clear();
                    targets.push((context, S::one()));
                    for _ in 0..config.negatives {
                        let n = noise.sample(&mut rng);
                        if n != context {
                            targets.push((n, S::zero()));
                        }
                    }
                    center_vec.copy_from_slice(model.input_vector(center));
                    grad_center.iter_mut().for_each(|g| *g = S::zero());
                    let mut pair_loss = S::zero();
                    for &(t, label) in &targets {
                        let u = model.output_vector_mut(t);
                        let z = dot(u, &center_vec);
                        pair_loss = pair_loss - if label == S::one() { z.log_sigmoid() } else { (-z).log_sigmoid() };
                        let g = (label - z.sigmoid()) * lr;
                        for k in 0..d {
                            grad_center[k] = grad_center[k] + g * u[k];
                            u[k] = u[k] + g * center_vec[k];
                        }
                    }
                    let v = model.input_vector_mut(center);
                    for k in 0..d {
                        v[k] = v[k] + grad_center[k];
                    }
                    loss_sum += pair_loss.as_f64();
                    pairs += 1;
                }
            }
        }
        let mean = loss_sum / pairs.max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite { context: "skip-gram loss", iteration: epoch_losses.len() });
        }
        epoch_losses.push(mean);
    }
    Ok((model, SkipGramTrace { epoch_losses }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    TrainedW2v,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocEmbedding<S> {
    pub vector: Vec<S>,
    pub source: EmbeddingSource,
}

/// Mean input vector over all token occurrences; empty documents map to the
/// zero vector.
pub fn embed_doc<S: Scalar>(doc: &TokenizedDoc, model: &SkipGramModel<S>) -> DocEmbedding<S> {
    let mut acc = vec![S::zero(); model.dim];
    let ids = model.vocab.ids(doc);
    for &id in &ids {
        for (a, &v) in acc.iter_mut().zip(model.input_vector(id)) {
            *a = *a + v;
        }
    }
    if !ids.is_empty() {
        let n = S::lit(ids.len() as f64);
        acc.iter_mut().for_each(|a| *a = *a / n);
    }
    DocEmbedding { vector: acc, source: EmbeddingSource::TrainedW2v }
}

/// Concatenates history embeddings oldest first.
pub fn concat_history<S: Scalar>(embeddings: &[DocEmbedding<S>]) -> Result<Vec<S>> {
    let d = embeddings.first().map(|e| e.vector.len()).ok_or(Error::Empty("history embeddings"))?;
    let mut out = Vec::with_capacity(d * embeddings.len());
    for e in embeddings {
        if e.vector.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: e.vector.len() });
        }
        out.extend_from_slice(&e.vector);
    }
    Ok(out)
}

/// Document vectors keyed by "cik:year:slot".
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<S> {
    pub dim: usize,
    pub entries: BTreeMap<String, DocEmbedding<S>>,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn get(&self, key: &str) -> Option<&DocEmbedding<S>> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads `doc_embeddings.tsv`: header `dim=<d>`, then
/// `doc_key<TAB>v1<TAB>...<TAB>vd`. Row numbers in errors are 1-based
/// file lines.
pub fn load_embedding_table<S: Scalar>(path: &Path) -> Result<EmbeddingTable<S>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embedding_table(BufReader::new(f))
}

pub fn parse_embedding_table<S: Scalar, R: BufRead>(reader: R) -> Result<EmbeddingTable<S>> {
    let bad = |row: usize, msg: String| Error::EmbeddingTable { row, msg };
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| bad(1, e.to_string()))?,
        None => return Err(bad(1, "missing header".into())),
    };
    let dim: usize = header
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| bad(1, format!("expected `dim=<d>`, got `{header}`")))?;
    let mut entries = BTreeMap::new();
    for (k, line) in lines.enumerate() {
        let row = k + 2;
        let line = line.map_err(|e| bad(row, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let key = fields.next().unwrap_or_default().to_string();
        let mut vector = Vec::with_capacity(dim);
        for x in fields {
            let v: f64 = x.trim().parse().map_err(|_| bad(row, format!("unparsable value `{x}`")))?;
            if !v.is_finite() {
                return Err(bad(row, "non-finite value".into()));
            }
            vector.push(S::lit(v));
        }
        if vector.len() != dim {
            return Err(bad(row, format!("{} values under header dim={dim}", vector.len())));
        }
        if entries.contains_key(&key) {
            return Err(bad(row, format!("duplicate key `{key}`")));
        }
        entries.insert(key, DocEmbedding { vector, source: EmbeddingSource::Imported });
    }
    Ok(EmbeddingTable { dim, entries })
}

pub fn write_embedding_table<S: Scalar>(path: &Path, table: &EmbeddingTable<S>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "dim={}", table.dim).map_err(io)?;
    for (key, e) in &table.entries {
        write!(w, "{key}").map_err(io)?;
        for v in &e.vector {
            write!(w, "\t{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
