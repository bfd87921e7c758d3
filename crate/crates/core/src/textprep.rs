//! Document preprocessing and vocabulary construction for the bag-of-words
//! model paths.
//!
//! The pipeline is fixed: lowercase, split on non-alphanumeric characters,
//! drop single-character tokens, drop stopwords, drop numeric tokens,
//! lemmatize. The lemmatizer only emits fixed points of itself and its
//! output is filtered again, so `preprocess(join(preprocess(x))) ==
//! preprocess(x)`.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel text and token for a history slot without a report.
pub const MISSING: &str = "missing";
pub const UNK: &str = "_UNK_";
pub const DEFAULT_MAX_VOCAB: usize = 50_000;

const STOPWORDS_DATA: &str = include_str!("../data/stopwords.txt");
const LEMMA_DATA: &str = include_str!("../data/lemma_exceptions.tsv");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_DATA.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
}

fn exceptions() -> &'static HashMap<&'static str, &'static str> {
    static MAP: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    MAP.get_or_init(|| {
        LEMMA_DATA
            .lines()
            .filter_map(|l| l.split_once('\t'))
            .map(|(form, lemma)| (form.trim(), lemma.trim()))
            .collect()
    })
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub tokens: Vec<String>,
}

impl TokenizedDoc {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenizedDoc { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

fn is_vowel(b: u8) -> bool {
    matches!(b, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn is_consonant(b: u8) -> bool {
    b.is_ascii_lowercase() && !is_vowel(b)
}

/// Stem endings after which a dropped final `e` is restored
/// (`financ` -> `finance`). The flag marks endings that only qualify when
/// not preceded by a vowel (`treat` stays, `operat` -> `operate`).
const E_RESTORE: &[(&str, bool)] = &[
    ("at", true),
    ("bl", false),
    ("iz", false),
    ("yz", false),
    ("as", false),
    ("us", false),
    ("is", false),
    ("os", false),
    ("ns", false),
    ("rs", false),
    ("ps", false),
    ("nc", false),
    ("rc", false),
    ("ac", false),
    ("ic", false),
    ("rg", false),
    ("dg", false),
    ("uc", false),
    ("ag", false),
    ("ang", false),
    ("eng", false),
    ("ur", true),
    ("ir", true),
    ("ut", true),
    ("ot", true),
    ("iv", true),
    ("ov", true),
    ("ud", false),
    ("in", true),
    ("rv", false),
    ("lv", false),
    ("u", false),
];

fn restore_e(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    // Doubled final consonant: planned -> plan, incurred -> incur.
    if n >= 3 && b[n - 1] == b[n - 2] && is_consonant(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z') {
        return stem[..n - 1].to_string();
    }
    for &(end, needs_consonant_before) in E_RESTORE {
        if stem.ends_with(end) && n > end.len() {
            let before = b[n - end.len() - 1];
            if !needs_consonant_before || !is_vowel(before) {
                return format!("{stem}e");
            }
        }
    }
    // Short consonant-vowel-consonant stem: mak -> make, bas -> base.
    if n == 3 && is_consonant(b[0]) && is_vowel(b[1]) && is_consonant(b[2]) && !matches!(b[2], b'w' | b'x' | b'y') {
        return format!("{stem}e");
    }
    stem.to_string()
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|b| is_vowel(b) || b == b'y')
}

/// One rewrite step; returns the input unchanged at a fixed point.
fn lemma_step(word: &str) -> String {
    if let Some(lemma) = exceptions().get(word) {
        return (*lemma).to_string();
    }
    if !word.is_ascii() || word.bytes().any(|b| b.is_ascii_digit()) {
        return word.to_string();
    }
    let n = word.len();
    if n > 4 && word.ends_with("ies") {
        return format!("{}y", &word[..n - 3]);
    }
    if n > 4 && word.ends_with("ied") {
        return format!("{}y", &word[..n - 3]);
    }
    if n > 4 && (word.ends_with("sses") || word.ends_with("ches") || word.ends_with("shes") || word.ends_with("xes") || word.ends_with("zes")) {
        return word[..n - 2].to_string();
    }
    if n >= 4 && word.ends_with('s') && !(word.ends_with("ss") || word.ends_with("us") || word.ends_with("is")) {
        return word[..n - 1].to_string();
    }
    if n >= 6 && word.ends_with("ing") {
        let stem = &word[..n - 3];
        if has_vowel(stem) {
            return restore_e(stem);
        }
    }
    if n >= 5 && word.ends_with("ed") && !word.ends_with("eed") {
        let stem = &word[..n - 2];
        if has_vowel(stem) {
            return restore_e(stem);
        }
    }
    word.to_string()
}

/// Maps a lowercase token to its root form.
///
/// Irregular forms come from a bundled lookup table; everything else goes
/// through suffix rules (plural `s`/`es`/`ies`, `ing`/`ed` with doubled
/// consonant and final-`e` repair). Rules are applied until nothing changes.
pub fn lemmatize(word: &str) -> String {
    let mut current = word.to_string();
    // Every non-lookup rule shortens the word, so this terminates quickly.
    for _ in 0..16 {
        let next = lemma_step(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn keep_token(tok: &str) -> bool {
    tok.chars().count() >= 2 && !is_stopword(tok) && !tok.chars().all(char::is_numeric)
}

pub fn preprocess(text: &str) -> TokenizedDoc {
    let lower = text.to_lowercase();
    let tokens = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| keep_token(t))
        .map(lemmatize)
        .filter(|t| keep_token(t))
        .collect();
    TokenizedDoc { tokens }
}

/// Tokens of one history slot: the sentinel slot becomes the single
/// `missing` token, any other text is preprocessed.
pub fn slot_tokens(text: &str) -> TokenizedDoc {
    if text == MISSING {
        TokenizedDoc { tokens: vec![MISSING.to_string()] }
    } else {
        preprocess(text)
    }
}

/// Capped token inventory built from training documents only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    /// Training frequency per id; 0 for the specials.
    frequencies: Vec<u64>,
    max_size: usize,
    #[serde(skip)]
    token_to_id: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_parts(id_to_token: Vec<String>, frequencies: Vec<u64>, max_size: usize) -> Self {
        let token_to_id = id_to_token.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { id_to_token, frequencies, max_size, token_to_id }
    }

    /// Rebuilds the lookup map after deserialization.
    pub fn reindex(&mut self) {
        self.token_to_id = self.id_to_token.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn frequency(&self, id: usize) -> u64 {
        self.frequencies[id]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn unk_id(&self) -> usize {
        self.token_to_id[UNK]
    }

    pub fn missing_id(&self) -> usize {
        self.token_to_id[MISSING]
    }

    /// Ids of a vocabulary-mapped document; unknown tokens map to `_UNK_`.
    pub fn ids(&self, doc: &TokenizedDoc) -> Vec<usize> {
        let unk = self.unk_id();
        doc.tokens.iter().map(|t| self.id(t).unwrap_or(unk)).collect()
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(w, "#max_size={}\tspecials={},{}", self.max_size, UNK, MISSING).map_err(io)?;
        for (tok, freq) in self.id_to_token.iter().zip(&self.frequencies) {
            if tok == UNK || tok == MISSING {
                continue;
            }
            writeln!(w, "{tok}\t{freq}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let file = path.display().to_string();
        let malformed = |line: usize, msg: &str| Error::Malformed { file: file.clone(), line, msg: msg.to_string() };
        let mut lines = BufReader::new(f).lines();
        let header = lines.next().ok_or_else(|| malformed(1, "missing header"))?.map_err(|e| Error::io(path, e))?;
        let max_size = header
            .strip_prefix("#max_size=")
            .and_then(|rest| rest.split('\t').next())
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| malformed(1, "bad header"))?;
        let mut tokens = Vec::new();
        let mut freqs = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let (tok, freq) = line.split_once('\t').ok_or_else(|| malformed(i + 2, "expected token<TAB>frequency"))?;
            tokens.push(tok.to_string());
            freqs.push(freq.parse().map_err(|_| malformed(i + 2, "bad frequency"))?);
        }
        tokens.push(UNK.to_string());
        tokens.push(MISSING.to_string());
        freqs.extend([0, 0]);
        Ok(Vocabulary::from_parts(tokens, freqs, max_size))
    }
}

/// Keeps the `max_size` most frequent tokens (ties broken lexicographically)
/// and appends `_UNK_` and `missing`.
pub fn build_vocab<'a, I>(training_docs: I, max_size: usize) -> Vocabulary
where
    I: IntoIterator<Item = &'a TokenizedDoc>,
{
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in training_docs {
        for t in &doc.tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().filter(|(t, _)| *t != UNK && *t != MISSING).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size);
    let mut tokens: Vec<String> = ranked.iter().map(|(t, _)| t.to_string()).collect();
    let mut freqs: Vec<u64> = ranked.iter().map(|(_, c)| *c).collect();
    tokens.push(UNK.to_string());
    tokens.push(MISSING.to_string());
    freqs.extend([0, 0]);
    Vocabulary::from_parts(tokens, freqs, max_size)
}

/// Replaces out-of-vocabulary tokens by `_UNK_`, preserving order.
pub fn apply_vocab(doc: &TokenizedDoc, vocab: &Vocabulary) -> TokenizedDoc {
    TokenizedDoc {
        tokens: doc
            .tokens
            .iter()
            .map(|t| if vocab.contains(t) { t.clone() } else { UNK.to_string() })
            .collect(),
    }
}
