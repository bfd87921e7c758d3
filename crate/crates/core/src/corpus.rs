//! Raw corpus records, JSONL ingestion and the synthetic corpus generator.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep;

/// One annual report, reduced to its MD&A text and the two dates that
/// characterise it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    #[serde(rename = "cik")]
    pub company_id: String,
    /// Fiscal period end (t_PR).
    #[serde(rename = "period_of_report")]
    pub period_end: NaiveDate,
    /// Date the report was filed with the SEC (t_FD).
    pub filing_date: NaiveDate,
    #[serde(rename = "mdna")]
    pub mdna_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Chapter {
    Seven,
    Eleven,
}

impl TryFrom<u8> for Chapter {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            7 => Ok(Chapter::Seven),
            11 => Ok(Chapter::Eleven),
            other => Err(format!("unsupported bankruptcy chapter {other}")),
        }
    }
}

impl From<Chapter> for u8 {
    fn from(c: Chapter) -> u8 {
        match c {
            Chapter::Seven => 7,
            Chapter::Eleven => 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankruptcyFiling {
    #[serde(rename = "cik")]
    pub company_id: String,
    pub filing_date: NaiveDate,
    pub chapter: Chapter,
}

/// A company with its reports ordered by filing date.
///
/// Every report is filed strictly before the bankruptcy filing, if any, and
/// no two reports fall in the same calendar year.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Company {
    pub company_id: String,
    pub reports: Vec<Report>,
    pub bankruptcy: Option<BankruptcyFiling>,
}

impl Company {
    /// Report filed in calendar `year`, if any.
    pub fn report_in_year(&self, year: i32) -> Option<&Report> {
        self.reports.iter().find(|r| r.filing_date.year() == year)
    }

    /// Latest report filed on or before `date`.
    pub fn latest_report_until(&self, date: NaiveDate) -> Option<&Report> {
        self.reports.iter().rev().find(|r| r.filing_date <= date)
    }

    pub fn first_year(&self) -> Option<i32> {
        self.reports.first().map(|r| r.filing_date.year())
    }

    pub fn bankruptcy_date(&self) -> Option<NaiveDate> {
        self.bankruptcy.as_ref().map(|b| b.filing_date)
    }

    /// Copy of the company restricted to reports filed on or before `date`.
    pub fn truncated(&self, date: NaiveDate) -> Company {
        Company {
            company_id: self.company_id.clone(),
            reports: self.reports.iter().filter(|r| r.filing_date <= date).cloned().collect(),
            bankruptcy: self.bankruptcy.clone(),
        }
    }
}

/// Counters for records that were dropped or altered during ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadWarnings {
    /// Reports filed on or after the company's bankruptcy filing.
    pub dropped_after_bankruptcy: usize,
    /// Reports whose filing date precedes their period end.
    pub rejected_date_order: usize,
    /// Additional bankruptcy filings for an already-seen key (earliest kept).
    pub duplicate_bankruptcies: usize,
    /// Additional reports in an already-covered calendar year (earliest kept).
    pub same_year_duplicates: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub companies: Vec<Company>,
    pub warnings: LoadWarnings,
}

pub fn load_corpus(reports_path: &Path, bankruptcies_path: &Path) -> Result<LoadedCorpus> {
    let open = |p: &Path| File::open(p).map(BufReader::new).map_err(|e| Error::io(p, e));
    parse_corpus(
        open(reports_path)?,
        &reports_path.display().to_string(),
        open(bankruptcies_path)?,
        &bankruptcies_path.display().to_string(),
    )
}

fn parse_lines<T, R>(reader: R, file: &str) -> Result<Vec<(usize, T)>>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(file, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            file: file.to_string(),
            line: line_no,
            msg: e.to_string(),
        })?;
        out.push((line_no, rec));
    }
    Ok(out)
}

/// Parses both JSONL streams and joins them by company key.
pub fn parse_corpus<R1: BufRead, R2: BufRead>(
    reports: R1,
    reports_name: &str,
    bankruptcies: R2,
    bankruptcies_name: &str,
) -> Result<LoadedCorpus> {
    let mut warnings = LoadWarnings::default();

    let mut filings: BTreeMap<String, BankruptcyFiling> = BTreeMap::new();
    for (_, b) in parse_lines::<BankruptcyFiling, _>(bankruptcies, bankruptcies_name)? {
        match filings.get(&b.company_id) {
            Some(existing) => {
                warnings.duplicate_bankruptcies += 1;
                if b.filing_date < existing.filing_date {
                    filings.insert(b.company_id.clone(), b);
                }
            }
            None => {
                filings.insert(b.company_id.clone(), b);
            }
        }
    }

    let mut by_company: BTreeMap<String, Vec<Report>> = BTreeMap::new();
    let mut seen: HashSet<(String, NaiveDate)> = HashSet::new();
    for (line, r) in parse_lines::<Report, _>(reports, reports_name)? {
        if r.filing_date < r.period_end {
            warn!("{reports_name}:{line}: filing date precedes period end, record rejected");
            warnings.rejected_date_order += 1;
            continue;
        }
        if !seen.insert((r.company_id.clone(), r.filing_date)) {
            return Err(Error::DuplicateReport {
                company_id: r.company_id,
                filing_date: r.filing_date.to_string(),
            });
        }
        by_company.entry(r.company_id.clone()).or_default().push(r);
    }

    let mut companies = Vec::with_capacity(by_company.len());
    for (company_id, mut reports) in by_company {
        reports.sort_by_key(|r| r.filing_date);
        let bankruptcy = filings.get(&company_id).cloned();
        if let Some(b) = &bankruptcy {
            let before = reports.len();
            reports.retain(|r| r.filing_date < b.filing_date);
            warnings.dropped_after_bankruptcy += before - reports.len();
        }
        let mut years = BTreeSet::new();
        let before = reports.len();
        reports.retain(|r| years.insert(r.filing_date.year()));
        warnings.same_year_duplicates += before - reports.len();
        if reports.is_empty() {
            continue;
        }
        companies.push(Company { company_id, reports, bankruptcy });
    }
    if warnings != LoadWarnings::default() {
        warn!("corpus ingestion warnings: {warnings:?}");
    }
    Ok(LoadedCorpus { companies, warnings })
}

/// Writes the two JSONL files read by [`load_corpus`].
pub fn write_corpus(companies: &[Company], reports_path: &Path, bankruptcies_path: &Path) -> Result<()> {
    let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e));
    let mut rw = create(reports_path)?;
    let mut bw = create(bankruptcies_path)?;
    for c in companies {
        for r in &c.reports {
            serde_json::to_writer(&mut rw, r)?;
            rw.write_all(b"\n").map_err(|e| Error::io(reports_path, e))?;
        }
        if let Some(b) = &c.bankruptcy {
            serde_json::to_writer(&mut bw, b)?;
            bw.write_all(b"\n").map_err(|e| Error::io(bankruptcies_path, e))?;
        }
    }
    rw.flush().map_err(|e| Error::io(reports_path, e))?;
    bw.flush().map_err(|e| Error::io(bankruptcies_path, e))?;
    Ok(())
}

/// Probabilities of the three ways reports go missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingMechanisms {
    /// Per firm-year probability that a healthy firm stops reporting for good.
    pub permanent_stop: f64,
    /// Per firm-year probability of a single skipped report.
    pub random_gap: f64,
    /// Probability that a firm heading into bankruptcy skips its final report.
    pub pre_bankruptcy_silence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_companies: usize,
    /// Inclusive range of filing years.
    pub year_range: (i32, i32),
    pub base_bankruptcy_rate: f64,
    pub distress_lexicon: Vec<String>,
    pub distress_injection_rate: f64,
    pub missing_mechanisms: MissingMechanisms,
    pub doc_length_mean: f64,
    pub doc_length_std: f64,
    pub rng_seed: u64,
    #[serde(default = "default_background_vocab")]
    pub background_vocab_size: usize,
    #[serde(default = "default_zipf_exponent")]
    pub zipf_exponent: f64,
    /// Share of firms already present in the first year.
    #[serde(default = "default_initial_fraction")]
    pub initial_fraction: f64,
}

fn default_background_vocab() -> usize {
    30_000
}
fn default_zipf_exponent() -> f64 {
    1.0
}
fn default_initial_fraction() -> f64 {
    0.6
}

/// Distress terms planted in the last reports before a bankruptcy. All of
/// them are already in lemma form.
pub const DEFAULT_DISTRESS_LEXICON: [&str; 20] = [
    "waiver",
    "default",
    "covenant",
    "forbearance",
    "bankruptcy",
    "insolvency",
    "liquidity",
    "impairment",
    "delist",
    "restructure",
    "severance",
    "chapter",
    "creditor",
    "foreclosure",
    "receivership",
    "distress",
    "doubt",
    "lender",
    "deficiency",
    "arrearage",
];

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_companies: 2_000,
            year_range: (2009, 2020),
            base_bankruptcy_rate: 0.005,
            distress_lexicon: DEFAULT_DISTRESS_LEXICON.iter().map(|s| s.to_string()).collect(),
            distress_injection_rate: 0.9,
            missing_mechanisms: MissingMechanisms {
                permanent_stop: 0.02,
                random_gap: 0.05,
                pre_bankruptcy_silence: 0.2,
            },
            doc_length_mean: 300.0,
            doc_length_std: 60.0,
            rng_seed: 7,
            background_vocab_size: default_background_vocab(),
            zipf_exponent: default_zipf_exponent(),
            initial_fraction: default_initial_fraction(),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_companies == 0 {
            return bad("n_companies must be positive".into());
        }
        if self.distress_lexicon.is_empty() {
            return bad("distress_lexicon is empty".into());
        }
        if self.background_vocab_size == 0 {
            return bad("background_vocab_size must be positive".into());
        }
        let (lo, hi) = self.year_range;
        if hi - lo + 1 < 6 {
            return bad(format!("year_range {lo}..={hi} spans fewer than 6 years"));
        }
        let mm = &self.missing_mechanisms;
        for (name, p) in [
            ("base_bankruptcy_rate", self.base_bankruptcy_rate),
            ("distress_injection_rate", self.distress_injection_rate),
            ("permanent_stop", mm.permanent_stop),
            ("random_gap", mm.random_gap),
            ("pre_bankruptcy_silence", mm.pre_bankruptcy_silence),
            ("initial_fraction", self.initial_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !(self.doc_length_mean > 0.0) || !(self.doc_length_std >= 0.0) {
            return bad("document length mean must be positive and std non-negative".into());
        }
        if !(self.zipf_exponent > 0.0) {
            return bad("zipf_exponent must be positive".into());
        }
        Ok(())
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aeiou";

/// Deterministic list of pronounceable pseudo-words used as background
/// vocabulary. Each word survives preprocessing unchanged.
pub fn background_vocabulary(size: usize, exclude: &[String]) -> Vec<String> {
    let syllables: Vec<[u8; 2]> = CONSONANTS
        .iter()
        .flat_map(|&c| VOWELS.iter().map(move |&v| [c, v]))
        .collect();
    let excluded: HashSet<&str> = exclude.iter().map(String::as_str).collect();
    let mut out = Vec::with_capacity(size);
    let mut n_syll = 2u32;
    let mut idx = 0usize;
    while out.len() < size {
        let combos = syllables.len().pow(n_syll);
        if idx >= combos {
            n_syll += 1;
            idx = 0;
            continue;
        }
        let mut rest = idx;
        let mut word = String::with_capacity(2 * n_syll as usize);
        for _ in 0..n_syll {
            let s = syllables[rest % syllables.len()];
            rest /= syllables.len();
            word.push(s[0] as char);
            word.push(s[1] as char);
        }
        idx += 1;
        if excluded.contains(word.as_str()) || textprep::preprocess(&word).tokens != [word.as_str()] {
            continue;
        }
        out.push(word);
    }
    out
}

struct TextSampler {
    vocab: Vec<String>,
    zipf: Zipf<f64>,
    length: Normal<f64>,
}

impl TextSampler {
    fn word<R: Rng>(&self, rng: &mut R) -> &str {
        let rank = self.zipf.sample(rng) as usize;
        &self.vocab[rank.clamp(1, self.vocab.len()) - 1]
    }

    fn sentence<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word(rng).to_string()).collect()
    }

    fn document<R: Rng>(&self, rng: &mut R, distress: Option<&[String]>) -> String {
        let target = self.length.sample(rng).round().max(5.0) as usize;
        let mut sentences = Vec::new();
        let mut produced = 0;
        while produced < target {
            let n = rng.random_range(8..=16).min(target - produced);
            sentences.push(self.sentence(rng, n));
            produced += n;
        }
        if let Some(lexicon) = distress {
            let planted: Vec<String> = (0..8)
                .map(|_| lexicon[rng.random_range(0..lexicon.len())].clone())
                .collect();
            let at = rng.random_range(0..=sentences.len());
            sentences.insert(at, planted);
        }
        let mut text = String::new();
        for s in sentences {
            if !text.is_empty() {
                text.push(' ');
            }
            for (i, w) in s.iter().enumerate() {
                if i == 0 {
                    let mut chars = w.chars();
                    if let Some(f) = chars.next() {
                        text.extend(f.to_uppercase());
                        text.push_str(chars.as_str());
                    }
                } else {
                    text.push(' ');
                    text.push_str(w);
                }
            }
            text.push('.');
        }
        text
    }
}

/// Generates a corpus with planted distress vocabulary before bankruptcies.
///
/// Each firm files once per year (period end Dec 31 of the previous year,
/// filing on a fixed firm-specific day between February and April). Per
/// firm-year a bankruptcy occurs with `base_bankruptcy_rate` and is dated
/// inside the one-year window following that year's filing day. The last
/// report before a bankruptcy receives a sentence of distress terms with
/// probability `distress_injection_rate`, the report before it with half that
/// probability.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<Company>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let vocab = background_vocabulary(config.background_vocab_size, &config.distress_lexicon);
    let sampler = TextSampler {
        zipf: Zipf::new(vocab.len() as f64, config.zipf_exponent)
            .map_err(|e| Error::InvalidConfig(format!("zipf: {e}")))?,
        length: Normal::new(config.doc_length_mean, config.doc_length_std)
            .map_err(|e| Error::InvalidConfig(format!("document length: {e}")))?,
        vocab,
    };
    let (first_year, last_year) = config.year_range;
    let mm = &config.missing_mechanisms;
    let width = config.n_companies.to_string().len().max(7);

    let mut companies = Vec::with_capacity(config.n_companies);
    for idx in 0..config.n_companies {
        let company_id = format!("{:0width$}", idx + 1);
        let entry_year = if rng.random::<f64>() < config.initial_fraction {
            first_year
        } else {
            rng.random_range(first_year + 1..=last_year)
        };
        let month = rng.random_range(2..=4u32);
        let day = rng.random_range(1..=28u32);

        // (year, filed) pairs plus the bankruptcy date, if one occurs.
        let mut years: Vec<(i32, bool)> = Vec::new();
        let mut bankruptcy = None;
        for year in entry_year..=last_year {
            let filing = NaiveDate::from_ymd_opt(year, month, day).expect("valid day");
            if rng.random::<f64>() < config.base_bankruptcy_rate {
                let silent = year > entry_year && rng.random::<f64>() < mm.pre_bankruptcy_silence;
                years.push((year, !silent));
                let offset = rng.random_range(1..365);
                bankruptcy = Some(filing + Duration::days(offset));
                break;
            }
            if year > entry_year && rng.random::<f64>() < mm.permanent_stop {
                break;
            }
            let gap = year > entry_year && rng.random::<f64>() < mm.random_gap;
            years.push((year, !gap));
        }

        let filed: Vec<i32> = years.iter().filter(|(_, f)| *f).map(|(y, _)| *y).collect();
        let mut reports = Vec::with_capacity(filed.len());
        for (pos, &year) in filed.iter().enumerate() {
            let from_end = filed.len() - pos;
            let p_inject = match (bankruptcy.is_some(), from_end) {
                (true, 1) => config.distress_injection_rate,
                (true, 2) => config.distress_injection_rate / 2.0,
                _ => 0.0,
            };
            let inject = p_inject > 0.0 && rng.random::<f64>() < p_inject;
            let text = sampler.document(&mut rng, inject.then_some(config.distress_lexicon.as_slice()));
            reports.push(Report {
                company_id: company_id.clone(),
                period_end: NaiveDate::from_ymd_opt(year - 1, 12, 31).expect("valid day"),
                filing_date: NaiveDate::from_ymd_opt(year, month, day).expect("valid day"),
                mdna_text: text,
            });
        }
        if reports.is_empty() {
            // The firm went bankrupt in its first observed year without filing;
            // it never appears in the report corpus.
            continue;
        }
        let bankruptcy = bankruptcy.map(|filing_date| BankruptcyFiling {
            company_id: company_id.clone(),
            filing_date,
            chapter: if rng.random::<f64>() < 0.8 { Chapter::Eleven } else { Chapter::Seven },
        });
        companies.push(Company { company_id, reports, bankruptcy });
    }
    Ok(companies)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (0 for fewer than two values).
    pub fn of(values: &[f64]) -> MeanStd {
        if values.is_empty() {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct YearCounts {
    pub reports: usize,
    pub bankruptcies: usize,
    pub new_firms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub per_year: BTreeMap<i32, YearCounts>,
    pub reports_per_year: MeanStd,
    pub bankruptcies_per_year: MeanStd,
    pub new_firms_per_year: MeanStd,
    /// Whitespace-delimited tokens per MD&A text.
    pub doc_length: MeanStd,
    pub n_companies: usize,
    pub n_reports: usize,
}

pub fn corpus_stats(companies: &[Company]) -> CorpusStats {
    let mut per_year: BTreeMap<i32, YearCounts> = BTreeMap::new();
    let mut lengths = Vec::new();
    for c in companies {
        if let Some(y) = c.first_year() {
            per_year.entry(y).or_default().new_firms += 1;
        }
        for r in &c.reports {
            per_year.entry(r.filing_date.year()).or_default().reports += 1;
            lengths.push(r.mdna_text.split_whitespace().count() as f64);
        }
        if let Some(d) = c.bankruptcy_date() {
            per_year.entry(d.year()).or_default().bankruptcies += 1;
        }
    }
    // Years without any record inside the observed span still count as zeros.
    if let (Some(&lo), Some(&hi)) = (per_year.keys().next(), per_year.keys().next_back()) {
        for y in lo..=hi {
            per_year.entry(y).or_default();
        }
    }
    let column = |f: fn(&YearCounts) -> usize| -> Vec<f64> { per_year.values().map(|c| f(c) as f64).collect() };
    CorpusStats {
        reports_per_year: MeanStd::of(&column(|c| c.reports)),
        bankruptcies_per_year: MeanStd::of(&column(|c| c.bankruptcies)),
        new_firms_per_year: MeanStd::of(&column(|c| c.new_firms)),
        doc_length: MeanStd::of(&lengths),
        n_companies: companies.len(),
        n_reports: lengths.len(),
        per_year,
    }
}

impl std::fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<6} {:>8} {:>13} {:>10}", "year", "reports", "bankruptcies", "new firms")?;
        for (y, c) in &self.per_year {
            writeln!(f, "{:<6} {:>8} {:>13} {:>10}", y, c.reports, c.bankruptcies, c.new_firms)?;
        }
        let row = |m: &MeanStd| format!("{:.1} ± {:.1}", m.mean, m.std);
        writeln!(f, "avg. reports per year        {}", row(&self.reports_per_year))?;
        writeln!(f, "avg. bankruptcies per year   {}", row(&self.bankruptcies_per_year))?;
        writeln!(f, "avg. new enterprises per year {}", row(&self.new_firms_per_year))?;
        write!(f, "avg. doc. length (# tokens)  {}", row(&self.doc_length))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn parse(reports: &str, bankruptcies: &str) -> Result<LoadedCorpus> {
        parse_corpus(reports.as_bytes(), "reports", bankruptcies.as_bytes(), "bankruptcies")
    }

    #[test]
    fn joins_reports_and_filings() {
        let reports = r#"{"cik":"0001","period_of_report":"2015-12-31","filing_date":"2016-03-01","mdna":"a"}
{"cik":"0001","period_of_report":"2016-12-31","filing_date":"2017-03-01","mdna":"b"}
"#;
        let bk = r#"{"cik":"0001","filing_date":"2017-09-01","chapter":11}"#;
        let c = parse(reports, bk).unwrap();
        assert_eq!(c.companies.len(), 1);
        assert_eq!(c.companies[0].reports.len(), 2);
        assert_eq!(c.companies[0].bankruptcy.as_ref().unwrap().chapter, Chapter::Eleven);
        assert_eq!(c.warnings, LoadWarnings::default());
    }

    #[test]
    fn empty_bankruptcy_file_leaves_everyone_solvent() {
        let reports = r#"{"cik":"0001","period_of_report":"2015-12-31","filing_date":"2016-03-01","mdna":"a"}
{"cik":"0002","period_of_report":"2015-12-31","filing_date":"2016-03-01","mdna":"b"}"#;
        let c = parse(reports, "").unwrap();
        assert_eq!(c.companies.len(), 2);
        assert!(c.companies.iter().all(|c| c.bankruptcy.is_none()));
    }

    #[test]
    fn report_after_bankruptcy_is_dropped() {
        let reports = r#"{"cik":"0001","period_of_report":"2015-12-31","filing_date":"2016-03-01","mdna":"a"}
{"cik":"0001","period_of_report":"2016-12-31","filing_date":"2017-03-01","mdna":"b"}
"#;
        let bk = r#"{"cik":"0001","filing_date":"2017-01-15","chapter":7}"#;
        let c = parse(reports, bk).unwrap();
        assert_eq!(c.warnings.dropped_after_bankruptcy, 1);
        assert_eq!(c.companies[0].reports.len(), 1);
        assert_eq!(c.companies[0].reports[0].filing_date, d("2016-03-01"));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let reports = "{\"cik\":\"1\",\"period_of_report\":\"2015-12-31\",\"filing_date\":\"2016-03-01\",\"mdna\":\"\"}\n{oops\n";
        match parse(reports, "") {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_report_is_an_error() {
        let line = r#"{"cik":"1","period_of_report":"2015-12-31","filing_date":"2016-03-01","mdna":""}"#;
        let reports = format!("{line}\n{line}\n");
        assert!(matches!(parse(&reports, ""), Err(Error::DuplicateReport { .. })));
    }

    #[test]
    fn filing_before_period_end_is_rejected() {
        let reports = r#"{"cik":"1","period_of_report":"2016-12-31","filing_date":"2016-03-01","mdna":""}"#;
        let c = parse(reports, "").unwrap();
        assert_eq!(c.warnings.rejected_date_order, 1);
        assert!(c.companies.is_empty());
    }

    #[test]
    fn earliest_bankruptcy_wins() {
        let reports = r#"{"cik":"1","period_of_report":"2015-12-31","filing_date":"2016-03-01","mdna":""}"#;
        let bk = "{\"cik\":\"1\",\"filing_date\":\"2018-01-01\",\"chapter\":11}\n{\"cik\":\"1\",\"filing_date\":\"2017-01-01\",\"chapter\":7}\n";
        let c = parse(reports, bk).unwrap();
        assert_eq!(c.warnings.duplicate_bankruptcies, 1);
        assert_eq!(c.companies[0].bankruptcy_date(), Some(d("2017-01-01")));
    }

    #[test]
    fn same_year_amendment_keeps_earliest() {
        let reports = r#"{"cik":"1","period_of_report":"2015-12-31","filing_date":"2016-03-01","mdna":"first"}
{"cik":"1","period_of_report":"2015-12-31","filing_date":"2016-06-01","mdna":"amended"}"#;
        let c = parse(reports, "").unwrap();
        assert_eq!(c.warnings.same_year_duplicates, 1);
        assert_eq!(c.companies[0].reports[0].mdna_text, "first");
    }

    #[test]
    fn cik_zero_padding_is_preserved() {
        let reports = r#"{"cik":"0000320193","period_of_report":"2015-12-31","filing_date":"2016-03-01","mdna":""}"#;
        let c = parse(reports, "").unwrap();
        assert_eq!(c.companies[0].company_id, "0000320193");
    }

    #[test]
    fn invalid_chapter_is_malformed() {
        let bk = r#"{"cik":"1","filing_date":"2018-01-01","chapter":13}"#;
        assert!(matches!(parse("", bk), Err(Error::Malformed { line: 1, .. })));
    }

    #[test]
    fn stats_single_report() {
        let c = Company {
            company_id: "1".into(),
            reports: vec![Report {
                company_id: "1".into(),
                period_end: d("2015-12-31"),
                filing_date: d("2016-03-01"),
                mdna_text: "one two three four five six seven eight nine ten".into(),
            }],
            bankruptcy: None,
        };
        let s = corpus_stats(&[c]);
        assert_eq!(s.doc_length, MeanStd { mean: 10.0, std: 0.0 });
        assert_eq!(s.per_year[&2016].reports, 1);
        assert_eq!(s.per_year[&2016].new_firms, 1);
    }

    #[test]
    fn degenerate_configs_rejected() {
        let mut c = SyntheticConfig { n_companies: 0, ..Default::default() };
        assert!(generate_synthetic(&c).is_err());
        c.n_companies = 10;
        c.distress_lexicon.clear();
        assert!(generate_synthetic(&c).is_err());
        let c = SyntheticConfig { year_range: (2010, 2014), ..Default::default() };
        assert!(c.validate().is_err());
        let c = SyntheticConfig { distress_injection_rate: 1.5, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn background_words_are_stable_under_preprocessing() {
        let lex: Vec<String> = DEFAULT_DISTRESS_LEXICON.iter().map(|s| s.to_string()).collect();
        let words = background_vocabulary(2_000, &lex);
        assert_eq!(words.len(), 2_000);
        let unique: HashSet<_> = words.iter().collect();
        assert_eq!(unique.len(), words.len());
        assert!(words.iter().all(|w| !lex.contains(w)));
    }

    #[test]
    fn default_lexicon_is_in_lemma_form() {
        for w in DEFAULT_DISTRESS_LEXICON {
            assert_eq!(textprep::preprocess(w).tokens, vec![w.to_string()], "{w}");
        }
    }
}
