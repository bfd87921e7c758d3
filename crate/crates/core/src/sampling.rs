//! Firm-year instances with leakage-safe prediction windows and the temporal
//! train/validation/test segmentation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, Months, NaiveDate};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Company;
use crate::error::{Error, Result};
use crate::textprep::MISSING;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirmYearInstance {
    #[serde(rename = "cik")]
    pub company_id: String,
    /// Calendar year the instance is built for.
    pub year: i32,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub label: u8,
    /// One text per history year, oldest first; missing years hold [`MISSING`].
    pub history: Vec<String>,
    /// True when no report was filed in `year` and the window start was
    /// transposed from the latest earlier filing.
    pub imputed: bool,
}

impl FirmYearInstance {
    pub fn all_missing(&self) -> bool {
        self.history.iter().all(|h| h == MISSING)
    }

    pub fn any_missing(&self) -> bool {
        self.history.iter().any(|h| h == MISSING)
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }

    /// Key of one history slot in an imported embedding table.
    pub fn slot_key(&self, slot: usize) -> String {
        format!("{}:{}:{}", self.company_id, self.year, slot)
    }
}

fn default_keep_rate() -> f64 {
    0.05
}

fn default_activity_window() -> i32 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_cutoff_year: i32,
    pub validation_years: Vec<i32>,
    pub test_years: Vec<i32>,
    pub history_len: usize,
    #[serde(default = "default_keep_rate")]
    pub all_missing_keep_rate: f64,
    #[serde(default = "default_activity_window")]
    pub validation_activity_window: i32,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_cutoff_year: 2015,
            validation_years: vec![2017, 2018],
            test_years: vec![2019, 2020],
            history_len: 1,
            all_missing_keep_rate: default_keep_rate(),
            validation_activity_window: default_activity_window(),
            rng_seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.history_len == 1 || self.history_len == 3) {
            return bad(format!("history_len must be 1 or 3, got {}", self.history_len));
        }
        if !(0.0..=1.0).contains(&self.all_missing_keep_rate) {
            return bad(format!("all_missing_keep_rate {} outside [0, 1]", self.all_missing_keep_rate));
        }
        if self.validation_activity_window < 1 {
            return bad("validation_activity_window must be at least 1".into());
        }
        let min_val = self.validation_years.iter().min();
        let min_test = self.test_years.iter().min();
        if let Some(&v) = min_val {
            if self.train_cutoff_year >= v {
                return bad(format!("train cutoff {} not before validation year {v}", self.train_cutoff_year));
            }
        }
        if let (Some(&v), Some(&t)) = (min_val, min_test) {
            if v > t {
                return bad(format!("validation year {v} after test year {t}"));
            }
        }
        Ok(())
    }
}

fn end_of_year(year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 12, 31).expect("valid date")
}

/// Same month and day in another year; Feb 29 becomes Feb 28 in non-leap years.
pub fn transpose_to_year(date: NaiveDate, year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, date.month(), date.day())
        .or_else(|| NaiveDate::from_ymd_opt(year, date.month(), 28))
        .expect("valid date")
}

pub fn one_year_after(date: NaiveDate) -> NaiveDate {
    date.checked_add_months(Months::new(12)).expect("date in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: NaiveDate,
    pub imputed: bool,
}

/// Start of the one-year prediction window for `company` in `year`.
///
/// A report filed in `year` anchors the window at its filing date. Otherwise
/// the latest earlier filing date is moved into `year`. Returns `None` when
/// the company has not filed anything by the end of `year`.
pub fn determine_window(company: &Company, year: i32) -> Option<Window> {
    if let Some(r) = company.report_in_year(year) {
        return Some(Window { start: r.filing_date, imputed: false });
    }
    let latest = company.latest_report_until(end_of_year(year))?;
    Some(Window { start: transpose_to_year(latest.filing_date, year), imputed: true })
}

/// Builds the firm-year instance for `company` in `year` with `history_len`
/// text slots, or `None` when no window exists or the company filed for
/// bankruptcy before the window starts.
pub fn build_instance(company: &Company, year: i32, history_len: usize) -> Option<FirmYearInstance> {
    let window = determine_window(company, year)?;
    let end = one_year_after(window.start);
    let label = match company.bankruptcy_date() {
        Some(b) if b < window.start => return None,
        Some(b) if b < end => 1,
        _ => 0,
    };
    let first = year - history_len as i32 + 1;
    let history = (first..=year)
        .map(|y| match company.report_in_year(y) {
            Some(r) if r.filing_date <= window.start => r.mdna_text.clone(),
            _ => MISSING.to_string(),
        })
        .collect();
    Some(FirmYearInstance {
        company_id: company.company_id.clone(),
        year,
        window_start: window.start,
        window_end: end,
        label,
        history,
        imputed: window.imputed,
    })
}

/// One instance per firm and year from the firm's first report through the
/// cutoff year, using only reports filed up to Dec 31 of the cutoff year.
/// Instances whose whole history is missing are thinned to
/// `all_missing_keep_rate` by seeded sampling.
pub fn build_training_set(companies: &[Company], spec: &SplitSpec) -> Result<Vec<FirmYearInstance>> {
    spec.validate()?;
    let cutoff = end_of_year(spec.train_cutoff_year);
    let per_company: Vec<Vec<FirmYearInstance>> = companies
        .par_iter()
        .map(|c| {
            let visible = c.truncated(cutoff);
            match visible.first_year() {
                Some(first) => (first..=spec.train_cutoff_year)
                    .filter_map(|y| build_instance(&visible, y, spec.history_len))
                    .collect(),
                None => Vec::new(),
            }
        })
        .collect();
    let instances: Vec<FirmYearInstance> = per_company.into_iter().flatten().collect();
    let instances = prune_all_missing(instances, spec.all_missing_keep_rate, spec.rng_seed);
    if instances.is_empty() {
        return Err(Error::Empty("training set (check train_cutoff_year against the corpus years)"));
    }
    Ok(instances)
}

/// Keeps `round(keep_rate * m)` of the `m` all-missing instances.
pub fn prune_all_missing(instances: Vec<FirmYearInstance>, keep_rate: f64, seed: u64) -> Vec<FirmYearInstance> {
    let missing_idx: Vec<usize> = instances.iter().enumerate().filter(|(_, i)| i.all_missing()).map(|(k, _)| k).collect();
    let keep_n = (keep_rate * missing_idx.len() as f64).round() as usize;
    if keep_n >= missing_idx.len() {
        return instances;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; instances.len()];
    for &k in &missing_idx {
        keep[k] = false;
    }
    for pick in index::sample(&mut rng, missing_idx.len(), keep_n) {
        keep[missing_idx[pick]] = true;
    }
    instances.into_iter().zip(keep).filter(|(_, k)| *k).map(|(i, _)| i).collect()
}

/// One instance per company that filed at least once in the activity window
/// ending at `year`; companies already bankrupt are excluded.
pub fn build_eval_set(companies: &[Company], year: i32, spec: &SplitSpec) -> Result<Vec<FirmYearInstance>> {
    spec.validate()?;
    let first_active = year - spec.validation_activity_window + 1;
    let cutoff = end_of_year(year);
    Ok(companies
        .par_iter()
        .filter_map(|c| {
            let active = c.reports.iter().any(|r| (first_active..=year).contains(&r.filing_date.year()));
            if !active {
                return None;
            }
            build_instance(&c.truncated(cutoff), year, spec.history_len)
        })
        .collect())
}

/// Keeps every positive and samples negatives without replacement so that
/// negatives make up `target_majority_frac` of the result.
pub fn undersample(instances: &[FirmYearInstance], target_majority_frac: f64, seed: u64) -> Result<Vec<FirmYearInstance>> {
    Ok(undersample_indices(instances, target_majority_frac, seed)?.into_iter().map(|k| instances[k].clone()).collect())
}

/// Positions kept by [`undersample`], in input order.
pub fn undersample_indices(instances: &[FirmYearInstance], target_majority_frac: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&target_majority_frac) {
        return Err(Error::InvalidConfig(format!("majority fraction {target_majority_frac} outside [0, 1)")));
    }
    let positives = instances.iter().filter(|i| i.is_positive()).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let neg_idx: Vec<usize> = instances.iter().enumerate().filter(|(_, i)| !i.is_positive()).map(|(k, _)| k).collect();
    let target = (positives as f64 * target_majority_frac / (1.0 - target_majority_frac)).round() as usize;
    if neg_idx.len() <= target {
        return Ok((0..instances.len()).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<bool> = instances.iter().map(|i| i.is_positive()).collect();
    for pick in index::sample(&mut rng, neg_idx.len(), target) {
        keep[neg_idx[pick]] = true;
    }
    Ok(keep.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i).collect())
}

/// Missing-data profile of an instance set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissingProfile {
    pub n: usize,
    pub any_missing_share: f64,
    pub bankruptcy_rate: f64,
    pub rate_all_missing: Option<f64>,
    pub rate_no_missing: Option<f64>,
    /// Only the most recent slot missing.
    pub rate_final_year_missing: Option<f64>,
}

pub fn missing_profile(instances: &[FirmYearInstance]) -> MissingProfile {
    let rate = |f: &dyn Fn(&FirmYearInstance) -> bool| {
        let sel: Vec<_> = instances.iter().filter(|i| f(i)).collect();
        (!sel.is_empty()).then(|| sel.iter().filter(|i| i.is_positive()).count() as f64 / sel.len() as f64)
    };
    let n = instances.len();
    MissingProfile {
        n,
        any_missing_share: if n == 0 { 0.0 } else { instances.iter().filter(|i| i.any_missing()).count() as f64 / n as f64 },
        bankruptcy_rate: rate(&|_| true).unwrap_or(0.0),
        rate_all_missing: rate(&|i| i.all_missing()),
        rate_no_missing: rate(&|i| !i.any_missing()),
        rate_final_year_missing: rate(&|i| {
            let (last, rest) = i.history.split_last().expect("non-empty history");
            last == MISSING && rest.iter().all(|h| h != MISSING)
        }),
    }
}

pub fn write_instances(path: &Path, instances: &[FirmYearInstance]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for i in instances {
        serde_json::to_writer(&mut w, i)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_instances(path: &Path) -> Result<Vec<FirmYearInstance>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            file: path.display().to_string(),
            line: k + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}
