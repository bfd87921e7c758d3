#![allow(dead_code)]

use bankbench::corpus::{BankruptcyFiling, Chapter, Company, MissingMechanisms, Report, SyntheticConfig, DEFAULT_DISTRESS_LEXICON};
use bankbench::embeddings::{pair_loss_and_grad, SkipGramModel};
use bankbench::features::SparseVector;
use bankbench::linear::{gradient, LogisticModel};
use bankbench::neural::{loss_and_grad, DropoutMask, MlpModel};
use bankbench::textprep::{build_vocab, TokenizedDoc};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// O(n^2) pair counting, ties worth one half.
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Sum over distinct thresholds t (descending) of (R_t - R_prev) * P_t,
/// where everything scored >= t counts as predicted positive.
pub fn ap_thresholds(scores: &[f64], labels: &[u8]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let (mut tp, mut fp) = (0.0, 0.0);
        for (s, &l) in scores.iter().zip(labels) {
            if *s >= t {
                if l == 1 {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        let recall = tp / n_pos;
        ap += (recall - prev_recall) * tp / (tp + fp);
        prev_recall = recall;
    }
    ap
}

/// Random prediction set with both classes; `ties` draws scores from a
/// small grid.
pub fn random_predictions<R: Rng>(rng: &mut R, max_n: usize, ties: bool) -> (Vec<f64>, Vec<u8>) {
    loop {
        let n = rng.random_range(2..=max_n);
        let rate = rng.random_range(0.05..0.6);
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < rate)).collect();
        if !labels.contains(&0) || !labels.contains(&1) {
            continue;
        }
        let scores = labels
            .iter()
            .map(|&l| {
                let s = rng.random::<f64>() + 0.3 * l as f64;
                if ties {
                    (s * 6.0).floor() / 6.0
                } else {
                    s
                }
            })
            .collect();
        return (scores, labels);
    }
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Central difference of `f` along one coordinate of `params`.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(params: &mut [f64], k: usize, h: f64, mut f: F) -> f64 {
    let orig = params[k];
    params[k] = orig + h;
    let up = f(params);
    params[k] = orig - h;
    let down = f(params);
    params[k] = orig;
    (up - down) / (2.0 * h)
}

pub fn sparse_data(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<SparseVector<f64>>, Vec<u8>) {
    let xs = (0..n)
        .map(|_| {
            let mut pairs = Vec::new();
            for j in 0..dim {
                if rng.random::<f64>() < 0.3 {
                    pairs.push((j, rng.random_range(-1.0..1.0)));
                }
            }
            SparseVector::from_pairs(pairs, dim)
        })
        .collect();
    let ys = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
    (xs, ys)
}

/// Norm-wise relative error of the logistic gradient at a random point.
pub fn logistic_grad_rel_err(seed: u64, dim: usize, c: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (xs, ys) = sparse_data(&mut rng, 40, dim);
    let mut params: Vec<f64> = (0..=dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model_of = |p: &[f64]| LogisticModel { weights: p[..dim].to_vec(), bias: p[dim], c, feature_space_ref: None };
    let g = gradient(&model_of(&params), &xs, &ys);
    let analytic: Vec<f64> = g.weights.iter().copied().chain([g.bias]).collect();
    let numeric: Vec<f64> = (0..=dim).map(|k| central_diff(&mut params, k, 1e-6, |p| model_of(p).loss(&xs, &ys))).collect();
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / norm(&analytic).max(norm(&numeric))
}

fn flatten(m: &MlpModel<f64>) -> Vec<f64> {
    m.w1.iter().chain(&m.b1).chain(&m.w2).copied().chain([m.b2]).collect()
}

fn unflatten(template: &MlpModel<f64>, p: &[f64]) -> MlpModel<f64> {
    let (a, h) = (template.w1.len(), template.hidden);
    let mut m = template.clone();
    m.w1.copy_from_slice(&p[..a]);
    m.b1.copy_from_slice(&p[a..a + h]);
    m.w2.copy_from_slice(&p[a + h..a + 2 * h]);
    m.b2 = p[a + 2 * h];
    m
}

/// Input dims and hidden widths of the MLP gradient checks.
pub const MLP_CONFIGS: [(usize, usize); 10] =
    [(100, 8), (100, 24), (100, 64), (300, 16), (300, 32), (300, 48), (768, 8), (768, 16), (768, 40), (768, 64)];

/// Max per-coordinate relative error of the MLP gradient (dropout masks
/// frozen, L2 on), over every second-layer parameter and 150 random
/// first-layer ones.
pub fn mlp_grad_max_rel_err(d: usize, h: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MlpModel::init(d, h, 0.25, &mut rng).unwrap();
    for b in model.b1.iter_mut() {
        *b = rng.random_range(-0.1..0.1);
    }
    model.b2 = 0.3;
    let xs: Vec<Vec<f64>> = (0..8).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let ys = [1u8, 0, 0, 1, 0, 1, 1, 0];
    let masks: Vec<DropoutMask<f64>> = (0..8).map(|_| DropoutMask::sample(h, 0.25, &mut rng)).collect();
    let lambda = 1e-3;
    let (_, g) = loss_and_grad(&model, &refs, &ys, Some(&masks), lambda).unwrap();
    let analytic: Vec<f64> = g.w1.iter().chain(&g.b1).chain(&g.w2).copied().chain([g.b2]).collect();
    let mut params = flatten(&model);
    let n1 = d * h;
    let mut coords: Vec<usize> = (n1..params.len()).collect();
    coords.extend((0..150).map(|_| rng.random_range(0..n1)));
    let mut worst: f64 = 0.0;
    for k in coords {
        let fd = central_diff(&mut params, k, 1e-6, |p| {
            loss_and_grad(&unflatten(&model, p), &refs, &ys, Some(&masks), lambda).unwrap().0
        });
        worst = worst.max(rel_err(analytic[k], fd, 1e-7));
    }
    worst
}

/// Max relative error of the skip-gram pair gradient over `n_coords` random
/// coordinates of the center, context and negative rows.
pub fn skipgram_grad_max_rel_err(seed: u64, n_coords: usize) -> f64 {
    let words: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
    let doc = TokenizedDoc::new(words);
    let vocab = build_vocab([&doc], 100);
    let dim = 16;
    let mut model = SkipGramModel::<f64>::initialize(vocab, dim, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..model.vocab.len() {
        for v in model.input_vector_mut(k) {
            *v = rng.random_range(-0.5..0.5);
        }
        for v in model.output_vector_mut(k) {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    let center = model.vocab.id("w1").unwrap();
    let context = model.vocab.id("w2").unwrap();
    let negatives: Vec<usize> = (3..8).map(|i| model.vocab.id(&format!("w{i}")).unwrap()).collect();
    let (_, g) = pair_loss_and_grad(&model, center, context, &negatives);

    // (is the center row, index into g.negatives or usize::MAX for context, row id)
    let mut rows = vec![(true, 0, center), (false, usize::MAX, context)];
    rows.extend(negatives.iter().enumerate().map(|(i, &n)| (false, i, n)));
    let mut worst: f64 = 0.0;
    for _ in 0..n_coords {
        let (is_center, gi, row) = rows[rng.random_range(0..rows.len())];
        let coord = rng.random_range(0..dim);
        let analytic = match (is_center, gi) {
            (true, _) => g.center[coord],
            (false, usize::MAX) => g.context[coord],
            (false, i) => g.negatives[i][coord],
        };
        let mut m = model.clone();
        let mut loss_at = |delta: f64| {
            let slot = if is_center { &mut m.input_vector_mut(row)[coord] } else { &mut m.output_vector_mut(row)[coord] };
            let orig = *slot;
            *slot = orig + delta;
            let l = pair_loss_and_grad(&m, center, context, &negatives).0;
            let slot = if is_center { &mut m.input_vector_mut(row)[coord] } else { &mut m.output_vector_mut(row)[coord] };
            *slot = orig;
            l
        };
        let h = 1e-6;
        let fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        worst = worst.max(rel_err(analytic, fd, 1e-7));
    }
    worst
}

fn report(cik: &str, year: i32, filing: NaiveDate) -> Report {
    Report {
        company_id: cik.to_string(),
        period_end: date(year - 1, 12, 31),
        filing_date: filing,
        // Unique text per report so history slots can be traced back.
        mdna_text: format!("{cik}/{year}"),
    }
}

fn company(cik: String, years: &[i32], bankruptcy: Option<NaiveDate>) -> Company {
    Company {
        reports: years.iter().map(|&y| report(&cik, y, date(y, 3, 15))).collect(),
        bankruptcy: bankruptcy.map(|d| BankruptcyFiling { company_id: cik.clone(), filing_date: d, chapter: Chapter::Eleven }),
        company_id: cik,
    }
}

/// Fifty companies, all filing on March 15:
///
/// - A (20): every year 2010-2020.
/// - B (5): 2010-2013 then stop for good.
/// - C (5): 2010-2020 except 2012 and 2018.
/// - D (5): 2010-2016, silent in 2017, bankrupt 2017-06-01.
/// - E (5): 2010-2019, bankrupt 2019-09-01.
/// - F (5): 2014-2020.
/// - G (4): 2010-2013, bankrupt 2013-10-01.
/// - H (1): 2010-2015, bankrupt 2015-02-01, i.e. after the period end and
///   before the filing date of its 2015 report.
pub fn leakage_fixture() -> Vec<Company> {
    let mut out = Vec::new();
    let span = |a: i32, b: i32| (a..=b).collect::<Vec<_>>();
    let mut add = |group: &str, n: usize, years: Vec<i32>, bk: Option<NaiveDate>| {
        for i in 0..n {
            out.push(company(format!("{group}{i:02}"), &years, bk));
        }
    };
    add("A", 20, span(2010, 2020), None);
    add("B", 5, span(2010, 2013), None);
    add("C", 5, span(2010, 2020).into_iter().filter(|y| *y != 2012 && *y != 2018).collect(), None);
    add("D", 5, span(2010, 2016), Some(date(2017, 6, 1)));
    add("E", 5, span(2010, 2019), Some(date(2019, 9, 1)));
    add("F", 5, span(2014, 2020), None);
    add("G", 4, span(2010, 2013), Some(date(2013, 10, 1)));
    add("H", 1, span(2010, 2015), Some(date(2015, 2, 1)));
    out
}

/// Synthetic corpus with a strong planted distress signal: 2,000 companies
/// over 2009-2020.
pub fn planted_config(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n_companies: 2_000,
        year_range: (2009, 2020),
        base_bankruptcy_rate: 0.02,
        distress_lexicon: DEFAULT_DISTRESS_LEXICON.iter().map(|s| s.to_string()).collect(),
        distress_injection_rate: 0.95,
        missing_mechanisms: MissingMechanisms { permanent_stop: 0.02, random_gap: 0.05, pre_bankruptcy_silence: 0.05 },
        doc_length_mean: 120.0,
        doc_length_std: 25.0,
        rng_seed: seed,
        background_vocab_size: 5_000,
        zipf_exponent: 1.0,
        initial_fraction: 0.6,
    }
}
