//! `bankbench`: command-line access to every pipeline stage.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bankbench::corpus::{corpus_stats, generate_synthetic, load_corpus, write_corpus, SyntheticConfig};
use bankbench::embeddings::SkipGramConfig;
use bankbench::harness::{
    self, load_companies, render_markdown, run_experiment_on, run_final, run_tuning, tokenize_slots, write_json,
    Assignment, ExperimentConfig, ExperimentReport, Scorer, TrialResult,
};
use bankbench::metrics::DEFAULT_RECALL_K;
use bankbench::sampling::{build_eval_set, build_training_set, missing_profile, read_instances, write_instances, SplitSpec};
use bankbench::textprep::DEFAULT_MAX_VOCAB;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "bankbench", version, about = "Bankruptcy prediction benchmark from annual-report text")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Seed overriding the one in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (or file, for `evaluate`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus (reports.jsonl, bankruptcies.jsonl).
    Synth,
    /// Print corpus summary statistics.
    Stats {
        /// Directory holding reports.jsonl and bankruptcies.jsonl.
        corpus: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Build the training set and one evaluation set per validation/test year.
    BuildDataset {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Train skip-gram word vectors on an instances file.
    TrainW2v {
        #[arg(long)]
        instances: PathBuf,
    },
    /// Run the tuning phase of an experiment.
    Tune {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Retrain on data up to the final cutoff and evaluate the test years.
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Trial result or assignment JSON (default: <out>/tuning/best.json).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Run tuning and final training end to end.
    Run {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Score an instances file with a saved model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RECALL_K)]
        k: usize,
    },
    /// Render experiment reports as a Markdown table.
    Report { reports: Vec<PathBuf> },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    cli.out.as_deref().context("--out is required")
}

fn experiment_config(cli: &Cli, corpus: Option<&Path>) -> Result<ExperimentConfig> {
    let path = cli.config.as_deref().context("--config <experiment.json> is required")?;
    let mut config: ExperimentConfig = read_json(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.split.rng_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.paths.out_dir = out.clone();
    }
    if let Some(dir) = corpus {
        config.paths.reports = Some(dir.join("reports.jsonl"));
        config.paths.bankruptcies = Some(dir.join("bankruptcies.jsonl"));
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth => {
            let mut config: SyntheticConfig = match &cli.config {
                Some(p) => read_json(p)?,
                None => SyntheticConfig::default(),
            };
            if let Some(seed) = cli.seed {
                config.rng_seed = seed;
            }
            let out = out_dir(cli)?;
            fs::create_dir_all(out)?;
            let companies = generate_synthetic(&config)?;
            write_corpus(&companies, &out.join("reports.jsonl"), &out.join("bankruptcies.jsonl"))?;
            log::info!("wrote {} companies to {}", companies.len(), out.display());
        }
        Command::Stats { corpus, json } => {
            let loaded = load_corpus(&corpus.join("reports.jsonl"), &corpus.join("bankruptcies.jsonl"))?;
            if loaded.companies.is_empty() {
                bail!("corpus is empty");
            }
            log::info!("load warnings: {:?}", loaded.warnings);
            let stats = corpus_stats(&loaded.companies);
            if *json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                print!("{stats}");
            }
        }
        Command::BuildDataset { corpus } => {
            let mut spec: SplitSpec = match &cli.config {
                Some(p) => read_json(p)?,
                None => SplitSpec::default(),
            };
            if let Some(seed) = cli.seed {
                spec.rng_seed = seed;
            }
            let out = out_dir(cli)?;
            fs::create_dir_all(out)?;
            let companies = load_corpus(&corpus.join("reports.jsonl"), &corpus.join("bankruptcies.jsonl"))?.companies;
            let train = build_training_set(&companies, &spec)?;
            write_instances(&out.join("train.jsonl"), &train)?;
            eprintln!("train: {} instances, profile {:?}", train.len(), missing_profile(&train));
            for &year in spec.validation_years.iter().chain(&spec.test_years) {
                let set = build_eval_set(&companies, year, &spec)?;
                write_instances(&out.join(format!("eval_{year}.jsonl")), &set)?;
                eprintln!("eval {year}: {} instances, profile {:?}", set.len(), missing_profile(&set));
            }
        }
        Command::TrainW2v { instances } => {
            let mut config: SkipGramConfig = match &cli.config {
                Some(p) => read_json(p)?,
                None => SkipGramConfig::default(),
            };
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            let out = out_dir(cli)?;
            fs::create_dir_all(out)?;
            let set = read_instances(instances)?;
            let slots = tokenize_slots(&set);
            let (model, losses) = harness::train_word_vectors(&set, &slots, &config, DEFAULT_MAX_VOCAB)?;
            model.write_vec(&out.join("embeddings.vec"))?;
            model.vocab.write_tsv(&out.join("vocab.tsv"))?;
            eprintln!("epoch losses: {losses:?}");
        }
        Command::Tune { corpus } => {
            let config = experiment_config(cli, corpus.as_deref())?;
            let companies = load_companies(&config)?;
            let (best, _) = run_tuning(&companies, &config)?;
            println!("{}", serde_json::to_string_pretty(&best)?);
        }
        Command::Train { corpus, params } => {
            let config = experiment_config(cli, corpus.as_deref())?;
            let params = params.clone().unwrap_or_else(|| config.paths.out_dir.join("tuning").join("best.json"));
            let assignment: Assignment = match read_json::<TrialResult>(&params) {
                Ok(trial) => trial.assignment,
                Err(_) => read_json(&params)?,
            };
            let companies = load_companies(&config)?;
            let (_, test) = run_final(&companies, &config, &assignment)?;
            println!("{}", serde_json::to_string_pretty(&test)?);
        }
        Command::Run { corpus } => {
            let config = experiment_config(cli, corpus.as_deref())?;
            let companies = load_companies(&config)?;
            let report = run_experiment_on(&companies, &config)?;
            print!("{}", render_markdown(std::slice::from_ref(&report)));
        }
        Command::Evaluate { model, instances, k } => {
            let (scorer, resources) = Scorer::load(model)?;
            let set = read_instances(instances)?;
            let scores = scorer.score(&set, &resources)?;
            let report = harness::evaluate(scores, &set, *k)?;
            match &cli.out {
                Some(path) => write_json(path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
        Command::Report { reports } => {
            if reports.is_empty() {
                bail!("no report files given");
            }
            let loaded: Vec<ExperimentReport> = reports.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
            let table = render_markdown(&loaded);
            if let Some(path) = &cli.out {
                fs::write(path, &table)?;
            }
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
