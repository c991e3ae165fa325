//! Command-line front end. Every JSON report carries a `metadata` block;
//! commands whose primary output is a token stream or CSV print that block
//! to stdout instead.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bpe::load_bpe;
use crate::corpus::{
    builtin_mt_fixture, load_corpus, load_downstream_fixture, load_token_stream,
    write_token_stream, CorpusFormat, DownstreamFixture, TokenSequence,
};
use crate::metrics::{
    count_frequencies, curve_rows, metrics_from_table, MetricVector, DEFAULT_TRUNCATION_BOUND,
    METRIC_NAMES, SIMPSON_GRID,
};
use crate::predictor::{
    leave_one_tokenizer_out, predict_heldout_language, EvaluationReport, MetricTable, ModelKind,
    PredictionInputs, DEFAULT_CV_FOLDS,
};
use crate::ranking::{
    evaluate_ranking, fit_bradley_terry, ground_truth_ranking, ranking_from_ratings,
    ProbabilityMatrix,
};
use crate::stats::{kendall, spearman, CorrelationResult};
use crate::synth::generate_zipf_stream;

pub const SEED_ENV: &str = "TOKSCOPE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "tokscope",
    version,
    about = "Intrinsic tokenizer metrics and downstream-ranking prediction"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// RNG seed; the TOKSCOPE_SEED environment variable takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for tokenization and per-fold fitting (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Omit the timestamp from metadata so reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Largest ln(rank) kept in the rank-frequency curve.
    #[arg(long, global = true, default_value_t = DEFAULT_TRUNCATION_BOUND)]
    pub truncation_bound: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize a corpus with a byte-level BPE vocabulary and merge list.
    Encode(EncodeArgs),
    /// Compute the five intrinsic metrics of a token stream.
    Metrics(MetricsArgs),
    /// Write the rank-frequency curve of a token stream as CSV.
    ExportCurve(ExportCurveArgs),
    /// Spearman and Kendall correlation between two CSV columns.
    Correlate(CorrelateArgs),
    /// Leave-one-tokenizer-out evaluation of a pairwise model.
    Predict(PredictArgs),
    /// Bradley-Terry ranking for a held-out language, scored against the fixture.
    Rank(RankArgs),
    /// Write a synthetic Zipfian token stream.
    GenZipf(GenZipfArgs),
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub merges: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Lines)]
    pub format: FormatArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Lines,
    Jsonl,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Lines => CorpusFormat::PlaintextLines,
            FormatArg::Jsonl => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub tokens: PathBuf,
    /// Label stored in the report, used when the report joins a metrics directory.
    #[arg(long)]
    pub tokenizer: Option<String>,
    #[arg(long)]
    pub language: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportCurveArgs {
    #[arg(long)]
    pub tokens: PathBuf,
    /// Keep only ranks within the truncation bound.
    #[arg(long)]
    pub truncate: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Spearman,
    Kendall,
    Both,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Directory of metrics reports labelled with tokenizer and language.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Downstream score CSV; defaults to the bundled machine-translation table.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, default_value = "2.7B")]
    pub scale: String,
    /// Comma-separated metric names.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    #[arg(long, default_value_t = DEFAULT_CV_FOLDS)]
    pub cv_folds: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: ModelArgs,
    #[arg(long, default_value = "logistic", value_parser = parse_model)]
    pub model: ModelKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub common: ModelArgs,
    /// A precomputed probability matrix instead of fitting on --metrics.
    #[arg(long, conflicts_with = "metrics")]
    pub probabilities: Option<PathBuf>,
    #[arg(long, default_value = "rbfsvm", value_parser = parse_model)]
    pub model: ModelKind,
    #[arg(long)]
    pub heldout_language: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenZipfArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub n_tokens: u64,
    #[arg(long, default_value_t = 403)]
    pub n_types: usize,
    #[arg(long, default_value_t = 1.0)]
    pub exponent: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

/// Settings shared by every command after environment overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    pub timestamp: bool,
    pub truncation_bound: f64,
}

impl RunConfig {
    pub fn resolve(global: &GlobalArgs, env_seed: Option<String>) -> anyhow::Result<Self> {
        let seed = match env_seed {
            Some(s) => s
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={s:?} is not an unsigned integer"))?,
            None => global.seed,
        };
        if !(global.truncation_bound.is_finite() && global.truncation_bound > 0.0) {
            bail!("--truncation-bound must be positive");
        }
        Ok(RunConfig {
            seed,
            threads: global.threads,
            timestamp: !global.no_timestamp,
            truncation_bound: global.truncation_bound,
        })
    }

    pub fn metadata(&self) -> Metadata {
        Metadata {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            log_base: "e".to_string(),
            truncation_bound: self.truncation_bound,
            simpson_grid: SIMPSON_GRID,
            timestamp: self
                .timestamp
                .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub log_base: String,
    pub truncation_bound: f64,
    pub simpson_grid: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// The JSON written by `metrics`; a directory of these feeds `predict` and `rank`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
    pub tokenizer: Option<String>,
    pub language: Option<String>,
    pub metrics: MetricVector,
}

#[derive(Debug, Serialize)]
struct WithMetadata<'a, T: Serialize> {
    metadata: Metadata,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Debug, Serialize)]
struct RankReport {
    language: String,
    scale: String,
    model: Option<ModelKind>,
    feature_set: Option<Vec<String>>,
    predicted: Vec<String>,
    predicted_scores: Vec<f64>,
    truth: Vec<String>,
    truth_scores: Vec<f64>,
    kendall_tau: f64,
    p_value_one_sided: f64,
    p_value_two_sided: f64,
    p_value_method: crate::stats::PValueMethod,
    bt_iterations: usize,
    bt_log_likelihood: f64,
    probabilities: ProbabilityMatrix,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct CorrelateReport {
    input: String,
    x: String,
    y: String,
    results: Vec<CorrelationResult>,
}

#[derive(Debug, Serialize)]
struct StreamSummary {
    output: String,
    n_tokens: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_documents: Option<usize>,
    source: String,
}

fn write_json<T: Serialize>(
    path: Option<&Path>,
    config: &RunConfig,
    body: &T,
) -> anyhow::Result<()> {
    let wrapped = WithMetadata {
        metadata: config.metadata(),
        body,
    };
    let mut text = serde_json::to_string_pretty(&wrapped)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn feature_set(requested: &Option<Vec<String>>) -> anyhow::Result<Vec<String>> {
    let names = match requested {
        Some(v) => v
            .iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>(),
        None => METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    if names.is_empty() {
        bail!("--features is empty");
    }
    for n in &names {
        if !METRIC_NAMES.contains(&n.as_str()) {
            bail!(
                "unknown metric {n:?}; expected one of {}",
                METRIC_NAMES.join(", ")
            );
        }
    }
    Ok(names)
}

fn load_fixture(path: &Option<PathBuf>) -> anyhow::Result<DownstreamFixture> {
    Ok(match path {
        Some(p) => load_downstream_fixture(p)?,
        None => builtin_mt_fixture(),
    })
}

/// Reads every `*.json` metrics report in a directory (sorted by file name).
pub fn load_metrics_dir(dir: &Path) -> anyhow::Result<MetricTable> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading metrics directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("reading metrics directory {}", dir.display()))?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    let mut table = MetricTable::new();
    for p in paths {
        let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        let report: MetricsReport = serde_json::from_str(&text)
            .with_context(|| format!("{}: not a metrics report", p.display()))?;
        let (Some(t), Some(l)) = (report.tokenizer, report.language) else {
            bail!(
                "{}: report lacks tokenizer and language labels",
                p.display()
            );
        };
        if table
            .insert((t.clone(), l.clone()), report.metrics)
            .is_some()
        {
            bail!("{}: duplicate metrics for ({t}, {l})", p.display());
        }
    }
    if table.is_empty() {
        bail!("{}: no metrics reports found", dir.display());
    }
    Ok(table)
}

fn read_csv_columns(path: &Path, x: &str, y: &str) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("{}: missing column {name:?}", path.display()))
    };
    let (ix, iy) = (find(x)?, find(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), row + 2))?;
        for (idx, out) in [(ix, &mut xs), (iy, &mut ys)] {
            let cell = rec.get(idx).unwrap_or("").trim();
            let v: f64 = cell.parse().with_context(|| {
                format!(
                    "{}: line {}: {cell:?} is not a number",
                    path.display(),
                    row + 2
                )
            })?;
            out.push(v);
        }
    }
    Ok((xs, ys))
}

fn encode(args: &EncodeArgs, config: &RunConfig) -> anyhow::Result<()> {
    let tok = load_bpe(&args.vocab, &args.merges)?;
    let docs = load_corpus(&args.input, args.format.into())?;
    let parts = docs
        .par_iter()
        .map(|d| {
            tok.encode(&d.text)
                .with_context(|| format!("{}: document {}", args.input.display(), d.id))
        })
        .collect::<anyhow::Result<Vec<TokenSequence>>>()?;
    let mut all = TokenSequence::new(Vec::new(), tok.name());
    for p in &parts {
        all.extend(p);
    }
    write_token_stream(&args.out, &all)?;
    write_json(
        None,
        config,
        &StreamSummary {
            output: args.out.display().to_string(),
            n_tokens: all.len(),
            n_documents: Some(docs.len()),
            source: tok.name().to_string(),
        },
    )
}

fn metrics(args: &MetricsArgs, config: &RunConfig) -> anyhow::Result<()> {
    let seq = load_token_stream(&args.tokens)?;
    let table = count_frequencies(&seq).with_context(|| args.tokens.display().to_string())?;
    let mv = metrics_from_table(&table, config.truncation_bound)
        .with_context(|| args.tokens.display().to_string())?;
    let report = MetricsReport {
        metadata: None,
        tokenizer: args.tokenizer.clone(),
        language: args.language.clone(),
        metrics: mv,
    };
    write_json(args.out.as_deref(), config, &report)
}

fn export_curve(args: &ExportCurveArgs, config: &RunConfig) -> anyhow::Result<()> {
    let seq = load_token_stream(&args.tokens)?;
    let table = count_frequencies(&seq).with_context(|| args.tokens.display().to_string())?;
    let mut w = csv::Writer::from_path(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let mut rows = 0;
    for row in curve_rows(&table) {
        if args.truncate && row.log_rank > config.truncation_bound {
            break;
        }
        w.serialize(row)?;
        rows += 1;
    }
    w.flush()?;
    write_json(
        None,
        config,
        &StreamSummary {
            output: args.out.display().to_string(),
            n_tokens: rows,
            n_documents: None,
            source: args.tokens.display().to_string(),
        },
    )
}

fn correlate(args: &CorrelateArgs, config: &RunConfig) -> anyhow::Result<()> {
    let (xs, ys) = read_csv_columns(&args.input, &args.x, &args.y)?;
    let mut results = Vec::new();
    if args.method != MethodArg::Kendall {
        results.push(spearman(&xs, &ys)?);
    }
    if args.method != MethodArg::Spearman {
        results.push(kendall(&xs, &ys)?);
    }
    write_json(
        args.out.as_deref(),
        config,
        &CorrelateReport {
            input: args.input.display().to_string(),
            x: args.x.clone(),
            y: args.y.clone(),
            results,
        },
    )
}

fn predict(args: &PredictArgs, config: &RunConfig) -> anyhow::Result<()> {
    let Some(dir) = &args.common.metrics else {
        bail!("predict requires --metrics");
    };
    let table = load_metrics_dir(dir)?;
    let fixture = load_fixture(&args.common.fixture)?;
    let features = feature_set(&args.common.features)?;
    let inputs = PredictionInputs {
        metrics: &table,
        fixture: &fixture,
        scale: &args.common.scale,
        seed: config.seed,
        cv_folds: args.common.cv_folds,
    };
    let report: EvaluationReport = leave_one_tokenizer_out(inputs, &features, args.model)?;
    write_json(args.out.as_deref(), config, &report)
}

fn rank(args: &RankArgs, config: &RunConfig) -> anyhow::Result<()> {
    let fixture = load_fixture(&args.common.fixture)?;
    let lang = &args.heldout_language;
    let (matrix, model, features) = match (&args.probabilities, &args.common.metrics) {
        (Some(p), None) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let m = ProbabilityMatrix::from_json(&text).with_context(|| p.display().to_string())?;
            (m, None, None)
        }
        (None, Some(dir)) => {
            let table = load_metrics_dir(dir)?;
            let features = feature_set(&args.common.features)?;
            let inputs = PredictionInputs {
                metrics: &table,
                fixture: &fixture,
                scale: &args.common.scale,
                seed: config.seed,
                cv_folds: args.common.cv_folds,
            };
            let m = predict_heldout_language(inputs, &features, args.model, lang)?;
            (m, Some(args.model), Some(features))
        }
        (Some(_), Some(_)) => bail!("--probabilities and --metrics are mutually exclusive"),
        (None, None) => bail!("rank requires --metrics or --probabilities"),
    };
    let ratings = fit_bradley_terry(&matrix.symmetrized())?;
    let predicted = ranking_from_ratings(&ratings);
    let truth = ground_truth_ranking(&fixture, lang, &args.common.scale)?;
    let tau = evaluate_ranking(&predicted, &truth)?;
    let mut warnings = ratings.warnings.clone();
    warnings.extend(predicted.warnings.iter().cloned());
    warnings.extend(truth.warnings.iter().cloned());
    let report = RankReport {
        language: lang.clone(),
        scale: args.common.scale.clone(),
        model,
        feature_set: features,
        predicted: predicted.ordered,
        predicted_scores: predicted.scores,
        truth: truth.ordered,
        truth_scores: truth.scores,
        kendall_tau: tau.coefficient,
        p_value_one_sided: tau.p_value_greater,
        p_value_two_sided: tau.p_value,
        p_value_method: tau.method,
        bt_iterations: ratings.iterations,
        bt_log_likelihood: ratings.final_log_likelihood,
        probabilities: matrix,
        warnings,
    };
    write_json(args.out.as_deref(), config, &report)
}

fn gen_zipf(args: &GenZipfArgs, config: &RunConfig) -> anyhow::Result<()> {
    let seq = generate_zipf_stream(args.n_tokens, args.n_types, args.exponent, config.seed)?;
    write_token_stream(&args.out, &seq)?;
    write_json(
        None,
        config,
        &StreamSummary {
            output: args.out.display().to_string(),
            n_tokens: seq.len(),
            n_documents: None,
            source: seq.source_tokenizer.clone(),
        },
    )
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = RunConfig::resolve(&cli.global, std::env::var(SEED_ENV).ok())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()?;
    pool.install(|| match &cli.command {
        Command::Encode(a) => encode(a, &config),
        Command::Metrics(a) => metrics(a, &config),
        Command::ExportCurve(a) => export_curve(a, &config),
        Command::Correlate(a) => correlate(a, &config),
        Command::Predict(a) => predict(a, &config),
        Command::Rank(a) => rank(a, &config),
        Command::GenZipf(a) => gen_zipf(a, &config),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global(seed: u64) -> GlobalArgs {
        GlobalArgs {
            seed,
            threads: 1,
            no_timestamp: true,
            truncation_bound: 6.0,
        }
    }

    #[test]
    fn env_seed_overrides_flag() {
        assert_eq!(RunConfig::resolve(&global(3), None).unwrap().seed, 3);
        assert_eq!(
            RunConfig::resolve(&global(3), Some("11".into()))
                .unwrap()
                .seed,
            11
        );
        assert!(RunConfig::resolve(&global(3), Some("x".into())).is_err());
    }

    #[test]
    fn metadata_without_timestamp() {
        let m = RunConfig::resolve(&global(0), None).unwrap().metadata();
        assert_eq!(m.log_base, "e");
        assert_eq!(m.truncation_bound, 6.0);
        assert!(m.timestamp.is_none());
    }

    #[test]
    fn feature_names_are_validated() {
        assert_eq!(feature_set(&None).unwrap().len(), 5);
        assert!(feature_set(&Some(vec!["bogus".into()])).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
