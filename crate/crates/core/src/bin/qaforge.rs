//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! error, 3 generator transport error.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use qaforge::corpus::{self, LengthBounds, Passage};
use qaforge::dataset::{self, build_training_mix, MixOverrides, StageOverrides};
use qaforge::generator::{
    derive_seed, Candidate, GenerationRequest, GeneratorError, ReferenceConfig, GENERATOR_URL_ENV,
};
use qaforge::metrics::{self, EvalMode, EvalOptions, ProfileTable};
use qaforge::parsefilter::{run_filter_pipeline, FilterConfig, FilterStats, SyntheticExample};
use qaforge::pipeline::{
    self, read_jsonl, read_squad_file, stats_summary, write_jsonl, BackendConfig, CandidateRecord,
    PipelineConfig, PipelineError, PipelineReport, StageError,
};

#[derive(Parser)]
#[command(
    name = "qaforge",
    version,
    about = "Synthetic multilingual QA data generation and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, length-filter and sample a passage JSONL file.
    Ingest(IngestArgs),
    /// Sample K candidates per passage from a generator backend.
    Generate(GenerateArgs),
    /// Parse, check and rank candidates; keep the top m per passage.
    Filter(FilterArgs),
    /// Write filtered examples as a SQuAD-1.1 document.
    Emit(EmitArgs),
    /// Write a staged (synthetic, then gold) training manifest.
    Mix(MixArgs),
    /// Exact match and F1 of predictions against a SQuAD-format dataset.
    Eval(EvalArgs),
    /// Corpus BLEU of hypothesis lines against reference lines.
    Bleu(BleuArgs),
    /// Run the full pipeline.
    Run(RunArgs),
    /// Print the stage table of a pipeline report.
    Stats(StatsArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Keep only records with this language code.
    #[arg(long)]
    language: String,
    #[arg(long, default_value_t = 30)]
    min_tokens: usize,
    #[arg(long, default_value_t = 450)]
    max_tokens: usize,
    /// Number of passages to sample after length filtering (default: all).
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, env = "QAFORGE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Reference,
    Remote,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// SQuAD-format training file for the reference backend.
    #[arg(long)]
    training_data: Option<PathBuf>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    smoothing: Option<f64>,
    /// Remote generator base URL.
    #[arg(long, env = GENERATOR_URL_ENV)]
    endpoint: Option<String>,
}

impl BackendArgs {
    /// Backend described by the flags alone, if `--backend` was given.
    fn explicit(&self) -> Result<Option<BackendConfig>, CliError> {
        let defaults = ReferenceConfig::default();
        Ok(match self.backend {
            None => None,
            Some(BackendKind::Reference) => Some(BackendConfig::Reference {
                training_data: self.training_data.clone().ok_or_else(|| {
                    CliError::Usage("--backend reference needs --training-data".into())
                })?,
                order: self.order.unwrap_or(defaults.order),
                smoothing: self.smoothing.unwrap_or(defaults.smoothing),
            }),
            Some(BackendKind::Remote) => Some(BackendConfig::Remote {
                endpoint: self.endpoint.clone(),
            }),
        })
    }

    /// Applies the individual flags on top of a configured backend.
    fn patch(&self, backend: &mut BackendConfig) {
        match backend {
            BackendConfig::Reference {
                training_data,
                order,
                smoothing,
            } => {
                if let Some(p) = &self.training_data {
                    *training_data = p.clone();
                }
                if let Some(o) = self.order {
                    *order = o;
                }
                if let Some(s) = self.smoothing {
                    *smoothing = s;
                }
            }
            BackendConfig::Remote { endpoint } => {
                if self.endpoint.is_some() {
                    endpoint.clone_from(&self.endpoint);
                }
            }
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Passage JSONL (as written by `ingest`).
    #[arg(long)]
    passages: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    /// Candidates per passage (K).
    #[arg(long, default_value_t = 20)]
    num_samples: usize,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, default_value_t = 64)]
    max_output_tokens: usize,
    #[arg(long)]
    target_language: Option<String>,
    #[arg(long, env = "QAFORGE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct FilterFlags {
    /// Candidates to keep per passage (m).
    #[arg(long, default_value_t = 10)]
    keep: usize,
    /// Candidates generated per passage (K).
    #[arg(long, default_value_t = 20)]
    per_passage: usize,
    /// Keep answers that do not occur in the passage.
    #[arg(long)]
    allow_non_extractive: bool,
    #[arg(long)]
    no_dedup: bool,
    /// Rank by log-probability per token instead of total log-probability.
    #[arg(long)]
    length_normalize: bool,
}

impl FilterFlags {
    fn config(&self) -> FilterConfig {
        FilterConfig {
            samples_per_passage: self.per_passage,
            keep_per_passage: self.keep,
            require_extractive: !self.allow_non_extractive,
            dedup: !self.no_dedup,
            length_normalize: self.length_normalize,
        }
    }
}

#[derive(Args)]
struct FilterArgs {
    /// Candidate JSONL: `{passage_id, text, lm_score}` per line.
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long)]
    passages: PathBuf,
    #[command(flatten)]
    flags: FilterFlags,
    /// Where to write the aggregated filter statistics (JSON).
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EmitArgs {
    /// Synthetic example JSONL (as written by `filter`).
    #[arg(long)]
    examples: PathBuf,
    #[arg(long)]
    passages: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct MixArgs {
    #[arg(long, num_args = 1..)]
    synthetic: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    gold: Vec<PathBuf>,
    #[arg(long)]
    synthetic_epochs: Option<u32>,
    #[arg(long)]
    synthetic_batch_size: Option<u32>,
    #[arg(long)]
    synthetic_learning_rate: Option<f64>,
    #[arg(long)]
    gold_epochs: Option<u32>,
    #[arg(long)]
    gold_batch_size: Option<u32>,
    #[arg(long)]
    gold_learning_rate: Option<f64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// JSON object mapping qa id to predicted answer text.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, default_value = "squad")]
    mode: String,
    #[arg(long, default_value = "en")]
    language: String,
    /// Profile table replacing the built-in one (mlqa mode).
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Score questions without a prediction as 0 instead of failing.
    #[arg(long)]
    missing_as_zero: bool,
    /// Include per-question scores in the output.
    #[arg(long)]
    per_example: bool,
}

#[derive(Args)]
struct BleuArgs {
    /// One hypothesis sentence per line.
    #[arg(long)]
    hyp: PathBuf,
    /// One reference sentence per line, aligned with `--hyp`.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Selects tokenization (per Han character for zh).
    #[arg(long, default_value = "en")]
    language: String,
    #[arg(long, default_value_t = 4)]
    max_n: usize,
}

#[derive(Args)]
struct RunArgs {
    /// TOML pipeline configuration; flags and environment override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    language: Option<String>,
    #[arg(long)]
    min_tokens: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, env = "QAFORGE_SEED")]
    seed: Option<u64>,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long)]
    keep: Option<usize>,
    #[arg(long)]
    per_passage: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    max_output_tokens: Option<usize>,
    #[arg(long)]
    target_language: Option<String>,
    #[arg(long)]
    length_normalize: bool,
    #[arg(long)]
    allow_non_extractive: bool,
    #[arg(long)]
    no_dedup: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Continue from the checkpoint of an aborted run.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// `report.json` written by `run`.
    #[arg(long)]
    report: PathBuf,
}

enum CliError {
    Usage(String),
    Data(String),
    Transport(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Transport(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Transport(m) => m,
        }
    }
}

impl From<StageError> for CliError {
    fn from(e: StageError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<GeneratorError> for CliError {
    fn from(e: GeneratorError) -> Self {
        match e {
            GeneratorError::Transport(_) => Self::Transport(e.to_string()),
            GeneratorError::InvalidRequest(_) | GeneratorError::Config(_) => {
                Self::Usage(e.to_string())
            }
            GeneratorError::EmptyField(_) => Self::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_transport() {
            Self::Transport(e.to_string())
        } else if matches!(*e.source, StageError::Config(_)) {
            Self::Usage(e.to_string())
        } else {
            Self::Data(e.to_string())
        }
    }
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Generate(a) => generate(a),
        Command::Filter(a) => filter(a),
        Command::Emit(a) => emit(a),
        Command::Mix(a) => mix(a),
        Command::Eval(a) => eval(a),
        Command::Bleu(a) => bleu(a),
        Command::Run(a) => run(a),
        Command::Stats(a) => stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Reads a passage JSONL file, failing on the first bad record.
fn load_passages(path: &Path) -> Result<Vec<Passage>, CliError> {
    let file = File::open(path).map_err(|e| data_err(path, e))?;
    corpus::parse_passage_stream(BufReader::new(file))
        .collect::<Result<_, _>>()
        .map_err(|e| data_err(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| data_err(path, e))
}

fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let bounds = LengthBounds::new(a.min_tokens, a.max_tokens)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if a.sample == Some(0) {
        return Err(CliError::Usage("--sample must be >= 1".into()));
    }
    let file = File::open(&a.input).map_err(|e| data_err(&a.input, e))?;
    let mut stream = corpus::parse_passage_stream(BufReader::new(file));
    let mut passages = Vec::new();
    let mut other_language = 0;
    for item in &mut stream {
        match item {
            Ok(p) if p.language() == a.language => passages.push(p),
            Ok(_) => other_language += 1,
            Err(e) => eprintln!("skipped {}", e),
        }
    }
    let ingested = passages.len();
    let kept: Vec<Passage> = corpus::filter_by_length(passages, bounds).collect();
    let length_kept = kept.len();
    let mut sampled = match a.sample {
        Some(n) => corpus::sample_passages(&kept, n, a.seed),
        None => kept,
    };
    sampled.sort_by(|x, y| x.id().cmp(y.id()));
    write_jsonl(&a.output, &sampled)?;
    eprintln!(
        "ingested {ingested}, length-kept {length_kept}, sampled {}, rejected {}, other language {other_language}",
        sampled.len(),
        stream.error_count()
    );
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let backend = a
        .backend
        .explicit()?
        .ok_or_else(|| CliError::Usage("--backend reference|remote is required".into()))?;
    let generator = pipeline::build_generator(&backend)?;
    let passages = load_passages(&a.passages)?;
    let template = |text: &str, language: &str| GenerationRequest {
        num_samples: a.num_samples,
        top_k: a.top_k,
        max_output_tokens: a.max_output_tokens,
        target_language: a.target_language.clone(),
        ..GenerationRequest::new(text, language)
    };
    template("", "").validate()?;

    let per_passage: Vec<Vec<CandidateRecord>> = passages
        .par_iter()
        .map(|p| {
            let cands = generator.generate(
                &template(p.text(), p.language()),
                derive_seed(a.seed, p.id()),
            )?;
            Ok(cands
                .into_iter()
                .map(|c| CandidateRecord {
                    passage_id: p.id().to_owned(),
                    text: c.text,
                    lm_score: c.lm_score,
                })
                .collect())
        })
        .collect::<Result<_, GeneratorError>>()?;
    let records: Vec<CandidateRecord> = per_passage.into_iter().flatten().collect();
    write_jsonl(&a.output, &records)?;
    eprintln!(
        "{} candidates for {} passages",
        records.len(),
        passages.len()
    );
    Ok(())
}

fn filter(a: FilterArgs) -> Result<(), CliError> {
    let config = a.flags.config();
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let passages: HashMap<String, Passage> = load_passages(&a.passages)?
        .into_iter()
        .map(|p| (p.id().to_owned(), p))
        .collect();
    let records: Vec<CandidateRecord> = read_jsonl(&a.candidates)?;

    let mut grouped: BTreeMap<&str, Vec<Candidate>> = BTreeMap::new();
    for r in &records {
        if !passages.contains_key(&r.passage_id) {
            return Err(data_err(
                &a.candidates,
                format!("candidate for unknown passage {:?}", r.passage_id),
            ));
        }
        grouped
            .entry(r.passage_id.as_str())
            .or_default()
            .push(Candidate {
                text: r.text.clone(),
                lm_score: r.lm_score,
            });
    }
    if let Some((id, c)) = grouped
        .iter()
        .find(|(_, c)| c.len() > config.samples_per_passage)
    {
        return Err(data_err(
            &a.candidates,
            format!(
                "passage {id:?} has {} candidates, more than --per-passage {}",
                c.len(),
                config.samples_per_passage
            ),
        ));
    }

    let mut stats = FilterStats::default();
    let mut examples: Vec<SyntheticExample> = Vec::new();
    for (id, cands) in &grouped {
        let (kept, s) = run_filter_pipeline(&passages[*id], cands, &config);
        stats += s;
        examples.extend(kept);
    }
    write_jsonl(&a.output, &examples)?;
    if let Some(path) = &a.stats {
        let json = serde_json::to_vec_pretty(&stats).expect("stats serialize");
        write_file(path, &json)?;
    }
    eprintln!(
        "candidates {}, parsed {}, extractive {}, deduped {}, kept {}",
        stats.candidates, stats.parsed, stats.extractive, stats.deduped, stats.kept
    );
    Ok(())
}

fn emit(a: EmitArgs) -> Result<(), CliError> {
    let passages = load_passages(&a.passages)?;
    let examples: Vec<SyntheticExample> = read_jsonl(&a.examples)?;
    let squad = dataset::emit_squad(&examples, passages.as_slice())
        .map_err(|e| data_err(&a.examples, e))?;
    write_file(&a.output, &squad.to_bytes())?;
    eprintln!("{} questions written", squad.qa_count());
    Ok(())
}

fn mix(a: MixArgs) -> Result<(), CliError> {
    let overrides = MixOverrides {
        synthetic: StageOverrides {
            epochs: a.synthetic_epochs,
            batch_size: a.synthetic_batch_size,
            learning_rate: a.synthetic_learning_rate,
        },
        gold: StageOverrides {
            epochs: a.gold_epochs,
            batch_size: a.gold_batch_size,
            learning_rate: a.gold_learning_rate,
        },
    };
    let manifest = build_training_mix(&a.synthetic, &a.gold, &overrides)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut json = manifest.to_json_pretty();
    json.push('\n');
    write_file(&a.output, json.as_bytes())
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let mode: EvalMode = a
        .mode
        .parse()
        .map_err(|e: metrics::MetricsError| CliError::Usage(e.to_string()))?;
    let table = match &a.profiles {
        Some(path) => {
            let s = fs::read_to_string(path).map_err(|e| data_err(path, e))?;
            ProfileTable::from_json(&s).map_err(|e| data_err(path, e))?
        }
        None => ProfileTable::builtin(),
    };
    let profile = table
        .profile(mode, &a.language)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let squad = read_squad_file(&a.dataset)?;
    let preds_text = fs::read_to_string(&a.predictions).map_err(|e| data_err(&a.predictions, e))?;
    let predictions: HashMap<String, String> =
        serde_json::from_str(&preds_text).map_err(|e| data_err(&a.predictions, e))?;
    let options = EvalOptions {
        missing_as_zero: a.missing_as_zero,
    };
    let mut report = metrics::evaluate_dataset(&predictions, &squad, &profile, options)
        .map_err(|e| data_err(&a.predictions, e))?;
    if !a.per_example {
        report.per_example.clear();
        let json = serde_json::json!({
            "exact_match": report.exact_match,
            "f1": report.f1,
            "total": report.total,
        });
        println!("{json}");
    } else {
        println!(
            "{}",
            serde_json::to_string(&report).expect("report serializes")
        );
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let s = fs::read_to_string(path).map_err(|e| data_err(path, e))?;
    Ok(s.lines().map(str::to_owned).collect())
}

fn bleu(a: BleuArgs) -> Result<(), CliError> {
    let tokenize = |lines: Vec<String>| -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| metrics::bleu_tokens(l, &a.language))
            .collect()
    };
    let hyps = tokenize(read_lines(&a.hyp)?);
    let refs = tokenize(read_lines(&a.reference)?);
    let score = metrics::corpus_bleu(&hyps, &refs, a.max_n).map_err(|e| match e {
        metrics::MetricsError::InvalidOrder => CliError::Usage(e.to_string()),
        _ => CliError::Data(e.to_string()),
    })?;
    println!(
        "{}",
        serde_json::to_string(&score).expect("score serializes")
    );
    Ok(())
}

fn run(a: RunArgs) -> Result<(), CliError> {
    let mut config = match &a.config {
        Some(path) => PipelineConfig::load(path)?,
        None => {
            let missing =
                |flag: &str| CliError::Usage(format!("{flag} is required without --config"));
            PipelineConfig::new(
                a.input.clone().ok_or_else(|| missing("--input"))?,
                a.output_dir
                    .clone()
                    .ok_or_else(|| missing("--output-dir"))?,
                a.language.clone().ok_or_else(|| missing("--language"))?,
                a.backend.explicit()?.ok_or_else(|| missing("--backend"))?,
            )
        }
    };
    if let Some(v) = &a.input {
        config.input.clone_from(v);
    }
    if let Some(v) = &a.output_dir {
        config.output_dir.clone_from(v);
    }
    if let Some(v) = &a.language {
        config.language.clone_from(v);
    }
    if let Some(b) = a.backend.explicit()? {
        config.backend = b;
    } else {
        a.backend.patch(&mut config.backend);
    }
    config.min_tokens = a.min_tokens.unwrap_or(config.min_tokens);
    config.max_tokens = a.max_tokens.unwrap_or(config.max_tokens);
    config.sample_n = a.sample.or(config.sample_n);
    config.seed = a.seed.unwrap_or(config.seed);
    config.filter.keep_per_passage = a.keep.unwrap_or(config.filter.keep_per_passage);
    config.filter.samples_per_passage = a.per_passage.unwrap_or(config.filter.samples_per_passage);
    config.filter.length_normalize |= a.length_normalize;
    config.filter.require_extractive &= !a.allow_non_extractive;
    config.filter.dedup &= !a.no_dedup;
    config.generation.top_k = a.top_k.unwrap_or(config.generation.top_k);
    config.generation.max_output_tokens = a
        .max_output_tokens
        .unwrap_or(config.generation.max_output_tokens);
    if a.target_language.is_some() {
        config
            .generation
            .target_language
            .clone_from(&a.target_language);
    }
    config.workers = a.workers.or(config.workers);
    config.resume |= a.resume;
    config.validate().map_err(CliError::Usage)?;

    let report = pipeline::run_pipeline(&config)?;
    print!("{}", stats_summary(&report));
    let _ = io::stdout().flush();
    Ok(())
}

fn stats(a: StatsArgs) -> Result<(), CliError> {
    let s = fs::read_to_string(&a.report).map_err(|e| data_err(&a.report, e))?;
    let report: PipelineReport = serde_json::from_str(&s).map_err(|e| data_err(&a.report, e))?;
    print!("{}", stats_summary(&report));
    Ok(())
}
