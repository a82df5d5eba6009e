//! End-to-end runs: ingest → length filter → sample → generate → filter →
//! emit, with per-passage checkpointing.
//!
//! Passages are processed on a bounded rayon pool. Each passage draws its
//! randomness from `derive_seed(seed, passage_id)` and the merged dataset is
//! ordered by passage id, so the emitted SQuAD file does not depend on the
//! worker count, the schedule, or whether the run was resumed.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{self, CorpusError, LengthBounds, Passage, RecordError};
use crate::dataset::{self, EmitError, ReadError, SquadDataset};
use crate::generator::{
    derive_seed, train_reference, GenerationRequest, Generator, GeneratorError, ReferenceConfig,
    RemoteGenerator, TrainingExample,
};
use crate::parsefilter::{run_filter_pipeline, FilterConfig, FilterStats, SyntheticExample};

pub const DATASET_FILE: &str = "dataset.json";
pub const REPORT_FILE: &str = "report.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.jsonl";
pub const FAILURE_FILE: &str = "failure.json";

/// How many rejected-record messages a report keeps verbatim.
const MAX_RECORDED_REJECTIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// In-process n-gram backend trained on a SQuAD-format file.
    Reference {
        training_data: PathBuf,
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_smoothing")]
        smoothing: f64,
    },
    /// HTTP backend. Without an endpoint, `QAFORGE_GENERATOR_URL` is used.
    Remote {
        #[serde(default)]
        endpoint: Option<String>,
    },
}

fn default_order() -> usize {
    ReferenceConfig::default().order
}

fn default_smoothing() -> f64 {
    ReferenceConfig::default().smoothing
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub top_k: usize,
    pub max_output_tokens: usize,
    /// Ask for questions in this language (cross-lingual generation).
    pub target_language: Option<String>,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        let req = GenerationRequest::new("", "");
        Self {
            top_k: req.top_k,
            max_output_tokens: req.max_output_tokens,
            target_language: None,
        }
    }
}

/// Everything a run depends on. Loadable from a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Passage JSONL file.
    pub input: PathBuf,
    pub output_dir: PathBuf,
    /// Only passages with this language code are ingested.
    pub language: String,
    #[serde(default = "default_min_tokens")]
    pub min_tokens: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    /// Passages to sample after length filtering; all of them when unset.
    #[serde(default)]
    pub sample_n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub backend: BackendConfig,
    #[serde(default)]
    pub generation: GenerationSettings,
    #[serde(default)]
    pub filter: FilterConfig,
    /// Worker threads; rayon's default when unset.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Continue from a checkpoint left in `output_dir` by an aborted run.
    #[serde(default)]
    pub resume: bool,
}

fn default_min_tokens() -> usize {
    LengthBounds::default().min()
}

fn default_max_tokens() -> usize {
    LengthBounds::default().max()
}

impl PipelineConfig {
    /// A config with default knobs for the given paths and backend.
    pub fn new(
        input: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
        language: impl Into<String>,
        backend: BackendConfig,
    ) -> Self {
        Self {
            input: input.into(),
            output_dir: output_dir.into(),
            language: language.into(),
            min_tokens: default_min_tokens(),
            max_tokens: default_max_tokens(),
            sample_n: None,
            seed: 0,
            backend,
            generation: GenerationSettings::default(),
            filter: FilterConfig::default(),
            workers: None,
            resume: false,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, String> {
        toml::from_str(s).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let s = fs::read_to_string(path)
            .map_err(|e| PipelineError::config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
            .map_err(|e| PipelineError::config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.language.trim().is_empty() {
            return Err("language must not be empty".into());
        }
        LengthBounds::new(self.min_tokens, self.max_tokens).map_err(|e| e.to_string())?;
        if self.sample_n == Some(0) {
            return Err("sample_n must be >= 1".into());
        }
        if self.workers == Some(0) {
            return Err("workers must be >= 1".into());
        }
        self.filter.validate().map_err(|e| e.to_string())?;
        self.request_template(String::new())
            .validate()
            .map_err(|e| e.to_string())?;
        if let BackendConfig::Reference {
            order, smoothing, ..
        } = &self.backend
        {
            if *order == 0 {
                return Err("reference backend order must be >= 1".into());
            }
            if !(smoothing.is_finite() && *smoothing > 0.0) {
                return Err("reference backend smoothing must be > 0".into());
            }
        }
        Ok(())
    }

    fn bounds(&self) -> LengthBounds {
        LengthBounds::new(self.min_tokens, self.max_tokens).expect("validated")
    }

    fn request_template(&self, passage: String) -> GenerationRequest {
        GenerationRequest {
            num_samples: self.filter.samples_per_passage,
            top_k: self.generation.top_k,
            max_output_tokens: self.generation.max_output_tokens,
            target_language: self.generation.target_language.clone(),
            ..GenerationRequest::new(passage, self.language.clone())
        }
    }
}

/// Pipeline steps, as named in errors and timings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStage {
    Config,
    Ingest,
    LengthFilter,
    Sample,
    Generate,
    Filter,
    Emit,
}

impl fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Config => "config",
            Self::Ingest => "ingest",
            Self::LengthFilter => "length-filter",
            Self::Sample => "sample",
            Self::Generate => "generate",
            Self::Filter => "filter",
            Self::Emit => "emit",
        })
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error("checkpoint {}: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },
}

/// A fatal error, with what is needed to resume.
#[derive(Debug, Error)]
#[error("{stage} stage failed{}: {source}{}",
    passage_id.as_ref().map(|p| format!(" on passage {p:?}")).unwrap_or_default(),
    checkpoint.as_ref().map(|c| format!(" (checkpoint: {})", c.display())).unwrap_or_default())]
pub struct PipelineError {
    pub stage: PipelineStage,
    pub passage_id: Option<String>,
    /// Completed passages are recorded here; rerun with `resume` to continue.
    pub checkpoint: Option<PathBuf>,
    pub source: Box<StageError>,
}

impl PipelineError {
    fn new(stage: PipelineStage, source: impl Into<StageError>) -> Self {
        Self {
            stage,
            passage_id: None,
            checkpoint: None,
            source: Box::new(source.into()),
        }
    }

    fn config(message: String) -> Self {
        Self::new(PipelineStage::Config, StageError::Config(message))
    }

    fn io(stage: PipelineStage, path: &Path, source: io::Error) -> Self {
        Self::new(
            stage,
            StageError::Io {
                path: path.to_owned(),
                source,
            },
        )
    }

    pub fn is_transport(&self) -> bool {
        matches!(
            *self.source,
            StageError::Generator(GeneratorError::Transport(_))
        )
    }
}

/// Row labels of the stage funnel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountStage {
    Ingested,
    LengthKept,
    Sampled,
    Generated,
    Parsed,
    Extractive,
    Deduped,
    Kept,
    Emitted,
}

impl CountStage {
    /// The first row of each funnel. Passage counts and candidate counts
    /// are separate funnels; `generated` is K times `sampled`.
    pub fn starts_funnel(self) -> bool {
        matches!(self, Self::Ingested | Self::Generated)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Ingested => "ingested",
            Self::LengthKept => "length-kept",
            Self::Sampled => "sampled",
            Self::Generated => "generated",
            Self::Parsed => "parsed",
            Self::Extractive => "extractive",
            Self::Deduped => "deduped",
            Self::Kept => "kept",
            Self::Emitted => "emitted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: CountStage,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: PipelineStage,
    /// Wall time, except generate/filter which sum time across workers.
    pub seconds: f64,
}

/// Outcome of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub counts: Vec<StageCount>,
    #[serde(default)]
    pub filter: FilterStats,
    /// Input lines rejected during ingestion.
    #[serde(default)]
    pub rejected_records: usize,
    /// The first rejections, as `line N: reason`.
    #[serde(default)]
    pub rejections: Vec<String>,
    /// Well-formed records skipped for having another language.
    #[serde(default)]
    pub other_language: usize,
    /// Passages whose results came from a checkpoint.
    #[serde(default)]
    pub resumed_passages: usize,
    #[serde(default)]
    pub timings: Vec<StageTiming>,
}

impl PipelineReport {
    pub fn count(&self, stage: CountStage) -> Option<usize> {
        self.counts
            .iter()
            .find(|c| c.stage == stage)
            .map(|c| c.count)
    }

    /// True when every row is at most the row above it in its funnel.
    pub fn funnel_is_monotone(&self) -> bool {
        self.counts
            .windows(2)
            .all(|w| w[1].stage.starts_funnel() || w[1].count <= w[0].count)
    }
}

/// Renders the stage funnel with drop percentages relative to the row
/// above. An empty report gives just the header.
pub fn stats_summary(report: &PipelineReport) -> String {
    let mut out = format!("{:<12} {:>10} {:>8}\n", "stage", "count", "drop");
    let mut prev: Option<usize> = None;
    for row in &report.counts {
        let drop = match prev {
            Some(p) if !row.stage.starts_funnel() => {
                if p == 0 {
                    "0.0%".to_owned()
                } else {
                    format!("{:.1}%", 100.0 * (p - row.count.min(p)) as f64 / p as f64)
                }
            }
            _ => "-".to_owned(),
        };
        let _ = writeln!(
            out,
            "{:<12} {:>10} {:>8}",
            row.stage.label(),
            row.count,
            drop
        );
        prev = Some(row.count);
    }
    out
}

/// Reads a SQuAD file as generator training data, one example per question
/// (its first answer).
pub fn training_examples_from_squad(dataset: &SquadDataset) -> Vec<TrainingExample> {
    dataset
        .qas()
        .filter_map(|(para, qa)| {
            qa.answers.first().map(|a| {
                TrainingExample::new(para.context.clone(), qa.question.clone(), a.text.clone())
            })
        })
        .collect()
}

pub fn read_squad_file(path: &Path) -> Result<SquadDataset, StageError> {
    let file = File::open(path).map_err(|source| StageError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(dataset::read_squad(BufReader::new(file))?.dataset)
}

/// Builds the configured backend.
pub fn build_generator(backend: &BackendConfig) -> Result<Box<dyn Generator>, PipelineError> {
    match backend {
        BackendConfig::Reference {
            training_data,
            order,
            smoothing,
        } => {
            let squad = read_squad_file(training_data)
                .map_err(|e| PipelineError::new(PipelineStage::Config, e))?;
            let examples = training_examples_from_squad(&squad);
            let config = ReferenceConfig {
                order: *order,
                smoothing: *smoothing,
            };
            let model = train_reference(&examples, config)
                .map_err(|e| PipelineError::new(PipelineStage::Config, e))?;
            Ok(Box::new(model))
        }
        BackendConfig::Remote { endpoint } => {
            let remote = match endpoint {
                Some(url) => RemoteGenerator::new(url),
                None => RemoteGenerator::from_env().ok_or_else(|| {
                    PipelineError::config(format!(
                        "remote backend needs an endpoint or {}",
                        crate::generator::GENERATOR_URL_ENV
                    ))
                })?,
            };
            Ok(Box::new(remote))
        }
    }
}

/// Runs the whole pipeline with the backend named in `config`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    config.validate().map_err(PipelineError::config)?;
    let generator = build_generator(&config.backend)?;
    run_pipeline_with(config, generator.as_ref())
}

/// Runs the pipeline with a caller-supplied generator; `config.backend` only
/// contributes to the checkpoint fingerprint.
///
/// Writes `dataset.json` and `report.json` into `config.output_dir`. On a
/// fatal error the checkpoint file and `failure.json` are left behind.
pub fn run_pipeline_with(
    config: &PipelineConfig,
    generator: &dyn Generator,
) -> Result<PipelineReport, PipelineError> {
    config.validate().map_err(PipelineError::config)?;
    let out_dir = &config.output_dir;
    fs::create_dir_all(out_dir)
        .map_err(|e| PipelineError::io(PipelineStage::Config, out_dir, e))?;

    let result = run_stages(config, generator);
    if let Err(err) = &result {
        write_failure(out_dir, err);
    }
    result
}

fn run_stages(
    config: &PipelineConfig,
    generator: &dyn Generator,
) -> Result<PipelineReport, PipelineError> {
    let mut report = PipelineReport::default();
    let mut timer = Instant::now();
    let mut lap = |report: &mut PipelineReport, stage| {
        report.timings.push(StageTiming {
            stage,
            seconds: timer.elapsed().as_secs_f64(),
        });
        timer = Instant::now();
    };

    // ingest
    let input = File::open(&config.input)
        .map_err(|e| PipelineError::io(PipelineStage::Ingest, &config.input, e))?;
    let mut passages = Vec::new();
    let mut stream = corpus::parse_passage_stream(BufReader::new(input));
    for item in &mut stream {
        match item {
            Ok(p) if p.language() == config.language => passages.push(p),
            Ok(_) => report.other_language += 1,
            Err(err) => record_rejection(&mut report, &err),
        }
    }
    report.rejected_records = stream.error_count();
    push_count(&mut report, CountStage::Ingested, passages.len());
    lap(&mut report, PipelineStage::Ingest);

    let kept: Vec<Passage> = corpus::filter_by_length(passages, config.bounds()).collect();
    push_count(&mut report, CountStage::LengthKept, kept.len());
    lap(&mut report, PipelineStage::LengthFilter);

    let mut sampled = match config.sample_n {
        Some(n) => corpus::sample_passages(&kept, n, config.seed),
        None => kept,
    };
    sampled.sort_by(|a, b| a.id().cmp(b.id()));
    push_count(&mut report, CountStage::Sampled, sampled.len());
    lap(&mut report, PipelineStage::Sample);

    let outcome = generate_and_filter(config, generator, &sampled)?;
    report.resumed_passages = outcome.resumed;
    report.filter = outcome.stats;
    for (stage, count) in [
        (CountStage::Generated, outcome.stats.candidates),
        (CountStage::Parsed, outcome.stats.parsed),
        (CountStage::Extractive, outcome.stats.extractive),
        (CountStage::Deduped, outcome.stats.deduped),
        (CountStage::Kept, outcome.stats.kept),
    ] {
        push_count(&mut report, stage, count);
    }
    report.timings.push(StageTiming {
        stage: PipelineStage::Generate,
        seconds: outcome.generate_time.as_secs_f64(),
    });
    report.timings.push(StageTiming {
        stage: PipelineStage::Filter,
        seconds: outcome.filter_time.as_secs_f64(),
    });
    timer = Instant::now();

    // emit: examples without a located span cannot be written as SQuAD
    let emittable: Vec<SyntheticExample> = outcome
        .examples
        .into_iter()
        .filter(|e| e.answer_start.is_some())
        .collect();
    let squad = dataset::emit_squad(&emittable, sampled.as_slice())
        .map_err(|e| PipelineError::new(PipelineStage::Emit, e))?;
    push_count(&mut report, CountStage::Emitted, squad.qa_count());
    let dataset_path = config.output_dir.join(DATASET_FILE);
    fs::write(&dataset_path, squad.to_bytes())
        .map_err(|e| PipelineError::io(PipelineStage::Emit, &dataset_path, e))?;
    report.timings.push(StageTiming {
        stage: PipelineStage::Emit,
        seconds: timer.elapsed().as_secs_f64(),
    });

    let report_path = config.output_dir.join(REPORT_FILE);
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    fs::write(&report_path, json)
        .map_err(|e| PipelineError::io(PipelineStage::Emit, &report_path, e))?;

    let checkpoint = config.output_dir.join(CHECKPOINT_FILE);
    if checkpoint.exists() {
        fs::remove_file(&checkpoint)
            .map_err(|e| PipelineError::io(PipelineStage::Emit, &checkpoint, e))?;
    }
    let _ = fs::remove_file(config.output_dir.join(FAILURE_FILE));
    Ok(report)
}

fn push_count(report: &mut PipelineReport, stage: CountStage, count: usize) {
    report.counts.push(StageCount { stage, count });
}

fn record_rejection(report: &mut PipelineReport, err: &RecordError) {
    if report.rejections.len() < MAX_RECORDED_REJECTIONS {
        report.rejections.push(err.to_string());
    }
}

fn write_failure(out_dir: &Path, err: &PipelineError) {
    #[derive(Serialize)]
    struct Failure<'a> {
        stage: PipelineStage,
        passage_id: Option<&'a str>,
        checkpoint: Option<&'a Path>,
        error: String,
    }
    let failure = Failure {
        stage: err.stage,
        passage_id: err.passage_id.as_deref(),
        checkpoint: err.checkpoint.as_deref(),
        error: err.source.to_string(),
    };
    let json = serde_json::to_vec_pretty(&failure).expect("failure record serializes");
    let _ = fs::write(out_dir.join(FAILURE_FILE), json);
}

struct Outcome {
    examples: Vec<SyntheticExample>,
    stats: FilterStats,
    resumed: usize,
    generate_time: Duration,
    filter_time: Duration,
}

/// Per-passage result as stored in the checkpoint file.
#[derive(Debug, Serialize, Deserialize)]
struct PassageResult {
    passage_id: String,
    examples: Vec<SyntheticExample>,
    stats: FilterStats,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    fingerprint: String,
}

fn generate_and_filter(
    config: &PipelineConfig,
    generator: &dyn Generator,
    passages: &[Passage],
) -> Result<Outcome, PipelineError> {
    let path = config.output_dir.join(CHECKPOINT_FILE);
    let fingerprint = fingerprint(config)?;
    let mut done = if config.resume && path.exists() {
        load_checkpoint(&path, &fingerprint)?
    } else {
        BTreeMap::new()
    };
    let wanted: HashSet<&str> = passages.iter().map(Passage::id).collect();
    done.retain(|id, _| wanted.contains(id.as_str()));
    let resumed = done.len();

    let writer = open_checkpoint(&path, &fingerprint, &done)?;
    let writer = Mutex::new(writer);
    let abort = AtomicBool::new(false);
    let generate_nanos = AtomicU64::new(0);
    let filter_nanos = AtomicU64::new(0);

    let todo: Vec<&Passage> = passages
        .iter()
        .filter(|p| !done.contains_key(p.id()))
        .collect();
    let work = |p: &Passage| -> Option<Result<PassageResult, PipelineError>> {
        if abort.load(Ordering::Relaxed) {
            return None;
        }
        let t = Instant::now();
        let request = config.request_template(p.text().to_owned());
        let candidates = match generator.generate(&request, derive_seed(config.seed, p.id())) {
            Ok(c) => c,
            Err(e) => {
                abort.store(true, Ordering::Relaxed);
                let mut err = PipelineError::new(PipelineStage::Generate, e);
                err.passage_id = Some(p.id().to_owned());
                return Some(Err(err));
            }
        };
        generate_nanos.fetch_add(t.elapsed().as_nanos() as u64, Ordering::Relaxed);

        let t = Instant::now();
        let (examples, stats) = run_filter_pipeline(p, &candidates, &config.filter);
        filter_nanos.fetch_add(t.elapsed().as_nanos() as u64, Ordering::Relaxed);

        let result = PassageResult {
            passage_id: p.id().to_owned(),
            examples,
            stats,
        };
        let mut line = serde_json::to_string(&result).expect("passage result serializes");
        line.push('\n');
        let mut w = writer.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = w.write_all(line.as_bytes()).and_then(|()| w.flush()) {
            abort.store(true, Ordering::Relaxed);
            return Some(Err(PipelineError::io(PipelineStage::Filter, &path, e)));
        }
        Some(Ok(result))
    };

    let results: Vec<Option<Result<PassageResult, PipelineError>>> = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PipelineError::config(format!("worker pool: {e}")))?
            .install(|| todo.par_iter().map(|p| work(p)).collect()),
        None => todo.par_iter().map(|p| work(p)).collect(),
    };

    // the first failure in passage-id order is the one reported
    let mut failure = None;
    for r in results.into_iter().flatten() {
        match r {
            Ok(res) => {
                done.insert(res.passage_id.clone(), res);
            }
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    }
    if let Some(mut err) = failure {
        err.checkpoint = Some(path);
        return Err(err);
    }

    let mut stats = FilterStats::default();
    let mut examples = Vec::new();
    for res in done.into_values() {
        stats += res.stats;
        examples.extend(res.examples);
    }
    Ok(Outcome {
        examples,
        stats,
        resumed,
        generate_time: Duration::from_nanos(generate_nanos.into_inner()),
        filter_time: Duration::from_nanos(filter_nanos.into_inner()),
    })
}

/// Hash of every input that influences per-passage results.
fn fingerprint(config: &PipelineConfig) -> Result<String, PipelineError> {
    #[derive(Serialize)]
    struct Key<'a> {
        language: &'a str,
        min_tokens: usize,
        max_tokens: usize,
        sample_n: Option<usize>,
        seed: u64,
        backend: &'a BackendConfig,
        generation: &'a GenerationSettings,
        filter: &'a FilterConfig,
    }
    let key = Key {
        language: &config.language,
        min_tokens: config.min_tokens,
        max_tokens: config.max_tokens,
        sample_n: config.sample_n,
        seed: config.seed,
        backend: &config.backend,
        generation: &config.generation,
        filter: &config.filter,
    };
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&key).expect("config serializes"));
    let mut files = vec![config.input.as_path()];
    if let BackendConfig::Reference { training_data, .. } = &config.backend {
        files.push(training_data);
    }
    for file in files {
        let bytes =
            fs::read(file).map_err(|e| PipelineError::io(PipelineStage::Ingest, file, e))?;
        hasher.update(Sha256::digest(&bytes));
    }
    Ok(hex::encode(hasher.finalize()))
}

fn checkpoint_error(path: &Path, message: String) -> PipelineError {
    PipelineError::new(
        PipelineStage::Config,
        StageError::Checkpoint {
            path: path.to_owned(),
            message,
        },
    )
}

/// Loads completed passages. A torn final line (crash mid-write) is ignored.
fn load_checkpoint(
    path: &Path,
    fingerprint: &str,
) -> Result<BTreeMap<String, PassageResult>, PipelineError> {
    let file = File::open(path).map_err(|e| PipelineError::io(PipelineStage::Config, path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header: CheckpointHeader = match lines.next() {
        Some(Ok(line)) => serde_json::from_str(&line)
            .map_err(|e| checkpoint_error(path, format!("bad header: {e}")))?,
        Some(Err(e)) => return Err(PipelineError::io(PipelineStage::Config, path, e)),
        None => return Ok(BTreeMap::new()),
    };
    if header.fingerprint != fingerprint {
        return Err(checkpoint_error(
            path,
            "written by a run with different configuration or inputs".into(),
        ));
    }
    let lines: Vec<String> = lines
        .collect::<Result<_, _>>()
        .map_err(|e| PipelineError::io(PipelineStage::Config, path, e))?;
    let mut done = BTreeMap::new();
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str::<PassageResult>(line) {
            Ok(res) => {
                done.insert(res.passage_id.clone(), res);
            }
            Err(_) if i + 1 == lines.len() => {}
            Err(e) => return Err(checkpoint_error(path, format!("line {}: {e}", i + 2))),
        }
    }
    Ok(done)
}

/// Rewrites the checkpoint with the header and already-completed results,
/// then leaves it open for appending.
fn open_checkpoint(
    path: &Path,
    fingerprint: &str,
    done: &BTreeMap<String, PassageResult>,
) -> Result<BufWriter<File>, PipelineError> {
    let io_err = |e| PipelineError::io(PipelineStage::Config, path, e);
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(path)
        .map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let header = CheckpointHeader {
        fingerprint: fingerprint.to_owned(),
    };
    serde_json::to_writer(&mut w, &header)
        .map_err(io::Error::from)
        .map_err(io_err)?;
    w.write_all(b"\n").map_err(io_err)?;
    for res in done.values() {
        serde_json::to_writer(&mut w, res)
            .map_err(io::Error::from)
            .map_err(io_err)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(w)
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StageError> {
    let io_err = |source| StageError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| {
            io_err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("line {}: {e}", i + 1),
            ))
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Writes one JSON value per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StageError> {
    let io_err = |source| StageError::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for item in items {
        serde_json::to_writer(&mut w, item)
            .map_err(io::Error::from)
            .map_err(io_err)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// A generator output line bound to its passage, as exchanged between the
/// `generate` and `filter` commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub passage_id: String,
    pub text: String,
    pub lm_score: f64,
}
