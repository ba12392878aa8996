//! End-to-end pipelines: dataset -> prompts -> completions -> parses ->
//! reports, plus the detector baseline.
//!
//! Every stage boundary has a JSON Lines form so the CLI can run the stages
//! one at a time.

use crate::ecg::{self, EcgQuery, WindowMode, QUERY_RATE};
use crate::figure::{self, FigureError};
use crate::llm::{self, Backend, ChatRequest, Clock, LlmError, ModelResponse, RetryPolicy, Usage};
use crate::metrics::{self, ActivityInstance, EcgInstance, EvalReport, MetricError, TaskKind};
use crate::parse::{self, ParsedRow};
use crate::prompt::{self, PromptError, PromptScheme, RenderedPrompt, Task};
use crate::qrs::{self, DetectorKind, QrsError};
use crate::sensor::{self, FieldMap, GroundTruth, SensorError};
use crate::wfdb::{self, EcgRecord, WfdbError};
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DEFAULT_MODEL: &str = "gpt-4-0613";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}, line {line}: {message}")]
    Json { path: PathBuf, line: usize, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("instance {0} has no ground truth")]
    MissingTruth(String),
    #[error(transparent)]
    Wfdb(#[from] WfdbError),
    #[error(transparent)]
    Ecg(#[from] ecg::EcgError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Figure(#[from] FigureError),
    #[error(transparent)]
    Qrs(#[from] QrsError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl ExperimentError {
    /// True for errors raised by a completion backend.
    pub fn is_backend(&self) -> bool {
        matches!(self, ExperimentError::Llm(_))
    }
}

type Result<T> = std::result::Result<T, ExperimentError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// Reads a JSON Lines file, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| ExperimentError::Json { path: path.to_path_buf(), line: n + 1, message: e.to_string() })?;
        out.push(item);
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("items serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_file(path, to_jsonl(items).as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

/// Pretty JSON with a trailing newline.
pub fn report_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- datasets

/// Activity instance after textualization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldsLine {
    pub instance_id: String,
    pub fields: FieldMap,
    pub labels: GroundTruth,
}

pub fn textualize_snapshots(path: &Path) -> Result<Vec<FieldsLine>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let records = sensor::read_snapshots(BufReader::new(file))?;
    records
        .into_iter()
        .map(|(id, rec)| {
            let snap = rec.to_snapshot()?;
            Ok(FieldsLine { instance_id: id, fields: sensor::textualize(&snap), labels: snap.labels })
        })
        .collect()
}

/// A query as stored between stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLine {
    pub instance_id: String,
    #[serde(flatten)]
    pub query: EcgQuery,
}

pub fn query_id(q: &EcgQuery) -> String {
    format!("{}@{}+{}s", q.record, q.start, q.window_s)
}

pub fn load_records(dir: &Path, records: &[String], annotator: &str, channel: &str) -> Result<Vec<EcgRecord>> {
    records.iter().map(|r| Ok(wfdb::read_record(dir, r, annotator, channel)?)).collect()
}

/// 72 Hz queries from source-rate records.
pub fn prepare_queries(
    records: &[EcgRecord],
    window_s: f64,
    mode: WindowMode,
    count: Option<usize>,
) -> Result<Vec<QueryLine>> {
    let mut out = Vec::new();
    for r in records {
        let low = ecg::downsample(r, QUERY_RATE)?;
        for q in ecg::extract_queries(&low, window_s, mode, count)? {
            out.push(QueryLine { instance_id: query_id(&q), query: q });
        }
    }
    Ok(out)
}

// ----------------------------------------------------------------- prompts

/// A rendered prompt as stored between stages. Attachments are base64 PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptLine {
    pub instance_id: String,
    pub scheme: PromptScheme,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<String>,
    pub fingerprint: String,
}

impl PromptLine {
    pub fn new(instance_id: String, p: RenderedPrompt) -> Self {
        let b64 = base64::engine::general_purpose::STANDARD;
        PromptLine {
            instance_id,
            scheme: p.scheme,
            text: p.text,
            attachments: p.attachments.iter().map(|a| b64.encode(a)).collect(),
            fingerprint: p.fingerprint,
        }
    }

    pub fn attachment_bytes(&self) -> Result<Vec<Vec<u8>>> {
        let b64 = base64::engine::general_purpose::STANDARD;
        self.attachments
            .iter()
            .map(|a| b64.decode(a).map_err(|e| ExperimentError::Config(format!("{}: bad attachment: {e}", self.instance_id))))
            .collect()
    }

    pub fn request(&self, model: &str) -> Result<ChatRequest> {
        Ok(ChatRequest::user(model, self.text.clone(), self.attachment_bytes()?))
    }
}

fn require_task(scheme: PromptScheme, tasks: &[Task]) -> Result<()> {
    if tasks.contains(&scheme.task()) {
        Ok(())
    } else {
        Err(ExperimentError::Config(format!("scheme {scheme} does not fit this input")))
    }
}

pub fn activity_prompts(scheme: PromptScheme, items: &[FieldsLine]) -> Result<Vec<PromptLine>> {
    require_task(scheme, &[Task::Activity])?;
    let template = prompt::builtin_template(scheme);
    items
        .iter()
        .map(|i| Ok(PromptLine::new(i.instance_id.clone(), prompt::render(&template, &i.fields, Vec::new())?)))
        .collect()
}

/// Text prompts carry the digits; vision prompts attach the reference
/// figure (when the scheme has one) and then the query figure.
pub fn ecg_prompts(scheme: PromptScheme, items: &[QueryLine]) -> Result<Vec<PromptLine>> {
    require_task(scheme, &[Task::Ecg, Task::EcgVision])?;
    let template = prompt::builtin_template(scheme);
    let reference = if scheme.has_reference_figure() {
        let values = prompt::reference_example_values();
        Some(figure::render_figure(&EcgQuery {
            record: "reference".into(),
            start: 0,
            window_s: values.len() as f64 / QUERY_RATE,
            truth_peaks: 0,
            truth_hr: 0.0,
            values,
            peak_positions: vec![],
        })?)
    } else {
        None
    };
    items
        .iter()
        .map(|i| {
            let rendered = if scheme.is_vision() {
                let mut attachments: Vec<Vec<u8>> = reference.iter().cloned().collect();
                attachments.push(figure::render_figure(&i.query)?);
                prompt::render(&template, &BTreeMap::new(), attachments)?
            } else {
                prompt::render_ecg(&template, &i.query.values)?
            };
            Ok(PromptLine::new(i.instance_id.clone(), rendered))
        })
        .collect()
}

// -------------------------------------------------------------- completion

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseLine {
    pub instance_id: String,
    /// Fingerprint of the request sent.
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    pub latency_ms: u64,
}

pub struct RunOptions<'a> {
    pub model: &'a str,
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub clock: &'a dyn Clock,
}

pub fn run_prompts(backend: &dyn Backend, prompts: &[PromptLine], opts: &RunOptions) -> Result<Vec<ResponseLine>> {
    let requests: Vec<ChatRequest> = prompts.iter().map(|p| p.request(opts.model)).collect::<Result<_>>()?;
    let results = llm::run_batch(backend, &requests, opts.parallelism, &opts.retry, opts.clock)?;
    Ok(prompts
        .iter()
        .zip(&requests)
        .zip(results)
        .map(|((p, req), r)| {
            let fingerprint = llm::fingerprint(req);
            match r {
                Ok(ModelResponse { text, usage, latency_ms, .. }) => ResponseLine {
                    instance_id: p.instance_id.clone(),
                    fingerprint,
                    text: Some(text),
                    error: None,
                    usage,
                    latency_ms,
                },
                Err(e) => ResponseLine {
                    instance_id: p.instance_id.clone(),
                    fingerprint,
                    text: None,
                    error: Some(e.to_string()),
                    usage: None,
                    latency_ms: 0,
                },
            }
        })
        .collect())
}

/// An instance dropped from evaluation, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub instance_id: String,
    pub stage: String,
    pub error: String,
}

/// Parses successful responses; errored ones go to the failure list.
pub fn parse_responses(task: Task, responses: &[ResponseLine]) -> (Vec<ParsedRow>, Vec<FailureEntry>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in responses {
        match &r.text {
            Some(text) => rows.push(match task {
                Task::Activity => ParsedRow::Activity { instance_id: r.instance_id.clone(), parse: parse::parse_activity(text) },
                Task::Ecg | Task::EcgVision => {
                    ParsedRow::RPeaks { instance_id: r.instance_id.clone(), parse: parse::parse_rpeaks(text) }
                }
            }),
            None => failures.push(FailureEntry {
                instance_id: r.instance_id.clone(),
                stage: "run".into(),
                error: r.error.clone().unwrap_or_else(|| "no response".into()),
            }),
        }
    }
    (rows, failures)
}

// -------------------------------------------------------------- evaluation

/// `{instance_id, location_correct}` lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub instance_id: String,
    pub location_correct: bool,
}

pub fn evaluate_activity(
    parsed: &[ParsedRow],
    truth: &[FieldsLine],
    judgments: &[Judgment],
) -> Result<EvalReport> {
    let labels: HashMap<&str, &GroundTruth> = truth.iter().map(|t| (t.instance_id.as_str(), &t.labels)).collect();
    let judged: HashMap<&str, bool> = judgments.iter().map(|j| (j.instance_id.as_str(), j.location_correct)).collect();
    let mut instances = Vec::new();
    for row in parsed {
        let ParsedRow::Activity { instance_id, parse } = row else {
            return Err(ExperimentError::Config(format!("{}: not an activity parse", row.instance_id())));
        };
        let t = labels.get(instance_id.as_str()).ok_or_else(|| ExperimentError::MissingTruth(instance_id.clone()))?;
        instances.push(ActivityInstance {
            instance_id: instance_id.clone(),
            parse: parse.clone(),
            truth: (*t).clone(),
            location_correct: judged.get(instance_id.as_str()).copied(),
        });
    }
    Ok(metrics::activity_report(instances)?)
}

pub fn evaluate_ecg(task: TaskKind, parsed: &[ParsedRow], truth: &[QueryLine]) -> Result<EvalReport> {
    let queries: HashMap<&str, &EcgQuery> = truth.iter().map(|q| (q.instance_id.as_str(), &q.query)).collect();
    let mut instances = Vec::new();
    for row in parsed {
        let ParsedRow::RPeaks { instance_id, parse } = row else {
            return Err(ExperimentError::Config(format!("{}: not an R-peak parse", row.instance_id())));
        };
        let q = queries.get(instance_id.as_str()).ok_or_else(|| ExperimentError::MissingTruth(instance_id.clone()))?;
        instances.push(EcgInstance {
            instance_id: instance_id.clone(),
            parse: parse.clone(),
            window_s: q.window_s,
            truth_peaks: q.truth_peaks,
        });
    }
    Ok(metrics::ecg_report(task, instances)?)
}

// ---------------------------------------------------------------- baseline

/// Detector MAE with each window detected on its own, at the record's rate.
/// Truth is the annotated beat count inside the window.
pub fn baseline(records: &[EcgRecord], detector: DetectorKind, window_s: f64) -> Result<EvalReport> {
    let mut instances = Vec::new();
    for r in records {
        for w in ecg::plan_windows(r.samples.len(), r.sample_rate, window_s, WindowMode::Sequential, None)? {
            let x: Vec<f64> = r.samples[w.start..w.end()].iter().map(|&v| v as f64).collect();
            let found = qrs::detect(detector, &x, r.sample_rate)?;
            instances.push(EcgInstance {
                instance_id: format!("{}@{}+{}s", r.name, w.start * r.stride, window_s),
                parse: parse::RPeakParse {
                    peaks: found.peak_indices.iter().map(|&p| p as f64).collect(),
                    hallucinated: false,
                },
                window_s,
                truth_peaks: ecg::peaks_in(&r.peak_indices, w).len(),
            });
        }
    }
    Ok(metrics::baseline_report(detector.as_str(), window_s, instances)?)
}

/// MAE summary without per-window rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub detector: String,
    pub window_s: f64,
    pub fs: f64,
    pub n_windows: usize,
    pub mae_bpm: f64,
}

pub fn baseline_matrix(records: &[EcgRecord], detectors: &[DetectorKind], windows: &[f64]) -> Result<Vec<BaselineRow>> {
    let fs = records.first().map_or(0.0, |r| r.sample_rate);
    let mut rows = Vec::new();
    for &d in detectors {
        for &w in windows {
            let r = baseline(records, d, w)?;
            rows.push(BaselineRow {
                detector: d.as_str().into(),
                window_s: w,
                fs,
                n_windows: r.n_instances,
                mae_bpm: r.mae_bpm.unwrap_or(f64::NAN),
            });
        }
    }
    Ok(rows)
}

// ------------------------------------------------------------- experiments

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKindConfig {
    Replay,
    Record,
    Live,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKindConfig,
    #[serde(default)]
    pub store: Option<PathBuf>,
    #[serde(default)]
    pub api_base: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Activity snapshots (JSON Lines).
    #[serde(default)]
    pub snapshots: Option<PathBuf>,
    #[serde(default)]
    pub judgments: Option<PathBuf>,
    /// WFDB directory for ECG tasks.
    #[serde(default)]
    pub wfdb_dir: Option<PathBuf>,
    #[serde(default)]
    pub records: Vec<String>,
    #[serde(default)]
    pub annotator: Option<String>,
    #[serde(default)]
    pub channel: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub schemes: Vec<String>,
    pub backend: BackendConfig,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub windows: Vec<f64>,
    #[serde(default = "one")]
    pub parallelism: usize,
    /// Random window placement when set; sequential tiling otherwise.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Windows per record.
    #[serde(default)]
    pub count: Option<usize>,
    /// Detectors for backend-free runs; all five when empty.
    #[serde(default)]
    pub detectors: Vec<DetectorKind>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Json { path: path.to_path_buf(), line: e.line(), message: e.to_string() })?;
        // relative dataset and store paths are taken from the config's directory
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p.as_mut() {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        rebase(&mut cfg.dataset.snapshots);
        rebase(&mut cfg.dataset.judgments);
        rebase(&mut cfg.dataset.wfdb_dir);
        rebase(&mut cfg.backend.store);
        Ok(cfg)
    }

    pub fn model(&self) -> &str {
        self.backend.model.as_deref().unwrap_or(DEFAULT_MODEL)
    }

    pub fn parsed_schemes(&self) -> Result<Vec<PromptScheme>> {
        self.schemes
            .iter()
            .map(|s| {
                let full = if s.contains('/') { s.clone() } else { format!("{}/{}", self.task.as_str(), s) };
                let scheme: PromptScheme = full.parse()?;
                require_task(scheme, &[self.task])?;
                Ok(scheme)
            })
            .collect()
    }

    pub fn window_mode(&self) -> WindowMode {
        self.seed.map_or(WindowMode::Sequential, |seed| WindowMode::Random { seed })
    }

    fn ecg_records(&self) -> Result<Vec<EcgRecord>> {
        let dir = self.dataset.wfdb_dir.as_deref().ok_or_else(|| ExperimentError::Config("dataset.wfdb_dir is required".into()))?;
        if self.dataset.records.is_empty() {
            return Err(ExperimentError::Config("dataset.records is empty".into()));
        }
        load_records(
            dir,
            &self.dataset.records,
            self.dataset.annotator.as_deref().unwrap_or("atr"),
            self.dataset.channel.as_deref().unwrap_or(wfdb::DEFAULT_CHANNEL),
        )
    }

    fn windows_or_default(&self) -> Vec<f64> {
        if self.windows.is_empty() {
            vec![ecg::DEFAULT_WINDOW_S]
        } else {
            self.windows.clone()
        }
    }
}

/// Reports plus the instances that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub reports: Vec<EvalReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub baseline: Vec<BaselineRow>,
    pub failures: Vec<FailureEntry>,
}

fn task_kind(task: Task) -> TaskKind {
    match task {
        Task::Activity => TaskKind::Activity,
        Task::Ecg => TaskKind::Ecg,
        Task::EcgVision => TaskKind::EcgVision,
    }
}

/// One report per (scheme, window). With no backend, the detector baseline
/// is run over the same records and windows instead.
pub fn run_experiment(cfg: &ExperimentConfig, backend: Option<&dyn Backend>, clock: &dyn Clock) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome { reports: Vec::new(), baseline: Vec::new(), failures: Vec::new() };
    let Some(backend) = backend else {
        if cfg.task == Task::Activity {
            return Err(ExperimentError::Config("activity experiments need a backend".into()));
        }
        let detectors = if cfg.detectors.is_empty() { DetectorKind::ALL.to_vec() } else { cfg.detectors.clone() };
        outcome.baseline = baseline_matrix(&cfg.ecg_records()?, &detectors, &cfg.windows_or_default())?;
        return Ok(outcome);
    };
    let schemes = cfg.parsed_schemes()?;
    if schemes.is_empty() {
        return Err(ExperimentError::Config("no prompt scheme given".into()));
    }
    let opts = RunOptions { model: cfg.model(), parallelism: cfg.parallelism, retry: RetryPolicy::default(), clock };

    let mut finish = |scheme: PromptScheme, window: Option<f64>, prompts: Vec<PromptLine>, eval: &dyn Fn(&[ParsedRow]) -> Result<EvalReport>| -> Result<()> {
        let responses = run_prompts(backend, &prompts, &opts)?;
        let (parsed, failures) = parse_responses(scheme.task(), &responses);
        outcome.failures.extend(failures);
        if parsed.is_empty() {
            log::warn!("{scheme}: no instance could be evaluated");
            return Ok(());
        }
        let mut report = eval(&parsed)?;
        report.scheme = Some(scheme.to_string());
        if window.is_some() {
            report.window_s = window;
        }
        outcome.reports.push(report);
        Ok(())
    };

    match cfg.task {
        Task::Activity => {
            let path = cfg.dataset.snapshots.as_deref().ok_or_else(|| ExperimentError::Config("dataset.snapshots is required".into()))?;
            let items = textualize_snapshots(path)?;
            let judgments = match &cfg.dataset.judgments {
                Some(p) => read_jsonl(p)?,
                None => Vec::new(),
            };
            for scheme in schemes {
                let prompts = activity_prompts(scheme, &items)?;
                finish(scheme, None, prompts, &|parsed| evaluate_activity(parsed, &items, &judgments))?;
            }
        }
        Task::Ecg | Task::EcgVision => {
            let records = cfg.ecg_records()?;
            for scheme in schemes {
                for w in cfg.windows_or_default() {
                    let queries = prepare_queries(&records, w, cfg.window_mode(), cfg.count)?;
                    let prompts = ecg_prompts(scheme, &queries)?;
                    finish(scheme, Some(w), prompts, &|parsed| evaluate_ecg(task_kind(cfg.task), parsed, &queries))?;
                }
            }
        }
    }
    Ok(outcome)
}
