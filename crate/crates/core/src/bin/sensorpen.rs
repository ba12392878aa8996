use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sensorpen::ecg::{self, WindowMode};
use sensorpen::experiment::{self as exp, ExperimentConfig, ExperimentError, FieldsLine, PromptLine, QueryLine, ResponseLine};
use sensorpen::figure;
use sensorpen::llm::{Backend, LiveClient, LlmError, RecordBackend, ReplayBackend, ReplayStore, RetryPolicy, SystemClock};
use sensorpen::metrics::{self, TaskKind};
use sensorpen::parse::ParsedRow;
use sensorpen::prompt::{PromptScheme, Task};
use sensorpen::qrs::DetectorKind;
use sensorpen::wfdb::{self, RecordLine};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "sensorpen", version, about = "Prepare sensor and ECG prompts, run them through an LLM and score the answers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn activity snapshots into prompt fields.
    Textualize {
        #[arg(long)]
        snapshots: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render prompts from fields or ECG queries.
    Prompt {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        scheme: String,
        /// Fields (activity) or queries (ecg, ecg_vision), JSON Lines.
        #[arg(long, alias = "query")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Send prompts to a backend.
    Run(RunArgs),
    /// Extract states or R-peaks from responses.
    Parse {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score parsed responses against ground truth.
    Eval {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        parsed: PathBuf,
        /// Fields (activity) or queries (ecg), JSON Lines.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        judgments: Option<PathBuf>,
        /// Per-instance `{instance_id, score}` lines from an external scorer.
        #[arg(long)]
        bertscore: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heart-rate MAE of a classical QRS detector.
    Baseline {
        #[command(flatten)]
        data: DataArgs,
        /// Detector name, or "all".
        #[arg(long, default_value = "all")]
        detector: String,
        /// Window length in seconds; repeat or comma-separate for several.
        #[arg(long, value_delimiter = ',', default_value = "30")]
        window: Vec<f64>,
        /// Detect at the record's own rate or after decimation to 72 Hz.
        #[arg(long, default_value = "source", value_parser = ["source", "72"])]
        rate: String,
        /// Include per-window rows.
        #[arg(long)]
        rows: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ECG record preparation.
    #[command(subcommand)]
    Ecg(EcgCommand),
    /// Plot one ECG query as a PNG.
    Render {
        #[arg(long)]
        query: PathBuf,
        /// Instance id; defaults to the first query in the file.
        #[arg(long)]
        instance: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment config over several window lengths.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's windows; defaults to 2.5, 5, 7.5 and 10 s.
        #[arg(long, value_delimiter = ',')]
        windows: Vec<f64>,
        /// Live API base URL for record or live backends.
        #[arg(long)]
        api_base: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EcgCommand {
    /// Cut 72 Hz query windows from WFDB records.
    Prepare {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = ecg::DEFAULT_WINDOW_S)]
        window: f64,
        /// Random window placement with this seed; sequential otherwise.
        #[arg(long)]
        seed: Option<u64>,
        /// Windows per record.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write records (one channel, with beat positions) as JSON Lines.
    Dump {
        #[command(flatten)]
        data: DataArgs,
        /// Decimate to 72 Hz first.
        #[arg(long)]
        downsample: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding <record>.hea/.dat/.atr.
    #[arg(long, env = "SENSORPEN_MITDB_DIR", default_value = "mitdb")]
    data_dir: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    records: Vec<String>,
    #[arg(long, default_value = "atr")]
    annotator: String,
    #[arg(long, default_value = wfdb::DEFAULT_CHANNEL)]
    channel: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    prompts: PathBuf,
    /// Answer from this replay store only.
    #[arg(long, conflicts_with_all = ["record", "api_base"])]
    replay: Option<PathBuf>,
    /// Call the live API and append every answer to this store.
    #[arg(long, requires = "api_base")]
    record: Option<PathBuf>,
    #[arg(long)]
    api_base: Option<String>,
    #[arg(long, default_value = exp::DEFAULT_MODEL)]
    model: String,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long, default_value_t = 120)]
    timeout_s: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Activity,
    Ecg,
    EcgVision,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Activity => Task::Activity,
            TaskArg::Ecg => Task::Ecg,
            TaskArg::EcgVision => Task::EcgVision,
        }
    }
}

/// Raised when some requests failed but the outputs were still written.
#[derive(Debug, thiserror::Error)]
#[error("{0} request(s) failed; see the error fields in the output")]
struct PartialBackendFailure(usize);

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => exp::write_file(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn scheme_for(task: Task, scheme: &str) -> Result<PromptScheme> {
    let full = if scheme.contains('/') { scheme.to_string() } else { format!("{}/{}", task.as_str(), scheme) };
    let s: PromptScheme = full.parse()?;
    if s.task() != task {
        bail!("scheme {s} belongs to task {}", s.task().as_str());
    }
    Ok(s)
}

fn load_records(data: &DataArgs) -> Result<Vec<wfdb::EcgRecord>> {
    exp::load_records(&data.data_dir, &data.records, &data.annotator, &data.channel)
        .with_context(|| format!("reading records from {}", data.data_dir.display()))
}

fn backend_for(args: &RunArgs) -> Result<Box<dyn Backend>> {
    let timeout = Duration::from_secs(args.timeout_s);
    Ok(match (&args.replay, &args.record, &args.api_base) {
        (Some(store), _, _) => Box::new(ReplayBackend::new(ReplayStore::open(store)?)),
        (None, Some(store), Some(base)) => {
            Box::new(RecordBackend::new(LiveClient::from_env(base.as_str(), timeout)?, ReplayStore::open_or_create(store)?))
        }
        (None, None, Some(base)) => Box::new(LiveClient::from_env(base.as_str(), timeout)?),
        _ => bail!(clap_usage("run needs --replay, --record with --api-base, or --api-base")),
    })
}

fn config_backend(cfg: &ExperimentConfig, api_base: Option<&str>) -> Result<Option<Box<dyn Backend>>> {
    use exp::BackendKindConfig::*;
    let base = api_base.map(str::to_string).or_else(|| cfg.backend.api_base.clone());
    let timeout = Duration::from_secs(120);
    let store = || cfg.backend.store.clone().ok_or_else(|| anyhow::anyhow!(clap_usage("backend.store is required")));
    Ok(match cfg.backend.kind {
        None => Option::None,
        Replay => {
            if base.is_some() {
                bail!(clap_usage("a replay backend does not take an API base"));
            }
            Some(Box::new(ReplayBackend::new(ReplayStore::open(store()?)?)))
        }
        Record => {
            let base = base.ok_or_else(|| anyhow::anyhow!(clap_usage("record needs an API base")))?;
            Some(Box::new(RecordBackend::new(LiveClient::from_env(base, timeout)?, ReplayStore::open_or_create(store()?)?)))
        }
        Live => {
            let base = base.ok_or_else(|| anyhow::anyhow!(clap_usage("live needs an API base")))?;
            Some(Box::new(LiveClient::from_env(base, timeout)?))
        }
    })
}

// Marks a message as a usage error for exit-code purposes.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn clap_usage(msg: &str) -> Usage {
    Usage(msg.to_string())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Textualize { snapshots, out } => {
            let items = exp::textualize_snapshots(&snapshots)?;
            emit(out.as_deref(), exp::to_jsonl(&items).as_bytes())
        }
        Command::Prompt { task, scheme, input, out } => {
            let task = Task::from(task);
            let scheme = scheme_for(task, &scheme).map_err(|e| clap_usage(&e.to_string()))?;
            let prompts = match task {
                Task::Activity => exp::activity_prompts(scheme, &exp::read_jsonl::<FieldsLine>(&input)?)?,
                Task::Ecg | Task::EcgVision => exp::ecg_prompts(scheme, &exp::read_jsonl::<QueryLine>(&input)?)?,
            };
            emit(out.as_deref(), exp::to_jsonl(&prompts).as_bytes())
        }
        Command::Run(args) => {
            if args.parallelism == 0 {
                bail!(clap_usage("--parallelism must be at least 1"));
            }
            let prompts: Vec<PromptLine> = exp::read_jsonl(&args.prompts)?;
            let backend = backend_for(&args)?;
            let opts = exp::RunOptions {
                model: &args.model,
                parallelism: args.parallelism,
                retry: RetryPolicy::default(),
                clock: &SystemClock,
            };
            let responses = exp::run_prompts(backend.as_ref(), &prompts, &opts)?;
            emit(args.out.as_deref(), exp::to_jsonl(&responses).as_bytes())?;
            let failed = responses.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                return Err(PartialBackendFailure(failed).into());
            }
            Ok(())
        }
        Command::Parse { task, responses, out } => {
            let responses: Vec<ResponseLine> = exp::read_jsonl(&responses)?;
            let (rows, failures) = exp::parse_responses(task.into(), &responses);
            for f in &failures {
                log::warn!("{}: skipped, {}", f.instance_id, f.error);
            }
            emit(out.as_deref(), exp::to_jsonl(&rows).as_bytes())
        }
        Command::Eval { task, parsed, truth, judgments, bertscore, out } => {
            let parsed: Vec<ParsedRow> = exp::read_jsonl(&parsed)?;
            let mut report = match Task::from(task) {
                Task::Activity => {
                    let judgments = match judgments {
                        Some(p) => exp::read_jsonl(&p)?,
                        None => Vec::new(),
                    };
                    exp::evaluate_activity(&parsed, &exp::read_jsonl(&truth)?, &judgments)?
                }
                Task::Ecg => exp::evaluate_ecg(TaskKind::Ecg, &parsed, &exp::read_jsonl(&truth)?)?,
                Task::EcgVision => exp::evaluate_ecg(TaskKind::EcgVision, &parsed, &exp::read_jsonl(&truth)?)?,
            };
            if let Some(path) = bertscore {
                let scores: Vec<metrics::ExternalScore> = exp::read_jsonl(&path)?;
                metrics::attach_bertscore(&mut report, &scores).map_err(ExperimentError::Metric)?;
            }
            emit(out.as_deref(), exp::report_json(&report).as_bytes())
        }
        Command::Baseline { data, detector, window, rate, rows, out } => {
            let detectors = if detector == "all" {
                DetectorKind::ALL.to_vec()
            } else {
                vec![detector.parse::<DetectorKind>().map_err(|e| clap_usage(&e.to_string()))?]
            };
            let mut records = load_records(&data)?;
            if rate == "72" {
                records = records.iter().map(|r| ecg::downsample(r, ecg::QUERY_RATE)).collect::<Result<_, _>>()?;
            }
            let json = if rows {
                let mut reports = Vec::new();
                for d in &detectors {
                    for &w in &window {
                        reports.push(exp::baseline(&records, *d, w)?);
                    }
                }
                if reports.len() == 1 {
                    exp::report_json(&reports[0])
                } else {
                    exp::report_json(&reports)
                }
            } else {
                let matrix = exp::baseline_matrix(&records, &detectors, &window)?;
                if matrix.len() == 1 {
                    exp::report_json(&matrix[0])
                } else {
                    exp::report_json(&matrix)
                }
            };
            emit(out.as_deref(), json.as_bytes())
        }
        Command::Ecg(EcgCommand::Prepare { data, window, seed, count, out }) => {
            let records = load_records(&data)?;
            let mode = seed.map_or(WindowMode::Sequential, |seed| WindowMode::Random { seed });
            let queries = exp::prepare_queries(&records, window, mode, count)?;
            emit(out.as_deref(), exp::to_jsonl(&queries).as_bytes())
        }
        Command::Ecg(EcgCommand::Dump { data, downsample, out }) => {
            let mut lines = Vec::new();
            for r in load_records(&data)? {
                let r = if downsample { ecg::downsample(&r, ecg::QUERY_RATE)? } else { r };
                lines.push(RecordLine::from(&r));
            }
            emit(out.as_deref(), exp::to_jsonl(&lines).as_bytes())
        }
        Command::Render { query, instance, out } => {
            let queries: Vec<QueryLine> = exp::read_jsonl(&query)?;
            let q = match &instance {
                Some(id) => queries.iter().find(|q| &q.instance_id == id),
                None => queries.first(),
            };
            let Some(q) = q else {
                bail!(ExperimentError::MissingTruth(instance.unwrap_or_else(|| "(first)".into())));
            };
            exp::write_file(&out, &figure::render_figure(&q.query)?)?;
            Ok(())
        }
        Command::Sweep { config, windows, api_base, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if !windows.is_empty() {
                cfg.windows = windows;
            } else if cfg.windows.is_empty() {
                cfg.windows = ecg::SWEEP_WINDOWS.to_vec();
            }
            let backend = config_backend(&cfg, api_base.as_deref())?;
            let outcome = exp::run_experiment(&cfg, backend.as_deref(), &SystemClock)?;
            emit(out.as_deref(), exp::report_json(&outcome).as_bytes())?;
            if !outcome.failures.is_empty() {
                return Err(PartialBackendFailure(outcome.failures.len()).into());
            }
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if cause.is::<LlmError>() || cause.is::<PartialBackendFailure>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            if e.is_backend() {
                return 3;
            }
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
