//! Command-line front end. Every operation goes through the HTTP
//! service; when no --server is given, an in-process instance is
//! started on a loopback port for the duration of the command.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. A task that
//! ends undelivered is still a successful run; only failures to
//! produce a trace at all count as errors.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use futures::stream::{self, StreamExt};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use waypoint_client::{ClientError, ServiceClient};
use waypoint_core::api::{EpisodeRequest, EvaluateRequest, ReportRequest};
use waypoint_core::eval::MetricsOptions;
use waypoint_core::experiment::{
    load_task_records, read_evaluation_file, read_trace_file, trace_path, write_evaluation_file,
    write_trace_file, TaskRecord,
};
use waypoint_core::gateway::{BackendConfig, BackendKind, Cassette};
use waypoint_core::orchestration::{RunConfig, RunMode};
use waypoint_core::sandbox::{load_sandbox, Sandbox};
use waypoint_server::{create_app, AppState};

#[derive(Parser)]
#[command(name = "waypoint", version, about = "Multi-agent travel-planning benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start the HTTP service and block.
    Serve(ServeArgs),
    /// Run every task in a file, writing one trace per task.
    Run(Box<RunArgs>),
    /// Score a directory of traces against their task file.
    Evaluate(EvaluateArgs),
    /// Render a comparison report from evaluation files.
    Report(ReportArgs),
}

#[derive(clap::Args)]
struct ServeArgs {
    /// Directory holding flights.csv, hotels.csv, restaurants.csv, attractions.csv.
    #[arg(long)]
    sandbox: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Shared budget for outbound model requests across all episodes.
    #[arg(long)]
    requests_per_minute: Option<u32>,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Task file, one JSON object per line.
    #[arg(long)]
    tasks: PathBuf,
    /// Directory for trace files; tasks with an existing trace are skipped.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_mode, default_value = "fixed")]
    mode: RunMode,
    #[arg(long, value_parser = parse_backend, default_value = "scripted")]
    backend: BackendKind,
    /// Sandbox directory; required unless --server is given.
    #[arg(long)]
    sandbox: Option<PathBuf>,
    /// Base URL of an already-running service.
    #[arg(long)]
    server: Option<String>,
    /// Directory of <task_id>.cassette files; required for the scripted backend.
    #[arg(long)]
    cassette_dir: Option<PathBuf>,
    /// Save every model exchange next to the traces as <task_id>.cassette.
    #[arg(long)]
    record: bool,
    /// Chat-completion URL; required for the remote backend.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value = "scripted")]
    model: String,
    /// Environment variable holding the bearer token.
    #[arg(long)]
    credentials_env: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    #[arg(long, default_value_t = 1024)]
    max_tokens: u32,
    #[arg(long)]
    requests_per_minute: Option<u32>,
    /// Public-message budget per episode.
    #[arg(long, default_value_t = 30)]
    max_steps: u32,
    #[arg(long, default_value_t = 3)]
    max_critic_rounds: u32,
    #[arg(long, default_value_t = 5)]
    max_tool_rounds: u32,
    /// Concurrent episodes.
    #[arg(long, default_value_t = 4)]
    workers: usize,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    /// Directory of .trace files.
    #[arg(long)]
    traces: PathBuf,
    /// Task file the traces were run from.
    #[arg(long)]
    tasks: PathBuf,
    /// Where to write the evaluation JSON.
    #[arg(long)]
    out: PathBuf,
    /// Evaluation name shown as the report column header; defaults to
    /// the traces directory name.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    sandbox: Option<PathBuf>,
    #[arg(long)]
    server: Option<String>,
    /// Score micro rates over delivered tasks only.
    #[arg(long)]
    exclude_undelivered_micro: bool,
}

#[derive(clap::Args)]
struct ReportArgs {
    /// Evaluation files, one column each; the first is the baseline.
    #[arg(required = true)]
    evaluations: Vec<PathBuf>,
    /// Write the text table here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the CSV form here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    server: Option<String>,
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    RunMode::from_label(s)
        .ok_or_else(|| format!("unknown mode {s:?} (expected fixed, orchestrated, or single)"))
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    match s.trim().to_lowercase().as_str() {
        "scripted" => Ok(BackendKind::Scripted),
        "remote" => Ok(BackendKind::Remote),
        _ => Err(format!("unknown backend {s:?} (expected scripted or remote)")),
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match rt.block_on(dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

async fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Serve(args) => cmd_serve(args).await,
        Command::Run(args) => cmd_run(*args).await,
        Command::Evaluate(args) => cmd_evaluate(args).await,
        Command::Report(args) => cmd_report(args).await,
    }
}

async fn cmd_serve(args: ServeArgs) -> Result<(), CliError> {
    let sandbox = load_sandbox(&args.sandbox).map_err(runtime)?;
    let app = create_app(AppState::new(sandbox, args.requests_per_minute));
    let listener = tokio::net::TcpListener::bind(&args.addr)
        .await
        .map_err(|e| CliError::Runtime(format!("bind {}: {e}", args.addr)))?;
    let addr = listener.local_addr().map_err(runtime)?;
    println!("listening on http://{addr}");
    axum::serve(listener, app).await.map_err(runtime)
}

/// Connects to --server, or spins up an in-process service. The handle
/// keeps the background task alive for the caller's lifetime.
struct Service {
    client: ServiceClient,
    _server: Option<tokio::task::JoinHandle<()>>,
}

async fn connect(
    server: &Option<String>,
    sandbox_dir: &Option<PathBuf>,
    requests_per_minute: Option<u32>,
) -> Result<Service, CliError> {
    if let Some(url) = server {
        return Ok(Service { client: ServiceClient::new(url), _server: None });
    }
    let sandbox = match sandbox_dir {
        Some(dir) => load_sandbox(dir).map_err(runtime)?,
        None => {
            return Err(CliError::Usage(
                "either --server or --sandbox is required".into(),
            ))
        }
    };
    serve_in_process(sandbox, requests_per_minute).await
}

async fn serve_in_process(
    sandbox: Sandbox,
    requests_per_minute: Option<u32>,
) -> Result<Service, CliError> {
    let app = create_app(AppState::new(sandbox, requests_per_minute));
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", 0))
        .await
        .map_err(runtime)?;
    let addr = listener.local_addr().map_err(runtime)?;
    let handle = tokio::spawn(async move {
        let _ = axum::serve(listener, app).await;
    });
    Ok(Service { client: ServiceClient::new(&format!("http://{addr}")), _server: Some(handle) })
}

enum Outcome {
    Skipped,
    Delivered,
    Undelivered,
    Failed(String),
}

async fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    if args.backend == BackendKind::Scripted && args.cassette_dir.is_none() {
        return Err(CliError::Usage(
            "--cassette-dir is required with the scripted backend".into(),
        ));
    }
    if args.backend == BackendKind::Remote && args.endpoint.is_none() {
        return Err(CliError::Usage(
            "--endpoint is required with the remote backend".into(),
        ));
    }
    let records = load_task_records(&args.tasks).map_err(runtime)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Runtime(format!("create {}: {e}", args.out.display())))?;
    let service = connect(&args.server, &args.sandbox, args.requests_per_minute).await?;

    let config = Arc::new(RunConfig {
        mode: args.mode,
        max_steps: args.max_steps,
        max_critic_rounds: args.max_critic_rounds,
        max_tool_rounds_per_turn: args.max_tool_rounds,
        backend: BackendConfig {
            kind: args.backend,
            endpoint: args.endpoint.clone(),
            model: args.model.clone(),
            credentials_env: args.credentials_env.clone(),
            retry: Default::default(),
            temperature: args.temperature,
            max_tokens: args.max_tokens,
            requests_per_minute: args.requests_per_minute,
        },
    });

    let out_dir = Arc::new(args.out.clone());
    let cassette_dir = args.cassette_dir.clone().map(Arc::new);
    let jobs = records.into_iter().map(|record| {
        let client = service.client.clone();
        let config = config.clone();
        let out_dir = out_dir.clone();
        let cassette_dir = cassette_dir.clone();
        let record_exchanges = args.record;
        async move {
            let id = record.task_id.clone();
            let outcome = run_one(
                &client,
                record,
                &config,
                &out_dir,
                cassette_dir.as_deref(),
                record_exchanges,
            )
            .await;
            (id, outcome)
        }
    });
    let mut results: Vec<(String, Outcome)> =
        stream::iter(jobs).buffer_unordered(args.workers.max(1)).collect().await;
    results.sort_by(|a, b| a.0.cmp(&b.0));

    let (mut delivered, mut undelivered, mut skipped, mut failed) = (0u32, 0u32, 0u32, 0u32);
    for (id, outcome) in &results {
        match outcome {
            Outcome::Skipped => {
                skipped += 1;
                println!("task {id}: skipped (trace exists)");
            }
            Outcome::Delivered => {
                delivered += 1;
                println!("task {id}: delivered");
            }
            Outcome::Undelivered => {
                undelivered += 1;
                println!("task {id}: undelivered");
            }
            Outcome::Failed(message) => {
                failed += 1;
                println!("task {id}: error: {message}");
            }
        }
    }
    println!(
        "{delivered} delivered, {undelivered} undelivered, {skipped} skipped, {failed} failed; traces in {}",
        args.out.display()
    );
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} task(s) failed")));
    }
    Ok(())
}

async fn run_one(
    client: &ServiceClient,
    record: TaskRecord,
    config: &RunConfig,
    out_dir: &Path,
    cassette_dir: Option<&PathBuf>,
    record_exchanges: bool,
) -> Outcome {
    let id = record.task_id.clone();
    let path = trace_path(out_dir, &id);
    if path.exists() {
        return Outcome::Skipped;
    }
    let cassette = match (config.backend.kind, cassette_dir) {
        (BackendKind::Scripted, Some(dir)) => {
            match Cassette::read_file(&dir.join(format!("{id}.cassette"))) {
                Ok(c) => Some(c),
                Err(e) => return Outcome::Failed(e.to_string()),
            }
        }
        _ => None,
    };
    let request = EpisodeRequest {
        task: record,
        config: config.clone(),
        cassette,
        prompt_overrides: BTreeMap::new(),
        record: record_exchanges,
    };
    let response = match client.run_episode(&request).await {
        Ok(r) => r,
        Err(e) => return Outcome::Failed(e.to_string()),
    };
    if let Err(e) = write_trace_file(&path, &response.trace) {
        return Outcome::Failed(e.to_string());
    }
    if let Some(cassette) = &response.recorded_cassette {
        if let Err(e) = cassette.write_file(&out_dir.join(format!("{id}.cassette"))) {
            return Outcome::Failed(e.to_string());
        }
    }
    if response.trace.delivered {
        Outcome::Delivered
    } else {
        Outcome::Undelivered
    }
}

async fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let records = load_task_records(&args.tasks).map_err(runtime)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.traces)
        .map_err(|e| CliError::Runtime(format!("read {}: {e}", args.traces.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "trace"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Runtime(format!(
            "no .trace files in {}",
            args.traces.display()
        )));
    }
    let mut traces = Vec::with_capacity(paths.len());
    for path in &paths {
        traces.push(read_trace_file(path).map_err(runtime)?);
    }
    let name = args.name.clone().unwrap_or_else(|| {
        args.traces
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "evaluation".into())
    });
    let service = connect(&args.server, &args.sandbox, None).await?;
    let request = EvaluateRequest {
        name,
        tasks: records,
        traces,
        options: MetricsOptions {
            include_undelivered_in_micro: !args.exclude_undelivered_micro,
        },
    };
    let response = service.client.evaluate(&request).await.map_err(client_error)?;
    write_evaluation_file(&args.out, &response.evaluation).map_err(runtime)?;
    let report = service
        .client
        .report(&ReportRequest { evaluations: vec![response.evaluation] })
        .await
        .map_err(client_error)?;
    print!("{}", report.text);
    println!("wrote {}", args.out.display());
    Ok(())
}

async fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let mut evaluations = Vec::with_capacity(args.evaluations.len());
    for path in &args.evaluations {
        evaluations.push(read_evaluation_file(path).map_err(runtime)?);
    }
    let service = match &args.server {
        Some(url) => Service { client: ServiceClient::new(url), _server: None },
        // The report route never touches the sandbox, so an empty one
        // is enough to stand the service up.
        None => serve_in_process(Sandbox::from_rows(vec![], vec![], vec![], vec![]), None).await?,
    };
    let response = service
        .client
        .report(&ReportRequest { evaluations })
        .await
        .map_err(client_error)?;
    print!("{}", response.text);
    if let Some(path) = &args.out {
        std::fs::write(path, &response.text)
            .map_err(|e| CliError::Runtime(format!("write {}: {e}", path.display())))?;
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, &response.csv)
            .map_err(|e| CliError::Runtime(format!("write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn client_error(e: ClientError) -> CliError {
    CliError::Runtime(e.to_string())
}
