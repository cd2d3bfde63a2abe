//! Batch plumbing around episodes: task files, trace files, stored
//! evaluations, and the comparison report.
//!
//! File formats:
//! - task file: one JSON record per line
//! - trace file: header line, one line per event, footer line
//! - evaluation file: one pretty-printed JSON document
//!
//! Everything serialized here is deterministic so reruns diff clean.

use crate::eval::{
    categorize_failures, compute_metrics, count_hallucinations, evaluate_trace, Area,
    BenchmarkMetrics, EvalError, HallucinationCounts, MetricsOptions, TaskEvaluation,
};
use crate::gateway::{ChatBackend, TokenUsage};
use crate::orchestration::{
    config_digest, run_episode, RunConfig, RunMode, RunTrace, TraceEvent, TraceEventKind,
    TRACE_SCHEMA_VERSION,
};
use crate::plan::parse_plan;
use crate::roles::AgentRole;
use crate::sandbox::Sandbox;
use crate::world::{Goal, GoalMetadata, HardConstraintSpec};
use crate::agents::prompts::PromptSet;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {message}")]
    Line { file: String, line: usize, message: String },
    #[error("{file}: duplicate task_id {id}")]
    DuplicateTask { file: String, id: String },
    #[error("{file}: no tasks")]
    EmptyTaskFile { file: String },
    #[error("{file}: schema version {found}, expected {expected}")]
    SchemaVersion { file: String, found: u32, expected: u32 },
    #[error("trace {task_id} has no matching task")]
    MissingGoal { task_id: String },
    #[error("duplicate trace for task {task_id}")]
    DuplicateTrace { task_id: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("nothing to report")]
    EmptyReport,
}

/// One line of a task file. Mirrors the benchmark's task records:
/// an id, the natural-language query, and the structured fields the
/// validators need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub query: String,
    pub origin: String,
    pub destination: String,
    /// Trip length in days; the benchmark uses 3, 5, or 7.
    pub duration_days: u32,
    /// One "YYYY-MM-DD" per trip day.
    pub dates: Vec<String>,
    pub traveler_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "HardConstraintSpec::is_empty")]
    pub constraints: HardConstraintSpec,
}

impl TaskRecord {
    pub fn to_goal(&self) -> Result<Goal, String> {
        if self.task_id.is_empty()
            || !self.task_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(format!(
                "task_id {:?} must be non-empty [A-Za-z0-9_-]",
                self.task_id
            ));
        }
        if self.query.trim().is_empty() {
            return Err("query must be non-empty".into());
        }
        if self.origin.trim().is_empty() || self.destination.trim().is_empty() {
            return Err("origin and destination must be non-empty".into());
        }
        if ![3, 5, 7].contains(&self.duration_days) {
            return Err(format!("duration_days must be 3, 5, or 7, got {}", self.duration_days));
        }
        if self.dates.len() as u32 != self.duration_days {
            return Err(format!(
                "expected {} dates, got {}",
                self.duration_days,
                self.dates.len()
            ));
        }
        let mut dates = Vec::with_capacity(self.dates.len());
        for (i, raw) in self.dates.iter().enumerate() {
            dates.push(raw.parse().map_err(|e| format!("dates[{i}]: {e}"))?);
        }
        if self.traveler_count == 0 {
            return Err("traveler_count must be >= 1".into());
        }
        if let Some(budget) = self.budget {
            if !(budget.is_finite() && budget > 0.0) {
                return Err(format!("budget must be > 0, got {budget}"));
            }
        }
        Ok(Goal {
            task_id: self.task_id.clone(),
            query_text: self.query.clone(),
            metadata: GoalMetadata {
                origin: self.origin.clone(),
                destination: self.destination.clone(),
                dates,
                duration_days: self.duration_days,
                traveler_count: self.traveler_count,
                budget: self.budget,
                constraints: self.constraints.clone(),
            },
        })
    }
}

/// Parses a whole task file into validated records; ids must be unique.
pub fn parse_task_records(text: &str, file: &str) -> Result<Vec<TaskRecord>, ExperimentError> {
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record: TaskRecord = serde_json::from_str(line).map_err(|e| ExperimentError::Line {
            file: file.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        // Validate up front so later goal conversion cannot fail.
        record.to_goal().map_err(|message| ExperimentError::Line {
            file: file.to_string(),
            line: i + 1,
            message,
        })?;
        if !seen.insert(record.task_id.clone()) {
            return Err(ExperimentError::DuplicateTask {
                file: file.to_string(),
                id: record.task_id,
            });
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(ExperimentError::EmptyTaskFile { file: file.to_string() });
    }
    Ok(records)
}

pub fn parse_tasks(text: &str, file: &str) -> Result<Vec<Goal>, ExperimentError> {
    let records = parse_task_records(text, file)?;
    Ok(records.iter().map(|r| r.to_goal().expect("validated above")).collect())
}

pub fn load_task_records(path: &Path) -> Result<Vec<TaskRecord>, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_task_records(&text, &path.display().to_string())
}

pub fn load_tasks(path: &Path) -> Result<Vec<Goal>, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tasks(&text, &path.display().to_string())
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceHeader {
    schema_version: u32,
    task_id: String,
    mode: RunMode,
    config_digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceFooter {
    delivered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    final_plan_text: Option<String>,
    revisit_counts: BTreeMap<String, u32>,
    token_usage: TokenUsage,
}

pub fn trace_to_jsonl(trace: &RunTrace) -> String {
    let mut out = String::new();
    let header = TraceHeader {
        schema_version: trace.schema_version,
        task_id: trace.task_id.clone(),
        mode: trace.mode,
        config_digest: trace.config_digest.clone(),
    };
    out.push_str(&serde_json::to_string(&header).expect("header serialization"));
    out.push('\n');
    for event in &trace.events {
        out.push_str(&serde_json::to_string(event).expect("event serialization"));
        out.push('\n');
    }
    let footer = TraceFooter {
        delivered: trace.delivered,
        final_plan_text: trace.final_plan_text.clone(),
        revisit_counts: trace.revisit_counts.clone(),
        token_usage: trace.token_usage,
    };
    out.push_str(&serde_json::to_string(&footer).expect("footer serialization"));
    out.push('\n');
    out
}

pub fn trace_from_jsonl(text: &str, file: &str) -> Result<RunTrace, ExperimentError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if lines.len() < 2 {
        return Err(ExperimentError::Line {
            file: file.to_string(),
            line: lines.last().map(|(n, _)| *n).unwrap_or(1),
            message: "trace needs a header and a footer".into(),
        });
    }
    let parse_err = |line: usize, e: serde_json::Error| ExperimentError::Line {
        file: file.to_string(),
        line,
        message: e.to_string(),
    };
    let (header_no, header_line) = lines[0];
    let header: TraceHeader =
        serde_json::from_str(header_line).map_err(|e| parse_err(header_no, e))?;
    if header.schema_version != TRACE_SCHEMA_VERSION {
        return Err(ExperimentError::SchemaVersion {
            file: file.to_string(),
            found: header.schema_version,
            expected: TRACE_SCHEMA_VERSION,
        });
    }
    let (footer_no, footer_line) = lines[lines.len() - 1];
    let footer: TraceFooter =
        serde_json::from_str(footer_line).map_err(|e| parse_err(footer_no, e))?;
    let mut events = Vec::with_capacity(lines.len() - 2);
    for (line_no, line) in &lines[1..lines.len() - 1] {
        let event: TraceEvent = serde_json::from_str(line).map_err(|e| parse_err(*line_no, e))?;
        events.push(event);
    }
    Ok(RunTrace {
        schema_version: header.schema_version,
        task_id: header.task_id,
        mode: header.mode,
        config_digest: header.config_digest,
        events,
        delivered: footer.delivered,
        final_plan_text: footer.final_plan_text,
        revisit_counts: footer.revisit_counts,
        token_usage: footer.token_usage,
        wall_time: std::time::Duration::ZERO,
    })
}

pub fn write_trace_file(path: &Path, trace: &RunTrace) -> Result<(), ExperimentError> {
    std::fs::write(path, trace_to_jsonl(trace)).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_trace_file(path: &Path) -> Result<RunTrace, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    trace_from_jsonl(&text, &path.display().to_string())
}

/// Where a task's trace lives under an experiment directory.
pub fn trace_path(out_dir: &Path, task_id: &str) -> PathBuf {
    out_dir.join(format!("{task_id}.trace"))
}

pub const EVAL_SCHEMA_VERSION: u32 = 1;

/// Stored result of evaluating one batch of traces: the aggregate
/// rates plus every per-task verdict they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub schema_version: u32,
    pub name: String,
    pub modes: Vec<RunMode>,
    pub config_digests: Vec<String>,
    pub metrics: BenchmarkMetrics,
    /// Mean revisits per task, per expert label.
    pub revisit_averages: BTreeMap<String, f64>,
    /// Failed share of each area's constraints, in percent.
    pub area_failures: BTreeMap<Area, f64>,
    pub hallucinations: HallucinationCounts,
    pub tasks: Vec<TaskEvaluation>,
}

/// Evaluates traces against their tasks. Traces pair with goals by
/// task_id; results are ordered by task_id regardless of input order.
pub fn build_evaluation(
    name: &str,
    goals: &[Goal],
    traces: &[RunTrace],
    sandbox: &Sandbox,
    options: &MetricsOptions,
) -> Result<Evaluation, ExperimentError> {
    let by_id: BTreeMap<&str, &Goal> = goals.iter().map(|g| (g.task_id.as_str(), g)).collect();
    let mut ordered: BTreeMap<&str, &RunTrace> = BTreeMap::new();
    for trace in traces {
        if ordered.insert(&trace.task_id, trace).is_some() {
            return Err(ExperimentError::DuplicateTrace { task_id: trace.task_id.clone() });
        }
    }
    let mut evaluations = Vec::with_capacity(ordered.len());
    let mut plans = Vec::new();
    let mut modes = BTreeSet::new();
    let mut digests = BTreeSet::new();
    let mut revisit_sums: BTreeMap<String, f64> = AgentRole::EXPERTS
        .iter()
        .map(|e| (e.label().to_string(), 0.0))
        .collect();
    for (task_id, trace) in &ordered {
        let goal = by_id
            .get(task_id)
            .ok_or_else(|| ExperimentError::MissingGoal { task_id: task_id.to_string() })?;
        evaluations.push(evaluate_trace(goal, trace, sandbox));
        if trace.delivered {
            if let Some(plan) = trace.final_plan_text.as_deref().and_then(|t| parse_plan(t).ok()) {
                plans.push(plan);
            }
        }
        modes.insert(trace.mode);
        digests.insert(trace.config_digest.clone());
        for (expert, count) in &trace.revisit_counts {
            *revisit_sums.entry(expert.clone()).or_default() += *count as f64;
        }
    }
    let metrics = compute_metrics(&evaluations, options)?;
    let area_failures = categorize_failures(&evaluations);
    let hallucinations = count_hallucinations(&plans, sandbox);
    let task_count = evaluations.len() as f64;
    let revisit_averages = revisit_sums
        .into_iter()
        .map(|(expert, sum)| (expert, sum / task_count))
        .collect();
    let mut modes: Vec<RunMode> = modes.into_iter().collect();
    modes.sort_by_key(|m| m.label());
    Ok(Evaluation {
        schema_version: EVAL_SCHEMA_VERSION,
        name: name.to_string(),
        modes,
        config_digests: digests.into_iter().collect(),
        metrics,
        revisit_averages,
        area_failures,
        hallucinations,
        tasks: evaluations,
    })
}

pub fn evaluation_to_json(evaluation: &Evaluation) -> String {
    let mut text = serde_json::to_string_pretty(evaluation).expect("evaluation serialization");
    text.push('\n');
    text
}

pub fn evaluation_from_json(text: &str, file: &str) -> Result<Evaluation, ExperimentError> {
    let evaluation: Evaluation =
        serde_json::from_str(text).map_err(|e| ExperimentError::Line {
            file: file.to_string(),
            line: 1,
            message: e.to_string(),
        })?;
    if evaluation.schema_version != EVAL_SCHEMA_VERSION {
        return Err(ExperimentError::SchemaVersion {
            file: file.to_string(),
            found: evaluation.schema_version,
            expected: EVAL_SCHEMA_VERSION,
        });
    }
    Ok(evaluation)
}

pub fn write_evaluation_file(path: &Path, evaluation: &Evaluation) -> Result<(), ExperimentError> {
    std::fs::write(path, evaluation_to_json(evaluation)).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_evaluation_file(path: &Path) -> Result<Evaluation, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    evaluation_from_json(&text, &path.display().to_string())
}

/// Display names for the six headline metrics, in table order.
pub const METRIC_ROWS: [(&str, fn(&BenchmarkMetrics) -> f64); 6] = [
    ("Delivery Rate (%)", |m| m.delivery_rate),
    ("Commonsense Micro Pass Rate (%)", |m| m.commonsense_micro),
    ("Commonsense Macro Pass Rate (%)", |m| m.commonsense_macro),
    ("Hard Micro Pass Rate (%)", |m| m.hard_micro),
    ("Hard Macro Pass Rate (%)", |m| m.hard_macro),
    ("Final Pass Rate (%)", |m| m.final_pass_rate),
];

/// Areas shown in the failure table, expert areas first.
const REPORT_AREAS: [Area; 4] =
    [Area::Transportation, Area::Hotel, Area::Attraction, Area::Restaurant];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub text: String,
    pub csv: String,
}

fn fmt2(value: f64) -> String {
    format!("{value:.2}")
}

/// Failure-rate delta against the baseline column, arrow marking the
/// direction: down is fewer failures.
fn delta_cell(baseline: f64, value: f64) -> String {
    let diff = baseline - value;
    if diff > 1e-9 {
        format!("↓ {}", fmt2(diff))
    } else if diff < -1e-9 {
        format!("↑ {}", fmt2(-diff))
    } else {
        "0.00".to_string()
    }
}

struct TableRow {
    label: String,
    cells: Vec<String>,
}

fn render_text_table(first_header: &str, columns: &[String], rows: &[TableRow]) -> String {
    let label_width = rows
        .iter()
        .map(|r| r.label.chars().count())
        .chain([first_header.chars().count()])
        .max()
        .unwrap_or(0);
    let mut widths: Vec<usize> = columns.iter().map(|c| c.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.cells.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let pad = |s: &str, w: usize| {
        let len = s.chars().count();
        format!("{s}{}", " ".repeat(w.saturating_sub(len)))
    };
    let mut out = String::new();
    out.push_str(&pad(first_header, label_width));
    for (column, width) in columns.iter().zip(&widths) {
        out.push_str("  ");
        out.push_str(&pad(column, *width));
    }
    out.push('\n');
    let total = label_width + widths.iter().map(|w| w + 2).sum::<usize>();
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for row in rows {
        out.push_str(&pad(&row.label, label_width));
        for (cell, width) in row.cells.iter().zip(&widths) {
            out.push_str("  ");
            out.push_str(&pad(cell, *width));
        }
        out.push('\n');
    }
    out
}

fn report_sections(evaluations: &[Evaluation]) -> Vec<(String, Vec<TableRow>)> {
    let mut sections = Vec::new();

    let metric_rows: Vec<TableRow> = METRIC_ROWS
        .iter()
        .map(|(label, pick)| TableRow {
            label: label.to_string(),
            cells: evaluations.iter().map(|e| fmt2(pick(&e.metrics))).collect(),
        })
        .collect();
    sections.push(("Benchmark metrics".to_string(), metric_rows));

    let revisit_rows: Vec<TableRow> = AgentRole::EXPERTS
        .iter()
        .map(|expert| TableRow {
            label: expert.label().to_string(),
            cells: evaluations
                .iter()
                .map(|e| fmt2(e.revisit_averages.get(expert.label()).copied().unwrap_or(0.0)))
                .collect(),
        })
        .collect();
    sections.push(("Average revisits per task".to_string(), revisit_rows));

    let area_rows: Vec<TableRow> = REPORT_AREAS
        .iter()
        .map(|area| TableRow {
            label: area.label().to_string(),
            cells: evaluations
                .iter()
                .map(|e| fmt2(e.area_failures.get(area).copied().unwrap_or(0.0)))
                .collect(),
        })
        .collect();
    sections.push(("Constraints failed by area (%)".to_string(), area_rows));

    if evaluations.len() > 1 {
        let baseline = &evaluations[0];
        let delta_rows: Vec<TableRow> = REPORT_AREAS
            .iter()
            .map(|area| {
                let base = baseline.area_failures.get(area).copied().unwrap_or(0.0);
                TableRow {
                    label: area.label().to_string(),
                    cells: evaluations
                        .iter()
                        .enumerate()
                        .map(|(i, e)| {
                            if i == 0 {
                                "-".to_string()
                            } else {
                                delta_cell(base, e.area_failures.get(area).copied().unwrap_or(0.0))
                            }
                        })
                        .collect(),
                }
            })
            .collect();
        sections.push((format!("Delta vs {} (area failures)", baseline.name), delta_rows));
    }

    let hallucination_rows = vec![TableRow {
        label: "flight / hotel / restaurant / attraction".to_string(),
        cells: evaluations
            .iter()
            .map(|e| {
                format!(
                    "{} / {} / {} / {}",
                    e.hallucinations.flight,
                    e.hallucinations.hotel,
                    e.hallucinations.restaurant,
                    e.hallucinations.attraction
                )
            })
            .collect(),
    }];
    sections.push(("Hallucinated entities".to_string(), hallucination_rows));

    sections
}

/// Renders the side-by-side comparison, columns in input order and
/// deltas against the first input.
pub fn render_report(evaluations: &[Evaluation]) -> Result<Report, ExperimentError> {
    if evaluations.is_empty() {
        return Err(ExperimentError::EmptyReport);
    }
    let columns: Vec<String> = evaluations.iter().map(|e| e.name.clone()).collect();
    let sections = report_sections(evaluations);

    let mut text = String::new();
    for (i, (title, rows)) in sections.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(title);
        text.push('\n');
        text.push_str(&render_text_table("", &columns, rows));
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["section".to_string(), "row".to_string()];
    header.extend(columns.iter().cloned());
    writer.write_record(&header).expect("csv header");
    for (title, rows) in &sections {
        for row in rows {
            let mut record = vec![title.clone(), row.label.clone()];
            record.extend(row.cells.iter().cloned());
            writer.write_record(&record).expect("csv row");
        }
    }
    let csv = String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv utf8");

    Ok(Report { text, csv })
}

fn crash_trace(task_id: String, mode: RunMode, digest: String, message: &str) -> RunTrace {
    let events = vec![
        TraceEvent {
            seq: 1,
            kind: TraceEventKind::Error { message: format!("episode crashed: {message}") },
        },
        TraceEvent { seq: 2, kind: TraceEventKind::Delivery { delivered: false } },
    ];
    RunTrace {
        schema_version: TRACE_SCHEMA_VERSION,
        task_id,
        mode,
        config_digest: digest,
        events,
        delivered: false,
        final_plan_text: None,
        revisit_counts: AgentRole::EXPERTS
            .iter()
            .map(|e| (e.label().to_string(), 0))
            .collect(),
        token_usage: TokenUsage::default(),
        wall_time: std::time::Duration::ZERO,
    }
}

/// Runs one episode on its own task so a panic inside it becomes an
/// undelivered trace instead of taking the batch down.
pub async fn run_episode_isolated(
    goal: Goal,
    sandbox: Arc<Sandbox>,
    backend: Arc<dyn ChatBackend>,
    config: Arc<RunConfig>,
    prompts: Arc<PromptSet>,
) -> RunTrace {
    let task_id = goal.task_id.clone();
    let mode = config.mode;
    let digest = config_digest(&config, &prompts);
    let handle = tokio::spawn(async move {
        run_episode(goal, &sandbox, backend.as_ref(), &config, &prompts).await
    });
    match handle.await {
        Ok(trace) => trace,
        Err(join_error) => crash_trace(task_id, mode, digest, &join_error.to_string()),
    }
}
