//! Wire types for the HTTP service. Kept in the core crate so the
//! server and the client share one definition of every payload.

use crate::eval::MetricsOptions;
use crate::experiment::{Evaluation, TaskRecord};
use crate::gateway::Cassette;
use crate::orchestration::{RunConfig, RunTrace};
use crate::roles::Domain;
use crate::sandbox::SandboxStats;
use crate::world::ToolRecords;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const HEALTH_PATH: &str = "/v1/health";
/// Tool routes live under this prefix, one route per registry name;
/// the misspelled restaurant route is the canonical one.
pub const TOOLS_PREFIX: &str = "/v1/tools";
pub const EPISODES_PATH: &str = "/v1/episodes";
pub const EVALUATE_PATH: &str = "/v1/evaluate";
pub const REPORT_PATH: &str = "/v1/report";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub sandbox: SandboxStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightSearchRequest {
    pub origin: String,
    pub destination: String,
    /// "YYYY-MM-DD".
    pub date: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySearchRequest {
    pub city: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResponse {
    pub domain: Domain,
    pub records: ToolRecords,
    /// The same records in the text form agents see.
    pub rendered: String,
}

/// One episode to run. Scripted backends replay the inline cassette;
/// remote backends read credentials from the server's environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRequest {
    pub task: TaskRecord,
    #[serde(default)]
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cassette: Option<Cassette>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prompt_overrides: BTreeMap<String, String>,
    /// Capture every exchange and return it as a cassette.
    #[serde(default)]
    pub record: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResponse {
    pub trace: RunTrace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recorded_cassette: Option<Cassette>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    pub name: String,
    pub tasks: Vec<TaskRecord>,
    pub traces: Vec<RunTrace>,
    #[serde(default)]
    pub options: MetricsOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateResponse {
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRequest {
    pub evaluations: Vec<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportResponse {
    pub text: String,
    pub csv: String,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
