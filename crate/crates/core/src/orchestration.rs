//! Episode drivers: run one task to completion under the fixed
//! workflow, orchestrator-led selection, or a single agent, producing
//! a replayable trace.
//!
//! Delivery rule: an episode is delivered iff a compiler (or single
//! agent) message containing a parseable plan was published within the
//! step limit. The limit counts public messages of every kind; the
//! endgame (summarizer onward) cannot be interrupted by the
//! orchestrator but still counts against the limit.

use crate::agents::{
    compile_plan, critic_review, expert_turn, orchestrator_decide, prompts::PromptSet, spec_for,
    summarize_for_planner, AgentError, Decoding,
};
use crate::gateway::{BackendConfig, ChatBackend, ChatRequest, ChatTurn, TokenUsage};
use crate::plan::parse_plan;
use crate::roles::AgentRole;
use crate::sandbox::Sandbox;
use crate::tools;
use crate::world::{Goal, NotebookEntry, WorldState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Fixed,
    Orchestrated,
    SingleAgent,
}

impl RunMode {
    pub const ALL: [RunMode; 3] = [RunMode::Fixed, RunMode::Orchestrated, RunMode::SingleAgent];

    pub fn label(self) -> &'static str {
        match self {
            RunMode::Fixed => "fixed",
            RunMode::Orchestrated => "orchestrated",
            RunMode::SingleAgent => "single_agent",
        }
    }

    /// Accepts the CLI spellings, "single" included.
    pub fn from_label(label: &str) -> Option<RunMode> {
        match label.trim().to_lowercase().as_str() {
            "fixed" => Some(RunMode::Fixed),
            "orchestrated" => Some(RunMode::Orchestrated),
            "single" | "single_agent" => Some(RunMode::SingleAgent),
            _ => None,
        }
    }
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: RunMode,
    /// Public-message budget for the whole episode.
    pub max_steps: u32,
    pub max_critic_rounds: u32,
    pub max_tool_rounds_per_turn: u32,
    pub backend: BackendConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: RunMode::Fixed,
            max_steps: 30,
            max_critic_rounds: 3,
            max_tool_rounds_per_turn: 5,
            backend: BackendConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn for_mode(mode: RunMode) -> Self {
        RunConfig { mode, ..RunConfig::default() }
    }
}

/// Digest covering everything that determines scripted behavior:
/// the run config and the full prompt set.
pub fn config_digest(config: &RunConfig, prompts: &PromptSet) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(config).expect("config serialization"));
    hasher.update(serde_json::to_vec(prompts.to_map()).expect("prompt serialization"));
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Strictly increasing from 1.
    pub seq: u32,
    #[serde(flatten)]
    pub kind: TraceEventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEventKind {
    Message {
        index: u32,
        author: AgentRole,
        content: String,
    },
    ToolCall {
        author: AgentRole,
        name: String,
        arguments: Vec<String>,
    },
    NotebookWrite {
        entry: NotebookEntry,
    },
    Decision {
        turn_index: u32,
        reflection: String,
        chosen: AgentRole,
        fallback: bool,
    },
    Error {
        message: String,
    },
    Delivery {
        delivered: bool,
    },
}

/// Everything one episode produced. Serialization is deterministic;
/// wall time is deliberately excluded so replays are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub schema_version: u32,
    pub task_id: String,
    pub mode: RunMode,
    pub config_digest: String,
    pub events: Vec<TraceEvent>,
    pub delivered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_plan_text: Option<String>,
    /// Expert label to revisit count; zero for every expert in fixed
    /// and single-agent modes.
    pub revisit_counts: BTreeMap<String, u32>,
    pub token_usage: TokenUsage,
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Turns after each expert's first turn, from the public messages.
pub fn count_revisits(trace: &RunTrace) -> BTreeMap<String, u32> {
    let mut turns: BTreeMap<AgentRole, u32> = BTreeMap::new();
    for event in &trace.events {
        if let TraceEventKind::Message { author, .. } = &event.kind {
            if author.is_expert() {
                *turns.entry(*author).or_default() += 1;
            }
        }
    }
    AgentRole::EXPERTS
        .iter()
        .map(|e| (e.label().to_string(), turns.get(e).copied().unwrap_or(0).saturating_sub(1)))
        .collect()
}

struct Episode<'a> {
    state: WorldState,
    sandbox: &'a Sandbox,
    backend: &'a dyn ChatBackend,
    config: &'a RunConfig,
    prompts: &'a PromptSet,
    decoding: Decoding,
    events: Vec<TraceEvent>,
    usage: TokenUsage,
    final_plan: Option<String>,
}

impl<'a> Episode<'a> {
    fn new(
        goal: Goal,
        sandbox: &'a Sandbox,
        backend: &'a dyn ChatBackend,
        config: &'a RunConfig,
        prompts: &'a PromptSet,
    ) -> Self {
        Episode {
            state: WorldState::new(goal),
            sandbox,
            backend,
            config,
            prompts,
            decoding: Decoding::from_backend(&config.backend),
            events: Vec::new(),
            usage: TokenUsage::default(),
            final_plan: None,
        }
    }

    fn push(&mut self, kind: TraceEventKind) {
        let seq = self.events.len() as u32 + 1;
        self.events.push(TraceEvent { seq, kind });
    }

    fn limit_reached(&self) -> bool {
        self.state.conversation.len() as u32 >= self.config.max_steps
    }

    /// Appends a public message unless the step limit is exhausted.
    /// Returns false on cut-off.
    fn try_append(&mut self, author: AgentRole, content: &str) -> bool {
        if self.limit_reached() {
            return false;
        }
        let message = self
            .state
            .append_message(author, content)
            .expect("speaking role")
            .clone();
        self.push(TraceEventKind::Message {
            index: message.index,
            author: message.author,
            content: message.content,
        });
        true
    }

    async fn expert_round(&mut self, role: AgentRole) -> Result<(), AgentError> {
        let spec = spec_for(role, self.prompts);
        let report = expert_turn(
            &spec,
            &mut self.state,
            self.sandbox,
            self.backend,
            &self.decoding,
            self.prompts,
            self.config.max_tool_rounds_per_turn,
        )
        .await?;
        self.usage.accumulate(report.usage);
        for (call, entry_id) in report.executed_calls.iter().zip(&report.entry_ids) {
            self.push(TraceEventKind::ToolCall {
                author: role,
                name: call.name.clone(),
                arguments: call.arguments.clone(),
            });
            let entry = self.state.notebook.entries[(*entry_id - 1) as usize].clone();
            self.push(TraceEventKind::NotebookWrite { entry });
        }
        self.try_append(role, &report.message);
        Ok(())
    }

    /// Summarize, compile, and let the critic refine. Once entered the
    /// orchestrator never interrupts; the message budget still applies.
    async fn endgame(&mut self) -> Result<(), AgentError> {
        let brief = summarize_for_planner(&self.state.goal, &self.state.notebook);
        let obs = self.state.observe(AgentRole::PlanCompiler);
        let (plan_text, usage) =
            compile_plan(&brief, &obs, self.backend, &self.decoding, self.prompts).await?;
        self.usage.accumulate(usage);
        if !self.try_append(AgentRole::PlanCompiler, &plan_text) {
            return Ok(());
        }
        self.final_plan = Some(plan_text);

        for _round in 0..self.config.max_critic_rounds {
            if self.limit_reached() {
                return Ok(());
            }
            let verdict = critic_review(
                &self.state.observe(AgentRole::PlanCritic),
                self.backend,
                &self.decoding,
                self.prompts,
            )
            .await?;
            self.usage.accumulate(verdict.usage);
            if !self.try_append(AgentRole::PlanCritic, &verdict.text) {
                return Ok(());
            }
            if verdict.approved {
                return Ok(());
            }
            if self.limit_reached() {
                return Ok(());
            }
            let obs = self.state.observe(AgentRole::PlanCompiler);
            let (revised, usage) =
                compile_plan(&brief, &obs, self.backend, &self.decoding, self.prompts).await?;
            self.usage.accumulate(usage);
            if !self.try_append(AgentRole::PlanCompiler, &revised) {
                return Ok(());
            }
            self.final_plan = Some(revised);
        }
        Ok(())
    }

    fn finish(mut self, mode: RunMode, error: Option<AgentError>) -> RunTrace {
        if let Some(e) = error {
            self.push(TraceEventKind::Error { message: e.to_string() });
        }
        let delivered = self
            .final_plan
            .as_deref()
            .is_some_and(|text| parse_plan(text).is_ok());
        self.push(TraceEventKind::Delivery { delivered });
        let trace = RunTrace {
            schema_version: TRACE_SCHEMA_VERSION,
            task_id: self.state.goal.task_id.clone(),
            mode,
            config_digest: config_digest(self.config, self.prompts),
            events: self.events,
            delivered,
            final_plan_text: self.final_plan,
            revisit_counts: BTreeMap::new(),
            token_usage: self.usage,
            wall_time: std::time::Duration::ZERO,
        };
        let revisits = count_revisits(&trace);
        RunTrace { revisit_counts: revisits, ..trace }
    }
}

/// Experts speak once each in the fixed order, then the endgame runs.
pub async fn run_fixed(
    goal: Goal,
    sandbox: &Sandbox,
    backend: &dyn ChatBackend,
    config: &RunConfig,
    prompts: &PromptSet,
) -> RunTrace {
    debug_assert_eq!(config.mode, RunMode::Fixed);
    let mut ep = Episode::new(goal, sandbox, backend, config, prompts);
    let result = async {
        for role in AgentRole::EXPERTS {
            if ep.limit_reached() {
                return Ok(());
            }
            ep.expert_round(role).await?;
        }
        ep.endgame().await
    }
    .await;
    ep.finish(RunMode::Fixed, result.err())
}

/// The orchestrator picks every turn; FINISH enters the endgame.
pub async fn run_orchestrated(
    goal: Goal,
    sandbox: &Sandbox,
    backend: &dyn ChatBackend,
    config: &RunConfig,
    prompts: &PromptSet,
) -> RunTrace {
    debug_assert_eq!(config.mode, RunMode::Orchestrated);
    let roster: Vec<AgentRole> = std::iter::once(AgentRole::Orchestrator)
        .chain(AgentRole::EXPERTS)
        .chain([AgentRole::PlanSummarizer, AgentRole::PlanCompiler, AgentRole::PlanCritic])
        .collect();
    let mut ep = Episode::new(goal, sandbox, backend, config, prompts);
    let mut last_expert: Option<AgentRole> = None;
    let result = async {
        loop {
            if ep.limit_reached() {
                return Ok(());
            }
            let obs = ep.state.observe(AgentRole::Orchestrator);
            let decision = orchestrator_decide(
                &obs,
                &roster,
                ep.backend,
                &ep.decoding,
                ep.prompts,
                last_expert,
            )
            .await?;
            ep.usage.accumulate(decision.usage);
            ep.state.record_reflection(&decision.reflection);
            ep.push(TraceEventKind::Decision {
                turn_index: decision.turn_index,
                reflection: decision.reflection.clone(),
                chosen: decision.chosen,
                fallback: decision.fallback,
            });
            if decision.chosen == AgentRole::PlanSummarizer {
                return ep.endgame().await;
            }
            ep.expert_round(decision.chosen).await?;
            last_expert = Some(decision.chosen);
        }
    }
    .await;
    ep.finish(RunMode::Orchestrated, result.err())
}

/// One agent, all four tools, no notebook, no orchestrator. Every
/// model reply is a public message; a reply without tool calls is the
/// final plan candidate.
pub async fn run_single_agent(
    goal: Goal,
    sandbox: &Sandbox,
    backend: &dyn ChatBackend,
    config: &RunConfig,
    prompts: &PromptSet,
) -> RunTrace {
    debug_assert_eq!(config.mode, RunMode::SingleAgent);
    let mut ep = Episode::new(goal, sandbox, backend, config, prompts);
    let spec = spec_for(AgentRole::SingleAgent, prompts);
    let context = crate::agents::prompts::render(
        prompts.get("single_context"),
        &[("goal", crate::agents::render_goal(&ep.state.goal).as_str())],
    );
    let mut turns = vec![ChatTurn { speaker: "user".into(), text: context }];
    let result = async {
        loop {
            if ep.limit_reached() {
                return Ok(());
            }
            let request = ChatRequest {
                system_prompt: spec.system_prompt.clone(),
                turns: turns.clone(),
                temperature: ep.decoding.temperature,
                max_tokens: ep.decoding.max_tokens,
                model_id: ep.decoding.model_id.clone(),
            };
            let response = ep.backend.complete(spec.role.label(), &request).await?;
            ep.usage.accumulate(response.usage);
            let reply = response.text;
            ep.try_append(AgentRole::SingleAgent, &reply);

            let extracted = crate::agents::extract::extract_tool_calls(&reply, &spec.tool_permissions);
            if extracted.is_empty() {
                ep.final_plan = Some(reply);
                return Ok(());
            }
            let mut sections = Vec::new();
            for extracted_call in extracted {
                let call = extracted_call.call;
                match tools::execute(ep.sandbox, &call) {
                    Ok((_, records)) => {
                        ep.push(TraceEventKind::ToolCall {
                            author: AgentRole::SingleAgent,
                            name: call.name.clone(),
                            arguments: call.arguments.clone(),
                        });
                        sections.push(format!(
                            "{} returned {} record(s):\n{}",
                            call.render(),
                            records.len(),
                            tools::render_records(&records),
                        ));
                    }
                    Err(e) => sections.push(format!("{}: not executed; {e}", call.render())),
                }
            }
            let returns_text = crate::agents::prompts::render(
                prompts.get("tool_returns"),
                &[("tool_returns", sections.join("\n\n").as_str())],
            );
            turns.push(ChatTurn { speaker: "assistant".into(), text: reply });
            turns.push(ChatTurn { speaker: "user".into(), text: returns_text });
        }
    }
    .await;
    ep.finish(RunMode::SingleAgent, result.err())
}

/// Dispatches on the configured mode.
pub async fn run_episode(
    goal: Goal,
    sandbox: &Sandbox,
    backend: &dyn ChatBackend,
    config: &RunConfig,
    prompts: &PromptSet,
) -> RunTrace {
    match config.mode {
        RunMode::Fixed => run_fixed(goal, sandbox, backend, config, prompts).await,
        RunMode::Orchestrated => run_orchestrated(goal, sandbox, backend, config, prompts).await,
        RunMode::SingleAgent => run_single_agent(goal, sandbox, backend, config, prompts).await,
    }
}
