//! Role behaviors: expert tool loops, orchestrator selection with
//! self-reflection, the deterministic plan summarizer, the plan
//! compiler, and the plan critic.
//!
//! Everything that talks to a model goes through [`ChatBackend`]; under
//! a scripted backend every function here is a pure function of
//! (task, cassette, config).

pub mod extract;
pub mod prompts;

use crate::gateway::{ChatBackend, ChatRequest, ChatTurn, GatewayError, TokenUsage};
use crate::roles::{AgentRole, Domain};
use crate::sandbox::Sandbox;
use crate::tools;
use crate::world::{Conversation, Goal, Notebook, Observation, PendingReturns, ToolCall, WorldState};
use extract::extract_tool_calls;
use prompts::{render, PromptSet};
use std::collections::BTreeSet;
use std::sync::LazyLock;

/// The critic's exact approval token; anything else is a critique.
pub const APPROVAL_TOKEN: &str = "PLAN APPROVED";

/// Published when an expert keeps reaching for tools it does not own.
pub const FORBIDDEN_TOOL_APOLOGY: &str =
    "I am sorry, I kept trying to use a tool outside my role and cannot finish my part.";

/// Published when an expert exhausts its tool budget for the turn.
pub const ROUND_CAP_APOLOGY: &str =
    "I am sorry, I ran out of tool budget before settling my part; please work with what has been gathered.";

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("model call failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error("visibility breach: {0}")]
    Visibility(&'static str),
}

/// Decoding parameters copied into every request.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoding {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Decoding {
    pub fn from_backend(config: &crate::gateway::BackendConfig) -> Self {
        Decoding {
            model_id: config.model.clone(),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
        }
    }

    fn request(&self, system_prompt: String, turns: Vec<ChatTurn>) -> ChatRequest {
        ChatRequest {
            system_prompt,
            turns,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            model_id: self.model_id.clone(),
        }
    }
}

/// Static description of one role's capabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub role: AgentRole,
    pub system_prompt: String,
    pub tool_permissions: BTreeSet<String>,
    pub notebook_read: bool,
    pub notebook_write: bool,
    pub is_llm_backed: bool,
}

pub fn spec_for(role: AgentRole, prompts: &PromptSet) -> AgentSpec {
    let system_prompt = match role {
        AgentRole::TransportExpert
        | AgentRole::HotelExpert
        | AgentRole::RestaurantExpert
        | AgentRole::AttractionExpert => prompts.expert_prompt(role).to_string(),
        AgentRole::Orchestrator => prompts.get("orchestrator").to_string(),
        AgentRole::PlanSummarizer => String::new(),
        AgentRole::PlanCompiler => prompts.get("plan_compiler").to_string(),
        AgentRole::PlanCritic => prompts.get("plan_critic").to_string(),
        AgentRole::SingleAgent => prompts.get("single_agent").to_string(),
    };
    AgentSpec {
        role,
        system_prompt,
        tool_permissions: tools::permitted_tools(role),
        notebook_read: matches!(role, AgentRole::PlanSummarizer | AgentRole::PlanCompiler),
        notebook_write: role.is_expert(),
        is_llm_backed: role != AgentRole::PlanSummarizer,
    }
}

/// Plain-text goal rendering shared by every prompt.
pub fn render_goal(goal: &Goal) -> String {
    let m = &goal.metadata;
    let mut out = format!(
        "{}\nOrigin: {}\nDestination: {}\nDates: {}\nTravelers: {}\n",
        goal.query_text,
        m.origin,
        m.destination,
        m.dates.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", "),
        m.traveler_count,
    );
    if let Some(budget) = m.budget {
        out.push_str(&format!("Budget: {budget:.2}\n"));
    }
    let c = &m.constraints;
    if !c.room_rules.is_empty() {
        out.push_str(&format!("Room rules: {}\n", c.room_rules.join("; ")));
    }
    if let Some(room_type) = &c.room_type {
        out.push_str(&format!("Room type: {room_type}\n"));
    }
    if !c.cuisines.is_empty() {
        out.push_str(&format!("Cuisines required: {}\n", c.cuisines.join("; ")));
    }
    if let Some(transportation) = &c.transportation {
        out.push_str(&format!("Transportation preference: {transportation}\n"));
    }
    out.trim_end().to_string()
}

pub fn render_conversation(conversation: &Conversation) -> String {
    if conversation.is_empty() {
        return "(no messages yet)".to_string();
    }
    conversation
        .messages
        .iter()
        .map(|m| format!("[{}] {}: {}", m.index, m.author, m.content))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn render_roster(experts: &[AgentRole]) -> String {
    experts
        .iter()
        .map(|role| {
            let what = match role {
                AgentRole::TransportExpert => "searches flights and proposes the transportation legs",
                AgentRole::HotelExpert => "searches hotels and proposes accommodation",
                AgentRole::RestaurantExpert => "searches restaurants and proposes meals",
                AgentRole::AttractionExpert => "searches attractions and proposes sightseeing",
                other => unreachable!("{other} in expert roster"),
            };
            format!("- {role}: {what}")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Outcome of one expert turn. The public message is returned, not
/// appended; the episode driver owns the conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertTurnReport {
    pub message: String,
    /// Executed calls, in order; one notebook entry each.
    pub executed_calls: Vec<ToolCall>,
    pub entry_ids: Vec<u32>,
    pub usage: TokenUsage,
    pub aborted: bool,
}

/// Runs one expert turn: query the model, execute extracted tool
/// calls against the sandbox, write each return to the notebook, feed
/// the returns back privately, and repeat until a reply holds no tool
/// call; that reply is the public message.
pub async fn expert_turn(
    spec: &AgentSpec,
    state: &mut WorldState,
    sandbox: &Sandbox,
    backend: &dyn ChatBackend,
    decoding: &Decoding,
    prompts: &PromptSet,
    max_tool_rounds: u32,
) -> Result<ExpertTurnReport, AgentError> {
    assert!(spec.role.is_expert(), "expert_turn called for {}", spec.role);
    let context = render(
        prompts.get("expert_context"),
        &[
            ("goal", render_goal(&state.goal).as_str()),
            ("conversation", render_conversation(&state.conversation).as_str()),
        ],
    );
    let mut turns = vec![ChatTurn { speaker: "user".into(), text: context }];
    let mut usage = TokenUsage::default();
    let mut executed_calls = Vec::new();
    let mut entry_ids = Vec::new();
    let mut rounds = 0u32;
    let mut forbidden_reported = false;
    let registry = tools::registry_names();
    state.pending_returns = Some(PendingReturns { role: spec.role, entries: Vec::new() });

    let finish = |state: &mut WorldState, message: String, aborted: bool, usage, executed_calls, entry_ids| {
        state.pending_returns = None;
        Ok(ExpertTurnReport { message, executed_calls, entry_ids, usage, aborted })
    };

    loop {
        let request = decoding.request(spec.system_prompt.clone(), turns.clone());
        let response = match backend.complete(spec.role.label(), &request).await {
            Ok(r) => r,
            Err(e) => {
                state.pending_returns = None;
                return Err(e.into());
            }
        };
        usage.accumulate(response.usage);
        let reply = response.text;

        let extracted = extract_tool_calls(&reply, &registry);
        if extracted.is_empty() {
            return finish(state, reply, false, usage, executed_calls, entry_ids);
        }

        let (permitted, forbidden): (Vec<_>, Vec<_>) = extracted
            .into_iter()
            .partition(|e| spec.tool_permissions.contains(&e.call.name));
        if !forbidden.is_empty() {
            if forbidden_reported {
                return finish(
                    state,
                    FORBIDDEN_TOOL_APOLOGY.to_string(),
                    true,
                    usage,
                    executed_calls,
                    entry_ids,
                );
            }
            forbidden_reported = true;
            let called: Vec<&str> = forbidden.iter().map(|e| e.call.name.as_str()).collect();
            let allowed: Vec<&str> = spec.tool_permissions.iter().map(String::as_str).collect();
            let note = format!(
                "You called {}, which is not your tool. You may only call: {}.",
                called.join(", "),
                allowed.join(", "),
            );
            turns.push(ChatTurn { speaker: "assistant".into(), text: reply });
            turns.push(ChatTurn { speaker: "user".into(), text: note });
            continue;
        }

        if rounds >= max_tool_rounds {
            return finish(
                state,
                ROUND_CAP_APOLOGY.to_string(),
                true,
                usage,
                executed_calls,
                entry_ids,
            );
        }
        rounds += 1;

        let mut sections = Vec::new();
        for extracted_call in permitted {
            let call = extracted_call.call;
            match tools::execute(sandbox, &call) {
                Ok((domain, records)) => {
                    let rendered = format!(
                        "{} returned {} record(s):\n{}",
                        call.render(),
                        records.len(),
                        tools::render_records(&records),
                    );
                    let entry = state
                        .notebook_write(spec.role, domain, call.clone(), records)
                        .expect("author verified as expert")
                        .clone();
                    if let Some(pending) = &mut state.pending_returns {
                        pending.entries.push(entry.clone());
                    }
                    entry_ids.push(entry.entry_id);
                    executed_calls.push(call);
                    sections.push(rendered);
                }
                // A malformed call is reported privately, not executed,
                // and leaves no notebook entry.
                Err(e) => sections.push(format!("{}: not executed; {e}", call.render())),
            }
        }
        let returns_text = render(
            prompts.get("tool_returns"),
            &[("tool_returns", sections.join("\n\n").as_str())],
        );
        turns.push(ChatTurn { speaker: "assistant".into(), text: reply });
        turns.push(ChatTurn { speaker: "user".into(), text: returns_text });
    }
}

/// The orchestrator's choice for the next turn. `FINISH` surfaces as
/// [`AgentRole::PlanSummarizer`].
#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorDecision {
    pub reflection: String,
    pub chosen: AgentRole,
    /// Conversation length at decision time.
    pub turn_index: u32,
    /// True when both parse attempts failed and the fixed-order
    /// successor was used instead.
    pub fallback: bool,
    pub usage: TokenUsage,
}

static NEXT_MARKER: LazyLock<regex::Regex> =
    LazyLock::new(|| regex::Regex::new(r"(?i)next\s*:").expect("next marker regex"));
static REFLECTION_MARKER: LazyLock<regex::Regex> =
    LazyLock::new(|| regex::Regex::new(r"(?i)reflection\s*:").expect("reflection marker regex"));

/// Parses "REFLECTION: ... NEXT: <agent|FINISH>". The last NEXT marker
/// wins so a reply that quotes the format is still parseable.
fn parse_decision(reply: &str, experts: &[AgentRole]) -> Option<(String, AgentRole)> {
    let next = NEXT_MARKER.find_iter(reply).last()?;
    let line = reply[next.end()..].lines().next().unwrap_or("").trim();
    let candidate: String = line
        .trim_matches(|c: char| c.is_whitespace() || matches!(c, '.' | '!' | '*' | '`' | '"' | '\''))
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    let chosen = if candidate.eq_ignore_ascii_case("finish") {
        AgentRole::PlanSummarizer
    } else {
        let role = AgentRole::from_label(&candidate)?;
        if !experts.contains(&role) {
            return None;
        }
        role
    };
    let reflection = match REFLECTION_MARKER.find(reply) {
        Some(m) if m.end() <= next.start() => reply[m.end()..next.start()].trim(),
        _ => reply[..next.start()].trim(),
    };
    let reflection = if reflection.is_empty() { "(no reflection)" } else { reflection };
    Some((reflection.to_string(), chosen))
}

/// Asks the model who should act next. One re-prompt on an
/// unparseable reply; a second failure falls back to the fixed-order
/// successor of `last_expert`, so the episode always progresses.
pub async fn orchestrator_decide(
    obs: &Observation,
    roster: &[AgentRole],
    backend: &dyn ChatBackend,
    decoding: &Decoding,
    prompts: &PromptSet,
    last_expert: Option<AgentRole>,
) -> Result<OrchestratorDecision, AgentError> {
    if obs.notebook_view.is_some() {
        return Err(AgentError::Visibility(
            "orchestrator observation must not include the notebook",
        ));
    }
    let experts: Vec<AgentRole> = roster.iter().copied().filter(|r| r.is_expert()).collect();
    let choices = experts
        .iter()
        .map(|r| r.label().to_string())
        .chain(["FINISH".to_string()])
        .collect::<Vec<_>>()
        .join(", ");
    let system = render(prompts.get("orchestrator"), &[("choices", choices.as_str())]);
    let context = render(
        prompts.get("orchestrator_context"),
        &[
            ("goal", render_goal(&obs.goal_view).as_str()),
            ("roster", render_roster(&experts).as_str()),
            ("conversation", render_conversation(&obs.conversation_view).as_str()),
        ],
    );
    let turn_index = obs.conversation_view.len() as u32;
    let mut turns = vec![ChatTurn { speaker: "user".into(), text: context }];
    let mut usage = TokenUsage::default();

    for _attempt in 0..2 {
        let request = decoding.request(system.clone(), turns.clone());
        let response = backend.complete(AgentRole::Orchestrator.label(), &request).await?;
        usage.accumulate(response.usage);
        if let Some((reflection, chosen)) = parse_decision(&response.text, &experts) {
            return Ok(OrchestratorDecision { reflection, chosen, turn_index, fallback: false, usage });
        }
        turns.push(ChatTurn { speaker: "assistant".into(), text: response.text });
        turns.push(ChatTurn {
            speaker: "user".into(),
            text: format!(
                "Your reply could not be parsed. Reply in exactly this format:\nREFLECTION: <reasoning>\nNEXT: <one of: {choices}>"
            ),
        });
    }

    let chosen = last_expert
        .map(AgentRole::fixed_order_successor)
        .unwrap_or(AgentRole::TransportExpert);
    Ok(OrchestratorDecision {
        reflection: "(unparseable replies; fixed-order fallback)".to_string(),
        chosen,
        turn_index,
        fallback: true,
        usage,
    })
}

/// Marker line used when the notebook is empty.
pub const NO_EVIDENCE_MARKER: &str = "No gathered evidence.";

/// Deterministic, non-LLM planning brief: the goal, then every
/// notebook entry grouped by domain in write order, records rendered
/// field-by-field. Nothing is invented or dropped.
pub fn summarize_for_planner(goal: &Goal, notebook: &Notebook) -> String {
    let mut out = String::from("Planning brief\n\n");
    out.push_str(&render_goal(goal));
    out.push_str("\n\nGathered evidence:\n");
    if notebook.is_empty() {
        out.push_str(NO_EVIDENCE_MARKER);
        out.push('\n');
        return out;
    }
    for domain in Domain::ALL {
        let entries: Vec<_> = notebook.entries.iter().filter(|e| e.domain == domain).collect();
        if entries.is_empty() {
            continue;
        }
        out.push_str(&format!("\n[{domain}]\n"));
        for entry in entries {
            out.push_str(&format!(
                "{} returned {} record(s):\n{}\n",
                entry.tool_call.render(),
                entry.records.len(),
                tools::render_records(&entry.records),
            ));
        }
    }
    out
}

/// One compiler call. The reply should contain a plan block; it is
/// returned raw and the parser decides delivery downstream.
pub async fn compile_plan(
    brief: &str,
    obs: &Observation,
    backend: &dyn ChatBackend,
    decoding: &Decoding,
    prompts: &PromptSet,
) -> Result<(String, TokenUsage), AgentError> {
    if obs.notebook_view.is_none() {
        return Err(AgentError::Visibility("plan compiler requires the notebook view"));
    }
    let context = render(
        prompts.get("compile_context"),
        &[
            ("goal", render_goal(&obs.goal_view).as_str()),
            ("conversation", render_conversation(&obs.conversation_view).as_str()),
            ("brief", brief),
        ],
    );
    let request = decoding.request(
        prompts.get("plan_compiler").to_string(),
        vec![ChatTurn { speaker: "user".into(), text: context }],
    );
    let response = backend.complete(AgentRole::PlanCompiler.label(), &request).await?;
    Ok((response.text, response.usage))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticVerdict {
    pub approved: bool,
    pub text: String,
    pub usage: TokenUsage,
}

/// One critic review of the conversation's latest plan. The critic
/// sees the goal and the conversation only, never the notebook.
pub async fn critic_review(
    obs: &Observation,
    backend: &dyn ChatBackend,
    decoding: &Decoding,
    prompts: &PromptSet,
) -> Result<CriticVerdict, AgentError> {
    if obs.notebook_view.is_some() {
        return Err(AgentError::Visibility("critic observation must not include the notebook"));
    }
    let context = render(
        prompts.get("critic_context"),
        &[
            ("goal", render_goal(&obs.goal_view).as_str()),
            ("conversation", render_conversation(&obs.conversation_view).as_str()),
        ],
    );
    let request = decoding.request(
        prompts.get("plan_critic").to_string(),
        vec![ChatTurn { speaker: "user".into(), text: context }],
    );
    let response = backend.complete(AgentRole::PlanCritic.label(), &request).await?;
    Ok(CriticVerdict {
        approved: response.text.contains(APPROVAL_TOKEN),
        text: response.text,
        usage: response.usage,
    })
}
