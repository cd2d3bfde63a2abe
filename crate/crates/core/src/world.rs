//! World state for one planning episode: the public conversation, the
//! shared notebook, and the goal, plus the per-role observation
//! projections that keep each agent inside its visibility envelope.
//!
//! Rules enforced here:
//! - the orchestrator and the summarizer never speak publicly
//! - only experts write notebook entries
//! - only the summarizer and the compiler may read the notebook
//! - tool returns are visible to the calling expert during its own
//!   turn only; the durable copy is the notebook

use crate::roles::{AgentRole, Domain};
use crate::sandbox::{
    AttractionRecord, EntityKind, FlightRecord, HotelRecord, RestaurantRecord, Sandbox,
};
use crate::types::CalendarDate;
use serde::{Deserialize, Serialize};

/// Hard, user-specified requirements attached to a task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HardConstraintSpec {
    /// Party attributes the hotel must tolerate, e.g. "smoking", "pets".
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub room_rules: Vec<String>,
    /// Requested room type, e.g. "entire room" or "not shared room".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_type: Option<String>,
    /// Cuisines that must each appear at least once across the trip.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cuisines: Vec<String>,
    /// Transportation preference, e.g. "no flight".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transportation: Option<String>,
}

impl HardConstraintSpec {
    pub fn is_empty(&self) -> bool {
        self.room_rules.is_empty()
            && self.room_type.is_none()
            && self.cuisines.is_empty()
            && self.transportation.is_none()
    }
}

/// Structured fields parsed from a benchmark task record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalMetadata {
    pub origin: String,
    pub destination: String,
    /// One calendar date per trip day, in order.
    pub dates: Vec<CalendarDate>,
    pub duration_days: u32,
    pub traveler_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default)]
    pub constraints: HardConstraintSpec,
}

/// The task: a natural-language query plus its structured metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub task_id: String,
    pub query_text: String,
    pub metadata: GoalMetadata,
}

/// One public message. Indices are 1-based and contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub index: u32,
    pub author: AgentRole,
    pub content: String,
}

/// The append-only public conversation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub messages: Vec<Message>,
}

impl Conversation {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn last_message_by(&self, role: AgentRole) -> Option<&Message> {
        self.messages.iter().rev().find(|m| m.author == role)
    }
}

/// A tool invocation as issued by an agent, arguments verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub arguments: Vec<String>,
}

impl ToolCall {
    pub fn render(&self) -> String {
        format!("{}({})", self.name, self.arguments.join(", "))
    }
}

/// Typed tool return. Records are stored exactly as the sandbox
/// returned them, never paraphrased.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "items", rename_all = "snake_case")]
pub enum ToolRecords {
    Flights(Vec<FlightRecord>),
    Hotels(Vec<HotelRecord>),
    Restaurants(Vec<RestaurantRecord>),
    Attractions(Vec<AttractionRecord>),
}

impl ToolRecords {
    pub fn len(&self) -> usize {
        match self {
            ToolRecords::Flights(v) => v.len(),
            ToolRecords::Hotels(v) => v.len(),
            ToolRecords::Restaurants(v) => v.len(),
            ToolRecords::Attractions(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entity names carried by these records, paired with their kind.
    pub fn entity_names(&self) -> Vec<(EntityKind, String)> {
        match self {
            ToolRecords::Flights(v) => v
                .iter()
                .map(|f| (EntityKind::Flight, f.flight_number.clone()))
                .collect(),
            ToolRecords::Hotels(v) => v
                .iter()
                .map(|h| (EntityKind::Hotel, h.name.clone()))
                .collect(),
            ToolRecords::Restaurants(v) => v
                .iter()
                .map(|r| (EntityKind::Restaurant, r.name.clone()))
                .collect(),
            ToolRecords::Attractions(v) => v
                .iter()
                .map(|a| (EntityKind::Attraction, a.name.clone()))
                .collect(),
        }
    }
}

/// One notebook entry: an executed tool call and its verbatim return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotebookEntry {
    pub entry_id: u32,
    pub author: AgentRole,
    pub domain: Domain,
    pub tool_call: ToolCall,
    pub records: ToolRecords,
    /// Conversation length at write time; the entry belongs to the
    /// turn that produced message turn_index + 1.
    pub turn_index: u32,
}

/// The append-only notebook. Experts write, summarizer/compiler read.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Notebook {
    pub entries: Vec<NotebookEntry>,
}

impl Notebook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every (kind, name) pair appearing in any entry's records.
    pub fn entity_names(&self) -> Vec<(EntityKind, String)> {
        self.entries
            .iter()
            .flat_map(|e| e.records.entity_names())
            .collect()
    }

    /// Checks that every record still resolves in the sandbox. Holds by
    /// construction for entries produced by real tool calls; audited in
    /// tests and on loaded traces.
    pub fn verify_grounding(&self, sandbox: &Sandbox) -> Result<(), String> {
        for entry in &self.entries {
            for (kind, name) in entry.records.entity_names() {
                if !sandbox.entity_exists(kind, &name) {
                    return Err(format!(
                        "notebook entry {} holds unknown {kind} {name:?}",
                        entry.entry_id
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Full episode state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub goal: Goal,
    pub conversation: Conversation,
    pub notebook: Notebook,
    /// The orchestrator's private reflections, kept out of every
    /// observation; stored for audit only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orchestrator_log: Vec<String>,
    /// Tool returns of the expert turn currently in flight, if any.
    /// Cleared when the turn ends; never serialized.
    #[serde(skip)]
    pub pending_returns: Option<PendingReturns>,
}

/// In-flight tool returns, visible only to the expert that made them.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingReturns {
    pub role: AgentRole,
    pub entries: Vec<NotebookEntry>,
}

/// What one role is allowed to see of the world.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub goal_view: Goal,
    pub conversation_view: Conversation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notebook_view: Option<Notebook>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub private_tool_returns: Option<Vec<NotebookEntry>>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WorldError {
    #[error("orchestrator never speaks publicly")]
    OrchestratorSpeaks,
    #[error("plan summarizer output is private and never enters the conversation")]
    SummarizerSpeaks,
    #[error("{0} may not write to the notebook; only experts do")]
    NonExpertWrite(AgentRole),
}

impl WorldState {
    pub fn new(goal: Goal) -> Self {
        WorldState {
            goal,
            conversation: Conversation::default(),
            notebook: Notebook::default(),
            orchestrator_log: Vec::new(),
            pending_returns: None,
        }
    }

    /// Appends one public message. The orchestrator and the summarizer
    /// never contribute to the conversation.
    pub fn append_message(
        &mut self,
        author: AgentRole,
        content: impl Into<String>,
    ) -> Result<&Message, WorldError> {
        match author {
            AgentRole::Orchestrator => return Err(WorldError::OrchestratorSpeaks),
            AgentRole::PlanSummarizer => return Err(WorldError::SummarizerSpeaks),
            _ => {}
        }
        let index = self.conversation.len() as u32 + 1;
        self.conversation.messages.push(Message {
            index,
            author,
            content: content.into(),
        });
        Ok(self.conversation.messages.last().expect("just pushed"))
    }

    /// Appends one notebook entry recording an executed tool call.
    pub fn notebook_write(
        &mut self,
        author: AgentRole,
        domain: Domain,
        tool_call: ToolCall,
        records: ToolRecords,
    ) -> Result<&NotebookEntry, WorldError> {
        if !author.is_expert() {
            return Err(WorldError::NonExpertWrite(author));
        }
        let entry = NotebookEntry {
            entry_id: self.notebook.len() as u32 + 1,
            author,
            domain,
            tool_call,
            records,
            turn_index: self.conversation.len() as u32,
        };
        self.notebook.entries.push(entry);
        Ok(self.notebook.entries.last().expect("just pushed"))
    }

    pub fn record_reflection(&mut self, text: impl Into<String>) {
        self.orchestrator_log.push(text.into());
    }

    /// The per-role projection of world state. Everyone sees the goal
    /// and the conversation; notebook and pending tool returns are
    /// rationed per the role.
    pub fn observe(&self, role: AgentRole) -> Observation {
        let notebook_view = match role {
            AgentRole::PlanSummarizer | AgentRole::PlanCompiler => Some(self.notebook.clone()),
            _ => None,
        };
        let private_tool_returns = match &self.pending_returns {
            Some(pending) if pending.role == role && role.is_expert() => {
                Some(pending.entries.clone())
            }
            _ => None,
        };
        Observation {
            goal_view: self.goal.clone(),
            conversation_view: self.conversation.clone(),
            notebook_view,
            private_tool_returns,
        }
    }
}
