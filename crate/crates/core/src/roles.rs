//! Agent roles and expert domains shared across the runtime.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Every actor that can appear in a run.
///
/// One orchestrator, four domain experts, and the planning trio
/// (summarizer, compiler, critic). `SingleAgent` is the baseline actor
/// used by the single-agent mode and never appears in multi-agent runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentRole {
    Orchestrator,
    TransportExpert,
    HotelExpert,
    RestaurantExpert,
    AttractionExpert,
    PlanSummarizer,
    PlanCompiler,
    PlanCritic,
    SingleAgent,
}

impl AgentRole {
    /// The four domain experts, in the fixed workflow speaking order.
    pub const EXPERTS: [AgentRole; 4] = [
        AgentRole::TransportExpert,
        AgentRole::HotelExpert,
        AgentRole::RestaurantExpert,
        AgentRole::AttractionExpert,
    ];

    pub fn is_expert(self) -> bool {
        Self::EXPERTS.contains(&self)
    }

    /// Stable label used in prompts, trace files, and cassettes.
    pub fn label(self) -> &'static str {
        match self {
            AgentRole::Orchestrator => "Orchestrator",
            AgentRole::TransportExpert => "TransportExpert",
            AgentRole::HotelExpert => "HotelExpert",
            AgentRole::RestaurantExpert => "RestaurantExpert",
            AgentRole::AttractionExpert => "AttractionExpert",
            AgentRole::PlanSummarizer => "PlanSummarizer",
            AgentRole::PlanCompiler => "PlanCompiler",
            AgentRole::PlanCritic => "PlanCritic",
            AgentRole::SingleAgent => "SingleAgent",
        }
    }

    pub fn from_label(label: &str) -> Option<AgentRole> {
        let wanted = label.trim();
        [
            AgentRole::Orchestrator,
            AgentRole::TransportExpert,
            AgentRole::HotelExpert,
            AgentRole::RestaurantExpert,
            AgentRole::AttractionExpert,
            AgentRole::PlanSummarizer,
            AgentRole::PlanCompiler,
            AgentRole::PlanCritic,
            AgentRole::SingleAgent,
        ]
        .into_iter()
        .find(|role| role.label().eq_ignore_ascii_case(wanted))
    }

    /// Domain an expert gathers evidence for; `None` for non-experts.
    pub fn domain(self) -> Option<Domain> {
        match self {
            AgentRole::TransportExpert => Some(Domain::Transportation),
            AgentRole::HotelExpert => Some(Domain::Hotel),
            AgentRole::RestaurantExpert => Some(Domain::Restaurant),
            AgentRole::AttractionExpert => Some(Domain::Attraction),
            _ => None,
        }
    }

    /// Successor in the fixed workflow order, used as the orchestrator
    /// fallback when a decision cannot be parsed. The last expert hands
    /// over to the plan summarizer.
    pub fn fixed_order_successor(self) -> AgentRole {
        match self {
            AgentRole::TransportExpert => AgentRole::HotelExpert,
            AgentRole::HotelExpert => AgentRole::RestaurantExpert,
            AgentRole::RestaurantExpert => AgentRole::AttractionExpert,
            _ => AgentRole::PlanSummarizer,
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Evidence domain of a notebook entry, one per expert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Transportation,
    Hotel,
    Restaurant,
    Attraction,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::Transportation,
        Domain::Hotel,
        Domain::Restaurant,
        Domain::Attraction,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Domain::Transportation => "transportation",
            Domain::Hotel => "hotel",
            Domain::Restaurant => "restaurant",
            Domain::Attraction => "attraction",
        }
    }

    pub fn expert(self) -> AgentRole {
        match self {
            Domain::Transportation => AgentRole::TransportExpert,
            Domain::Hotel => AgentRole::HotelExpert,
            Domain::Restaurant => AgentRole::RestaurantExpert,
            Domain::Attraction => AgentRole::AttractionExpert,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_order_walks_experts_then_summarizer() {
        let mut role = AgentRole::TransportExpert;
        let mut seen = vec![role];
        for _ in 0..3 {
            role = role.fixed_order_successor();
            seen.push(role);
        }
        assert_eq!(seen, AgentRole::EXPERTS.to_vec());
        assert_eq!(role.fixed_order_successor(), AgentRole::PlanSummarizer);
    }

    #[test]
    fn labels_round_trip() {
        for role in [
            AgentRole::Orchestrator,
            AgentRole::TransportExpert,
            AgentRole::PlanSummarizer,
            AgentRole::SingleAgent,
        ] {
            assert_eq!(AgentRole::from_label(role.label()), Some(role));
        }
        assert_eq!(AgentRole::from_label("hotelexpert"), Some(AgentRole::HotelExpert));
        assert_eq!(AgentRole::from_label("nobody"), None);
    }
}
