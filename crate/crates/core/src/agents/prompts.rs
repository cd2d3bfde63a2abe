//! Prompt templates: compiled-in defaults, optional per-key overrides,
//! and placeholder substitution.
//!
//! Placeholders are written `{name}`. Expert system prompts carry no
//! placeholders; context templates use {goal}, {conversation},
//! {roster}, {brief}, {tool_returns}, {choices}.

use crate::roles::AgentRole;
use std::collections::BTreeMap;

const BUILTIN: &[(&str, &str)] = &[
    ("transport_expert", include_str!("../../prompts/transport_expert.txt")),
    ("hotel_expert", include_str!("../../prompts/hotel_expert.txt")),
    ("restaurant_expert", include_str!("../../prompts/restaurant_expert.txt")),
    ("attraction_expert", include_str!("../../prompts/attraction_expert.txt")),
    ("orchestrator", include_str!("../../prompts/orchestrator.txt")),
    ("orchestrator_context", include_str!("../../prompts/orchestrator_context.txt")),
    ("expert_context", include_str!("../../prompts/expert_context.txt")),
    ("tool_returns", include_str!("../../prompts/tool_returns.txt")),
    ("plan_compiler", include_str!("../../prompts/plan_compiler.txt")),
    ("compile_context", include_str!("../../prompts/compile_context.txt")),
    ("plan_critic", include_str!("../../prompts/plan_critic.txt")),
    ("critic_context", include_str!("../../prompts/critic_context.txt")),
    ("single_agent", include_str!("../../prompts/single_agent.txt")),
    ("single_context", include_str!("../../prompts/single_context.txt")),
];

/// The full set of templates used by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    map: BTreeMap<String, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            map: BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl PromptSet {
    pub fn known_keys() -> Vec<&'static str> {
        BUILTIN.iter().map(|(k, _)| *k).collect()
    }

    /// Replaces templates by key. Unknown keys are rejected so a typo
    /// in an override never silently falls back to the default.
    pub fn with_overrides(
        overrides: &BTreeMap<String, String>,
    ) -> Result<Self, UnknownPromptKey> {
        let mut set = PromptSet::default();
        for (key, text) in overrides {
            if !set.map.contains_key(key) {
                return Err(UnknownPromptKey(key.clone()));
            }
            set.map.insert(key.clone(), text.clone());
        }
        Ok(set)
    }

    /// Stable view of every template keyed by name, for digests.
    pub fn to_map(&self) -> &BTreeMap<String, String> {
        &self.map
    }

    pub fn get(&self, key: &str) -> &str {
        self.map
            .get(key)
            .unwrap_or_else(|| panic!("prompt key {key} missing from set"))
            .as_str()
    }

    /// The verbatim system prompt of an expert role.
    pub fn expert_prompt(&self, role: AgentRole) -> &str {
        let key = match role {
            AgentRole::TransportExpert => "transport_expert",
            AgentRole::HotelExpert => "hotel_expert",
            AgentRole::RestaurantExpert => "restaurant_expert",
            AgentRole::AttractionExpert => "attraction_expert",
            other => panic!("{other} is not an expert"),
        };
        self.get(key)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("unknown prompt key {0:?}")]
pub struct UnknownPromptKey(pub String);

/// Substitutes `{name}` placeholders. Unknown placeholders are left
/// in place so a missing substitution is visible in the output.
pub fn render(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in substitutions {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_set_has_all_expert_prompts() {
        let prompts = PromptSet::default();
        assert!(prompts
            .expert_prompt(AgentRole::TransportExpert)
            .starts_with("You are a helpful assistant."));
        // The appendix texts carry this wording verbatim, typo and all.
        for role in [
            AgentRole::HotelExpert,
            AgentRole::RestaurantExpert,
            AgentRole::AttractionExpert,
        ] {
            assert!(
                prompts.expert_prompt(role).starts_with("Your are a helpful assistant."),
                "{role} prompt changed"
            );
        }
        assert!(prompts
            .expert_prompt(AgentRole::RestaurantExpert)
            .contains("resturant_search(Tokyo)"));
        assert!(prompts
            .expert_prompt(AgentRole::HotelExpert)
            .contains("<checking hotel requirements>"));
    }

    #[test]
    fn overrides_replace_known_keys_only() {
        let mut overrides = BTreeMap::new();
        overrides.insert("plan_critic".to_string(), "approve everything".to_string());
        let set = PromptSet::with_overrides(&overrides).unwrap();
        assert_eq!(set.get("plan_critic"), "approve everything");

        let mut bad = BTreeMap::new();
        bad.insert("plan_critc".to_string(), "typo".to_string());
        assert_eq!(
            PromptSet::with_overrides(&bad).unwrap_err(),
            UnknownPromptKey("plan_critc".into())
        );
    }

    #[test]
    fn render_substitutes_and_keeps_unknown_markers() {
        let out = render("a {x} b {y}", &[("x", "1")]);
        assert_eq!(out, "a 1 b {y}");
    }
}
