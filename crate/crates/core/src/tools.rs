//! The tool registry: external tool names, per-role permissions,
//! argument arity, and execution against the sandbox.
//!
//! The externally exposed restaurant tool keeps the spelling
//! `resturant_search` so the expert prompts work unmodified; the
//! correctly spelled form is accepted as an alias.

use crate::roles::{AgentRole, Domain};
use crate::sandbox::Sandbox;
use crate::world::{ToolCall, ToolRecords};
use std::collections::BTreeSet;

pub const FLIGHT_SEARCH: &str = "flight_search";
pub const HOTEL_SEARCH: &str = "hotel_search";
pub const RESTAURANT_SEARCH: &str = "resturant_search";
pub const RESTAURANT_SEARCH_ALIAS: &str = "restaurant_search";
pub const ATTRACTION_SEARCH: &str = "attraction_search";

/// Every name the extractor should recognize, aliases included.
pub fn registry_names() -> BTreeSet<String> {
    [
        FLIGHT_SEARCH,
        HOTEL_SEARCH,
        RESTAURANT_SEARCH,
        RESTAURANT_SEARCH_ALIAS,
        ATTRACTION_SEARCH,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Folds aliases onto the canonical external name.
pub fn canonical_name(name: &str) -> Option<&'static str> {
    match name {
        FLIGHT_SEARCH => Some(FLIGHT_SEARCH),
        HOTEL_SEARCH => Some(HOTEL_SEARCH),
        RESTAURANT_SEARCH | RESTAURANT_SEARCH_ALIAS => Some(RESTAURANT_SEARCH),
        ATTRACTION_SEARCH => Some(ATTRACTION_SEARCH),
        _ => None,
    }
}

pub fn domain_of(name: &str) -> Option<Domain> {
    match canonical_name(name)? {
        FLIGHT_SEARCH => Some(Domain::Transportation),
        HOTEL_SEARCH => Some(Domain::Hotel),
        RESTAURANT_SEARCH => Some(Domain::Restaurant),
        ATTRACTION_SEARCH => Some(Domain::Attraction),
        _ => None,
    }
}

fn arity_of(canonical: &str) -> usize {
    match canonical {
        FLIGHT_SEARCH => 3,
        _ => 1,
    }
}

/// The tools a role may call. Experts get exactly their own tool (the
/// restaurant expert may use either spelling); the single agent gets
/// all four; everyone else gets none.
pub fn permitted_tools(role: AgentRole) -> BTreeSet<String> {
    let names: &[&str] = match role {
        AgentRole::TransportExpert => &[FLIGHT_SEARCH],
        AgentRole::HotelExpert => &[HOTEL_SEARCH],
        AgentRole::RestaurantExpert => &[RESTAURANT_SEARCH, RESTAURANT_SEARCH_ALIAS],
        AgentRole::AttractionExpert => &[ATTRACTION_SEARCH],
        AgentRole::SingleAgent => &[
            FLIGHT_SEARCH,
            HOTEL_SEARCH,
            RESTAURANT_SEARCH,
            RESTAURANT_SEARCH_ALIAS,
            ATTRACTION_SEARCH,
        ],
        _ => &[],
    };
    names.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ToolError {
    #[error("unknown tool {0}")]
    UnknownTool(String),
    #[error("{name} expects {expected} argument(s), got {got}")]
    BadArity { name: String, expected: usize, got: usize },
}

/// Executes one tool call against the sandbox. A syntactically valid
/// call with an unparseable date is still a legal query; it just
/// matches nothing.
pub fn execute(sandbox: &Sandbox, call: &ToolCall) -> Result<(Domain, ToolRecords), ToolError> {
    let canonical =
        canonical_name(&call.name).ok_or_else(|| ToolError::UnknownTool(call.name.clone()))?;
    let expected = arity_of(canonical);
    if call.arguments.len() != expected {
        return Err(ToolError::BadArity {
            name: call.name.clone(),
            expected,
            got: call.arguments.len(),
        });
    }
    let records = match canonical {
        FLIGHT_SEARCH => {
            let flights = match call.arguments[2].parse() {
                Ok(date) => sandbox.flight_search(&call.arguments[0], &call.arguments[1], date),
                Err(_) => Vec::new(),
            };
            ToolRecords::Flights(flights)
        }
        HOTEL_SEARCH => ToolRecords::Hotels(sandbox.hotel_search(&call.arguments[0])),
        RESTAURANT_SEARCH => {
            ToolRecords::Restaurants(sandbox.restaurant_search(&call.arguments[0]))
        }
        ATTRACTION_SEARCH => {
            ToolRecords::Attractions(sandbox.attraction_search(&call.arguments[0]))
        }
        _ => unreachable!("canonical name {canonical}"),
    };
    let domain = domain_of(canonical).expect("registry tool has a domain");
    Ok((domain, records))
}

/// Field-by-field plain-text rendering of tool records, used both for
/// the expert's private tool-return context and for planning briefs.
/// Names and numbers appear exactly as stored.
pub fn render_records(records: &ToolRecords) -> String {
    let mut lines = Vec::new();
    match records {
        ToolRecords::Flights(items) => {
            for f in items {
                lines.push(format!(
                    "flight {}: {} to {} on {}, departs {}, arrives {}, duration {} min, price {:.2}",
                    f.flight_number,
                    f.origin_city,
                    f.destination_city,
                    f.date,
                    f.departure_time,
                    f.arrival_time,
                    f.duration_min,
                    f.price,
                ));
            }
        }
        ToolRecords::Hotels(items) => {
            for h in items {
                let rules = if h.house_rules.is_empty() {
                    "none".to_string()
                } else {
                    h.house_rules.join("; ")
                };
                lines.push(format!(
                    "hotel {} ({}): {:.2} per night, {}, house rules: {}, minimum nights {}, maximum occupancy {}",
                    h.name, h.city, h.price_per_night, h.room_type, rules, h.minimum_nights, h.maximum_occupancy,
                ));
            }
        }
        ToolRecords::Restaurants(items) => {
            for r in items {
                lines.push(format!(
                    "restaurant {} ({}): cuisines {}, average cost {:.2}, rating {:.1}",
                    r.name,
                    r.city,
                    if r.cuisines.is_empty() { "none".to_string() } else { r.cuisines.join("; ") },
                    r.average_cost,
                    r.rating,
                ));
            }
        }
        ToolRecords::Attractions(items) => {
            for a in items {
                lines.push(format!("attraction {} ({}), address: {}", a.name, a.city, a.address));
            }
        }
    }
    if lines.is_empty() {
        "no matching records".to_string()
    } else {
        lines.join("\n")
    }
}
