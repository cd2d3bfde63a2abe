//! The canonical itinerary format.
//!
//! A plan is a sequence of day blocks:
//!
//! ```text
//! Day 1:
//! current_city: from Seattle to Rome
//! transportation: Flight Number: F100, from Seattle to Rome
//! breakfast: -
//! lunch: -
//! dinner: Trattoria Luna, Rome
//! attraction: Colosseum, Rome;Pantheon, Rome
//! accommodation: Hotel Aurora, Rome
//! ```
//!
//! Parsing is lenient at field level (missing key, or "-", means no
//! value) and strict at day level (headers must run 1, 2, 3, …). When
//! a text holds several blocks, a draft followed by a revision, the
//! last well-formed block wins.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::LazyLock;

/// One day of the itinerary. `None` serializes as "-".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItineraryDay {
    pub day: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transportation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakfast: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lunch: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dinner: Option<String>,
    /// ";"-separated "Name, City" list, kept raw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attraction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accommodation: Option<String>,
}

impl ItineraryDay {
    pub fn new(day: u32) -> Self {
        ItineraryDay { day, ..ItineraryDay::default() }
    }

    /// Individual attraction strings, "-" and empties dropped.
    pub fn attraction_list(&self) -> Vec<&str> {
        match &self.attraction {
            None => Vec::new(),
            Some(raw) => raw
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty() && *s != "-")
                .collect(),
        }
    }

    /// The three meal fields in day order.
    pub fn meals(&self) -> [(&'static str, Option<&str>); 3] {
        [
            ("breakfast", self.breakfast.as_deref()),
            ("lunch", self.lunch.as_deref()),
            ("dinner", self.dinner.as_deref()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub days: Vec<ItineraryDay>,
    /// The text the plan was parsed from, kept for traces.
    pub raw_text: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("no plan block found")]
pub struct PlanParseError;

static DAY_HEADER: LazyLock<regex::Regex> =
    LazyLock::new(|| regex::Regex::new(r"(?i)^\s*day\s+(\d+)\s*:").expect("day header regex"));

const FIELD_KEYS: [&str; 7] = [
    "current_city",
    "transportation",
    "breakfast",
    "lunch",
    "dinner",
    "attraction",
    "accommodation",
];

fn parse_field_line(line: &str) -> Option<(&'static str, &str)> {
    let (key, value) = line.split_once(':')?;
    let key = key.trim().to_lowercase();
    let key = FIELD_KEYS.iter().find(|k| **k == key)?;
    Some((key, value.trim()))
}

fn set_field(day: &mut ItineraryDay, key: &str, value: &str) {
    let value = if value.is_empty() || value == "-" {
        None
    } else {
        Some(value.to_string())
    };
    match key {
        "current_city" => day.current_city = value,
        "transportation" => day.transportation = value,
        "breakfast" => day.breakfast = value,
        "lunch" => day.lunch = value,
        "dinner" => day.dinner = value,
        "attraction" => day.attraction = value,
        "accommodation" => day.accommodation = value,
        _ => unreachable!("unknown plan field {key}"),
    }
}

/// Extracts the last well-formed plan block from free text.
pub fn parse_plan(text: &str) -> Result<Plan, PlanParseError> {
    let lines: Vec<&str> = text.lines().collect();

    // Header positions with their day numbers. Numbers too large to
    // be a day index are treated as prose, not headers.
    let mut headers: Vec<(usize, u32)> = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if let Some(caps) = DAY_HEADER.captures(line) {
            if let Ok(n) = caps[1].parse::<u32>() {
                if n >= 1 && n <= 365 {
                    headers.push((i, n));
                }
            }
        }
    }
    if headers.is_empty() {
        return Err(PlanParseError);
    }

    // Blocks restart whenever the day number returns to 1.
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (h, (_, n)) in headers.iter().enumerate() {
        if *n == 1 || blocks.is_empty() {
            blocks.push(Vec::new());
        }
        blocks.last_mut().expect("block just ensured").push(h);
    }

    let well_formed = blocks.into_iter().rev().find(|block| {
        block
            .iter()
            .enumerate()
            .all(|(offset, &h)| headers[h].1 == offset as u32 + 1)
    });
    let block = well_formed.ok_or(PlanParseError)?;

    let mut days = Vec::with_capacity(block.len());
    for &h in &block {
        let (line_idx, n) = headers[h];
        // The section ends at the next header of any block.
        let end = headers
            .get(h + 1)
            .map(|&(next_line, _)| next_line)
            .unwrap_or(lines.len());
        let mut day = ItineraryDay::new(n);
        for line in &lines[line_idx + 1..end] {
            if let Some((key, value)) = parse_field_line(line) {
                set_field(&mut day, key, value);
            }
        }
        days.push(day);
    }

    Ok(Plan { days, raw_text: text.to_string() })
}

/// Renders a plan in the canonical block format; every field is
/// explicit, absent values as "-".
pub fn serialize_plan(plan: &Plan) -> String {
    let mut out = String::new();
    for (i, day) in plan.days.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "Day {}:", day.day).expect("write to string");
        let dash = |v: &Option<String>| v.clone().unwrap_or_else(|| "-".into());
        writeln!(out, "current_city: {}", dash(&day.current_city)).expect("write to string");
        writeln!(out, "transportation: {}", dash(&day.transportation)).expect("write to string");
        writeln!(out, "breakfast: {}", dash(&day.breakfast)).expect("write to string");
        writeln!(out, "lunch: {}", dash(&day.lunch)).expect("write to string");
        writeln!(out, "dinner: {}", dash(&day.dinner)).expect("write to string");
        writeln!(out, "attraction: {}", dash(&day.attraction)).expect("write to string");
        writeln!(out, "accommodation: {}", dash(&day.accommodation)).expect("write to string");
    }
    out
}

/// Splits a "from A to B" transition city value.
pub fn parse_transition(current_city: &str) -> Option<(String, String)> {
    static TRANSITION: LazyLock<regex::Regex> = LazyLock::new(|| {
        regex::Regex::new(r"(?i)^\s*from\s+(.+?)\s+to\s+(.+?)\s*$").expect("transition regex")
    });
    let caps = TRANSITION.captures(current_city)?;
    Some((caps[1].to_string(), caps[2].to_string()))
}

/// A transportation value of the form
/// "Flight Number: F100, from Seattle to Rome".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlightLeg {
    pub flight_number: String,
    pub from: String,
    pub to: String,
}

/// Parses a transportation field into a flight leg, if it is one.
pub fn parse_flight_leg(transportation: &str) -> Option<FlightLeg> {
    static LEG: LazyLock<regex::Regex> = LazyLock::new(|| {
        regex::Regex::new(r"(?i)^\s*flight\s+number\s*:\s*([^,\s]+)\s*,?\s+from\s+(.+?)\s+to\s+(.+?)\s*$")
            .expect("flight leg regex")
    });
    let caps = LEG.captures(transportation)?;
    Some(FlightLeg {
        flight_number: caps[1].to_string(),
        from: caps[2].to_string(),
        to: caps[3].to_string(),
    })
}

/// Splits "Name, City" on the last comma. Returns the whole string
/// and no city when there is no comma.
pub fn split_name_city(value: &str) -> (String, Option<String>) {
    match value.rsplit_once(',') {
        Some((name, city)) => (name.trim().to_string(), Some(city.trim().to_string())),
        None => (value.trim().to_string(), None),
    }
}
