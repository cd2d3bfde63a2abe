//! Plan validators and benchmark metrics: per-constraint verdicts,
//! micro/macro/final pass rates, per-area failure attribution, and
//! hallucination counting.
//!
//! Every validator is a pure function of (plan, goal, sandbox). A task
//! that delivered no parseable plan fails every constraint; that
//! convention feeds all aggregate rates, so a high delivery rate is a
//! precondition for high pass rates, never a substitute.

use crate::orchestration::RunTrace;
use crate::plan::{parse_flight_leg, parse_plan, parse_transition, split_name_city, ItineraryDay, Plan};
use crate::sandbox::{normalize_name, EntityKind, HotelRecord, Sandbox};
use crate::world::Goal;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Commonsense,
    Hard,
}

impl ConstraintKind {
    pub fn label(self) -> &'static str {
        match self {
            ConstraintKind::Commonsense => "commonsense",
            ConstraintKind::Hard => "hard",
        }
    }
}

/// Expert domain a failed constraint is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Area {
    Transportation,
    Hotel,
    Attraction,
    Restaurant,
    Other,
}

impl Area {
    pub const ALL: [Area; 5] = [
        Area::Transportation,
        Area::Hotel,
        Area::Attraction,
        Area::Restaurant,
        Area::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Area::Transportation => "Transportation",
            Area::Hotel => "Hotel",
            Area::Attraction => "Attraction",
            Area::Restaurant => "Restaurant",
            Area::Other => "Other",
        }
    }
}

impl std::fmt::Display for Area {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

pub const WITHIN_SANDBOX: &str = "Within Sandbox (No Hallucination)";
pub const COMPLETE_INFORMATION: &str = "Complete Information";
pub const WITHIN_CURRENT_CITY: &str = "Within Current City";
pub const REASONABLE_CITY_ROUTE: &str = "Reasonable City Route";
pub const DIVERSE_RESTAURANTS: &str = "Diverse Restaurants";
pub const DIVERSE_ATTRACTIONS: &str = "Diverse Attractions";
pub const TRANSPORTATION_CONSISTENCY: &str = "Transportation Consistency";
pub const ACCOMMODATION_RULES: &str = "Accommodation Rules";

pub const BUDGET_COST_COMPLIANCE: &str = "Budget/Cost Compliance";
pub const ROOM_TYPE_PREFERENCES: &str = "Room Type Preferences";
pub const ROOM_RULE_COMPLIANCE: &str = "Room Rule Compliance";
pub const CUISINE_PREFERENCES: &str = "Cuisine Preferences";
pub const TRANSPORTATION_PREFERENCES: &str = "Transportation Preferences";

/// The eight commonsense categories every evaluation reports, in order.
pub const COMMONSENSE_CATEGORIES: [&str; 8] = [
    WITHIN_SANDBOX,
    COMPLETE_INFORMATION,
    WITHIN_CURRENT_CITY,
    REASONABLE_CITY_ROUTE,
    DIVERSE_RESTAURANTS,
    DIVERSE_ATTRACTIONS,
    TRANSPORTATION_CONSISTENCY,
    ACCOMMODATION_RULES,
];

/// The five hard categories every evaluation reports, in order.
/// Unrequested preferences pass vacuously so counts stay uniform
/// across tasks.
pub const HARD_CATEGORIES: [&str; 5] = [
    BUDGET_COST_COMPLIANCE,
    ROOM_TYPE_PREFERENCES,
    ROOM_RULE_COMPLIANCE,
    CUISINE_PREFERENCES,
    TRANSPORTATION_PREFERENCES,
];

/// Fixed category-to-area table. "Within Sandbox (No Hallucination)"
/// sits under Attraction deliberately, though hallucinations span
/// kinds; [hallucinated_entities] reports per kind separately.
pub fn area_for_category(name: &str) -> Area {
    match name {
        "Accommodation Rules"
        | "City Valid - Accommodation"
        | "Room Rule Compliance"
        | "Room Type Preferences"
        | "Budget/Cost Compliance" => Area::Hotel,
        "City Valid - Restaurant (Breakfast/Lunch/Dinner)"
        | "Diverse Restaurants"
        | "Cuisine Preferences" => Area::Restaurant,
        "City Valid - Attraction"
        | "Diverse Attractions"
        | "Within Current City"
        | "Within Sandbox (No Hallucination)"
        | "Complete Information" => Area::Attraction,
        "City Valid - Transportation"
        | "Reasonable City Route"
        | "Transportation Consistency"
        | "Transportation Preferences" => Area::Transportation,
        _ => Area::Other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResult {
    pub name: String,
    pub kind: ConstraintKind,
    pub area: Area,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvaluation {
    pub task_id: String,
    pub delivered: bool,
    pub commonsense: Vec<ConstraintResult>,
    pub hard: Vec<ConstraintResult>,
}

impl TaskEvaluation {
    pub fn commonsense_pass(&self) -> bool {
        self.delivered && self.commonsense.iter().all(|r| r.passed)
    }

    pub fn hard_pass(&self) -> bool {
        self.delivered && self.hard.iter().all(|r| r.passed)
    }

    pub fn final_pass(&self) -> bool {
        self.commonsense_pass() && self.hard_pass()
    }
}

/// All six headline rates, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMetrics {
    pub delivery_rate: f64,
    pub commonsense_micro: f64,
    pub commonsense_macro: f64,
    pub hard_micro: f64,
    pub hard_macro: f64,
    pub final_pass_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    /// Whether undelivered tasks' (all-failed) constraints stay in the
    /// micro denominators. On by default.
    pub include_undelivered_in_micro: bool,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions { include_undelivered_in_micro: true }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("no evaluations to aggregate")]
    EmptyEvaluationSet,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HallucinationCounts {
    pub flight: u32,
    pub hotel: u32,
    pub restaurant: u32,
    pub attraction: u32,
}

impl HallucinationCounts {
    pub fn total(&self) -> u32 {
        self.flight + self.hotel + self.restaurant + self.attraction
    }

    fn bump(&mut self, kind: EntityKind) {
        match kind {
            EntityKind::Flight => self.flight += 1,
            EntityKind::Hotel => self.hotel += 1,
            EntityKind::Restaurant => self.restaurant += 1,
            EntityKind::Attraction => self.attraction += 1,
            EntityKind::City => {}
        }
    }
}

enum DayCity {
    Stay(String),
    Transition { from: String, to: String },
}

fn day_city(day: &ItineraryDay) -> Option<DayCity> {
    let raw = day.current_city.as_deref()?;
    match parse_transition(raw) {
        Some((from, to)) => Some(DayCity::Transition { from, to }),
        None => Some(DayCity::Stay(raw.trim().to_string())),
    }
}

struct PlacedEntity {
    kind: EntityKind,
    name: String,
    city: Option<String>,
    day: u32,
    slot: &'static str,
}

/// Every sandbox-checkable entity the plan names, in day order.
fn named_entities(plan: &Plan) -> Vec<PlacedEntity> {
    let mut out = Vec::new();
    for day in &plan.days {
        if let Some(raw) = day.transportation.as_deref() {
            if let Some(leg) = parse_flight_leg(raw) {
                out.push(PlacedEntity {
                    kind: EntityKind::Flight,
                    name: leg.flight_number,
                    city: None,
                    day: day.day,
                    slot: "transportation",
                });
            }
        }
        for (slot, value) in day.meals() {
            if let Some(raw) = value {
                let (name, city) = split_name_city(raw);
                out.push(PlacedEntity { kind: EntityKind::Restaurant, name, city, day: day.day, slot });
            }
        }
        for raw in day.attraction_list() {
            let (name, city) = split_name_city(raw);
            out.push(PlacedEntity {
                kind: EntityKind::Attraction,
                name,
                city,
                day: day.day,
                slot: "attraction",
            });
        }
        if let Some(raw) = day.accommodation.as_deref() {
            let (name, city) = split_name_city(raw);
            out.push(PlacedEntity {
                kind: EntityKind::Hotel,
                name,
                city,
                day: day.day,
                slot: "accommodation",
            });
        }
    }
    out
}

/// Distinct named entities absent from the sandbox, ordered by
/// (kind, normalized name). Display names keep the plan's spelling.
pub fn hallucinated_entities(plan: &Plan, sandbox: &Sandbox) -> Vec<(EntityKind, String)> {
    let mut seen: BTreeMap<(EntityKind, String), String> = BTreeMap::new();
    for entity in named_entities(plan) {
        if !sandbox.entity_exists(entity.kind, &entity.name) {
            seen.entry((entity.kind, normalize_name(&entity.name)))
                .or_insert(entity.name);
        }
    }
    seen.into_iter().map(|((kind, _), name)| (kind, name)).collect()
}

/// Per-kind totals of distinct hallucinated entities across plans.
pub fn count_hallucinations(plans: &[Plan], sandbox: &Sandbox) -> HallucinationCounts {
    let mut counts = HallucinationCounts::default();
    for plan in plans {
        for (kind, _) in hallucinated_entities(plan, sandbox) {
            counts.bump(kind);
        }
    }
    counts
}

/// A maximal run of consecutive nights at one hotel.
struct HotelStay {
    display: String,
    normalized: String,
    nights: u32,
}

fn hotel_stays(plan: &Plan) -> Vec<HotelStay> {
    let mut stays: Vec<HotelStay> = Vec::new();
    let mut run_open = false;
    for day in &plan.days {
        let Some(raw) = day.accommodation.as_deref() else {
            // A night with no accommodation ends the current run.
            run_open = false;
            continue;
        };
        let (name, _) = split_name_city(raw);
        let normalized = normalize_name(&name);
        match stays.last_mut() {
            Some(last) if run_open && last.normalized == normalized => last.nights += 1,
            _ => stays.push(HotelStay { display: name, normalized, nights: 1 }),
        }
        run_open = true;
    }
    stays
}

fn stay_hotels<'s>(plan: &Plan, sandbox: &'s Sandbox) -> Vec<(HotelStay, Option<&'s HotelRecord>)> {
    hotel_stays(plan)
        .into_iter()
        .map(|stay| {
            let record = sandbox.find_hotel(&stay.display);
            (stay, record)
        })
        .collect()
}

/// Flight legs the plan takes, with the 0-based day position.
fn flight_legs(plan: &Plan) -> Vec<(usize, crate::plan::FlightLeg)> {
    plan.days
        .iter()
        .enumerate()
        .filter_map(|(i, day)| {
            day.transportation
                .as_deref()
                .and_then(parse_flight_leg)
                .map(|leg| (i, leg))
        })
        .collect()
}

fn result(name: &str, kind: ConstraintKind, violations: Vec<String>, pass_detail: &str) -> ConstraintResult {
    let passed = violations.is_empty();
    ConstraintResult {
        name: name.to_string(),
        kind,
        area: area_for_category(name),
        passed,
        detail: if passed { pass_detail.to_string() } else { violations.join("; ") },
    }
}

/// The eight commonsense verdicts, always in [COMMONSENSE_CATEGORIES]
/// order.
pub fn check_commonsense(plan: &Plan, sandbox: &Sandbox, goal: &Goal) -> Vec<ConstraintResult> {
    let kind = ConstraintKind::Commonsense;
    let mut out = Vec::with_capacity(COMMONSENSE_CATEGORIES.len());

    // Within Sandbox (No Hallucination)
    let hallucinated = hallucinated_entities(plan, sandbox);
    out.push(result(
        WITHIN_SANDBOX,
        kind,
        hallucinated
            .iter()
            .map(|(k, name)| format!("hallucinated {}: {name}", k.label()))
            .collect(),
        "all named entities exist in the sandbox",
    ));

    // Complete Information
    let mut missing = Vec::new();
    if plan.days.len() as u32 != goal.metadata.duration_days {
        missing.push(format!(
            "plan covers {} day(s), task spans {}",
            plan.days.len(),
            goal.metadata.duration_days
        ));
    }
    for (i, day) in plan.days.iter().enumerate() {
        let last = i + 1 == plan.days.len();
        match day_city(day) {
            None => missing.push(format!("day {}: current_city missing", day.day)),
            Some(DayCity::Transition { .. }) if day.transportation.is_none() => {
                missing.push(format!("day {}: transportation missing on a travel day", day.day));
            }
            _ => {}
        }
        if !last && day.accommodation.is_none() {
            missing.push(format!("day {}: accommodation missing", day.day));
        }
    }
    out.push(result(COMPLETE_INFORMATION, kind, missing, "all required fields present"));

    // Within Current City
    let mut misplaced = Vec::new();
    for day in &plan.days {
        let Some(dc) = day_city(day) else { continue };
        let allowed: BTreeSet<String> = match &dc {
            DayCity::Stay(c) => [normalize_name(c)].into(),
            DayCity::Transition { from, to } => [normalize_name(from), normalize_name(to)].into(),
        };
        let here = match &dc {
            DayCity::Stay(c) => c.clone(),
            DayCity::Transition { from, to } => format!("{from}/{to}"),
        };
        for entity in named_entities(plan) {
            if entity.day != day.day {
                continue;
            }
            if let Some(city) = &entity.city {
                if !allowed.contains(&normalize_name(city)) {
                    misplaced.push(format!(
                        "day {}: {} {} is in {}, day is in {}",
                        day.day, entity.slot, entity.name, city, here
                    ));
                }
            }
        }
    }
    out.push(result(WITHIN_CURRENT_CITY, kind, misplaced, "every visit stays in the day's city"));

    // Reasonable City Route
    let origin = normalize_name(&goal.metadata.origin);
    let destination = normalize_name(&goal.metadata.destination);
    let mut breaks = Vec::new();
    let mut location = origin.clone();
    let mut location_display = goal.metadata.origin.clone();
    let mut reached_destination = false;
    for day in &plan.days {
        match day_city(day) {
            None => {}
            Some(DayCity::Stay(c)) => {
                if normalize_name(&c) != location {
                    breaks.push(format!(
                        "day {}: in {} but the route stands at {}",
                        day.day, c, location_display
                    ));
                    location = normalize_name(&c);
                    location_display = c.clone();
                }
                if location == destination {
                    reached_destination = true;
                }
            }
            Some(DayCity::Transition { from, to }) => {
                if normalize_name(&from) != location {
                    breaks.push(format!(
                        "day {}: departs {} but the route stands at {}",
                        day.day, from, location_display
                    ));
                }
                location = normalize_name(&to);
                location_display = to.clone();
                if location == destination {
                    reached_destination = true;
                }
            }
        }
    }
    if location != origin {
        breaks.push(format!(
            "route ends in {} without returning to {}",
            location_display, goal.metadata.origin
        ));
    }
    if !reached_destination {
        breaks.push(format!("route never reaches {}", goal.metadata.destination));
    }
    out.push(result(
        REASONABLE_CITY_ROUTE,
        kind,
        breaks,
        "route runs origin to destination and back",
    ));

    // Diverse Restaurants
    out.push(result(
        DIVERSE_RESTAURANTS,
        kind,
        repeated_names(named_entities(plan).iter().filter(|e| e.kind == EntityKind::Restaurant)),
        "no restaurant repeated",
    ));

    // Diverse Attractions
    out.push(result(
        DIVERSE_ATTRACTIONS,
        kind,
        repeated_names(named_entities(plan).iter().filter(|e| e.kind == EntityKind::Attraction)),
        "no attraction repeated",
    ));

    // Transportation Consistency
    let mut inconsistent = Vec::new();
    for (i, day) in plan.days.iter().enumerate() {
        let transportation = day.transportation.as_deref();
        match (day_city(day), transportation) {
            (Some(DayCity::Stay(_)), Some(_)) => {
                inconsistent.push(format!("day {}: transportation listed on a stay day", day.day));
            }
            (Some(DayCity::Transition { from, to }), Some(raw)) => match parse_flight_leg(raw) {
                None => inconsistent.push(format!(
                    "day {}: unrecognized transportation \"{}\"",
                    day.day,
                    raw.trim()
                )),
                Some(leg) => {
                    if normalize_name(&leg.from) != normalize_name(&from)
                        || normalize_name(&leg.to) != normalize_name(&to)
                    {
                        inconsistent.push(format!(
                            "day {}: flight {} flies {} to {}, day transitions {} to {}",
                            day.day, leg.flight_number, leg.from, leg.to, from, to
                        ));
                    } else if let Some(date) = goal.metadata.dates.get(i) {
                        match sandbox.find_flight(&leg.flight_number, *date) {
                            None => {
                                if sandbox.entity_exists(EntityKind::Flight, &leg.flight_number) {
                                    inconsistent.push(format!(
                                        "day {}: flight {} does not operate on {}",
                                        day.day, leg.flight_number, date
                                    ));
                                }
                            }
                            Some(record) => {
                                if normalize_name(&record.origin_city) != normalize_name(&from)
                                    || normalize_name(&record.destination_city) != normalize_name(&to)
                                {
                                    inconsistent.push(format!(
                                        "day {}: flight {} flies {} to {} on {}, day transitions {} to {}",
                                        day.day,
                                        leg.flight_number,
                                        record.origin_city,
                                        record.destination_city,
                                        date,
                                        from,
                                        to
                                    ));
                                }
                            }
                        }
                    }
                }
            },
            _ => {}
        }
    }
    out.push(result(
        TRANSPORTATION_CONSISTENCY,
        kind,
        inconsistent,
        "every leg matches its day's transition",
    ));

    // Accommodation Rules
    let mut rule_breaks = Vec::new();
    for (stay, record) in stay_hotels(plan, sandbox) {
        let Some(hotel) = record else { continue };
        if stay.nights < hotel.minimum_nights {
            rule_breaks.push(format!(
                "{} night(s) at {} is under the {}-night minimum",
                stay.nights, stay.display, hotel.minimum_nights
            ));
        }
        if goal.metadata.traveler_count > hotel.maximum_occupancy {
            rule_breaks.push(format!(
                "{} travelers exceed maximum occupancy {} at {}",
                goal.metadata.traveler_count, hotel.maximum_occupancy, stay.display
            ));
        }
    }
    out.push(result(
        ACCOMMODATION_RULES,
        kind,
        rule_breaks,
        "stay lengths and party size fit every hotel",
    ));

    out
}

fn repeated_names<'e>(entities: impl Iterator<Item = &'e PlacedEntity>) -> Vec<String> {
    let mut counts: BTreeMap<String, (String, u32)> = BTreeMap::new();
    for entity in entities {
        let entry = counts
            .entry(normalize_name(&entity.name))
            .or_insert_with(|| (entity.name.clone(), 0));
        entry.1 += 1;
    }
    counts
        .into_values()
        .filter(|(_, n)| *n > 1)
        .map(|(name, n)| format!("{name} used {n} times"))
        .collect()
}

/// Number of rooms the party books: enough for everyone at the
/// hotel's occupancy cap.
fn rooms_for(travelers: u32, maximum_occupancy: u32) -> u32 {
    travelers.div_ceil(maximum_occupancy.max(1))
}

/// Total trip cost: flights and meals per traveler, hotels per room
/// per night. Unverifiable entries (hallucinated names, dates off the
/// task window) contribute nothing; other checks flag them.
pub fn plan_cost(plan: &Plan, goal: &Goal, sandbox: &Sandbox) -> f64 {
    let travelers = goal.metadata.traveler_count as f64;
    let mut total = 0.0;
    for (i, leg) in flight_legs(plan) {
        if let Some(date) = goal.metadata.dates.get(i) {
            if let Some(record) = sandbox.find_flight(&leg.flight_number, *date) {
                total += record.price * travelers;
            }
        }
    }
    for (stay, record) in stay_hotels(plan, sandbox) {
        if let Some(hotel) = record {
            let rooms = rooms_for(goal.metadata.traveler_count, hotel.maximum_occupancy) as f64;
            total += hotel.price_per_night * stay.nights as f64 * rooms;
        }
    }
    for entity in named_entities(plan) {
        if entity.kind == EntityKind::Restaurant {
            if let Some(record) = sandbox.find_restaurant(&entity.name) {
                total += record.average_cost * travelers;
            }
        }
    }
    total
}

/// The five hard verdicts, always in [HARD_CATEGORIES] order.
pub fn check_hard(plan: &Plan, goal: &Goal, sandbox: &Sandbox) -> Vec<ConstraintResult> {
    let kind = ConstraintKind::Hard;
    let constraints = &goal.metadata.constraints;
    let mut out = Vec::with_capacity(HARD_CATEGORIES.len());

    // Budget/Cost Compliance
    let total = plan_cost(plan, goal, sandbox);
    out.push(match goal.metadata.budget {
        None => result(BUDGET_COST_COMPLIANCE, kind, Vec::new(), "no budget specified"),
        Some(budget) => {
            let violations = if total <= budget {
                Vec::new()
            } else {
                vec![format!("total cost {total:.2} exceeds budget {budget:.2}")]
            };
            result(
                BUDGET_COST_COMPLIANCE,
                kind,
                violations,
                &format!("total cost {total:.2} within budget {budget:.2}"),
            )
        }
    });

    let known_hotels: Vec<(HotelStay, &HotelRecord)> = stay_hotels(plan, sandbox)
        .into_iter()
        .filter_map(|(stay, record)| record.map(|r| (stay, r)))
        .collect();

    // Room Type Preferences
    out.push(match &constraints.room_type {
        None => result(ROOM_TYPE_PREFERENCES, kind, Vec::new(), "no room type requested"),
        Some(requested) => {
            let wanted = normalize_name(requested);
            let mut violations: Vec<String> = known_hotels
                .iter()
                .filter(|(_, hotel)| {
                    let actual = normalize_name(&hotel.room_type);
                    if wanted == "not shared room" {
                        actual == "shared room"
                    } else {
                        actual != wanted
                    }
                })
                .map(|(stay, hotel)| format!("{} is a {}", stay.display, hotel.room_type))
                .collect();
            if known_hotels.is_empty() {
                violations.push(format!("no sandbox accommodation to satisfy \"{requested}\""));
            }
            result(
                ROOM_TYPE_PREFERENCES,
                kind,
                violations,
                &format!("every hotel satisfies \"{requested}\""),
            )
        }
    });

    // Room Rule Compliance
    out.push(if constraints.room_rules.is_empty() {
        result(ROOM_RULE_COMPLIANCE, kind, Vec::new(), "no house rule requirements")
    } else {
        let mut violations = Vec::new();
        for requested in &constraints.room_rules {
            let banned = format!("no {}", normalize_name(requested));
            for (stay, hotel) in &known_hotels {
                if hotel.house_rules.iter().any(|rule| normalize_name(rule) == banned) {
                    violations.push(format!("{} forbids {}", stay.display, requested));
                }
            }
        }
        if known_hotels.is_empty() {
            violations.push("no sandbox accommodation to check house rules against".to_string());
        }
        result(ROOM_RULE_COMPLIANCE, kind, violations, "no hotel forbids a required allowance")
    });

    // Cuisine Preferences
    out.push(if constraints.cuisines.is_empty() {
        result(CUISINE_PREFERENCES, kind, Vec::new(), "no cuisines requested")
    } else {
        let mut offered: BTreeSet<String> = BTreeSet::new();
        let mut any_known = false;
        for entity in named_entities(plan) {
            if entity.kind == EntityKind::Restaurant {
                if let Some(record) = sandbox.find_restaurant(&entity.name) {
                    any_known = true;
                    offered.extend(record.cuisines.iter().map(|c| normalize_name(c)));
                }
            }
        }
        let mut violations: Vec<String> = constraints
            .cuisines
            .iter()
            .filter(|c| !offered.contains(&normalize_name(c)))
            .map(|c| format!("no restaurant offers {c}"))
            .collect();
        if !any_known {
            violations.push("no sandbox restaurants to check cuisines against".to_string());
        }
        result(CUISINE_PREFERENCES, kind, violations, "all requested cuisines covered")
    });

    // Transportation Preferences
    out.push(match &constraints.transportation {
        None => result(TRANSPORTATION_PREFERENCES, kind, Vec::new(), "no transportation preference"),
        Some(preference) => {
            let normalized = normalize_name(preference);
            if normalized == "no flight" || normalized == "no flights" {
                let legs = flight_legs(plan).len();
                let violations = if legs == 0 {
                    Vec::new()
                } else {
                    vec![format!("plan takes {legs} flight(s) against preference \"{preference}\"")]
                };
                result(TRANSPORTATION_PREFERENCES, kind, violations, "no flights taken")
            } else {
                result(
                    TRANSPORTATION_PREFERENCES,
                    kind,
                    Vec::new(),
                    &format!("preference \"{preference}\" does not constrain flights"),
                )
            }
        }
    });

    out
}

fn failed(name: &str, kind: ConstraintKind, detail: &str) -> ConstraintResult {
    ConstraintResult {
        name: name.to_string(),
        kind,
        area: area_for_category(name),
        passed: false,
        detail: detail.to_string(),
    }
}

/// Evaluation of a task that produced no parseable plan: everything
/// fails.
pub fn evaluate_undelivered(goal: &Goal) -> TaskEvaluation {
    TaskEvaluation {
        task_id: goal.task_id.clone(),
        delivered: false,
        commonsense: COMMONSENSE_CATEGORIES
            .iter()
            .map(|name| failed(name, ConstraintKind::Commonsense, "plan not delivered"))
            .collect(),
        hard: HARD_CATEGORIES
            .iter()
            .map(|name| failed(name, ConstraintKind::Hard, "plan not delivered"))
            .collect(),
    }
}

pub fn evaluate_plan(goal: &Goal, plan: &Plan, sandbox: &Sandbox) -> TaskEvaluation {
    TaskEvaluation {
        task_id: goal.task_id.clone(),
        delivered: true,
        commonsense: check_commonsense(plan, sandbox, goal),
        hard: check_hard(plan, goal, sandbox),
    }
}

/// Evaluates a finished episode: its final plan if delivered,
/// otherwise the all-fail record.
pub fn evaluate_trace(goal: &Goal, trace: &RunTrace, sandbox: &Sandbox) -> TaskEvaluation {
    let plan = trace
        .final_plan_text
        .as_deref()
        .filter(|_| trace.delivered)
        .and_then(|text| parse_plan(text).ok());
    match plan {
        Some(plan) => evaluate_plan(goal, &plan, sandbox),
        None => evaluate_undelivered(goal),
    }
}

fn percentage(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        100.0 * numerator as f64 / denominator as f64
    }
}

pub fn compute_metrics(
    evals: &[TaskEvaluation],
    options: &MetricsOptions,
) -> Result<BenchmarkMetrics, EvalError> {
    if evals.is_empty() {
        return Err(EvalError::EmptyEvaluationSet);
    }
    let total = evals.len();
    let delivered = evals.iter().filter(|e| e.delivered).count();

    let micro = |pick: fn(&TaskEvaluation) -> &Vec<ConstraintResult>| {
        let mut passed = 0;
        let mut counted = 0;
        for eval in evals {
            if !eval.delivered && !options.include_undelivered_in_micro {
                continue;
            }
            for result in pick(eval) {
                counted += 1;
                if result.passed {
                    passed += 1;
                }
            }
        }
        percentage(passed, counted)
    };

    Ok(BenchmarkMetrics {
        delivery_rate: percentage(delivered, total),
        commonsense_micro: micro(|e| &e.commonsense),
        commonsense_macro: percentage(evals.iter().filter(|e| e.commonsense_pass()).count(), total),
        hard_micro: micro(|e| &e.hard),
        hard_macro: percentage(evals.iter().filter(|e| e.hard_pass()).count(), total),
        final_pass_rate: percentage(evals.iter().filter(|e| e.final_pass()).count(), total),
    })
}

/// Failed constraints per area as a percentage of that area's
/// constraints, over all evaluations. Areas with no constraints
/// report 0.
pub fn categorize_failures(evals: &[TaskEvaluation]) -> BTreeMap<Area, f64> {
    let mut failed: BTreeMap<Area, usize> = BTreeMap::new();
    let mut totals: BTreeMap<Area, usize> = BTreeMap::new();
    for eval in evals {
        for result in eval.commonsense.iter().chain(&eval.hard) {
            *totals.entry(result.area).or_default() += 1;
            if !result.passed {
                *failed.entry(result.area).or_default() += 1;
            }
        }
    }
    Area::ALL
        .iter()
        .map(|area| {
            (
                *area,
                percentage(
                    failed.get(area).copied().unwrap_or(0),
                    totals.get(area).copied().unwrap_or(0),
                ),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{GoalMetadata, HardConstraintSpec};

    fn fixtures_sandbox() -> Sandbox {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/sandbox");
        crate::sandbox::load_sandbox(&dir).expect("fixture sandbox loads")
    }

    fn goal(budget: Option<f64>) -> Goal {
        Goal {
            task_id: "t1".into(),
            query_text: "3 days in Rome".into(),
            metadata: GoalMetadata {
                origin: "Seattle".into(),
                destination: "Rome".into(),
                dates: vec![
                    "2025-03-10".parse().unwrap(),
                    "2025-03-11".parse().unwrap(),
                    "2025-03-12".parse().unwrap(),
                ],
                duration_days: 3,
                traveler_count: 2,
                budget,
                constraints: HardConstraintSpec::default(),
            },
        }
    }

    fn clean_plan() -> Plan {
        parse_plan(
            "Day 1:\ncurrent_city: from Seattle to Rome\ntransportation: Flight Number: F100, from Seattle to Rome\nbreakfast: -\nlunch: -\ndinner: Trattoria Luna, Rome\nattraction: Colosseum, Rome\naccommodation: Hotel Aurora, Rome\n\nDay 2:\ncurrent_city: Rome\ntransportation: -\nbreakfast: Cafe Tevere, Rome\nlunch: Osteria Verde, Rome\ndinner: Roma Grill, Rome\nattraction: Pantheon, Rome;Trevi Fountain, Rome\naccommodation: Hotel Aurora, Rome\n\nDay 3:\ncurrent_city: from Rome to Seattle\ntransportation: Flight Number: F103, from Rome to Seattle\nbreakfast: Zen Noodle Bar, Kyoto\nlunch: -\ndinner: -\nattraction: -\naccommodation: -\n",
        )
        .unwrap()
    }

    #[test]
    fn clean_plan_passes_everything_but_the_misplaced_breakfast() {
        // Zen Noodle Bar sits in Kyoto; day 3 moves Rome to Seattle.
        let sandbox = fixtures_sandbox();
        let results = check_commonsense(&clean_plan(), &sandbox, &goal(None));
        let by_name: BTreeMap<&str, &ConstraintResult> =
            results.iter().map(|r| (r.name.as_str(), r)).collect();
        assert!(!by_name[WITHIN_CURRENT_CITY].passed);
        for name in COMMONSENSE_CATEGORIES {
            if name != WITHIN_CURRENT_CITY {
                assert!(by_name[name].passed, "{name}: {}", by_name[name].detail);
            }
        }
    }

    fn passing_plan() -> Plan {
        // Day 3 transitions Rome to Seattle, so a Seattle breakfast
        // stays within the day's cities.
        let mut plan = clean_plan();
        plan.days[2].breakfast = Some("Pike Chowder House, Seattle".into());
        plan
    }

    #[test]
    fn repeated_breakfast_fails_diversity_only_there() {
        let sandbox = fixtures_sandbox();
        let mut plan = passing_plan();
        plan.days[2].breakfast = Some("Cafe Tevere, Rome".into());
        let results = check_commonsense(&plan, &sandbox, &goal(None));
        let by_name: BTreeMap<&str, &ConstraintResult> =
            results.iter().map(|r| (r.name.as_str(), r)).collect();
        assert!(!by_name[DIVERSE_RESTAURANTS].passed);
        assert!(by_name[DIVERSE_RESTAURANTS].detail.contains("Cafe Tevere used 2 times"));
        assert!(by_name[WITHIN_CURRENT_CITY].passed);
    }

    #[test]
    fn cost_matches_hand_arithmetic() {
        // Flights: (450 + 430) x 2 = 1760. Hotel: 140 x 2 nights x 1
        // room = 280. Meals: (40 + 22 + 35 + 55 + 28) x 2 = 360.
        let sandbox = fixtures_sandbox();
        let total = plan_cost(&passing_plan(), &goal(None), &sandbox);
        assert!((total - 2400.0).abs() < 1e-9, "got {total}");
    }

    #[test]
    fn budget_boundary_is_inclusive() {
        let sandbox = fixtures_sandbox();
        let plan = passing_plan();
        let exact = check_hard(&plan, &goal(Some(2400.0)), &sandbox);
        assert!(exact[0].passed, "{}", exact[0].detail);
        let under = check_hard(&plan, &goal(Some(2399.99)), &sandbox);
        assert!(!under[0].passed);
        assert!(under[0].detail.contains("2400.00"));
        assert!(under[0].detail.contains("2399.99"));
    }

    #[test]
    fn hallucinated_hotel_lands_in_the_hotel_count_and_within_sandbox() {
        let sandbox = fixtures_sandbox();
        let mut plan = passing_plan();
        plan.days[0].accommodation = Some("Grand Imaginary, Rome".into());
        let entities = hallucinated_entities(&plan, &sandbox);
        assert_eq!(entities, vec![(EntityKind::Hotel, "Grand Imaginary".to_string())]);
        let counts = count_hallucinations(std::slice::from_ref(&plan), &sandbox);
        assert_eq!((counts.flight, counts.hotel, counts.restaurant, counts.attraction), (0, 1, 0, 0));
        let results = check_commonsense(&plan, &sandbox, &goal(None));
        let ws = results.iter().find(|r| r.name == WITHIN_SANDBOX).unwrap();
        assert!(!ws.passed);
        assert!(ws.detail.contains("hallucinated hotel: Grand Imaginary"));
    }

    #[test]
    fn two_fake_restaurants_and_a_fake_hotel_count_0_1_2_0() {
        let sandbox = fixtures_sandbox();
        let mut plan = passing_plan();
        plan.days[0].accommodation = Some("Grand Imaginary, Rome".into());
        plan.days[1].lunch = Some("Chez Invented, Rome".into());
        plan.days[1].dinner = Some("Null Bistro, Rome".into());
        let counts = count_hallucinations(std::slice::from_ref(&plan), &sandbox);
        assert_eq!((counts.flight, counts.hotel, counts.restaurant, counts.attraction), (0, 1, 2, 0));
        assert_eq!(counts.total(), 3);
    }

    #[test]
    fn area_mapping_matches_the_published_table() {
        assert_eq!(area_for_category("Accommodation Rules"), Area::Hotel);
        assert_eq!(area_for_category("City Valid - Accommodation"), Area::Hotel);
        assert_eq!(area_for_category("Room Rule Compliance"), Area::Hotel);
        assert_eq!(area_for_category("Room Type Preferences"), Area::Hotel);
        assert_eq!(area_for_category("Budget/Cost Compliance"), Area::Hotel);
        assert_eq!(
            area_for_category("City Valid - Restaurant (Breakfast/Lunch/Dinner)"),
            Area::Restaurant
        );
        assert_eq!(area_for_category("Diverse Restaurants"), Area::Restaurant);
        assert_eq!(area_for_category("Cuisine Preferences"), Area::Restaurant);
        assert_eq!(area_for_category("City Valid - Attraction"), Area::Attraction);
        assert_eq!(area_for_category("Diverse Attractions"), Area::Attraction);
        assert_eq!(area_for_category("Within Current City"), Area::Attraction);
        assert_eq!(area_for_category("Within Sandbox (No Hallucination)"), Area::Attraction);
        assert_eq!(area_for_category("Complete Information"), Area::Attraction);
        assert_eq!(area_for_category("City Valid - Transportation"), Area::Transportation);
        assert_eq!(area_for_category("Reasonable City Route"), Area::Transportation);
        assert_eq!(area_for_category("Transportation Consistency"), Area::Transportation);
        assert_eq!(area_for_category("Transportation Preferences"), Area::Transportation);
        assert_eq!(area_for_category("Anything Else"), Area::Other);
    }

    #[test]
    fn two_task_arithmetic_example() {
        let sandbox = fixtures_sandbox();
        let pass = evaluate_plan(&goal(None), &passing_plan(), &sandbox);
        assert!(pass.final_pass());
        let mut flawed_plan = passing_plan();
        flawed_plan.days[2].breakfast = Some("Zen Noodle Bar, Kyoto".into());
        let flawed = evaluate_plan(&goal(None), &flawed_plan, &sandbox);
        assert!(flawed.delivered && !flawed.commonsense_pass() && flawed.hard_pass());
        let metrics = compute_metrics(&[pass, flawed], &MetricsOptions::default()).unwrap();
        assert_eq!(metrics.delivery_rate, 100.0);
        assert_eq!(metrics.commonsense_macro, 50.0);
        assert_eq!(metrics.final_pass_rate, 50.0);
        assert_eq!(metrics.hard_macro, 100.0);
    }

    #[test]
    fn single_undelivered_task_zeroes_everything() {
        let eval = evaluate_undelivered(&goal(None));
        assert_eq!(eval.commonsense.len(), 8);
        assert_eq!(eval.hard.len(), 5);
        let metrics = compute_metrics(&[eval], &MetricsOptions::default()).unwrap();
        assert_eq!(metrics.delivery_rate, 0.0);
        assert_eq!(metrics.commonsense_micro, 0.0);
        assert_eq!(metrics.commonsense_macro, 0.0);
        assert_eq!(metrics.hard_micro, 0.0);
        assert_eq!(metrics.hard_macro, 0.0);
        assert_eq!(metrics.final_pass_rate, 0.0);
    }

    #[test]
    fn excluding_undelivered_from_micro_changes_only_micros() {
        let sandbox = fixtures_sandbox();
        let evals = vec![
            evaluate_plan(&goal(None), &passing_plan(), &sandbox),
            evaluate_undelivered(&goal(None)),
        ];
        let incl = compute_metrics(&evals, &MetricsOptions::default()).unwrap();
        let excl =
            compute_metrics(&evals, &MetricsOptions { include_undelivered_in_micro: false }).unwrap();
        assert_eq!(incl.commonsense_micro, 50.0);
        assert_eq!(excl.commonsense_micro, 100.0);
        assert_eq!(incl.final_pass_rate, excl.final_pass_rate);
        assert_eq!(incl.delivery_rate, excl.delivery_rate);
    }

    #[test]
    fn empty_evaluation_set_is_an_error() {
        assert_eq!(
            compute_metrics(&[], &MetricsOptions::default()),
            Err(EvalError::EmptyEvaluationSet)
        );
    }

    #[test]
    fn failure_categorization_over_known_mix() {
        let sandbox = fixtures_sandbox();
        // One all-pass task and one undelivered task: per area, half
        // the constraints fail.
        let evals = vec![
            evaluate_plan(&goal(None), &passing_plan(), &sandbox),
            evaluate_undelivered(&goal(None)),
        ];
        let areas = categorize_failures(&evals);
        assert_eq!(areas[&Area::Transportation], 50.0);
        assert_eq!(areas[&Area::Hotel], 50.0);
        assert_eq!(areas[&Area::Attraction], 50.0);
        assert_eq!(areas[&Area::Restaurant], 50.0);
        assert_eq!(areas[&Area::Other], 0.0);
        assert!(categorize_failures(&[]).values().all(|&v| v == 0.0));
    }

    #[test]
    fn evaluation_is_pure() {
        let sandbox = fixtures_sandbox();
        let a = evaluate_plan(&goal(Some(2400.0)), &passing_plan(), &sandbox);
        let b = evaluate_plan(&goal(Some(2400.0)), &passing_plan(), &sandbox);
        assert_eq!(a, b);
    }
}
