//! Local travel database and the retrieval tools the experts call.
//!
//! The sandbox is loaded once from four CSV tables and is immutable
//! afterwards; every search is a pure read, so any number of concurrent
//! runs can share one instance.

mod load;

pub use load::{load_sandbox, SandboxError};

use crate::types::{CalendarDate, ClockTime};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// One scheduled flight on one calendar date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightRecord {
    pub flight_number: String,
    pub origin_city: String,
    pub destination_city: String,
    pub departure_time: ClockTime,
    pub arrival_time: ClockTime,
    pub duration_min: u32,
    /// Ticket price per person.
    pub price: f64,
    pub date: CalendarDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotelRecord {
    pub name: String,
    pub city: String,
    pub price_per_night: f64,
    /// e.g. "entire room", "private room", "shared room".
    pub room_type: String,
    /// Prohibitions such as "No smoking"; empty when the hotel has none.
    pub house_rules: Vec<String>,
    pub minimum_nights: u32,
    pub maximum_occupancy: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestaurantRecord {
    pub name: String,
    pub city: String,
    pub cuisines: Vec<String>,
    /// Average cost per person.
    pub average_cost: f64,
    /// Rating in [0, 5].
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionRecord {
    pub name: String,
    pub city: String,
    pub address: String,
}

/// Entity kinds the grounding check understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Flight,
    Hotel,
    Restaurant,
    Attraction,
    City,
}

impl EntityKind {
    pub fn label(self) -> &'static str {
        match self {
            EntityKind::Flight => "flight",
            EntityKind::Hotel => "hotel",
            EntityKind::Restaurant => "restaurant",
            EntityKind::Attraction => "attraction",
            EntityKind::City => "city",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Canonical name form used for all grounding and search comparisons:
/// trimmed, lowercased, with internal whitespace runs collapsed to one
/// space. Deliberately not fuzzy, so near-miss names stay detectable.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Row counts of a loaded sandbox.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxStats {
    pub cities: usize,
    pub flights: usize,
    pub hotels: usize,
    pub restaurants: usize,
    pub attractions: usize,
}

/// The immutable travel database plus search indices.
#[derive(Debug, Clone, Default)]
pub struct Sandbox {
    flights: Vec<FlightRecord>,
    hotels: Vec<HotelRecord>,
    restaurants: Vec<RestaurantRecord>,
    attractions: Vec<AttractionRecord>,
    city_set: BTreeSet<String>,

    // Indices hold row offsets into the vectors above, keyed by
    // normalized city (and date for flights).
    flights_by_route: BTreeMap<(String, String, CalendarDate), Vec<usize>>,
    hotels_by_city: BTreeMap<String, Vec<usize>>,
    restaurants_by_city: BTreeMap<String, Vec<usize>>,
    attractions_by_city: BTreeMap<String, Vec<usize>>,
    names: BTreeMap<EntityKind, BTreeSet<String>>,
}

impl Sandbox {
    /// Builds the sandbox from already-parsed rows, constructing all
    /// indices. Row invariants are checked by the loader, not here.
    pub fn from_rows(
        flights: Vec<FlightRecord>,
        hotels: Vec<HotelRecord>,
        restaurants: Vec<RestaurantRecord>,
        attractions: Vec<AttractionRecord>,
    ) -> Self {
        let mut sandbox = Sandbox {
            flights,
            hotels,
            restaurants,
            attractions,
            ..Sandbox::default()
        };

        let mut names: BTreeMap<EntityKind, BTreeSet<String>> = BTreeMap::new();
        let mut cities = BTreeSet::new();

        for (i, f) in sandbox.flights.iter().enumerate() {
            sandbox
                .flights_by_route
                .entry((
                    normalize_name(&f.origin_city),
                    normalize_name(&f.destination_city),
                    f.date,
                ))
                .or_default()
                .push(i);
            names
                .entry(EntityKind::Flight)
                .or_default()
                .insert(normalize_name(&f.flight_number));
            cities.insert(f.origin_city.clone());
            cities.insert(f.destination_city.clone());
        }
        for (i, h) in sandbox.hotels.iter().enumerate() {
            sandbox
                .hotels_by_city
                .entry(normalize_name(&h.city))
                .or_default()
                .push(i);
            names
                .entry(EntityKind::Hotel)
                .or_default()
                .insert(normalize_name(&h.name));
            cities.insert(h.city.clone());
        }
        for (i, r) in sandbox.restaurants.iter().enumerate() {
            sandbox
                .restaurants_by_city
                .entry(normalize_name(&r.city))
                .or_default()
                .push(i);
            names
                .entry(EntityKind::Restaurant)
                .or_default()
                .insert(normalize_name(&r.name));
            cities.insert(r.city.clone());
        }
        for (i, a) in sandbox.attractions.iter().enumerate() {
            sandbox
                .attractions_by_city
                .entry(normalize_name(&a.city))
                .or_default()
                .push(i);
            names
                .entry(EntityKind::Attraction)
                .or_default()
                .insert(normalize_name(&a.name));
            cities.insert(a.city.clone());
        }

        names.insert(
            EntityKind::City,
            cities.iter().map(|c| normalize_name(c)).collect(),
        );
        sandbox.city_set = cities;
        sandbox.names = names;
        sandbox
    }

    /// An empty database; every search returns nothing.
    pub fn empty() -> Self {
        Sandbox::default()
    }

    pub fn stats(&self) -> SandboxStats {
        SandboxStats {
            cities: self.city_set.len(),
            flights: self.flights.len(),
            hotels: self.hotels.len(),
            restaurants: self.restaurants.len(),
            attractions: self.attractions.len(),
        }
    }

    pub fn cities(&self) -> &BTreeSet<String> {
        &self.city_set
    }

    /// Raw table access, used by brute-force oracles in tests and by the
    /// cost arithmetic in the evaluator.
    pub fn all_flights(&self) -> &[FlightRecord] {
        &self.flights
    }

    pub fn all_hotels(&self) -> &[HotelRecord] {
        &self.hotels
    }

    pub fn all_restaurants(&self) -> &[RestaurantRecord] {
        &self.restaurants
    }

    pub fn all_attractions(&self) -> &[AttractionRecord] {
        &self.attractions
    }

    /// Flights matching origin, destination, and date exactly, ordered by
    /// departure time then flight number. Unknown cities or dates simply
    /// match nothing; probing candidate cities is a legal query.
    pub fn flight_search(
        &self,
        origin: &str,
        destination: &str,
        date: CalendarDate,
    ) -> Vec<FlightRecord> {
        let key = (normalize_name(origin), normalize_name(destination), date);
        let mut out: Vec<FlightRecord> = self
            .flights_by_route
            .get(&key)
            .map(|rows| rows.iter().map(|&i| self.flights[i].clone()).collect())
            .unwrap_or_default();
        out.sort_by(|a, b| {
            (a.departure_time, &a.flight_number).cmp(&(b.departure_time, &b.flight_number))
        });
        out
    }

    /// Hotels in a city, ordered by name.
    pub fn hotel_search(&self, city: &str) -> Vec<HotelRecord> {
        let mut out: Vec<HotelRecord> = self
            .hotels_by_city
            .get(&normalize_name(city))
            .map(|rows| rows.iter().map(|&i| self.hotels[i].clone()).collect())
            .unwrap_or_default();
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out
    }

    /// Restaurants in a city, ordered by name.
    pub fn restaurant_search(&self, city: &str) -> Vec<RestaurantRecord> {
        let mut out: Vec<RestaurantRecord> = self
            .restaurants_by_city
            .get(&normalize_name(city))
            .map(|rows| rows.iter().map(|&i| self.restaurants[i].clone()).collect())
            .unwrap_or_default();
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out
    }

    /// Attractions in a city, ordered by name.
    pub fn attraction_search(&self, city: &str) -> Vec<AttractionRecord> {
        let mut out: Vec<AttractionRecord> = self
            .attractions_by_city
            .get(&normalize_name(city))
            .map(|rows| rows.iter().map(|&i| self.attractions[i].clone()).collect())
            .unwrap_or_default();
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out
    }

    /// Grounding primitive: true iff an entity of `kind` with exactly
    /// this canonical name exists in the database.
    pub fn entity_exists(&self, kind: EntityKind, name: &str) -> bool {
        self.names
            .get(&kind)
            .is_some_and(|set| set.contains(&normalize_name(name)))
    }

    /// Flight lookup by number and date, used by plan validation.
    pub fn find_flight(&self, flight_number: &str, date: CalendarDate) -> Option<&FlightRecord> {
        let wanted = normalize_name(flight_number);
        self.flights
            .iter()
            .find(|f| f.date == date && normalize_name(&f.flight_number) == wanted)
    }

    /// Hotel lookup by name (first match; fixture names are unique).
    pub fn find_hotel(&self, name: &str) -> Option<&HotelRecord> {
        let wanted = normalize_name(name);
        self.hotels.iter().find(|h| normalize_name(&h.name) == wanted)
    }

    pub fn find_restaurant(&self, name: &str) -> Option<&RestaurantRecord> {
        let wanted = normalize_name(name);
        self.restaurants
            .iter()
            .find(|r| normalize_name(&r.name) == wanted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_collapses_case_and_whitespace() {
        assert_eq!(normalize_name("  Casa   Bellini "), "casa bellini");
        assert_eq!(normalize_name("ROME"), "rome");
        assert_eq!(normalize_name("a\tb\n c"), "a b c");
    }

    #[test]
    fn empty_sandbox_matches_nothing() {
        let sb = Sandbox::empty();
        assert!(sb.flight_search("Seattle", "Rome", "2025-03-10".parse().unwrap()).is_empty());
        assert!(sb.hotel_search("Rome").is_empty());
        assert!(!sb.entity_exists(EntityKind::City, "Rome"));
    }
}
