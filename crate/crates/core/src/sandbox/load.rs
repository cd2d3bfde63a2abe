//! CSV ingestion for the travel database.
//!
//! Each table is a headered CSV file. Errors carry the file and the
//! 1-based data row (header excluded) so a bad fixture is findable
//! without a debugger.

use super::{AttractionRecord, FlightRecord, HotelRecord, RestaurantRecord, Sandbox};
use crate::types::{CalendarDate, ClockTime};
use serde::Deserialize;
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("missing table: {name} (no {name}.csv in {dir})")]
    MissingTable { name: &'static str, dir: String },
    #[error("cannot read {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} row {row}: {message}")]
    Row {
        file: String,
        /// 1-based data row, header excluded.
        row: usize,
        message: String,
    },
}

fn row_err(file: &str, row: usize, message: impl Into<String>) -> SandboxError {
    SandboxError::Row {
        file: file.to_string(),
        row,
        message: message.into(),
    }
}

// Raw rows mirror the CSV layout; validation happens after parsing.
#[derive(Debug, Deserialize)]
struct RawFlight {
    flight_number: String,
    origin_city: String,
    destination_city: String,
    departure_time: String,
    arrival_time: String,
    duration_min: u32,
    price: f64,
    date: String,
}

#[derive(Debug, Deserialize)]
struct RawHotel {
    name: String,
    city: String,
    price_per_night: f64,
    room_type: String,
    house_rules: String,
    minimum_nights: u32,
    maximum_occupancy: u32,
}

#[derive(Debug, Deserialize)]
struct RawRestaurant {
    name: String,
    city: String,
    cuisines: String,
    average_cost: f64,
    rating: f64,
}

#[derive(Debug, Deserialize)]
struct RawAttraction {
    name: String,
    city: String,
    address: String,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, SandboxError> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => SandboxError::Io { file: file.clone(), source },
            other => row_err(&file, 0, format!("{other:?}")),
        })?;
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize().enumerate() {
        let row: T = record.map_err(|e| row_err(&file, i + 1, e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Splits a ";"-separated list cell, dropping empty segments so an
/// empty cell means "no entries".
fn split_list(cell: &str) -> Vec<String> {
    cell.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn require_nonempty(
    file: &str,
    row: usize,
    field: &str,
    value: &str,
) -> Result<(), SandboxError> {
    if value.trim().is_empty() {
        return Err(row_err(file, row, format!("{field} must not be empty")));
    }
    Ok(())
}

fn require_positive(file: &str, row: usize, field: &str, value: f64) -> Result<(), SandboxError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(row_err(file, row, format!("{field} must be positive, got {value}")));
    }
    Ok(())
}

/// Loads all four tables from a directory containing flights.csv,
/// hotels.csv, restaurants.csv, and attractions.csv.
pub fn load_sandbox(dir: &Path) -> Result<Sandbox, SandboxError> {
    for name in ["flights", "hotels", "restaurants", "attractions"] {
        if !dir.join(format!("{name}.csv")).is_file() {
            return Err(SandboxError::MissingTable { name, dir: dir.display().to_string() });
        }
    }

    let flights_path = dir.join("flights.csv");
    let file = flights_path.display().to_string();
    let mut flights = Vec::new();
    let mut flight_keys = BTreeSet::new();
    for (i, raw) in read_rows::<RawFlight>(&flights_path)?.into_iter().enumerate() {
        let row = i + 1;
        require_nonempty(&file, row, "flight_number", &raw.flight_number)?;
        require_nonempty(&file, row, "origin_city", &raw.origin_city)?;
        require_nonempty(&file, row, "destination_city", &raw.destination_city)?;
        require_positive(&file, row, "price", raw.price)?;
        let departure_time: ClockTime = raw
            .departure_time
            .parse()
            .map_err(|e| row_err(&file, row, format!("departure_time: {e}")))?;
        let arrival_time: ClockTime = raw
            .arrival_time
            .parse()
            .map_err(|e| row_err(&file, row, format!("arrival_time: {e}")))?;
        let date: CalendarDate = raw
            .date
            .parse()
            .map_err(|e| row_err(&file, row, format!("date: {e}")))?;
        if raw.duration_min == 0 {
            return Err(row_err(&file, row, "duration_min must be positive"));
        }
        if super::normalize_name(&raw.origin_city) == super::normalize_name(&raw.destination_city)
        {
            return Err(row_err(&file, row, "origin and destination are the same city"));
        }
        let key = (super::normalize_name(&raw.flight_number), date);
        if !flight_keys.insert(key) {
            return Err(row_err(
                &file,
                row,
                format!("duplicate flight {} on {}", raw.flight_number, date),
            ));
        }
        flights.push(FlightRecord {
            flight_number: raw.flight_number,
            origin_city: raw.origin_city,
            destination_city: raw.destination_city,
            departure_time,
            arrival_time,
            duration_min: raw.duration_min,
            price: raw.price,
            date,
        });
    }

    let hotels_path = dir.join("hotels.csv");
    let file = hotels_path.display().to_string();
    let mut hotels = Vec::new();
    let mut hotel_keys = BTreeSet::new();
    for (i, raw) in read_rows::<RawHotel>(&hotels_path)?.into_iter().enumerate() {
        let row = i + 1;
        require_nonempty(&file, row, "name", &raw.name)?;
        require_nonempty(&file, row, "city", &raw.city)?;
        require_nonempty(&file, row, "room_type", &raw.room_type)?;
        require_positive(&file, row, "price_per_night", raw.price_per_night)?;
        if raw.minimum_nights == 0 {
            return Err(row_err(&file, row, "minimum_nights must be positive"));
        }
        if raw.maximum_occupancy == 0 {
            return Err(row_err(&file, row, "maximum_occupancy must be positive"));
        }
        let key = (super::normalize_name(&raw.name), super::normalize_name(&raw.city));
        if !hotel_keys.insert(key) {
            return Err(row_err(
                &file,
                row,
                format!("duplicate hotel {} in {}", raw.name, raw.city),
            ));
        }
        hotels.push(HotelRecord {
            name: raw.name,
            city: raw.city,
            price_per_night: raw.price_per_night,
            room_type: raw.room_type,
            house_rules: split_list(&raw.house_rules),
            minimum_nights: raw.minimum_nights,
            maximum_occupancy: raw.maximum_occupancy,
        });
    }

    let restaurants_path = dir.join("restaurants.csv");
    let file = restaurants_path.display().to_string();
    let mut restaurants = Vec::new();
    let mut restaurant_keys = BTreeSet::new();
    for (i, raw) in read_rows::<RawRestaurant>(&restaurants_path)?.into_iter().enumerate() {
        let row = i + 1;
        require_nonempty(&file, row, "name", &raw.name)?;
        require_nonempty(&file, row, "city", &raw.city)?;
        require_positive(&file, row, "average_cost", raw.average_cost)?;
        if !(0.0..=5.0).contains(&raw.rating) {
            return Err(row_err(&file, row, format!("rating must be in 0..=5, got {}", raw.rating)));
        }
        let key = (super::normalize_name(&raw.name), super::normalize_name(&raw.city));
        if !restaurant_keys.insert(key) {
            return Err(row_err(
                &file,
                row,
                format!("duplicate restaurant {} in {}", raw.name, raw.city),
            ));
        }
        restaurants.push(RestaurantRecord {
            name: raw.name,
            city: raw.city,
            cuisines: split_list(&raw.cuisines),
            average_cost: raw.average_cost,
            rating: raw.rating,
        });
    }

    let attractions_path = dir.join("attractions.csv");
    let file = attractions_path.display().to_string();
    let mut attractions = Vec::new();
    let mut attraction_keys = BTreeSet::new();
    for (i, raw) in read_rows::<RawAttraction>(&attractions_path)?.into_iter().enumerate() {
        let row = i + 1;
        require_nonempty(&file, row, "name", &raw.name)?;
        require_nonempty(&file, row, "city", &raw.city)?;
        require_nonempty(&file, row, "address", &raw.address)?;
        let key = (super::normalize_name(&raw.name), super::normalize_name(&raw.city));
        if !attraction_keys.insert(key) {
            return Err(row_err(
                &file,
                row,
                format!("duplicate attraction {} in {}", raw.name, raw.city),
            ));
        }
        attractions.push(AttractionRecord {
            name: raw.name,
            city: raw.city,
            address: raw.address,
        });
    }

    Ok(Sandbox::from_rows(flights, hotels, restaurants, attractions))
}
