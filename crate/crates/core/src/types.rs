//! Small scalar types shared across the workspace.

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

/// A time of day, serialized as "HH:MM" (24-hour clock).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClockTime {
    pub hour: u8,
    pub minute: u8,
}

impl ClockTime {
    pub fn new(hour: u8, minute: u8) -> Option<Self> {
        (hour < 24 && minute < 60).then_some(ClockTime { hour, minute })
    }

    pub fn minutes_since_midnight(self) -> u32 {
        u32::from(self.hour) * 60 + u32::from(self.minute)
    }
}

impl fmt::Display for ClockTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hour, self.minute)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid time {0:?}, expected HH:MM")]
pub struct ParseClockTimeError(pub String);

impl FromStr for ClockTime {
    type Err = ParseClockTimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseClockTimeError(s.to_string());
        let (h, m) = s.split_once(':').ok_or_else(bad)?;
        if h.len() != 2 || m.len() != 2 {
            return Err(bad());
        }
        let hour: u8 = h.parse().map_err(|_| bad())?;
        let minute: u8 = m.parse().map_err(|_| bad())?;
        ClockTime::new(hour, minute).ok_or_else(bad)
    }
}

impl Serialize for ClockTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClockTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// A calendar date, serialized as "YYYY-MM-DD". Wraps a chrono date so
/// day arithmetic and validity checks stay correct across month ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CalendarDate(pub chrono::NaiveDate);

impl CalendarDate {
    pub fn succ(self) -> CalendarDate {
        CalendarDate(self.0.succ_opt().expect("date overflow"))
    }
}

impl fmt::Display for CalendarDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid date {0:?}, expected YYYY-MM-DD")]
pub struct ParseCalendarDateError(pub String);

impl FromStr for CalendarDate {
    type Err = ParseCalendarDateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // chrono tolerates unpadded fields; only the canonical
        // zero-padded 10-character form is accepted here.
        let date = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|_| ParseCalendarDateError(s.to_string()))?;
        if date.format("%Y-%m-%d").to_string() != s {
            return Err(ParseCalendarDateError(s.to_string()));
        }
        Ok(CalendarDate(date))
    }
}

impl Serialize for CalendarDate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CalendarDate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_time_round_trips() {
        let t: ClockTime = "08:05".parse().unwrap();
        assert_eq!(t, ClockTime::new(8, 5).unwrap());
        assert_eq!(t.to_string(), "08:05");
        assert_eq!(t.minutes_since_midnight(), 485);
    }

    #[test]
    fn clock_time_rejects_malformed() {
        for bad in ["8:05", "08:5", "24:00", "08:60", "0805", "", "aa:bb"] {
            assert!(bad.parse::<ClockTime>().is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn calendar_date_round_trips_and_advances() {
        let d: CalendarDate = "2025-03-10".parse().unwrap();
        assert_eq!(d.to_string(), "2025-03-10");
        assert_eq!(d.succ().to_string(), "2025-03-11");
        let end: CalendarDate = "2025-02-28".parse().unwrap();
        assert_eq!(end.succ().to_string(), "2025-03-01");
    }

    #[test]
    fn calendar_date_rejects_malformed() {
        for bad in ["2025-3-10", "2025-13-01", "2025-02-30", "10-03-2025", ""] {
            assert!(bad.parse::<CalendarDate>().is_err(), "{bad:?} should fail");
        }
    }
}
