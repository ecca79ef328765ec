//! Multi-granularity timestamps with inclusive day-interval semantics.
//!
//! A [`Timestamp`] is a year, year-month, or year-month-day value. Each one
//! denotes the inclusive range of days it covers: a day maps to `[d, d]`, a
//! month to `[first day, last day]`, a year to `[Jan 1, Dec 31]`. All
//! comparisons between timestamps are defined on those intervals, which lets
//! a month-level question constraint match day-level event facts.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Precision of a timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Year,
    Month,
    Day,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Granularity::Year => write!(f, "year"),
            Granularity::Month => write!(f, "month"),
            Granularity::Day => write!(f, "day"),
        }
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "year" => Ok(Granularity::Year),
            "month" => Ok(Granularity::Month),
            "day" => Ok(Granularity::Day),
            other => Err(Error::Config(format!("unknown granularity {other:?}"))),
        }
    }
}

/// A point in time at year, month, or day precision.
///
/// Invariant: if `day` is present, `month` is present. Construct through
/// [`Timestamp::year`], [`Timestamp::month`], [`Timestamp::day`], or
/// [`Timestamp::parse`]; all reject calendar-invalid values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Timestamp {
    year: i32,
    month: Option<u32>,
    day: Option<u32>,
}

impl Timestamp {
    pub fn year(year: i32) -> Result<Self> {
        Self::check(year, None, None)
    }

    pub fn month(year: i32, month: u32) -> Result<Self> {
        Self::check(year, Some(month), None)
    }

    pub fn day(year: i32, month: u32, day: u32) -> Result<Self> {
        Self::check(year, Some(month), Some(day))
    }

    fn check(year: i32, month: Option<u32>, day: Option<u32>) -> Result<Self> {
        let text = || match (month, day) {
            (Some(m), Some(d)) => format!("{year:04}-{m:02}-{d:02}"),
            (Some(m), None) => format!("{year:04}-{m:02}"),
            _ => format!("{year:04}"),
        };
        if !(1..=9999).contains(&year) {
            return Err(Error::Timestamp {
                text: text(),
                message: "year out of range 1..=9999".into(),
            });
        }
        if let Some(m) = month {
            if !(1..=12).contains(&m) {
                return Err(Error::Timestamp {
                    text: text(),
                    message: "month out of range 1..=12".into(),
                });
            }
        }
        if let Some(d) = day {
            let m = month.expect("day requires month");
            if NaiveDate::from_ymd_opt(year, m, d).is_none() {
                return Err(Error::Timestamp {
                    text: text(),
                    message: "no such calendar day".into(),
                });
            }
        }
        Ok(Timestamp { year, month, day })
    }

    /// Parse `YYYY`, `YYYY-MM`, or `YYYY-MM-DD`. Anything else is rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        let err = |message: &str| Error::Timestamp {
            text: trimmed.to_string(),
            message: message.to_string(),
        };
        let parts: Vec<&str> = trimmed.split('-').collect();
        if parts.is_empty() || parts.len() > 3 {
            return Err(err("expected YYYY, YYYY-MM, or YYYY-MM-DD"));
        }
        if parts[0].len() != 4 || !parts[0].bytes().all(|b| b.is_ascii_digit()) {
            return Err(err("year must be exactly four digits"));
        }
        let year: i32 = parts[0].parse().map_err(|_| err("bad year"))?;
        let mut month = None;
        let mut day = None;
        if parts.len() >= 2 {
            if parts[1].len() != 2 || !parts[1].bytes().all(|b| b.is_ascii_digit()) {
                return Err(err("month must be exactly two digits"));
            }
            month = Some(parts[1].parse::<u32>().map_err(|_| err("bad month"))?);
        }
        if parts.len() == 3 {
            if parts[2].len() != 2 || !parts[2].bytes().all(|b| b.is_ascii_digit()) {
                return Err(err("day must be exactly two digits"));
            }
            day = Some(parts[2].parse::<u32>().map_err(|_| err("bad day"))?);
        }
        Self::check(year, month, day)
    }

    /// The `(year, month, day)` fields as constructed.
    pub fn parts(&self) -> (i32, Option<u32>, Option<u32>) {
        (self.year, self.month, self.day)
    }

    pub fn granularity(&self) -> Granularity {
        match (self.month, self.day) {
            (_, Some(_)) => Granularity::Day,
            (Some(_), None) => Granularity::Month,
            (None, None) => Granularity::Year,
        }
    }

    /// First day of the inclusive interval this timestamp covers.
    pub fn interval_start(&self) -> NaiveDate {
        let month = self.month.unwrap_or(1);
        let day = self.day.unwrap_or(1);
        NaiveDate::from_ymd_opt(self.year, month, day).expect("validated on construction")
    }

    /// Last day of the inclusive interval this timestamp covers.
    pub fn interval_end(&self) -> NaiveDate {
        match (self.month, self.day) {
            (Some(m), Some(d)) => {
                NaiveDate::from_ymd_opt(self.year, m, d).expect("validated on construction")
            }
            (Some(m), None) => last_day_of_month(self.year, m),
            _ => NaiveDate::from_ymd_opt(self.year, 12, 31).expect("valid"),
        }
    }

    /// Interval-end strictly precedes the other interval's start.
    pub fn strictly_before(&self, other: &Timestamp) -> bool {
        self.interval_end() < other.interval_start()
    }

    /// Interval-start strictly follows the other interval's end.
    pub fn strictly_after(&self, other: &Timestamp) -> bool {
        self.interval_start() > other.interval_end()
    }

    /// The two day-intervals share at least one day.
    pub fn intersects(&self, other: &Timestamp) -> bool {
        self.interval_start() <= other.interval_end() && other.interval_start() <= self.interval_end()
    }

    /// Coarsen to `target`. Returns `None` when the timestamp is coarser than
    /// the target (a year cannot be truncated to a month).
    pub fn truncate(&self, target: Granularity) -> Option<Timestamp> {
        if self.granularity() < target {
            return None;
        }
        let ts = match target {
            Granularity::Year => Timestamp {
                year: self.year,
                month: None,
                day: None,
            },
            Granularity::Month => Timestamp {
                year: self.year,
                month: self.month,
                day: None,
            },
            Granularity::Day => *self,
        };
        Some(ts)
    }
}

fn last_day_of_month(year: i32, month: u32) -> NaiveDate {
    let (next_y, next_m) = if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    };
    NaiveDate::from_ymd_opt(next_y, next_m, 1)
        .expect("valid")
        .pred_opt()
        .expect("valid")
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.month, self.day) {
            (Some(m), Some(d)) => write!(f, "{:04}-{:02}-{:02}", self.year, m, d),
            (Some(m), None) => write!(f, "{:04}-{:02}", self.year, m),
            _ => write!(f, "{:04}", self.year),
        }
    }
}

impl FromStr for Timestamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Timestamp::parse(s)
    }
}

// Interval starts define the ordering; ends break ties so the order is total
// and consistent with field equality (start and end together pin the
// granularity).
impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.interval_start(), self.interval_end())
            .cmp(&(other.interval_start(), other.interval_end()))
    }
}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Timestamp::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Pull every `YYYY`, `YYYY-MM`, or `YYYY-MM-DD` literal out of free text,
/// deduplicated in order of first appearance.
pub fn extract_timestamps(text: &str) -> Vec<Timestamp> {
    let re = regex::Regex::new(r"\b(\d{4})(?:-(\d{2})(?:-(\d{2}))?)?\b").expect("static regex");
    let mut seen = Vec::new();
    for caps in re.captures_iter(text) {
        let candidate = caps.get(0).expect("whole match").as_str();
        if let Ok(ts) = Timestamp::parse(candidate) {
            if !seen.contains(&ts) {
                seen.push(ts);
            }
        }
    }
    seen
}
