//! Calendar months used to anchor shocks and interventions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A calendar month, stored as a count of months since January of year 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month(i32);

impl Month {
    /// `month` is 1-based. Panics if it is outside 1..=12.
    pub fn new(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month out of range: {month}");
        Month(year * 12 + month as i32 - 1)
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(12)
    }

    pub fn month(self) -> u32 {
        self.0.rem_euclid(12) as u32 + 1
    }

    pub fn offset(self, months: i32) -> Self {
        Month(self.0 + months)
    }

    /// Signed number of months from `self` to `later`.
    pub fn months_until(self, later: Month) -> i32 {
        later.0 - self.0
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

impl FromStr for Month {
    type Err = Error;

    /// Accepts `YYYY-MM` or a full ISO date `YYYY-MM-DD` (the day is ignored).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::config("month", format!("expected YYYY-MM, got `{s}`"));
        let mut parts = s.trim().splitn(3, '-');
        let year: i32 = parts.next().and_then(|y| y.parse().ok()).ok_or_else(bad)?;
        let month: u32 = parts.next().and_then(|m| m.parse().ok()).ok_or_else(bad)?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(Month::new(year, month))
    }
}

impl Serialize for Month {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Month {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_crosses_year_boundaries() {
        let oct = Month::new(2022, 10);
        assert_eq!(oct.offset(9), Month::new(2023, 7));
        assert_eq!(oct.offset(-12), Month::new(2021, 10));
        assert_eq!(Month::new(2020, 2).months_until(oct), 32);
    }

    #[test]
    fn parses_and_prints() {
        let m: Month = "2020-02".parse().unwrap();
        assert_eq!(m, Month::new(2020, 2));
        assert_eq!(m.to_string(), "2020-02");
        assert_eq!("2020-02-29".parse::<Month>().unwrap(), m);
        assert!("2020-13".parse::<Month>().is_err());
        assert!("feb".parse::<Month>().is_err());
    }
}
