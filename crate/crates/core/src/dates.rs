use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

/// Inclusive calendar date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        DateRange { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.start > self.end
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn overlaps(&self, other: &DateRange) -> bool {
        !self.is_empty() && !other.is_empty() && self.start <= other.end && other.start <= self.end
    }

    /// Every date in the range, in order.
    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let end = self.end;
        std::iter::successors(Some(self.start), |d| d.succ_opt())
            .take_while(move |d| *d <= end)
    }

    pub fn len_days(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.end - self.start).num_days() as usize + 1
        }
    }
}

impl std::fmt::Display for DateRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl std::str::FromStr for DateRange {
    type Err = String;

    /// Parses `YYYY-MM-DD..YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("date range {s:?} is not of the form START..END"))?;
        let parse = |v: &str| {
            NaiveDate::parse_from_str(v.trim(), "%Y-%m-%d").map_err(|e| format!("date {v:?}: {e}"))
        };
        Ok(DateRange::new(parse(a)?, parse(b)?))
    }
}

/// Spreadsheet serial day number (days since 1899-12-30), used by some
/// archive URL schemes.
pub fn serial_day(date: NaiveDate) -> i64 {
    let epoch = NaiveDate::from_ymd_opt(1899, 12, 30).expect("valid epoch");
    (date - epoch).num_days()
}

pub(crate) fn add_days(date: NaiveDate, days: i64) -> NaiveDate {
    date + Duration::days(days)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn serial_matches_known_archive_value() {
        assert_eq!(serial_day(d("2021-01-01")), 44197);
    }

    #[test]
    fn days_inclusive() {
        let r = DateRange::new(d("2023-02-27"), d("2023-03-02"));
        let days: Vec<_> = r.days().map(|x| x.to_string()).collect();
        assert_eq!(days, ["2023-02-27", "2023-02-28", "2023-03-01", "2023-03-02"]);
        assert_eq!(r.len_days(), 4);
        assert_eq!(DateRange::new(d("2023-01-02"), d("2023-01-01")).days().count(), 0);
    }

    #[test]
    fn overlap() {
        let a = DateRange::new(d("2021-01-01"), d("2023-08-31"));
        let b = DateRange::new(d("2023-10-01"), d("2024-02-22"));
        assert!(!a.overlaps(&b));
        assert!(a.overlaps(&DateRange::new(d("2023-08-31"), d("2023-09-01"))));
    }

    #[test]
    fn parse_range() {
        let r: DateRange = "2023-09-01..2023-09-30".parse().unwrap();
        assert_eq!(r.len_days(), 30);
        assert_eq!(r.to_string().parse::<DateRange>().unwrap(), r);
        assert!("2023-09-01".parse::<DateRange>().is_err());
    }
}
