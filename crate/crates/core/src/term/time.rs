//! Calendar time points and durations with one-second granularity.

use std::cmp::Ordering;
use std::fmt;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike};

use super::TermError;

/// A calendar date-time, `datetime(Y,M,D,h,m,s)` in scripts.
///
/// Field order makes the derived ordering chronological.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimePoint {
    year: i32,
    month: u8,
    day: u8,
    hour: u8,
    minute: u8,
    second: u8,
}

impl TimePoint {
    pub fn new(
        year: i32,
        month: u32,
        day: u32,
        hour: u32,
        minute: u32,
        second: u32,
    ) -> Result<Self, TermError> {
        let valid = NaiveDate::from_ymd_opt(year, month, day)
            .and_then(|d| d.and_hms_opt(hour, minute, second))
            .is_some();
        if !valid {
            return Err(TermError::InvalidTime(format!(
                "datetime({year},{month},{day},{hour},{minute},{second})"
            )));
        }
        Ok(TimePoint {
            year,
            month: month as u8,
            day: day as u8,
            hour: hour as u8,
            minute: minute as u8,
            second: second as u8,
        })
    }

    pub fn from_epoch_seconds(secs: i64) -> Self {
        let dt = DateTime::from_timestamp(secs, 0)
            .map(|d| d.naive_utc())
            .unwrap_or_default();
        Self::from_naive(dt)
    }

    fn from_naive(dt: NaiveDateTime) -> Self {
        TimePoint {
            year: dt.year(),
            month: dt.month() as u8,
            day: dt.day() as u8,
            hour: dt.hour() as u8,
            minute: dt.minute() as u8,
            second: dt.second() as u8,
        }
    }

    fn to_naive(self) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(self.year, self.month.into(), self.day.into())
            .and_then(|d| d.and_hms_opt(self.hour.into(), self.minute.into(), self.second.into()))
            .expect("validated at construction")
    }

    pub fn epoch_seconds(self) -> i64 {
        self.to_naive().and_utc().timestamp()
    }

    pub fn plus_seconds(self, secs: i64) -> Self {
        Self::from_epoch_seconds(self.epoch_seconds() + secs)
    }

    /// Seconds from `earlier` to `self` (negative if `self` is earlier).
    pub fn seconds_since(self, earlier: TimePoint) -> i64 {
        self.epoch_seconds() - earlier.epoch_seconds()
    }

    pub fn fields(self) -> [i64; 6] {
        [
            self.year.into(),
            self.month.into(),
            self.day.into(),
            self.hour.into(),
            self.minute.into(),
            self.second.into(),
        ]
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [y, mo, d, h, mi, s] = self.fields();
        write!(f, "datetime({y},{mo},{d},{h},{mi},{s})")
    }
}

/// A duration, `timespan(days,hours,minutes,seconds)` in scripts.
///
/// Equality is structural; use [`TimeSpan::total_seconds`] or
/// [`compare_time`] for chronological comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TimeSpan {
    pub days: u32,
    pub hours: u32,
    pub minutes: u32,
    pub seconds: u32,
}

impl TimeSpan {
    pub fn new(days: u32, hours: u32, minutes: u32, seconds: u32) -> Self {
        TimeSpan {
            days,
            hours,
            minutes,
            seconds,
        }
    }

    pub fn from_seconds(total: u64) -> Self {
        let days = total / 86_400;
        let rem = total % 86_400;
        TimeSpan::new(
            days as u32,
            (rem / 3600) as u32,
            ((rem % 3600) / 60) as u32,
            (rem % 60) as u32,
        )
    }

    pub fn total_seconds(self) -> i64 {
        i64::from(self.days) * 86_400
            + i64::from(self.hours) * 3600
            + i64::from(self.minutes) * 60
            + i64::from(self.seconds)
    }
}

impl fmt::Display for TimeSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "timespan({},{},{},{})",
            self.days, self.hours, self.minutes, self.seconds
        )
    }
}

/// Either kind of temporal value accepted by [`compare_time`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Temporal {
    Point(TimePoint),
    Span(TimeSpan),
}

pub fn compare_time(a: Temporal, b: Temporal) -> Result<Ordering, TermError> {
    match (a, b) {
        (Temporal::Point(x), Temporal::Point(y)) => Ok(x.cmp(&y)),
        (Temporal::Span(x), Temporal::Span(y)) => Ok(x.total_seconds().cmp(&y.total_seconds())),
        _ => Err(TermError::KindMismatch(
            "cannot compare a time point with a time span".into(),
        )),
    }
}
