//! Shared UTC time base.

use std::fmt;

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveTime, TimeZone, Timelike};
use serde::{Deserialize, Serialize};

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const fn from_ms(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        Timestamp((s * 1000.0).round() as i64)
    }

    pub const fn ms(self) -> i64 {
        self.0
    }

    pub fn secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn offset_ms(self, ms: i64) -> Self {
        Timestamp(self.0 + ms)
    }

    /// Signed difference `self - other` in seconds.
    pub fn diff_secs(self, other: Timestamp) -> f64 {
        (self.0 - other.0) as f64 / 1000.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fixed UTC offset of a participant's local clock, in minutes east of UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TzOffset(pub i32);

impl TzOffset {
    pub const UTC: TzOffset = TzOffset(0);

    pub fn minutes(self) -> i32 {
        self.0
    }

    fn fixed(self) -> FixedOffset {
        FixedOffset::east_opt(self.0 * 60).unwrap_or_else(|| FixedOffset::east_opt(0).unwrap())
    }

    pub fn local(self, t: Timestamp) -> DateTime<FixedOffset> {
        self.fixed()
            .timestamp_millis_opt(t.0)
            .single()
            .expect("fixed offsets are unambiguous")
    }

    /// Local calendar date of `t`.
    pub fn local_date(self, t: Timestamp) -> NaiveDate {
        self.local(t).date_naive()
    }

    /// Seconds since local midnight.
    pub fn local_seconds_of_day(self, t: Timestamp) -> u32 {
        self.local(t).num_seconds_from_midnight()
    }

    /// UTC instant of local `time` on local `date`.
    pub fn to_utc(self, date: NaiveDate, time: NaiveTime) -> Timestamp {
        let local = date.and_time(time);
        let utc = local - chrono::Duration::minutes(self.0 as i64);
        Timestamp(utc.and_utc().timestamp_millis())
    }
}

/// Round `t` up to the next multiple of `step_ms` (epoch-aligned grid).
pub fn ceil_to_grid(t: i64, step_ms: i64) -> i64 {
    t.div_euclid(step_ms) * step_ms + if t.rem_euclid(step_ms) == 0 { 0 } else { step_ms }
}

pub fn floor_to_grid(t: i64, step_ms: i64) -> i64 {
    t.div_euclid(step_ms) * step_ms
}

/// Seconds expressed as whole milliseconds; rejects non-positive or non-finite values.
pub fn secs_to_ms(s: f64) -> Option<i64> {
    if s.is_finite() && s > 0.0 {
        Some((s * 1000.0).round() as i64).filter(|&ms| ms > 0)
    } else {
        None
    }
}
