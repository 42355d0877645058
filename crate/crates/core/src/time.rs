//! Hour-granular time axis shared by every series.

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;

const SECONDS_PER_HOUR: i64 = 3600;

/// Whole hours since the Unix epoch (UTC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HourIndex(pub i64);

impl Serialize for HourIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HourIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        parse_timestamp(&raw, utc())
            .ok()
            .and_then(HourIndex::from_datetime)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid hour timestamp {raw:?}")))
    }
}

impl HourIndex {
    /// Returns `None` unless `t` sits exactly on an hour boundary.
    pub fn from_datetime(t: DateTime<Utc>) -> Option<Self> {
        let secs = t.timestamp();
        if secs.rem_euclid(SECONDS_PER_HOUR) != 0 || t.nanosecond() != 0 {
            return None;
        }
        Some(HourIndex(secs.div_euclid(SECONDS_PER_HOUR)))
    }

    /// The hour containing `t`.
    pub fn containing(t: DateTime<Utc>) -> Self {
        HourIndex(t.timestamp().div_euclid(SECONDS_PER_HOUR))
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        Utc.timestamp_opt(self.0 * SECONDS_PER_HOUR, 0)
            .single()
            .expect("hour index within chrono range")
    }

    pub fn offset(self, hours: i64) -> Self {
        HourIndex(self.0 + hours)
    }
}

impl fmt::Display for HourIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_timestamp(self.to_datetime()))
    }
}

/// Half-open span `[start, end)` of hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourSpan {
    pub start: HourIndex,
    pub end: HourIndex,
}

impl HourSpan {
    pub fn new(start: HourIndex, end: HourIndex) -> Self {
        HourSpan { start, end }
    }

    pub fn with_len(start: HourIndex, len: usize) -> Self {
        HourSpan {
            start,
            end: start.offset(len as i64),
        }
    }

    pub fn len(&self) -> usize {
        (self.end.0 - self.start.0).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, h: HourIndex) -> bool {
        h >= self.start && h < self.end
    }

    pub fn intersect(&self, other: &HourSpan) -> Option<HourSpan> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start < end).then_some(HourSpan { start, end })
    }

    pub fn hours(&self) -> impl Iterator<Item = HourIndex> {
        (self.start.0..self.end.0).map(HourIndex)
    }

    /// Whole UTC days `first..=last`.
    pub fn from_dates(first: NaiveDate, last: NaiveDate) -> Option<HourSpan> {
        let start = Utc.from_utc_datetime(&first.and_hms_opt(0, 0, 0)?);
        let end = Utc.from_utc_datetime(&last.succ_opt()?.and_hms_opt(0, 0, 0)?);
        let span = HourSpan::new(HourIndex::from_datetime(start)?, HourIndex::from_datetime(end)?);
        (!span.is_empty()).then_some(span)
    }
}

/// `2023-07-01T00:00:00Z`.
pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Parses an ISO-8601 timestamp with minute precision. Timestamps without an
/// explicit offset are interpreted in `naive_offset`.
pub fn parse_timestamp(raw: &str, naive_offset: FixedOffset) -> Result<DateTime<Utc>, String> {
    let s = raw.trim();
    let parsed = parse_with_offset(s).or_else(|| {
        parse_naive(s).and_then(|naive| {
            naive_offset
                .from_local_datetime(&naive)
                .single()
                .map(|t| t.with_timezone(&Utc))
        })
    });
    match parsed {
        Some(t) if t.second() == 0 && t.nanosecond() == 0 => Ok(t),
        Some(_) => Err(format!("timestamp {s:?} is not minute-aligned")),
        None => Err(format!("unrecognised timestamp {s:?}")),
    }
}

fn parse_with_offset(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    let normalized = match s.strip_suffix('Z').or_else(|| s.strip_suffix('z')) {
        Some(head) => format!("{head}+00:00"),
        None => s.to_string(),
    };
    for fmt in ["%Y-%m-%dT%H:%M%:z", "%Y-%m-%d %H:%M%:z", "%Y-%m-%d %H:%M:%S%:z"] {
        if let Ok(t) = DateTime::parse_from_str(&normalized, fmt) {
            return Some(t.with_timezone(&Utc));
        }
    }
    None
}

fn parse_naive(s: &str) -> Option<NaiveDateTime> {
    [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
}

/// Parses `UTC`, `Z`, `+HH:MM` or `-HH:MM`.
pub fn parse_offset(raw: &str) -> Result<FixedOffset, String> {
    let s = raw.trim();
    if s.eq_ignore_ascii_case("utc") || s == "Z" || s.is_empty() {
        return Ok(FixedOffset::east_opt(0).unwrap());
    }
    let (sign, rest) = match s.as_bytes()[0] {
        b'+' => (1, &s[1..]),
        b'-' => (-1, &s[1..]),
        _ => return Err(format!("bad UTC offset {s:?}")),
    };
    let (h, m) = rest.split_once(':').unwrap_or((rest, "0"));
    let h: i32 = h.parse().map_err(|_| format!("bad UTC offset {s:?}"))?;
    let m: i32 = m.parse().map_err(|_| format!("bad UTC offset {s:?}"))?;
    FixedOffset::east_opt(sign * (h * 3600 + m * 60)).ok_or_else(|| format!("bad UTC offset {s:?}"))
}

pub fn utc() -> FixedOffset {
    FixedOffset::east_opt(0).unwrap()
}

/// Local calendar date of the hour starting at `h`.
pub fn local_date(h: HourIndex, offset: FixedOffset) -> NaiveDate {
    h.to_datetime().with_timezone(&offset).date_naive()
}

/// Splits `len` consecutive hours starting at `start` into runs sharing a
/// local calendar date.
pub fn day_ranges(start: HourIndex, len: usize, offset: FixedOffset) -> Vec<(NaiveDate, Range<usize>)> {
    let mut out: Vec<(NaiveDate, Range<usize>)> = Vec::new();
    for i in 0..len {
        let date = local_date(start.offset(i as i64), offset);
        match out.last_mut() {
            Some((d, range)) if *d == date => range.end = i + 1,
            _ => out.push((date, i..i + 1)),
        }
    }
    out
}
