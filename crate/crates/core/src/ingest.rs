//! Parsing, resampling, gap filling, outlier repair and time alignment of
//! facility energy and LME series.

use crate::error::{Error, Result};
use crate::time::{day_ranges, format_timestamp, local_date, parse_timestamp, HourIndex, HourSpan};
use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Ratio above the previous day's maximum at which a reading is treated as an outlier.
pub const OUTLIER_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Energy,
    Lme,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawReading {
    pub timestamp: DateTime<Utc>,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    Hourly,
    QuarterHourly,
}

/// Hourly facility consumption in MWh. `None` marks a missing hour.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    pub facility_id: String,
    pub start: HourIndex,
    pub values: Vec<Option<f64>>,
    /// Hours averaged from fewer than four quarter-hour readings.
    pub partial: Vec<bool>,
    pub origin_resolution: Resolution,
}

/// Hourly locational marginal emission factors in tons CO₂/MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct LmeSeries {
    pub region_id: String,
    pub start: HourIndex,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRow {
    pub hour: HourIndex,
    pub energy: Option<f64>,
    pub lme: f64,
    pub hour_of_day: u32,
    pub day: NaiveDate,
    pub weekday: Weekday,
    pub month: u32,
}

/// Energy and LME merged on identical hourly timestamps, with calendar
/// columns in the facility's local offset.
#[derive(Debug, Clone, PartialEq)]
pub struct FacilityFrame {
    pub facility_id: String,
    pub region_id: String,
    pub offset: FixedOffset,
    pub rows: Vec<FrameRow>,
}

/// Parses a `timestamp,value` CSV. Energy rows may leave the value empty
/// (or write `null`/`NaN`) to mark a missing reading; LME rows may not.
pub fn parse_series(bytes: &[u8], kind: SeriesKind, naive_offset: FixedOffset) -> Result<Vec<RawReading>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);

    let mut rows: Vec<(usize, RawReading)> = Vec::new();
    let mut saw_header = false;
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !saw_header {
            saw_header = true;
            let header: Vec<&str> = record.iter().collect();
            if header.len() != 2
                || !header[0].eq_ignore_ascii_case("timestamp")
                || !header[1].eq_ignore_ascii_case("value")
            {
                return Err(Error::MalformedRow {
                    line,
                    message: "expected header `timestamp,value`".into(),
                });
            }
            continue;
        }
        if record.len() != 2 {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let timestamp =
            parse_timestamp(&record[0], naive_offset).map_err(|message| Error::MalformedRow { line, message })?;
        let value = parse_value(&record[1], kind, line)?;
        rows.push((line, RawReading { timestamp, value }));
    }

    if rows.is_empty() {
        return Err(Error::NoReadings);
    }
    rows.sort_by_key(|(_, r)| r.timestamp);
    for pair in rows.windows(2) {
        if pair[0].1.timestamp == pair[1].1.timestamp {
            let line = pair[0].0.max(pair[1].0);
            return Err(Error::DuplicateTimestamp {
                line,
                timestamp: format_timestamp(pair[1].1.timestamp),
            });
        }
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

fn parse_value(field: &str, kind: SeriesKind, line: usize) -> Result<Option<f64>> {
    let is_null = field.is_empty() || field.eq_ignore_ascii_case("null") || field.eq_ignore_ascii_case("nan");
    match kind {
        SeriesKind::Energy if is_null => Ok(None),
        SeriesKind::Lme if is_null => Err(Error::MalformedRow {
            line,
            message: "LME value missing".into(),
        }),
        _ => {
            let v: f64 = field.parse().map_err(|_| Error::MalformedRow {
                line,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedRow {
                    line,
                    message: format!("non-finite value {field:?}"),
                });
            }
            if kind == SeriesKind::Energy && v < 0.0 {
                return Err(Error::NegativeEnergy { line, value: v });
            }
            Ok(Some(v))
        }
    }
}

impl EnergySeries {
    /// Builds an hourly series, resampling when any reading falls between hours.
    pub fn from_readings(facility_id: &str, readings: &[RawReading]) -> Result<Self> {
        if readings.is_empty() {
            return Err(Error::NoReadings);
        }
        if readings.iter().all(|r| HourIndex::from_datetime(r.timestamp).is_some()) {
            let first = HourIndex::from_datetime(readings[0].timestamp).unwrap();
            let last = HourIndex::from_datetime(readings[readings.len() - 1].timestamp).unwrap();
            let len = (last.0 - first.0 + 1) as usize;
            let mut values = vec![None; len];
            for r in readings {
                let h = HourIndex::from_datetime(r.timestamp).unwrap();
                values[(h.0 - first.0) as usize] = r.value;
            }
            Ok(EnergySeries {
                facility_id: facility_id.to_string(),
                start: first,
                partial: vec![false; len],
                values,
                origin_resolution: Resolution::Hourly,
            })
        } else {
            resample_to_hourly(facility_id, readings)
        }
    }

    pub fn span(&self) -> HourSpan {
        HourSpan::with_len(self.start, self.values.len())
    }

    pub fn get(&self, h: HourIndex) -> Option<f64> {
        let i = h.0 - self.start.0;
        if i < 0 {
            return None;
        }
        self.values.get(i as usize).copied().flatten()
    }

    /// Errors on the first hour whose energy exceeds `capacity_mw` × 1 h.
    pub fn check_capacity(&self, capacity_mw: f64) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if let Some(v) = *v {
                if v > capacity_mw {
                    return Err(Error::CapacityExceeded {
                        timestamp: self.start.offset(i as i64).to_string(),
                        value: v,
                        capacity: capacity_mw,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Averages quarter-hour readings into hourly slots. Hours with some but not
/// all four readings present keep the mean of what is present and are flagged
/// partial; hours with none are null.
pub fn resample_to_hourly(facility_id: &str, readings: &[RawReading]) -> Result<EnergySeries> {
    if readings.is_empty() {
        return Err(Error::NoReadings);
    }
    for r in readings {
        if r.timestamp.minute() % 15 != 0 || r.timestamp.second() != 0 {
            return Err(Error::OffGrid {
                timestamp: format_timestamp(r.timestamp),
                grid: "quarter-hour",
            });
        }
    }
    let first = HourIndex::containing(readings[0].timestamp);
    let last = HourIndex::containing(readings[readings.len() - 1].timestamp);
    let len = (last.0 - first.0 + 1) as usize;
    let mut sums = vec![0.0; len];
    let mut counts = vec![0usize; len];
    for r in readings {
        if let Some(v) = r.value {
            let i = (HourIndex::containing(r.timestamp).0 - first.0) as usize;
            sums[i] += v;
            counts[i] += 1;
        }
    }
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let partial = counts.iter().map(|&c| c > 0 && c < 4).collect();
    Ok(EnergySeries {
        facility_id: facility_id.to_string(),
        start: first,
        values,
        partial,
        origin_resolution: Resolution::QuarterHourly,
    })
}

/// Re-slots `series` onto exactly `span`; hours without a reading are null.
pub fn fill_gaps(series: &EnergySeries, span: HourSpan) -> EnergySeries {
    let mut values = Vec::with_capacity(span.len());
    let mut partial = Vec::with_capacity(span.len());
    for h in span.hours() {
        let i = h.0 - series.start.0;
        if i >= 0 && (i as usize) < series.values.len() {
            values.push(series.values[i as usize]);
            partial.push(series.partial[i as usize]);
        } else {
            values.push(None);
            partial.push(false);
        }
    }
    EnergySeries {
        facility_id: series.facility_id.clone(),
        start: span.start,
        values,
        partial,
        origin_resolution: series.origin_resolution,
    }
}

/// Replaces readings above 1.5 × the previous day's maximum with the nearest
/// valid reading.
///
/// Days are processed left to right. The reference for a day is the maximum of
/// the already-repaired values of the most recent earlier day with data; the
/// first such day, and any day whose reference is not positive, is exempt. A
/// candidate replacement is valid when it is non-null and itself within the
/// limit of the day being repaired; at equal distance the earlier one wins.
pub fn repair_outliers(series: &EnergySeries, offset: FixedOffset) -> EnergySeries {
    let original = &series.values;
    let mut repaired = original.clone();
    let mut reference: Option<f64> = None;

    for (_, range) in day_ranges(series.start, original.len(), offset) {
        if let Some(limit) = reference.filter(|r| *r > 0.0).map(|r| OUTLIER_FACTOR * r) {
            for i in range.clone() {
                if matches!(original[i], Some(v) if v > limit) {
                    if let Some(v) = nearest_valid(original, &repaired, i, limit) {
                        repaired[i] = Some(v);
                    }
                }
            }
        }
        if let Some(day_max) = max_of(&repaired[range]) {
            reference = Some(day_max);
        }
    }

    EnergySeries {
        values: repaired,
        ..series.clone()
    }
}

fn nearest_valid(original: &[Option<f64>], repaired: &[Option<f64>], i: usize, limit: f64) -> Option<f64> {
    let ok = |v: Option<f64>| v.filter(|v| *v <= limit);
    for d in 1..original.len() {
        if d <= i {
            if let Some(v) = ok(repaired[i - d]) {
                return Some(v);
            }
        }
        if i + d < original.len() {
            if let Some(v) = ok(original[i + d]) {
                return Some(v);
            }
        }
        if d > i && i + d >= original.len() {
            break;
        }
    }
    None
}

fn max_of(values: &[Option<f64>]) -> Option<f64> {
    values
        .iter()
        .flatten()
        .copied()
        .fold(None, |acc, v| Some(acc.map_or(v, |m: f64| m.max(v))))
}

impl LmeSeries {
    /// Requires one reading per hour with no gaps.
    pub fn from_readings(region_id: &str, readings: &[RawReading]) -> Result<Self> {
        if readings.is_empty() {
            return Err(Error::NoReadings);
        }
        let mut hours = Vec::with_capacity(readings.len());
        for r in readings {
            let h = HourIndex::from_datetime(r.timestamp).ok_or_else(|| Error::OffGrid {
                timestamp: format_timestamp(r.timestamp),
                grid: "hourly",
            })?;
            hours.push(h);
        }
        for pair in hours.windows(2) {
            if pair[1].0 != pair[0].0 + 1 {
                return Err(Error::LmeGap {
                    timestamp: pair[0].offset(1).to_string(),
                });
            }
        }
        let values = readings
            .iter()
            .zip(&hours)
            .map(|(r, h)| {
                r.value.ok_or_else(|| Error::LmeGap {
                    timestamp: h.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(LmeSeries {
            region_id: region_id.to_string(),
            start: hours[0],
            values,
        })
    }

    pub fn span(&self) -> HourSpan {
        HourSpan::with_len(self.start, self.values.len())
    }

    pub fn get(&self, h: HourIndex) -> Option<f64> {
        let i = h.0 - self.start.0;
        (i >= 0).then(|| self.values.get(i as usize).copied()).flatten()
    }
}

/// Merges energy and LME over their common hours.
pub fn align(energy: &EnergySeries, lme: &LmeSeries, offset: FixedOffset) -> Result<FacilityFrame> {
    let span = energy.span().intersect(&lme.span()).ok_or(Error::EmptyIntersection)?;
    let rows = span
        .hours()
        .map(|h| frame_row(h, energy.get(h), lme.get(h).expect("hour inside LME span"), offset))
        .collect();
    Ok(FacilityFrame {
        facility_id: energy.facility_id.clone(),
        region_id: lme.region_id.clone(),
        offset,
        rows,
    })
}

fn frame_row(hour: HourIndex, energy: Option<f64>, lme: f64, offset: FixedOffset) -> FrameRow {
    let local = hour.to_datetime().with_timezone(&offset);
    FrameRow {
        hour,
        energy,
        lme,
        hour_of_day: local.hour(),
        day: local.date_naive(),
        weekday: local.weekday(),
        month: local.month(),
    }
}

impl FacilityFrame {
    /// Builds a frame from parallel hourly vectors starting at `start`.
    pub fn from_columns(
        facility_id: &str,
        region_id: &str,
        start: HourIndex,
        energy: &[Option<f64>],
        lme: &[f64],
        offset: FixedOffset,
    ) -> Result<Self> {
        if energy.len() != lme.len() {
            return Err(Error::Dimension(format!(
                "energy has {} hours, LME has {}",
                energy.len(),
                lme.len()
            )));
        }
        if energy.is_empty() {
            return Err(Error::EmptyIntersection);
        }
        Ok(FacilityFrame {
            facility_id: facility_id.to_string(),
            region_id: region_id.to_string(),
            offset,
            rows: energy
                .iter()
                .zip(lme)
                .enumerate()
                .map(|(i, (&e, &l))| frame_row(start.offset(i as i64), e, l, offset))
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn span(&self) -> HourSpan {
        match self.rows.first() {
            Some(r) => HourSpan::with_len(r.hour, self.rows.len()),
            None => HourSpan::with_len(HourIndex(0), 0),
        }
    }

    /// Restricts the frame to `window`.
    pub fn restrict(&self, window: HourSpan) -> Result<FacilityFrame> {
        let span = self.span().intersect(&window).ok_or(Error::EmptyIntersection)?;
        let skip = (span.start.0 - self.span().start.0) as usize;
        Ok(FacilityFrame {
            rows: self.rows[skip..skip + span.len()].to_vec(),
            ..self.clone()
        })
    }

    /// Contiguous row ranges sharing a local calendar day.
    pub fn days(&self) -> Vec<(NaiveDate, Range<usize>)> {
        let mut out: Vec<(NaiveDate, Range<usize>)> = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            match out.last_mut() {
                Some((d, range)) if *d == row.day => range.end = i + 1,
                _ => out.push((row.day, i..i + 1)),
            }
        }
        out
    }

    pub fn energy(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.energy).collect()
    }

    pub fn lme(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.lme).collect()
    }

    /// Recomputes calendar columns from timestamps.
    pub fn rederive_calendar(&self) -> FacilityFrame {
        FacilityFrame {
            rows: self
                .rows
                .iter()
                .map(|r| frame_row(r.hour, r.energy, r.lme, self.offset))
                .collect(),
            ..self.clone()
        }
    }

    pub fn local_date_of(&self, h: HourIndex) -> NaiveDate {
        local_date(h, self.offset)
    }
}
