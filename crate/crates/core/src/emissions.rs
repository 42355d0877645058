//! Avoided and induced marginal emissions.
//!
//! Avoided emissions for a curtailed hour are the gap between the day's mean
//! non-curtailed consumption and the hour's actual consumption, priced at the
//! hour's LME. Induced emissions are actual consumption priced at LME over
//! every hour with data.

use crate::detect::DrFlags;
use crate::error::{Error, Result};
use crate::ingest::FacilityFrame;
use crate::time::HourIndex;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineSource {
    MeanOfUnflagged,
    DailyMaxFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyBaseline {
    pub day: NaiveDate,
    pub baseline: f64,
    pub source: BaselineSource,
}

/// Per-day counterfactual consumption. Days without data have no entry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineProfile {
    pub days: Vec<DailyBaseline>,
    /// Baseline for each frame row (`None` on days without data).
    pub per_hour: Vec<Option<f64>>,
}

impl BaselineProfile {
    pub fn fallback_days(&self) -> usize {
        self.days
            .iter()
            .filter(|d| d.source == BaselineSource::DailyMaxFallback)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionTotals {
    pub avoided: f64,
    pub induced: f64,
    /// `A_id` per frame row; zero for unflagged hours.
    pub avoided_per_hour: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionRow {
    pub hour: HourIndex,
    pub energy: Option<f64>,
    pub lme: f64,
    pub flagged: bool,
    pub baseline: Option<f64>,
    pub avoided: f64,
}

/// Baseline for the day at `day_index` in `flags.days`: the mean of the day's
/// non-null unflagged hours, or the day's maximum when every non-null hour is
/// flagged.
pub fn daily_baseline(frame: &FacilityFrame, flags: &DrFlags, day_index: usize) -> Result<DailyBaseline> {
    let day = &flags.days[day_index];
    let max = day.max_energy.ok_or_else(|| Error::NullDay(day.day.to_string()))?;
    let (sum, count) = day
        .rows
        .clone()
        .filter(|&i| !flags.dr_flag[i])
        .filter_map(|i| frame.rows[i].energy)
        .fold((0.0, 0usize), |(s, c), e| (s + e, c + 1));
    Ok(if count > 0 {
        DailyBaseline {
            day: day.day,
            baseline: sum / count as f64,
            source: BaselineSource::MeanOfUnflagged,
        }
    } else {
        DailyBaseline {
            day: day.day,
            baseline: max,
            source: BaselineSource::DailyMaxFallback,
        }
    })
}

pub fn baselines(frame: &FacilityFrame, flags: &DrFlags) -> BaselineProfile {
    let mut profile = BaselineProfile {
        days: Vec::new(),
        per_hour: vec![None; frame.len()],
    };
    for (i, day) in flags.days.iter().enumerate() {
        if let Ok(b) = daily_baseline(frame, flags, i) {
            for row in day.rows.clone() {
                profile.per_hour[row] = Some(b.baseline);
            }
            profile.days.push(b);
        }
    }
    profile
}

/// `(baseline − e) × lmef` for a flagged hour, zero otherwise. Negative
/// results are kept.
pub fn avoided_hour(energy: f64, baseline: f64, lmef: f64, flagged: bool) -> f64 {
    if flagged {
        (baseline - energy) * lmef
    } else {
        0.0
    }
}

/// Per-hour avoided emissions for every frame row.
pub fn avoided_per_hour(frame: &FacilityFrame, flags: &DrFlags, baselines: &BaselineProfile) -> Vec<f64> {
    frame
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| match (row.energy, baselines.per_hour[i]) {
            (Some(e), Some(b)) => avoided_hour(e, b, row.lme, flags.dr_flag[i]),
            _ => 0.0,
        })
        .collect()
}

pub fn total_avoided(frame: &FacilityFrame, flags: &DrFlags, baselines: &BaselineProfile) -> f64 {
    avoided_per_hour(frame, flags, baselines).iter().sum()
}

/// Σ e × lme over every hour with non-null energy.
pub fn induced_emissions(frame: &FacilityFrame) -> f64 {
    frame.rows.iter().filter_map(|r| r.energy.map(|e| e * r.lme)).sum()
}

pub fn totals(frame: &FacilityFrame, flags: &DrFlags, baselines: &BaselineProfile) -> EmissionTotals {
    let avoided_per_hour = avoided_per_hour(frame, flags, baselines);
    EmissionTotals {
        avoided: avoided_per_hour.iter().sum(),
        induced: induced_emissions(frame),
        avoided_per_hour,
    }
}

pub fn emission_rows(
    frame: &FacilityFrame,
    flags: &DrFlags,
    baselines: &BaselineProfile,
    totals: &EmissionTotals,
) -> Vec<EmissionRow> {
    frame
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| EmissionRow {
            hour: r.hour,
            energy: r.energy,
            lme: r.lme,
            flagged: flags.dr_flag[i],
            baseline: baselines.per_hour[i],
            avoided: totals.avoided_per_hour[i],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::flag_hours;
    use crate::time::utc;

    fn frame(energy: &[Option<f64>], lme: &[f64]) -> FacilityFrame {
        FacilityFrame::from_columns("f", "r", HourIndex(465_000), energy, lme, utc()).unwrap()
    }

    #[test]
    fn baseline_is_mean_of_unflagged() {
        let mut e: Vec<Option<f64>> = vec![Some(1.0); 24];
        e[0] = Some(100.0);
        e[1] = Some(98.0);
        e[2] = Some(102.0);
        let f = frame(&e, &[0.5; 24]);
        let flags = flag_hours(&f, 0.9).unwrap();
        let b = daily_baseline(&f, &flags, 0).unwrap();
        assert_eq!(b.baseline, 100.0);
        assert_eq!(b.source, BaselineSource::MeanOfUnflagged);
    }

    #[test]
    fn all_flagged_day_falls_back_to_max() {
        let f = frame(&[Some(95.0); 24], &[0.5; 24]);
        let mut flags = flag_hours(&f, 0.9).unwrap();
        flags.dr_flag = vec![true; 24];
        let b = daily_baseline(&f, &flags, 0).unwrap();
        assert_eq!((b.baseline, b.source), (95.0, BaselineSource::DailyMaxFallback));
    }

    #[test]
    fn nulls_excluded_from_baseline() {
        let mut e: Vec<Option<f64>> = vec![Some(1.0); 24];
        e[0] = Some(100.0);
        e[1] = None;
        e[2] = Some(90.0);
        let f = frame(&e, &[0.5; 24]);
        let flags = flag_hours(&f, 0.85).unwrap();
        assert_eq!(daily_baseline(&f, &flags, 0).unwrap().baseline, 95.0);
    }

    #[test]
    fn null_day_is_an_error() {
        let f = frame(&[None; 24], &[0.5; 24]);
        let flags = flag_hours(&f, 0.9).unwrap();
        assert!(matches!(daily_baseline(&f, &flags, 0), Err(Error::NullDay(_))));
        assert!(baselines(&f, &flags).days.is_empty());
    }

    #[test]
    fn avoided_hour_cases() {
        assert_eq!(avoided_hour(40.0, 100.0, 0.5, true), 30.0);
        assert_eq!(avoided_hour(100.0, 100.0, 0.5, true), 0.0);
        assert!((avoided_hour(40.0, 100.0, -0.1, true) - -6.0).abs() < 1e-12);
        assert_eq!(avoided_hour(40.0, 100.0, 0.5, false), 0.0);
    }

    #[test]
    fn total_avoided_one_day() {
        let mut e = vec![Some(100.0); 24];
        e[10] = Some(40.0);
        e[11] = Some(60.0);
        let mut lme = vec![0.3; 24];
        lme[10] = 0.5;
        lme[11] = 0.25;
        let f = frame(&e, &lme);
        let flags = flag_hours(&f, 0.9).unwrap();
        let b = baselines(&f, &flags);
        assert_eq!(total_avoided(&f, &flags, &b), 40.0);

        let none = frame(&[Some(100.0); 24], &lme);
        let flags = flag_hours(&none, 0.9).unwrap();
        assert_eq!(total_avoided(&none, &flags, &baselines(&none, &flags)), 0.0);
    }

    #[test]
    fn induced_cases() {
        assert_eq!(induced_emissions(&frame(&[Some(0.0); 5], &[0.4; 5])), 0.0);
        assert!((induced_emissions(&frame(&[Some(10.0), Some(10.0)], &[0.4, 0.6])) - 10.0).abs() < 1e-12);
        assert_eq!(induced_emissions(&frame(&[None, Some(2.0)], &[9.0, 0.5])), 1.0);
        // ~128 MWh steady load at LME ~0.4 over the study window
        let f = frame(&vec![Some(125.0); 2208], &vec![0.4; 2208]);
        let i = induced_emissions(&f);
        assert!(i > 5e4 && i < 5e5, "{i}");
    }
}
