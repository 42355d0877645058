//! Curtailment threshold selection, hourly flagging and event extraction.

use crate::error::{Error, Result};
use crate::ingest::FacilityFrame;
use crate::time::HourIndex;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Fleet-default threshold used when no knee can be found.
pub const DEFAULT_THRESHOLD: f64 = 0.90;
/// Kneedle sensitivity `S`.
pub const KNEEDLE_SENSITIVITY: f64 = 1.0;

/// Sweep grid `0.50, 0.51, …, 1.00`.
pub fn default_grid() -> Vec<f64> {
    (50..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Per-facility knee of the sweep curve.
    Kneedle,
    /// Knee of the fleet-mean sweep curve, shared by every facility.
    Fleet,
    /// Threshold supplied by the caller.
    Fixed,
    /// No knee found; [`DEFAULT_THRESHOLD`] used.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdProfile {
    pub facility_id: String,
    pub sweep_grid: Vec<f64>,
    pub dr_percent_at: Vec<f64>,
    pub chosen_threshold: f64,
    pub selection_mode: SelectionMode,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayMax {
    pub day: NaiveDate,
    pub rows: Range<usize>,
    /// `None` for a day without any non-null hour.
    pub max_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrFlags {
    pub threshold: f64,
    pub dr_flag: Vec<bool>,
    pub dr_active: Vec<bool>,
    /// Hours with non-null energy.
    pub valid: Vec<bool>,
    pub days: Vec<DayMax>,
    pub excluded_days: Vec<NaiveDate>,
}

impl DrFlags {
    pub fn valid_hours(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn flagged_hours(&self) -> usize {
        self.dr_flag.iter().filter(|v| **v).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurtailmentEvent {
    pub start: HourIndex,
    /// Last flagged hour (inclusive).
    pub end: HourIndex,
    pub duration_hours: usize,
    pub min_energy: f64,
    pub mean_energy: f64,
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold.is_finite() && threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(threshold))
    }
}

/// Flags every hour whose energy is strictly below `threshold` × that day's
/// maximum. Null hours are never flagged; days without data are excluded.
pub fn flag_hours(frame: &FacilityFrame, threshold: f64) -> Result<DrFlags> {
    check_threshold(threshold)?;
    let n = frame.len();
    let mut dr_flag = vec![false; n];
    let valid: Vec<bool> = frame.rows.iter().map(|r| r.energy.is_some()).collect();
    let mut days = Vec::new();
    let mut excluded_days = Vec::new();

    for (day, rows) in frame.days() {
        let max_energy = frame.rows[rows.clone()]
            .iter()
            .filter_map(|r| r.energy)
            .fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.max(e))));
        match max_energy {
            Some(max) => {
                let cut = threshold * max;
                for i in rows.clone() {
                    if let Some(e) = frame.rows[i].energy {
                        dr_flag[i] = e < cut;
                    }
                }
            }
            None => excluded_days.push(day),
        }
        days.push(DayMax { day, rows, max_energy });
    }

    let mut dr_active = vec![false; n];
    for run in flagged_runs(&dr_flag) {
        dr_active[run].iter_mut().for_each(|a| *a = true);
    }

    Ok(DrFlags {
        threshold,
        dr_flag,
        dr_active,
        valid,
        days,
        excluded_days,
    })
}

/// Maximal runs of consecutive `true` values. A run's first hour follows an
/// unflagged hour (or the series start) and its last precedes one.
fn flagged_runs(flags: &[bool]) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..flags.len());
    }
    runs
}

/// Turns flagged runs into events. Runs may cross midnight; a null hour
/// always ends a run because null hours are never flagged.
pub fn extract_events(frame: &FacilityFrame, flags: &DrFlags) -> Vec<CurtailmentEvent> {
    flagged_runs(&flags.dr_flag)
        .into_iter()
        .map(|run| {
            let energies: Vec<f64> = frame.rows[run.clone()]
                .iter()
                .map(|r| r.energy.expect("flagged hours have energy"))
                .collect();
            CurtailmentEvent {
                start: frame.rows[run.start].hour,
                end: frame.rows[run.end - 1].hour,
                duration_hours: run.len(),
                min_energy: energies.iter().copied().fold(f64::INFINITY, f64::min),
                mean_energy: energies.iter().sum::<f64>() / energies.len() as f64,
            }
        })
        .collect()
}

/// Fraction of valid hours flagged at `threshold`.
pub fn dr_percent(frame: &FacilityFrame, threshold: f64) -> Result<f64> {
    let flags = flag_hours(frame, threshold)?;
    let valid = flags.valid_hours();
    if valid == 0 {
        return Err(Error::NoValidHours);
    }
    Ok(flags.flagged_hours() as f64 / valid as f64)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 5 {
        return Err(Error::InvalidGrid(format!(
            "need at least 5 points, got {}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if (lo - 0.5).abs() > 1e-12 || (hi - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidGrid(format!(
            "grid must span [0.5, 1.0], got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Sweep curve: `dr_percent` at every grid point.
pub fn sweep(frame: &FacilityFrame, grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(grid)?;
    grid.iter().map(|&t| dr_percent(frame, t)).collect()
}

/// Kneedle knee of an increasing concave curve.
///
/// Both axes are min-max normalised and the difference curve is
/// `y_norm - x_norm`. Returns the interior index maximising it, provided the
/// maximum exceeds `sensitivity` × the mean normalised x spacing.
pub fn kneedle_knee(x: &[f64], y: &[f64], sensitivity: f64) -> Option<usize> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    let (x0, x1) = (x[0], x[n - 1]);
    let (y_min, y_max) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(x1 > x0) || !(y_max > y_min) {
        return None;
    }
    let diff: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - y_min) / (y_max - y_min) - (xi - x0) / (x1 - x0))
        .collect();
    let margin = sensitivity / (n - 1) as f64;
    let mut best: Option<usize> = None;
    for i in 1..n - 1 {
        if best.is_none_or(|b| diff[i] > diff[b]) {
            best = Some(i);
        }
    }
    best.filter(|&i| diff[i] > margin)
}

fn choose(
    facility_id: &str,
    grid: &[f64],
    curve: Vec<f64>,
    knee: Option<usize>,
    mode: SelectionMode,
) -> ThresholdProfile {
    let (chosen_threshold, selection_mode, warning) = match knee {
        Some(i) => (grid[i], mode, None),
        None => {
            let msg = format!("{facility_id}: no knee in the threshold sweep; using default {DEFAULT_THRESHOLD}");
            log::warn!("{msg}");
            (DEFAULT_THRESHOLD, SelectionMode::Fallback, Some(msg))
        }
    };
    ThresholdProfile {
        facility_id: facility_id.to_string(),
        sweep_grid: grid.to_vec(),
        dr_percent_at: curve,
        chosen_threshold,
        selection_mode,
        warning,
    }
}

/// Per-facility threshold from the knee of the sweep curve.
pub fn knee_threshold(frame: &FacilityFrame, grid: &[f64]) -> Result<ThresholdProfile> {
    let curve = sweep(frame, grid)?;
    let knee = kneedle_knee(grid, &curve, KNEEDLE_SENSITIVITY);
    Ok(choose(&frame.facility_id, grid, curve, knee, SelectionMode::Kneedle))
}

/// Sweep curve recorded, threshold fixed by the caller.
pub fn fixed_threshold(frame: &FacilityFrame, grid: &[f64], threshold: f64) -> Result<ThresholdProfile> {
    check_threshold(threshold)?;
    let curve = sweep(frame, grid)?;
    Ok(ThresholdProfile {
        facility_id: frame.facility_id.clone(),
        sweep_grid: grid.to_vec(),
        dr_percent_at: curve,
        chosen_threshold: threshold,
        selection_mode: SelectionMode::Fixed,
        warning: None,
    })
}

/// One knee for the whole fleet, taken from the mean sweep curve.
pub fn fleet_threshold(frames: &[FacilityFrame], grid: &[f64]) -> Result<Vec<ThresholdProfile>> {
    if frames.is_empty() {
        return Err(Error::NoFacilities);
    }
    let curves = frames.iter().map(|f| sweep(f, grid)).collect::<Result<Vec<_>>>()?;
    let mean: Vec<f64> = (0..grid.len())
        .map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64)
        .collect();
    let knee = kneedle_knee(grid, &mean, KNEEDLE_SENSITIVITY);
    Ok(frames
        .iter()
        .zip(curves)
        .map(|(f, c)| choose(&f.facility_id, grid, c, knee, SelectionMode::Fleet))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::utc;

    fn frame(energy: &[Option<f64>]) -> FacilityFrame {
        FacilityFrame::from_columns("f", "r", HourIndex(465_000), energy, &vec![0.5; energy.len()], utc()).unwrap()
    }

    fn some(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().map(|&x| Some(x)).collect()
    }

    #[test]
    fn constant_day_has_no_flags() {
        let f = frame(&some(&[100.0; 24]));
        let flags = flag_hours(&f, 0.9).unwrap();
        assert_eq!(flags.flagged_hours(), 0);
        assert!(extract_events(&f, &flags).is_empty());
    }

    #[test]
    fn deep_hours_flagged() {
        let mut day = vec![100.0; 24];
        for e in &mut day[14..18] {
            *e = 40.0;
        }
        let f = frame(&some(&day));
        let flags = flag_hours(&f, 0.9).unwrap();
        let flagged: Vec<usize> = (0..24).filter(|&i| flags.dr_flag[i]).collect();
        assert_eq!(flagged, vec![14, 15, 16, 17]);
        assert_eq!(flags.dr_active, flags.dr_flag);
    }

    #[test]
    fn strict_boundary() {
        let mut day = vec![100.0; 24];
        day[1] = 95.0;
        day[2] = 89.0;
        day[3] = 90.0;
        let flags = flag_hours(&frame(&some(&day)), 0.9).unwrap();
        let flagged: Vec<usize> = (0..24).filter(|&i| flags.dr_flag[i]).collect();
        assert_eq!(flagged, vec![2]);
    }

    #[test]
    fn threshold_domain() {
        let f = frame(&some(&[1.0; 24]));
        assert!(flag_hours(&f, 0.0).is_err());
        assert!(flag_hours(&f, 1.01).is_err());
        assert!(flag_hours(&f, f64::NAN).is_err());
        assert!(flag_hours(&f, 1.0).is_ok());
    }

    #[test]
    fn null_day_excluded_and_null_hours_unflagged() {
        let mut e = some(&[100.0; 24]);
        e[3] = None;
        e.extend(vec![None; 24]);
        let f = frame(&e);
        let flags = flag_hours(&f, 0.9).unwrap();
        assert_eq!(flags.excluded_days.len(), 1);
        assert!(!flags.dr_flag[3]);
        assert_eq!(flags.valid_hours(), 23);
    }

    #[test]
    fn run_length_events() {
        let e = some(&[100.0, 10.0, 12.0, 14.0, 100.0]);
        let f = frame(&e);
        let flags = flag_hours(&f, 0.9).unwrap();
        let events = extract_events(&f, &flags);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].duration_hours, 3);
        assert_eq!(events[0].start, f.rows[1].hour);
        assert_eq!(events[0].end, f.rows[3].hour);
        assert_eq!(events[0].min_energy, 10.0);
        assert_eq!(events[0].mean_energy, 12.0);
    }

    #[test]
    fn event_crosses_midnight() {
        let mut e = vec![100.0; 48];
        for i in [22, 23, 24, 25] {
            e[i] = 5.0;
        }
        let f = frame(&some(&e));
        assert_eq!(f.days().len(), 2);
        let events = extract_events(&f, &flag_hours(&f, 0.9).unwrap());
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].duration_hours, 4);
        assert_eq!(events[0].start, f.rows[22].hour);
    }

    #[test]
    fn null_hour_splits_event() {
        let mut e = some(&[100.0; 24]);
        e[5] = Some(1.0);
        e[6] = None;
        e[7] = Some(1.0);
        let f = frame(&e);
        assert_eq!(extract_events(&f, &flag_hours(&f, 0.9).unwrap()).len(), 2);
    }

    #[test]
    fn dr_percent_values() {
        let f = frame(&some(&[100.0; 24]));
        assert_eq!(dr_percent(&f, 0.9).unwrap(), 0.0);
        // every hour of every day below its own max is impossible; use a
        // frame where each day has one high hour and an all-flagged rest
        let mut e = vec![10.0; 2208];
        for d in 0..92 {
            e[d * 24] = 100.0;
            for h in 1..7 {
                e[d * 24 + h] = 95.0;
            }
        }
        let f = frame(&some(&e));
        // 17 low hours per day
        assert!((dr_percent(&f, 0.9).unwrap() - 17.0 * 92.0 / 2208.0).abs() < 1e-15);
        let mut e = vec![100.0; 2208];
        for d in 0..92 {
            for h in 0..6 {
                e[d * 24 + 10 + h] = 1.0;
            }
        }
        assert_eq!(dr_percent(&frame(&some(&e)), 0.9).unwrap(), 0.25);
        assert!(matches!(
            dr_percent(&frame(&vec![None; 24]), 0.9),
            Err(Error::NoValidHours)
        ));
    }

    /// Brute-force difference-curve maximiser, written independently of
    /// `kneedle_knee`.
    fn brute_knee(x: &[f64], y: &[f64]) -> usize {
        let n = x.len();
        let ymin = y.iter().cloned().fold(f64::MAX, f64::min);
        let ymax = y.iter().cloned().fold(f64::MIN, f64::max);
        let mut best = (f64::MIN, 0);
        for i in 1..n - 1 {
            let d = (y[i] - ymin) / (ymax - ymin) - (x[i] - x[0]) / (x[n - 1] - x[0]);
            if d > best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    #[test]
    fn bimodal_knee_sits_in_the_valley() {
        // full power 100, curtailed to 70 for 8 h/day
        let mut e = vec![100.0; 24 * 10];
        for d in 0..10 {
            for h in 12..20 {
                e[d * 24 + h] = 70.0;
            }
        }
        let f = frame(&some(&e));
        let grid = default_grid();
        let profile = knee_threshold(&f, &grid).unwrap();
        let knee = brute_knee(&grid, &profile.dr_percent_at);
        assert_eq!(profile.selection_mode, SelectionMode::Kneedle);
        assert_eq!(profile.chosen_threshold, grid[knee]);
        assert_eq!(profile.chosen_threshold, 0.71);
        assert!(profile.dr_percent_at.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn linear_curve_falls_back() {
        let x = default_grid();
        let y: Vec<f64> = x.iter().map(|t| 2.0 * t - 1.0).collect();
        assert_eq!(kneedle_knee(&x, &y, 1.0), None);
        let flat = vec![0.3; x.len()];
        assert_eq!(kneedle_knee(&x, &flat, 1.0), None);
    }

    #[test]
    fn deep_curtailment_without_knee_uses_default() {
        let mut e = vec![100.0; 24 * 5];
        for d in 0..5 {
            for h in 14..21 {
                e[d * 24 + h] = 1.0;
            }
        }
        let p = knee_threshold(&frame(&some(&e)), &default_grid()).unwrap();
        assert_eq!(p.selection_mode, SelectionMode::Fallback);
        assert_eq!(p.chosen_threshold, DEFAULT_THRESHOLD);
        assert!(p.warning.is_some());
    }

    #[test]
    fn concave_knee_matches_brute_force() {
        let x: Vec<f64> = (0..=20).map(|i| 0.5 + i as f64 * 0.025).collect();
        let y: Vec<f64> = x.iter().map(|t| 1.0 - (-(t - 0.5) * 12.0).exp()).collect();
        let k = kneedle_knee(&x, &y, 1.0).unwrap();
        assert_eq!(k, brute_knee(&x, &y));
    }

    #[test]
    fn grid_validation() {
        let f = frame(&some(&[1.0; 24]));
        assert!(knee_threshold(&f, &[0.5, 0.75, 1.0]).is_err());
        assert!(knee_threshold(&f, &[0.6, 0.7, 0.8, 0.9, 1.0]).is_err());
        assert!(knee_threshold(&f, &[0.5, 0.6, 0.6, 0.9, 1.0]).is_err());
        assert!(knee_threshold(&f, &[0.5, 0.6, 0.7, 0.9, 1.0]).is_ok());
    }

    #[test]
    fn fixed_and_fleet_modes() {
        let f = frame(&some(&[100.0; 48]));
        let p = fixed_threshold(&f, &default_grid(), 0.8).unwrap();
        assert_eq!((p.chosen_threshold, p.selection_mode), (0.8, SelectionMode::Fixed));
        assert!(fixed_threshold(&f, &default_grid(), 1.5).is_err());

        let mut e = vec![100.0; 240];
        for d in 0..10 {
            for h in 12..20 {
                e[d * 24 + h] = 70.0;
            }
        }
        let frames = vec![frame(&some(&e)), frame(&some(&e))];
        let ps = fleet_threshold(&frames, &default_grid()).unwrap();
        assert!(ps
            .iter()
            .all(|p| p.chosen_threshold == 0.71 && p.selection_mode == SelectionMode::Fleet));
    }
}
