//! End-to-end fleet analysis: ingest → repair → detect → emissions →
//! metrics → regression and quadrants, plus the artifact tree it writes.

use crate::analysis::{
    ols_fit, quadrant_classify, stepwise_select, Level, QuadrantAssignment, QuadrantMode, RegressionFit, StepwiseTrace,
    ALPHA,
};
use crate::detect::{
    default_grid, extract_events, fixed_threshold, flag_hours, fleet_threshold, knee_threshold, CurtailmentEvent,
    DrFlags, SelectionMode, ThresholdProfile,
};
use crate::emissions::{baselines, totals, BaselineProfile, EmissionTotals};
use crate::error::{Error, Result};
use crate::ingest::{align, parse_series, repair_outliers, EnergySeries, FacilityFrame, LmeSeries, SeriesKind};
use crate::manifest::{FacilityEntry, Manifest, RunConfig, ThresholdMode};
use crate::metrics::{facility_metrics, FacilityMetrics};
use crate::output::{self, fmt_f64, fmt_opt, parse_opt, write_csv, write_json};
use crate::time::HourSpan;
use crate::{plots, report};
use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const RESPONSE: &str = "avoided";
pub const BASELINE_TERMS: [&str; 1] = ["uptime_pct"];
pub const CANDIDATES: [&str; 5] = ["cm", "cr", "me", "lmev", "induced"];

/// A facility after ingest, repair and alignment.
#[derive(Debug, Clone)]
pub struct LoadedFacility {
    pub entry: FacilityEntry,
    pub frame: FacilityFrame,
    pub repaired_hours: usize,
    pub partial_hours: usize,
}

/// Every per-facility intermediate of one run.
#[derive(Debug, Clone)]
pub struct FacilityAnalysis {
    pub entry: FacilityEntry,
    pub frame: FacilityFrame,
    pub repaired_hours: usize,
    pub partial_hours: usize,
    pub threshold: ThresholdProfile,
    pub flags: DrFlags,
    pub events: Vec<CurtailmentEvent>,
    pub baselines: BaselineProfile,
    pub totals: EmissionTotals,
    pub metrics: FacilityMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilitySummary {
    pub facility_id: String,
    pub region_id: String,
    pub timezone: String,
    pub hours: usize,
    pub valid_hours: usize,
    pub flagged_hours: usize,
    pub repaired_hours: usize,
    pub partial_hours: usize,
    pub threshold: f64,
    pub selection_mode: SelectionMode,
    pub threshold_warning: Option<String>,
    pub baseline_fallback_days: usize,
    pub excluded_days: Vec<NaiveDate>,
    pub metrics: FacilityMetrics,
    pub events: Vec<CurtailmentEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub response: String,
    pub baseline_terms: Vec<String>,
    pub candidates: Vec<String>,
    /// Candidates left out because some facility has no value for them.
    pub excluded_candidates: Vec<String>,
    pub n: usize,
    pub baseline: Option<RegressionFit>,
    pub stepwise: Option<RegressionFit>,
    pub trace: StepwiseTrace,
    pub notice: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantReport {
    pub mode: QuadrantMode,
    pub assignments: Vec<QuadrantAssignment>,
    pub notice: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetReport {
    pub window_start: String,
    pub window_end: String,
    pub window_hours: usize,
    pub threshold_mode: String,
    pub seed: u64,
    pub facilities: Vec<FacilitySummary>,
    pub regression: RegressionReport,
    pub quadrants: QuadrantReport,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads, repairs and aligns one facility's energy and LME files.
pub fn load_facility(manifest: &Manifest, entry: &FacilityEntry) -> Result<LoadedFacility> {
    let id = entry.facility_id.as_str();
    let offset = entry.offset()?;
    let ingest = |e: Error| e.at_stage(id, "ingest");

    let energy_bytes = read(&manifest.resolve(&entry.energy)).map_err(ingest)?;
    let readings = parse_series(&energy_bytes, SeriesKind::Energy, offset).map_err(ingest)?;
    let energy = EnergySeries::from_readings(id, &readings).map_err(ingest)?;
    let partial_hours = energy.partial.iter().filter(|p| **p).count();

    let repaired = repair_outliers(&energy, offset);
    let repaired_hours = energy
        .values
        .iter()
        .zip(&repaired.values)
        .filter(|(a, b)| a != b)
        .count();
    if let Some(cap) = entry.capacity_mw {
        repaired.check_capacity(cap).map_err(|e| e.at_stage(id, "repair"))?;
    }

    let lme_bytes = read(&manifest.resolve(&entry.lme)).map_err(ingest)?;
    let lme_readings = parse_series(&lme_bytes, SeriesKind::Lme, offset).map_err(ingest)?;
    let lme = LmeSeries::from_readings(&entry.region, &lme_readings).map_err(ingest)?;
    let frame = align(&repaired, &lme, offset).map_err(|e| e.at_stage(id, "align"))?;
    Ok(LoadedFacility {
        entry: entry.clone(),
        frame,
        repaired_hours,
        partial_hours,
    })
}

/// The explicit window, or the span every facility covers.
pub fn resolve_window(config: &RunConfig, loaded: &[LoadedFacility]) -> Result<HourSpan> {
    if let Some(span) = config.window.span() {
        return Ok(span);
    }
    let mut spans = loaded.iter().map(|f| f.frame.span());
    let first = spans.next().ok_or(Error::NoFacilities)?;
    spans.try_fold(first, |acc, s| acc.intersect(&s).ok_or(Error::EmptyIntersection))
}

/// Detection, emissions and metrics for one facility at a chosen threshold.
pub fn analyze_facility(loaded: LoadedFacility, threshold: ThresholdProfile) -> Result<FacilityAnalysis> {
    let id = loaded.entry.facility_id.clone();
    let frame = loaded.frame;
    let flags = flag_hours(&frame, threshold.chosen_threshold).map_err(|e| e.at_stage(&id, "detect"))?;
    let events = extract_events(&frame, &flags);
    let baselines = baselines(&frame, &flags);
    let totals = totals(&frame, &flags, &baselines);
    let metrics = facility_metrics(&frame, &flags, &events, totals.avoided, totals.induced)
        .map_err(|e| e.at_stage(&id, "metrics"))?;
    Ok(FacilityAnalysis {
        entry: loaded.entry,
        frame,
        repaired_hours: loaded.repaired_hours,
        partial_hours: loaded.partial_hours,
        threshold,
        flags,
        events,
        baselines,
        totals,
        metrics,
    })
}

/// Baseline regression of avoided emissions on uptime, then stepwise
/// selection over the engineered metrics.
pub fn run_regression(rows: &[(String, FacilityMetrics)]) -> RegressionReport {
    let n = rows.len();
    let column = |name: &str| -> Option<Vec<f64>> { rows.iter().map(|(_, m)| m.get(name)).collect() };
    let mut report = RegressionReport {
        response: RESPONSE.into(),
        baseline_terms: BASELINE_TERMS.iter().map(|s| s.to_string()).collect(),
        candidates: Vec::new(),
        excluded_candidates: Vec::new(),
        n,
        baseline: None,
        stepwise: None,
        trace: StepwiseTrace::default(),
        notice: None,
    };
    let y = column(RESPONSE).expect("avoided always present");
    let mut columns: Vec<(String, Vec<f64>)> = BASELINE_TERMS
        .iter()
        .map(|b| (b.to_string(), column(b).expect("uptime always present")))
        .collect();
    for c in CANDIDATES {
        match column(c) {
            Some(values) => {
                report.candidates.push(c.into());
                columns.push((c.into(), values));
            }
            None => report.excluded_candidates.push(c.into()),
        }
    }

    let base_cols: Vec<(&str, &[f64])> = columns[..BASELINE_TERMS.len()]
        .iter()
        .map(|(n, v)| (n.as_str(), v.as_slice()))
        .collect();
    match ols_fit(RESPONSE, &base_cols, &y) {
        Ok(fit) => report.baseline = Some(fit),
        Err(e) => {
            report.notice = Some(format!("regression skipped: {e} with {n} facilities"));
            return report;
        }
    }
    match stepwise_select(RESPONSE, &columns, &y, &BASELINE_TERMS, ALPHA) {
        Ok((fit, trace)) => {
            report.stepwise = Some(fit);
            report.trace = trace;
        }
        Err(e) => report.notice = Some(format!("stepwise selection skipped: {e}")),
    }
    report
}

pub fn run_quadrants(rows: &[(String, FacilityMetrics)], mode: QuadrantMode) -> QuadrantReport {
    let fleet: Vec<(String, f64, f64)> = rows
        .iter()
        .map(|(id, m)| (id.clone(), m.uptime_pct, m.avoided))
        .collect();
    match quadrant_classify(&fleet, mode) {
        Ok(assignments) => QuadrantReport {
            mode,
            assignments,
            notice: None,
        },
        Err(e) => QuadrantReport {
            mode,
            assignments: Vec::new(),
            notice: Some(format!("quadrants skipped: {e}")),
        },
    }
}

fn summarize(f: &FacilityAnalysis) -> FacilitySummary {
    FacilitySummary {
        facility_id: f.entry.facility_id.clone(),
        region_id: f.entry.region.clone(),
        timezone: f.entry.timezone.clone(),
        hours: f.frame.len(),
        valid_hours: f.flags.valid_hours(),
        flagged_hours: f.flags.flagged_hours(),
        repaired_hours: f.repaired_hours,
        partial_hours: f.partial_hours,
        threshold: f.threshold.chosen_threshold,
        selection_mode: f.threshold.selection_mode,
        threshold_warning: f.threshold.warning.clone(),
        baseline_fallback_days: f.baselines.fallback_days(),
        excluded_days: f.flags.excluded_days.clone(),
        metrics: f.metrics.clone(),
        events: f.events.clone(),
    }
}

/// Runs the in-memory part of the pipeline; writes nothing.
pub fn analyze(config: &RunConfig) -> Result<(FleetReport, Vec<FacilityAnalysis>)> {
    let manifest = Manifest::load(&config.manifest)?;
    if manifest.facilities.is_empty() {
        return Err(Error::NoFacilities);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    pool.install(|| analyze_in_pool(config, &manifest))
}

fn analyze_in_pool(config: &RunConfig, manifest: &Manifest) -> Result<(FleetReport, Vec<FacilityAnalysis>)> {
    let mut entries = manifest.facilities.clone();
    entries.sort_by(|a, b| a.facility_id.cmp(&b.facility_id));

    let loaded = entries
        .par_iter()
        .map(|e| load_facility(manifest, e))
        .collect::<Result<Vec<_>>>()?;
    let window = resolve_window(config, &loaded)?;
    let loaded = loaded
        .into_iter()
        .map(|mut f| {
            f.frame = f
                .frame
                .restrict(window)
                .map_err(|e| e.at_stage(&f.entry.facility_id, "window"))?;
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;

    let grid = default_grid();
    let profiles: Vec<ThresholdProfile> = match config.threshold {
        ThresholdMode::Kneedle => loaded
            .par_iter()
            .map(|f| knee_threshold(&f.frame, &grid).map_err(|e| e.at_stage(&f.entry.facility_id, "detect")))
            .collect::<Result<_>>()?,
        ThresholdMode::Fixed(v) => loaded
            .par_iter()
            .map(|f| fixed_threshold(&f.frame, &grid, v).map_err(|e| e.at_stage(&f.entry.facility_id, "detect")))
            .collect::<Result<_>>()?,
        ThresholdMode::Fleet => {
            let frames: Vec<FacilityFrame> = loaded.iter().map(|f| f.frame.clone()).collect();
            fleet_threshold(&frames, &grid)?
        }
    };

    let analyses = loaded
        .into_par_iter()
        .zip(profiles)
        .map(|(f, p)| analyze_facility(f, p))
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<(String, FacilityMetrics)> = analyses
        .iter()
        .map(|a| (a.entry.facility_id.clone(), a.metrics.clone()))
        .collect();
    let report = FleetReport {
        window_start: window.start.to_string(),
        window_end: window.end.to_string(),
        window_hours: window.len(),
        threshold_mode: config.threshold.to_string(),
        seed: config.seed,
        facilities: analyses.iter().map(summarize).collect(),
        regression: run_regression(&rows),
        quadrants: run_quadrants(&rows, config.quadrant),
    };
    check_report(&report, &analyses)?;
    Ok((report, analyses))
}

fn check_report(report: &FleetReport, analyses: &[FacilityAnalysis]) -> Result<()> {
    for (s, a) in report.facilities.iter().zip(analyses) {
        let sum: f64 = a.totals.avoided_per_hour.iter().sum();
        if sum != s.metrics.avoided || s.flagged_hours > s.valid_hours || !(0.0..=100.0).contains(&s.metrics.uptime_pct)
        {
            return Err(Error::Invariant(format!(
                "{}: inconsistent facility summary",
                s.facility_id
            )));
        }
    }
    Ok(())
}

/// Runs the full pipeline and writes every artifact under `config.out`.
pub fn run_analyze(config: &RunConfig) -> Result<FleetReport> {
    let (report, analyses) = analyze(config)?;
    let out = config.out.as_path();
    output::ensure_dir(out)?;
    analyses
        .par_iter()
        .map(|a| write_facility(out, a))
        .collect::<Result<Vec<()>>>()?;
    let rows: Vec<(String, String, FacilityMetrics)> = analyses
        .iter()
        .map(|a| (a.entry.facility_id.clone(), a.entry.region.clone(), a.metrics.clone()))
        .collect();
    write_metrics(&out.join("metrics.csv"), &rows)?;
    write_json(&out.join("regression.json"), &report.regression)?;
    write_quadrants(&out.join("quadrants.csv"), &report.quadrants)?;
    write_json(&out.join("summary.json"), &report)?;
    let series: Vec<plots::PlotSeries> = analyses.iter().map(plots::PlotSeries::from_analysis).collect();
    plots::emit_plots(out, &report, &series)?;
    output::write_bytes(&out.join("report.md"), report::render(&report).as_bytes())?;
    Ok(report)
}

pub fn facility_dir(out: &Path, id: &str) -> std::path::PathBuf {
    out.join("facilities").join(id)
}

pub const EMISSIONS_HEADER: [&str; 8] = [
    "timestamp",
    "hour_of_day",
    "energy",
    "lme",
    "dr_flag",
    "dr_active",
    "baseline",
    "avoided",
];

fn write_facility(out: &Path, a: &FacilityAnalysis) -> Result<()> {
    let dir = facility_dir(out, &a.entry.facility_id);
    let t = &a.threshold;
    write_csv(
        &dir.join("thresholds.csv"),
        &["threshold", "dr_percent", "chosen"],
        t.sweep_grid
            .iter()
            .zip(&t.dr_percent_at)
            .map(|(x, y)| vec![fmt_f64(*x), fmt_f64(*y), (*x == t.chosen_threshold).to_string()]),
    )?;
    write_csv(
        &dir.join("events.csv"),
        &["start", "end", "duration_hours", "min_energy", "mean_energy"],
        a.events.iter().map(|e| {
            vec![
                e.start.to_string(),
                e.end.to_string(),
                e.duration_hours.to_string(),
                fmt_f64(e.min_energy),
                fmt_f64(e.mean_energy),
            ]
        }),
    )?;
    write_csv(
        &dir.join("baselines.csv"),
        &["day", "baseline", "source"],
        a.baselines.days.iter().map(|d| {
            let source = serde_json::to_value(d.source)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string));
            vec![d.day.to_string(), fmt_f64(d.baseline), source.unwrap_or_default()]
        }),
    )?;
    write_csv(
        &dir.join("emissions.csv"),
        &EMISSIONS_HEADER,
        a.frame.rows.iter().enumerate().map(|(i, r)| {
            vec![
                r.hour.to_string(),
                r.hour_of_day.to_string(),
                fmt_opt(r.energy),
                fmt_f64(r.lme),
                u8::from(a.flags.dr_flag[i]).to_string(),
                u8::from(a.flags.dr_active[i]).to_string(),
                fmt_opt(a.baselines.per_hour[i]),
                fmt_f64(a.totals.avoided_per_hour[i]),
            ]
        }),
    )
}

pub fn write_metrics(path: &Path, rows: &[(String, String, FacilityMetrics)]) -> Result<()> {
    let mut header = vec!["facility_id", "region_id"];
    header.extend(FacilityMetrics::COLUMNS);
    write_csv(
        path,
        &header,
        rows.iter().map(|(id, region, m)| {
            let mut row = vec![id.clone(), region.clone()];
            row.extend(m.values().iter().map(|v| fmt_opt(*v)));
            row
        }),
    )
}

/// Reads `metrics.csv` back into `(facility_id, region_id, metrics)` rows.
pub fn read_metrics(path: &Path) -> Result<Vec<(String, String, FacilityMetrics)>> {
    let (header, rows) = output::read_csv(path)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column {name}", path.display())))
    };
    let id_col = col("facility_id")?;
    let region_col = col("region_id")?;
    let cols = FacilityMetrics::COLUMNS.map(col);
    let mut out = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut v = [None; 10];
        for (slot, c) in v.iter_mut().zip(&cols) {
            *slot = parse_opt(&row[*c.as_ref().map_err(|e| Error::Config(e.to_string()))?])?;
        }
        let need = |x: Option<f64>, name: &str| {
            x.ok_or_else(|| Error::Config(format!("{}: {} has no {name}", path.display(), row[id_col])))
        };
        let m = FacilityMetrics {
            uptime_pct: need(v[0], "uptime_pct")?,
            cm: v[1],
            cr: v[2],
            me: need(v[3], "me")?,
            nae: v[4],
            er: v[5],
            lmev: v[6],
            avoided: need(v[7], "avoided")?,
            induced: need(v[8], "induced")?,
            pearson_r: v[9],
        };
        out.push((row[id_col].clone(), row[region_col].clone(), m));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

pub fn write_quadrants(path: &Path, q: &QuadrantReport) -> Result<()> {
    write_csv(
        path,
        &[
            "facility_id",
            "uptime_level",
            "avoided_level",
            "uptime_cut",
            "avoided_cut",
            "mode",
            "label",
        ],
        q.assignments.iter().map(|a| {
            vec![
                a.facility_id.clone(),
                a.uptime.to_string(),
                a.avoided.to_string(),
                fmt_f64(a.uptime_cut),
                fmt_f64(a.avoided_cut),
                a.mode.to_string(),
                a.label(),
            ]
        }),
    )
}

/// Reads `quadrants.csv` back into a quadrant report.
pub fn read_quadrants(path: &Path, mode: QuadrantMode) -> Result<QuadrantReport> {
    let (_, rows) = output::read_csv(path)?;
    let bad = |what: &str| Error::Config(format!("{}: bad {what}", path.display()));
    let level = |s: &str| match s {
        "High" => Ok(Level::High),
        "Low" => Ok(Level::Low),
        _ => Err(bad("level")),
    };
    let assignments = rows
        .iter()
        .map(|r| {
            if r.len() < 6 {
                return Err(bad("row"));
            }
            Ok(QuadrantAssignment {
                facility_id: r[0].clone(),
                uptime: level(&r[1])?,
                avoided: level(&r[2])?,
                uptime_cut: parse_opt(&r[3])?.ok_or_else(|| bad("uptime_cut"))?,
                avoided_cut: parse_opt(&r[4])?.ok_or_else(|| bad("avoided_cut"))?,
                mode: r[5].parse().map_err(|e: String| Error::Config(e))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mode = assignments.first().map_or(mode, |a| a.mode);
    Ok(QuadrantReport {
        mode,
        notice: assignments
            .is_empty()
            .then(|| "quadrants skipped: fewer than 2 facilities".to_string()),
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(uptime: f64, avoided: f64, me: f64) -> FacilityMetrics {
        FacilityMetrics {
            uptime_pct: uptime,
            cm: Some(50.0),
            cr: None,
            me,
            nae: Some(avoided / me),
            er: None,
            lmev: Some(0.2),
            avoided,
            induced: 10.0 * me,
            pearson_r: None,
        }
    }

    #[test]
    fn regression_needs_enough_facilities() {
        let rows = vec![("A".to_string(), metrics(90.0, 10.0, 5.0))];
        let r = run_regression(&rows);
        assert!(r.baseline.is_none());
        assert!(r.notice.as_deref().unwrap().contains("regression skipped"));
        let q = run_quadrants(&rows, QuadrantMode::Mean);
        assert!(q.assignments.is_empty() && q.notice.is_some());
    }

    #[test]
    fn null_candidates_are_excluded() {
        let rows: Vec<_> = (0..8)
            .map(|i| {
                (
                    format!("F{i}"),
                    metrics(
                        80.0 + i as f64,
                        100.0 - 3.0 * i as f64 + (i % 3) as f64,
                        5.0 + (i * i % 5) as f64,
                    ),
                )
            })
            .collect();
        let r = run_regression(&rows);
        assert_eq!(r.excluded_candidates, vec!["cr".to_string()]);
        assert!(r.baseline.is_some());
        assert!(r.notice.is_none(), "{:?}", r.notice);
    }
}
