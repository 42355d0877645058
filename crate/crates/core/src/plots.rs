//! Static SVG figures and the plot-data CSVs behind them.

use crate::error::{Error, Result};
use crate::output::{fmt_f64, fmt_opt, parse_opt, read_csv, write_bytes, write_csv};
use crate::pipeline::{facility_dir, FacilityAnalysis, FleetReport};
use crate::time::HourIndex;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;

/// Hourly series needed to draw one facility's figures.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub facility_id: String,
    pub hours: Vec<HourIndex>,
    pub hour_of_day: Vec<u32>,
    pub energy: Vec<Option<f64>>,
    pub lme: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl PlotSeries {
    pub fn from_analysis(a: &FacilityAnalysis) -> Self {
        PlotSeries {
            facility_id: a.entry.facility_id.clone(),
            hours: a.frame.rows.iter().map(|r| r.hour).collect(),
            hour_of_day: a.frame.rows.iter().map(|r| r.hour_of_day).collect(),
            energy: a.frame.energy(),
            lme: a.frame.lme(),
            flagged: a.flags.dr_flag.clone(),
        }
    }

    /// Rebuilds the series from a facility's `emissions.csv`.
    pub fn from_emissions_csv(facility_id: &str, path: &Path) -> Result<Self> {
        let (header, rows) = read_csv(path)?;
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Config(format!("{}: missing column {name}", path.display())))
        };
        let (t, hod, e, l, f) = (
            col("timestamp")?,
            col("hour_of_day")?,
            col("energy")?,
            col("lme")?,
            col("dr_flag")?,
        );
        let bad = |what: &str| Error::Config(format!("{}: bad {what}", path.display()));
        let mut s = PlotSeries {
            facility_id: facility_id.into(),
            hours: Vec::new(),
            hour_of_day: Vec::new(),
            energy: Vec::new(),
            lme: Vec::new(),
            flagged: Vec::new(),
        };
        for row in rows {
            let ts = crate::time::parse_timestamp(&row[t], crate::time::utc()).map_err(|_| bad("timestamp"))?;
            s.hours
                .push(HourIndex::from_datetime(ts).ok_or_else(|| bad("timestamp"))?);
            s.hour_of_day.push(row[hod].parse().map_err(|_| bad("hour_of_day"))?);
            s.energy.push(parse_opt(&row[e])?);
            s.lme.push(parse_opt(&row[l])?.ok_or_else(|| bad("lme"))?);
            s.flagged.push(&row[f] == "1");
        }
        Ok(s)
    }
}

struct Axis {
    min: f64,
    max: f64,
}

impl Axis {
    fn over(values: impl Iterator<Item = f64>) -> Axis {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            min = min.min(v);
            max = max.max(v);
        }
        if !min.is_finite() {
            return Axis { min: 0.0, max: 1.0 };
        }
        if max - min < 1e-12 {
            max = min + 1.0;
        }
        Axis { min, max }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.min) / (self.max - self.min) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.min) / (self.max - self.min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg_open(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(points: &[(f64, f64)], colour: &str) -> String {
    let mut s = format!(r#"<polyline fill="none" stroke="{colour}" stroke-width="1" points=""#);
    for (x, y) in points {
        let _ = write!(s, "{x:.1},{y:.1} ");
    }
    s.push_str("\"/>\n");
    s
}

/// Load vs time; flagged hours drawn as red markers.
pub fn load_svg(s: &PlotSeries) -> String {
    let xs = Axis::over(s.hours.iter().map(|h| h.0 as f64));
    let ys = Axis::over(s.energy.iter().flatten().copied().chain([0.0]));
    let mut svg = svg_open(&format!("{}: hourly load", s.facility_id), "hour", "energy (MWh)");
    let mut segment: Vec<(f64, f64)> = Vec::new();
    for (h, e) in s.hours.iter().zip(&s.energy) {
        match e {
            Some(v) => segment.push((xs.x(h.0 as f64), ys.y(*v))),
            None if !segment.is_empty() => svg.push_str(&polyline(&std::mem::take(&mut segment), "#1f77b4")),
            None => {}
        }
    }
    if !segment.is_empty() {
        svg.push_str(&polyline(&segment, "#1f77b4"));
    }
    for ((h, e), f) in s.hours.iter().zip(&s.energy).zip(&s.flagged) {
        if let (Some(v), true) = (e, f) {
            let _ = writeln!(
                svg,
                r##"<circle class="flag" cx="{:.1}" cy="{:.1}" r="1.5" fill="#d62728"/>"##,
                xs.x(h.0 as f64),
                ys.y(*v)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// LME vs time.
pub fn lme_svg(s: &PlotSeries) -> String {
    let xs = Axis::over(s.hours.iter().map(|h| h.0 as f64));
    let ys = Axis::over(s.lme.iter().copied());
    let mut svg = svg_open(
        &format!("{}: marginal emission factor", s.facility_id),
        "hour",
        "LME (t CO2/MWh)",
    );
    let points: Vec<(f64, f64)> = s
        .hours
        .iter()
        .zip(&s.lme)
        .map(|(h, v)| (xs.x(h.0 as f64), ys.y(*v)))
        .collect();
    svg.push_str(&polyline(&points, "#2ca02c"));
    svg.push_str("</svg>\n");
    svg
}

/// Uptime vs avoided emissions with the quadrant cut lines.
pub fn quadrant_svg(report: &FleetReport) -> String {
    let points: Vec<(&str, f64, f64)> = report
        .facilities
        .iter()
        .map(|f| (f.facility_id.as_str(), f.metrics.uptime_pct, f.metrics.avoided))
        .collect();
    let cuts = report
        .quadrants
        .assignments
        .first()
        .map(|a| (a.uptime_cut, a.avoided_cut));
    let xs = Axis::over(points.iter().map(|p| p.1).chain(cuts.map(|c| c.0)));
    let ys = Axis::over(points.iter().map(|p| p.2).chain(cuts.map(|c| c.1)));
    let mut svg = svg_open("Uptime vs avoided emissions", "uptime (%)", "avoided emissions (t CO2)");
    if let Some((ux, ay)) = cuts {
        let _ = writeln!(
            svg,
            r##"<line class="cut" x1="{x:.1}" y1="{MARGIN}" x2="{x:.1}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
            HEIGHT - MARGIN,
            x = xs.x(ux)
        );
        let _ = writeln!(
            svg,
            r##"<line class="cut" x1="{MARGIN}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#999" stroke-dasharray="4 3"/>"##,
            WIDTH - MARGIN,
            y = ys.y(ay)
        );
    }
    for (id, u, a) in &points {
        let (x, y) = (xs.x(*u), ys.y(*a));
        let _ = writeln!(
            svg,
            r##"<circle class="point" cx="{x:.1}" cy="{y:.1}" r="4" fill="#ff7f0e"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
            x + 5.0,
            y - 5.0,
            escape(id)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `plots/` for the fleet: SVGs plus the CSVs they were drawn from.
pub fn emit_plots(out: &Path, report: &FleetReport, series: &[PlotSeries]) -> Result<()> {
    let dir = out.join("plots");
    for s in series {
        write_csv(
            &dir.join(format!("{}_series.csv", s.facility_id)),
            &["timestamp", "hour_of_day", "energy", "lme", "flagged"],
            (0..s.hours.len()).map(|i| {
                vec![
                    s.hours[i].to_string(),
                    s.hour_of_day[i].to_string(),
                    fmt_opt(s.energy[i]),
                    fmt_f64(s.lme[i]),
                    u8::from(s.flagged[i]).to_string(),
                ]
            }),
        )?;
        write_bytes(&dir.join(format!("{}_load.svg", s.facility_id)), load_svg(s).as_bytes())?;
        write_bytes(&dir.join(format!("{}_lme.svg", s.facility_id)), lme_svg(s).as_bytes())?;
    }
    let labels: std::collections::HashMap<&str, String> = report
        .quadrants
        .assignments
        .iter()
        .map(|a| (a.facility_id.as_str(), a.label()))
        .collect();
    let cuts = report
        .quadrants
        .assignments
        .first()
        .map(|a| (a.uptime_cut, a.avoided_cut));
    write_csv(
        &dir.join("quadrants.csv"),
        &[
            "facility_id",
            "uptime_pct",
            "avoided",
            "uptime_cut",
            "avoided_cut",
            "label",
        ],
        report.facilities.iter().map(|f| {
            vec![
                f.facility_id.clone(),
                fmt_f64(f.metrics.uptime_pct),
                fmt_f64(f.metrics.avoided),
                fmt_opt(cuts.map(|c| c.0)),
                fmt_opt(cuts.map(|c| c.1)),
                labels.get(f.facility_id.as_str()).cloned().unwrap_or_default(),
            ]
        }),
    )?;
    write_bytes(&dir.join("quadrants.svg"), quadrant_svg(report).as_bytes())
}

/// Rebuilds plot series for every facility of a finished run.
pub fn load_series(out: &Path, report: &FleetReport) -> Result<Vec<PlotSeries>> {
    report
        .facilities
        .iter()
        .map(|f| {
            PlotSeries::from_emissions_csv(&f.facility_id, &facility_dir(out, &f.facility_id).join("emissions.csv"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(flagged: Vec<bool>) -> PlotSeries {
        let n = flagged.len();
        PlotSeries {
            facility_id: "F".into(),
            hours: (0..n as i64).map(|i| HourIndex(465_000 + i)).collect(),
            hour_of_day: (0..n as u32).map(|i| i % 24).collect(),
            energy: (0..n).map(|i| Some(if flagged[i] { 1.0 } else { 10.0 })).collect(),
            lme: vec![0.5; n],
            flagged,
        }
    }

    #[test]
    fn markers_follow_flags() {
        assert_eq!(load_svg(&series(vec![false; 48])).matches("class=\"flag\"").count(), 0);
        let mut f = vec![false; 48];
        f[14..21].iter_mut().for_each(|x| *x = true);
        assert_eq!(load_svg(&series(f)).matches("class=\"flag\"").count(), 7);
    }

    #[test]
    fn null_hours_break_the_line() {
        let mut s = series(vec![false; 10]);
        s.energy[5] = None;
        assert_eq!(load_svg(&s).matches("<polyline").count(), 2);
    }
}
