//! Human-readable markdown report. Numbers here are display-rounded; the
//! CSV/JSON artifacts carry full precision.

use crate::analysis::{Level, RegressionFit, StepAction};
use crate::pipeline::{FacilitySummary, FleetReport};
use std::fmt::Write as _;

const MAX_LISTED_EVENTS: usize = 20;

fn num(v: f64, decimals: usize) -> String {
    if v.is_finite() {
        format!("{v:.decimals$}")
    } else {
        "n/a".into()
    }
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "n/a".into(), |v| num(v, decimals))
}

fn sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return num(v, 0);
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-3..6).contains(&mag) {
        format!("{v:.3e}")
    } else {
        num(v, (3 - mag).max(0) as usize)
    }
}

pub fn render(report: &FleetReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Fleet curtailment and emissions report\n");
    let _ = writeln!(
        s,
        "Window: {} to {} ({} h). Threshold mode: {}. Quadrant mode: {}. Facilities: {}.\n",
        report.window_start,
        report.window_end,
        report.window_hours,
        report.threshold_mode,
        report.quadrants.mode,
        report.facilities.len()
    );
    metrics_table(&mut s, report);
    regression_section(&mut s, report);
    quadrant_section(&mut s, report);
    let _ = writeln!(s, "## Facilities\n");
    for f in &report.facilities {
        facility_block(&mut s, f);
    }
    s
}

fn metrics_table(s: &mut String, report: &FleetReport) {
    let _ = writeln!(s, "## Metrics\n");
    let _ = writeln!(
        s,
        "| Facility | Region | Threshold | Uptime (%) | Avoided (t) | Induced (t) | ME (MWh) | NAE (t/MWh) | ER | LMEV | CR (h) | CM (%) | r |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|---|---|");
    for f in &report.facilities {
        let m = &f.metrics;
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            f.facility_id,
            f.region_id,
            num(f.threshold, 2),
            num(m.uptime_pct, 2),
            num(m.avoided, 2),
            num(m.induced, 2),
            num(m.me, 2),
            opt(m.nae, 2),
            m.er.map_or_else(|| "n/a".into(), sig),
            opt(m.lmev, 3),
            opt(m.cr, 2),
            opt(m.cm, 2),
            opt(m.pearson_r, 3),
        );
    }
    s.push('\n');
}

fn fit_table(s: &mut String, title: &str, fit: &RegressionFit) {
    let _ = writeln!(
        s,
        "### {title}\n\nn = {}, R² = {}, adjusted R² = {}\n",
        fit.n,
        num(fit.r_squared, 3),
        num(fit.adj_r_squared, 3)
    );
    let _ = writeln!(s, "| Term | β | SE | t | p |\n|---|---|---|---|---|");
    for c in &fit.coefficients {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            c.name,
            sig(c.estimate),
            sig(c.std_error),
            num(c.t_stat, 2),
            num(c.p_value, 3)
        );
    }
    s.push('\n');
}

fn regression_section(s: &mut String, report: &FleetReport) {
    let r = &report.regression;
    let _ = writeln!(s, "## Regression of {} emissions\n", r.response);
    if let Some(notice) = &r.notice {
        let _ = writeln!(s, "Notice: {notice}\n");
    }
    if !r.excluded_candidates.is_empty() {
        let _ = writeln!(
            s,
            "Candidates without a value for every facility were left out: {}.\n",
            r.excluded_candidates.join(", ")
        );
    }
    if let Some(fit) = &r.baseline {
        fit_table(s, "Baseline model", fit);
    }
    if let Some(fit) = &r.stepwise {
        fit_table(s, "Stepwise model", fit);
        let _ = writeln!(s, "Stepwise trace:\n");
        if r.trace.steps.is_empty() {
            let _ = writeln!(s, "- no changes to the baseline model");
        }
        for step in &r.trace.steps {
            let action = match step.action {
                StepAction::Add => "add",
                StepAction::Remove => "remove",
                StepAction::Skip => "skip",
            };
            let detail = match (step.p_value, &step.note) {
                (Some(p), _) => format!(" (p = {}, adjusted R² = {})", num(p, 4), opt(step.adj_r_squared, 3)),
                (None, Some(note)) => format!(" ({note})"),
                (None, None) => String::new(),
            };
            let _ = writeln!(s, "- {action} {}{detail}", step.variable);
        }
        s.push('\n');
    }
}

fn quadrant_section(s: &mut String, report: &FleetReport) {
    let q = &report.quadrants;
    let _ = writeln!(s, "## Performance quadrants\n");
    if let Some(notice) = &q.notice {
        let _ = writeln!(s, "Notice: {notice}\n");
        return;
    }
    if let Some(a) = q.assignments.first() {
        let _ = writeln!(
            s,
            "Cuts ({}): uptime {} %, avoided emissions {} t.\n",
            q.mode,
            num(a.uptime_cut, 2),
            num(a.avoided_cut, 2)
        );
    }
    for (u, a) in [
        (Level::High, Level::High),
        (Level::High, Level::Low),
        (Level::Low, Level::High),
        (Level::Low, Level::Low),
    ] {
        let members: Vec<&str> = q
            .assignments
            .iter()
            .filter(|x| x.uptime == u && x.avoided == a)
            .map(|x| x.facility_id.as_str())
            .collect();
        let _ = writeln!(
            s,
            "- {u} Uptime & {a} Avoided Emissions ({}): {}",
            members.len(),
            if members.is_empty() {
                "none".into()
            } else {
                members.join(", ")
            }
        );
    }
    s.push('\n');
}

fn facility_block(s: &mut String, f: &FacilitySummary) {
    let m = &f.metrics;
    let _ = writeln!(s, "### {} ({})\n", f.facility_id, f.region_id);
    let _ = writeln!(
        s,
        "Threshold {} ({:?}{}). {} of {} valid hours flagged; {} events; {} outlier hours repaired; {} days used the daily-maximum baseline.\n",
        num(f.threshold, 2),
        f.selection_mode,
        f.threshold_warning.as_deref().map(|w| format!(": {w}")).unwrap_or_default(),
        f.flagged_hours,
        f.valid_hours,
        f.events.len(),
        f.repaired_hours,
        f.baseline_fallback_days
    );
    let _ = writeln!(
        s,
        "| Uptime (%) | Avoided (t) | Induced (t) | ME (MWh) | NAE (t/MWh) |\n|---|---|---|---|---|"
    );
    let _ = writeln!(
        s,
        "| {} | {} | {} | {} | {} |\n",
        num(m.uptime_pct, 2),
        num(m.avoided, 2),
        num(m.induced, 2),
        num(m.me, 2),
        opt(m.nae, 2)
    );
    let _ = writeln!(s, "| LMEV | CR (h) | CM (%) | ER | Threshold |\n|---|---|---|---|---|");
    let _ = writeln!(
        s,
        "| {} | {} | {} | {} | {} |\n",
        opt(m.lmev, 3),
        opt(m.cr, 2),
        opt(m.cm, 2),
        m.er.map_or_else(|| "n/a".into(), sig),
        num(f.threshold, 2)
    );
    if let Some(r) = m.pearson_r {
        let direction = if r < 0.0 { "less" } else { "more" };
        let _ = writeln!(
            s,
            "Load and LME correlate at r = {}: the facility tends to draw {direction} power when marginal emissions are high.\n",
            num(r, 3)
        );
    }
    if !f.events.is_empty() {
        let longest = f.events.iter().map(|e| e.duration_hours).max().unwrap_or(0);
        let _ = writeln!(s, "Longest event: {longest} h.\n");
        let _ = writeln!(
            s,
            "| Start | End | Hours | Min (MWh) | Mean (MWh) |\n|---|---|---|---|---|"
        );
        for e in f.events.iter().take(MAX_LISTED_EVENTS) {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} |",
                e.start,
                e.end,
                e.duration_hours,
                num(e.min_energy, 2),
                num(e.mean_energy, 2)
            );
        }
        if f.events.len() > MAX_LISTED_EVENTS {
            let _ = writeln!(s, "\n{} more events in events.csv.", f.events.len() - MAX_LISTED_EVENTS);
        }
        s.push('\n');
    }
}
