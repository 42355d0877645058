use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn flexlens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flexlens"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = flexlens(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| {
            header
                .iter()
                .map(String::from)
                .zip(r.unwrap().iter().map(String::from))
                .collect()
        })
        .collect()
}

fn num(s: &str) -> Option<f64> {
    (!s.is_empty()).then(|| s.parse().unwrap())
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

/// Synthesises a fleet from an inline spec and analyses it.
fn run_spec(spec: &str, extra: &[&str]) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("fleet.toml");
    std::fs::write(&spec_path, spec).unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--spec", p(&spec_path), "--out", p(&data)]);
    let manifest = data.join("manifest.toml");
    let out = dir.path().join("out");
    let mut args = vec!["analyze", "--manifest", p(&manifest), "--out", p(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    dir
}

const SCHEDULED: &str = r#"
[fleet]
start = "2023-07-01"
days = 14
seed = 11

[[grid]]
region_id = "GA"
lme_mean = 0.45
diurnal_amplitude = 0.12
noise = 0.03

[[facility]]
facility_id = "F18"
region_id = "GA"
base_load = 5.91
curtail_depth = 0.99
noise = 0.005
schedule = { kind = "daily-window", start_hour = 14, end_hour = 21 }

[[facility]]
facility_id = "FLAT"
region_id = "GA"
base_load = 40.0
curtail_depth = 0.0
noise = 0.01
schedule = { kind = "none" }
"#;

#[test]
fn empty_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.toml");
    std::fs::write(&manifest, "").unwrap();
    let out = flexlens(&[
        "analyze",
        "--manifest",
        p(&manifest),
        "--out",
        p(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no facilities"));
}

#[test]
fn bad_arguments_are_rejected() {
    let out = flexlens(&[
        "analyze",
        "--manifest",
        "m.toml",
        "--out",
        "o",
        "--threshold-mode",
        "fixed:1.5",
    ]);
    assert!(!out.status.success());
    let out = flexlens(&[
        "analyze",
        "--manifest",
        "m.toml",
        "--out",
        "o",
        "--window",
        "2023-09-01..2023-07-01",
    ]);
    assert!(!out.status.success());
}

#[test]
fn single_facility_runs_with_notices() {
    let spec = SCHEDULED.split("[[facility]]\nfacility_id = \"FLAT\"").next().unwrap();
    let dir = run_spec(spec, &[]);
    let out = dir.path().join("out");
    let regression: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("regression.json")).unwrap()).unwrap();
    assert!(regression["notice"].as_str().unwrap().contains("regression skipped"));
    let s = summary(&out);
    assert!(s["quadrants"]["notice"].is_string());
    assert_eq!(s["facilities"].as_array().unwrap().len(), 1);
    assert!(std::fs::read_to_string(out.join("report.md"))
        .unwrap()
        .contains("Notice: regression skipped"));
}

#[test]
fn scheduled_window_is_flagged_contiguously() {
    let dir = run_spec(SCHEDULED, &[]);
    let out = dir.path().join("out");
    let rows = read_csv(&out.join("plots").join("F18_series.csv"));
    assert_eq!(rows.len(), 14 * 24);
    for r in &rows {
        let hour: u32 = r["hour_of_day"].parse().unwrap();
        assert_eq!(r["flagged"] == "1", (14..21).contains(&hour), "{r:?}");
    }
    let svg = std::fs::read_to_string(out.join("plots").join("F18_load.svg")).unwrap();
    assert_eq!(svg.matches("class=\"flag\"").count(), 14 * 7);

    let s = summary(&out);
    let f18 = &s["facilities"][0];
    assert_eq!(f18["facility_id"], "F18");
    assert_eq!(f18["events"].as_array().unwrap().len(), 14);
    assert_eq!(f18["metrics"]["cr"].as_f64(), Some(0.0));
}

#[test]
fn facility_without_events_has_no_markers() {
    let dir = run_spec(SCHEDULED, &[]);
    let out = dir.path().join("out");
    let svg = std::fs::read_to_string(out.join("plots").join("FLAT_load.svg")).unwrap();
    assert_eq!(svg.matches("class=\"flag\"").count(), 0);
    let rows = read_csv(&out.join("facilities").join("FLAT").join("events.csv"));
    assert!(rows.is_empty());
    let s = summary(&out);
    assert_eq!(s["facilities"][1]["metrics"]["uptime_pct"].as_f64(), Some(100.0));
    assert!(s["facilities"][1]["metrics"]["cr"].is_null());
}

#[test]
fn synth_analyze_and_stage_commands() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    ok(&["synth", "--seed", "3", "--out", p(&data)]);
    assert!(data.join("truth.json").is_file());
    ok(&[
        "analyze",
        "--manifest",
        p(&data.join("manifest.toml")),
        "--out",
        p(&out),
        "--jobs",
        "2",
    ]);
    for f in [
        "metrics.csv",
        "regression.json",
        "quadrants.csv",
        "summary.json",
        "report.md",
        "plots/quadrants.svg",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    for f in ["thresholds.csv", "events.csv", "baselines.csv", "emissions.csv"] {
        assert!(out.join("facilities").join("F01").join(f).is_file(), "missing {f}");
    }

    let svg = std::fs::read_to_string(out.join("plots").join("quadrants.svg")).unwrap();
    assert_eq!(svg.matches("class=\"point\"").count(), 21);

    let summary_before = std::fs::read(out.join("summary.json")).unwrap();
    let report_before = std::fs::read(out.join("report.md")).unwrap();
    ok(&["report", "--out", p(&out)]);
    assert_eq!(std::fs::read(out.join("summary.json")).unwrap(), summary_before);
    assert_eq!(std::fs::read(out.join("report.md")).unwrap(), report_before);

    let regression_before = std::fs::read(out.join("regression.json")).unwrap();
    ok(&["regress", "--out", p(&out)]);
    assert_eq!(std::fs::read(out.join("regression.json")).unwrap(), regression_before);

    ok(&["classify", "--quadrant-mode", "p75", "--out", p(&out)]);
    let quadrants = read_csv(&out.join("quadrants.csv"));
    assert_eq!(quadrants.len(), 21);
    assert!(quadrants.iter().all(|q| q["mode"] == "p75"));

    ok(&["report", "--out", p(&out)]);
    let s = summary(&out);
    assert_eq!(s["quadrants"]["mode"], "p75");
    assert!(std::fs::read_to_string(out.join("report.md"))
        .unwrap()
        .contains("Quadrant mode: p75"));
}

#[test]
fn summary_closes_over_stage_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    ok(&["synth", "--seed", "8", "--out", p(&data)]);
    ok(&[
        "analyze",
        "--manifest",
        p(&data.join("manifest.toml")),
        "--out",
        p(&out),
    ]);
    let s = summary(&out);
    let metrics = read_csv(&out.join("metrics.csv"));
    for (f, row) in s["facilities"].as_array().unwrap().iter().zip(&metrics) {
        let id = f["facility_id"].as_str().unwrap();
        assert_eq!(row["facility_id"], id);
        let m = &f["metrics"];
        for col in [
            "uptime_pct",
            "cm",
            "cr",
            "me",
            "nae",
            "er",
            "lmev",
            "avoided",
            "induced",
            "pearson_r",
        ] {
            assert_eq!(num(&row[col]), m[col].as_f64(), "{id} {col}");
        }

        let emissions = read_csv(&out.join("facilities").join(id).join("emissions.csv"));
        let (mut avoided, mut induced, mut valid, mut flagged) = (0.0, 0.0, 0usize, 0usize);
        for r in &emissions {
            avoided += num(&r["avoided"]).unwrap();
            if let Some(e) = num(&r["energy"]) {
                induced += e * num(&r["lme"]).unwrap();
                valid += 1;
                flagged += usize::from(r["dr_flag"] == "1");
            }
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        assert!(close(avoided, m["avoided"].as_f64().unwrap()), "{id} avoided");
        assert!(close(induced, m["induced"].as_f64().unwrap()), "{id} induced");
        let uptime = 100.0 * (valid - flagged) as f64 / valid as f64;
        assert!(close(uptime, m["uptime_pct"].as_f64().unwrap()), "{id} uptime");
        assert_eq!(f["flagged_hours"].as_u64(), Some(flagged as u64));
    }
}
