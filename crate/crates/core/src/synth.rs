//! Labelled synthetic fleets: LME grids, facility loads with known
//! curtailment schedules, and the ground-truth counterfactual emissions they
//! imply.

use crate::error::{Error, Result};
use crate::ingest::{EnergySeries, LmeSeries, Resolution};
use crate::manifest::{FacilityEntry, Manifest};
use crate::metrics::sample_std;
use crate::output::{fmt_opt, write_bytes, write_csv, write_json};
use crate::time::{day_ranges, utc, HourIndex, HourSpan};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub region_id: String,
    /// Mean LME, tons CO₂/MWh.
    pub lme_mean: f64,
    /// Amplitude of the daily cosine, tons CO₂/MWh.
    #[serde(default)]
    pub diurnal_amplitude: f64,
    /// Hour of day (UTC) at which the daily cosine peaks.
    #[serde(default = "default_peak_hour")]
    pub peak_hour: f64,
    /// Per-hour probability of switching between the low and high regime.
    #[serde(default)]
    pub regime_switch_prob: f64,
    /// LME added while in the high regime (gas→coal style step).
    #[serde(default)]
    pub regime_step: f64,
    /// Per-hour probability of a negative LME hour.
    #[serde(default)]
    pub negative_hour_prob: f64,
    /// Standard deviation of additive Gaussian noise.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_peak_hour() -> f64 {
    18.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    /// Never curtails.
    None,
    /// Curtails every day over `[start_hour, end_hour)` (UTC); wraps past
    /// midnight when `end_hour <= start_hour`.
    DailyWindow { start_hour: u32, end_hour: u32 },
    /// Curtails whenever LME exceeds its own `percentile` (LME as a price proxy).
    PriceResponsive { percentile: f64 },
    /// One event of `hours` starting at `start_hour` on day `day` of the span.
    Single { day: u32, start_hour: u32, hours: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilitySpec {
    pub facility_id: String,
    pub region_id: String,
    /// Full-power hourly energy, MWh.
    pub base_load: f64,
    /// Fraction of load shed while curtailed.
    pub curtail_depth: f64,
    pub schedule: Schedule,
    /// σ (hours) of the per-day shift applied to daily windows.
    #[serde(default)]
    pub schedule_jitter: f64,
    /// Relative σ of multiplicative Gaussian metering noise.
    #[serde(default)]
    pub noise: f64,
    /// Linear drift of the baseline over the span, as a fraction of base load.
    #[serde(default)]
    pub ramp: f64,
    #[serde(default)]
    pub capacity_mw: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueEvent {
    pub start: HourIndex,
    /// Last curtailed hour (inclusive).
    pub end: HourIndex,
    pub hours: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub facility_id: String,
    pub events: Vec<TrueEvent>,
    pub curtailed: Vec<bool>,
    /// Noise-free counterfactual consumption per hour.
    pub baseline: Vec<f64>,
    /// Σ over curtailed hours of (baseline − realised load) × LME.
    pub avoided: f64,
}

/// SplitMix64 step; derives independent per-item seeds from a fleet seed.
pub fn derive_seed(fleet_seed: u64, index: u64) -> u64 {
    let mut z = fleet_seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("regime_switch_prob", self.regime_switch_prob),
            ("negative_hour_prob", self.negative_hour_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{}: {name} must be in [0, 1]", self.region_id)));
            }
        }
        if self.noise < 0.0 || self.diurnal_amplitude < 0.0 {
            return Err(Error::Config(format!(
                "{}: noise and amplitude must be >= 0",
                self.region_id
            )));
        }
        Ok(())
    }
}

/// Generates an hourly LME series and its realised sample standard deviation.
///
/// Each hour is `mean + amplitude·cos(2π(h − peak)/24) + regime step + noise`;
/// negative hours replace that value with a draw from `[−mean/4, 0)`.
pub fn gen_lme(grid: &GridSpec, span: HourSpan) -> Result<(LmeSeries, f64)> {
    grid.validate()?;
    if span.len() < 48 {
        return Err(Error::TooFewValues {
            needed: 48,
            got: span.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed.unwrap_or(0));
    let mut high_regime = false;
    let values: Vec<f64> = span
        .hours()
        .map(|h| {
            let switch: f64 = rng.random();
            let negative: f64 = rng.random();
            let z: f64 = rng.sample(StandardNormal);
            if switch < grid.regime_switch_prob {
                high_regime = !high_regime;
            }
            if negative < grid.negative_hour_prob {
                return -0.25 * grid.lme_mean.abs() * (1.0 - negative / grid.negative_hour_prob);
            }
            let hour_of_day = h.0.rem_euclid(24) as f64;
            let phase = 2.0 * std::f64::consts::PI * (hour_of_day - grid.peak_hour) / 24.0;
            let regime = if high_regime { grid.regime_step } else { 0.0 };
            grid.lme_mean + grid.diurnal_amplitude * phase.cos() + regime + grid.noise * z
        })
        .collect();
    let lmev = sample_std(&values).unwrap_or(0.0);
    Ok((
        LmeSeries {
            region_id: grid.region_id.clone(),
            start: span.start,
            values,
        },
        lmev,
    ))
}

impl FacilitySpec {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("{}: {msg}", self.facility_id)));
        if !(0.0..=1.0).contains(&self.curtail_depth) {
            return bad("curtail_depth must be in [0, 1]");
        }
        if self.noise < 0.0 || self.schedule_jitter < 0.0 {
            return bad("noise and schedule_jitter must be >= 0");
        }
        if !(self.base_load >= 0.0) {
            return bad("base_load must be >= 0");
        }
        match self.schedule {
            Schedule::DailyWindow { start_hour, end_hour } if start_hour > 23 || end_hour > 24 => {
                bad("window hours out of range")
            }
            Schedule::PriceResponsive { percentile } if !(0.0..=1.0).contains(&percentile) => {
                bad("percentile must be in [0, 1]")
            }
            Schedule::Single { start_hour, .. } if start_hour > 23 => bad("start_hour out of range"),
            _ => Ok(()),
        }
    }
}

fn mark(curtailed: &mut [bool], start: i64, len: i64) {
    for i in start.max(0)..(start + len).min(curtailed.len() as i64) {
        curtailed[i as usize] = true;
    }
}

fn schedule_mask(spec: &FacilitySpec, lme: &LmeSeries, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let n = lme.values.len();
    let mut curtailed = vec![false; n];
    let days: Vec<(NaiveDate, std::ops::Range<usize>)> = day_ranges(lme.start, n, utc());
    match spec.schedule {
        Schedule::None => {}
        Schedule::DailyWindow { start_hour, end_hour } => {
            let len = if end_hour > start_hour {
                end_hour - start_hour
            } else {
                end_hour + 24 - start_hour
            } as i64;
            for (_, range) in &days {
                let z: f64 = rng.sample(StandardNormal);
                let shift = (spec.schedule_jitter * z).round() as i64;
                // hour 0 of this UTC day, even when the span starts mid-day
                let midnight = range.start as i64 - lme.start.offset(range.start as i64).0.rem_euclid(24);
                mark(&mut curtailed, midnight + start_hour as i64 + shift, len);
            }
        }
        Schedule::PriceResponsive { percentile } => {
            let cut = crate::analysis::quadrant::quantile(&lme.values, percentile);
            for (c, v) in curtailed.iter_mut().zip(&lme.values) {
                *c = *v > cut;
            }
        }
        Schedule::Single { day, start_hour, hours } => {
            if let Some((_, range)) = days.get(day as usize) {
                let midnight = range.start as i64 - lme.start.offset(range.start as i64).0.rem_euclid(24);
                mark(&mut curtailed, midnight + start_hour as i64, hours as i64);
            }
        }
    }
    curtailed
}

fn true_events(start: HourIndex, curtailed: &[bool]) -> Vec<TrueEvent> {
    let mut events = Vec::new();
    let mut run: Option<usize> = None;
    for i in 0..=curtailed.len() {
        let on = curtailed.get(i).copied().unwrap_or(false);
        match (on, run) {
            (true, None) => run = Some(i),
            (false, Some(s)) => {
                events.push(TrueEvent {
                    start: start.offset(s as i64),
                    end: start.offset(i as i64 - 1),
                    hours: i - s,
                });
                run = None;
            }
            _ => {}
        }
    }
    events
}

/// Generates a facility's hourly load over the LME span:
/// `base × (1 + ramp·τ) × (1 − depth·curtailed) × max(0, 1 + noise·z)`.
pub fn gen_facility(spec: &FacilitySpec, lme: &LmeSeries) -> Result<(EnergySeries, GroundTruth)> {
    spec.validate()?;
    let n = lme.values.len();
    let seed = spec.seed.unwrap_or(0);
    let mut schedule_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut curtailed = schedule_mask(spec, lme, &mut schedule_rng);
    if spec.curtail_depth == 0.0 {
        curtailed.iter_mut().for_each(|c| *c = false);
    }

    let denom = (n.max(2) - 1) as f64;
    let baseline: Vec<f64> = (0..n)
        .map(|t| spec.base_load * (1.0 + spec.ramp * t as f64 / denom))
        .collect();
    let load: Vec<f64> = (0..n)
        .map(|t| {
            let z: f64 = rng.sample(StandardNormal);
            let shed = if curtailed[t] { spec.curtail_depth } else { 0.0 };
            baseline[t] * (1.0 - shed) * (1.0 + spec.noise * z).max(0.0)
        })
        .collect();
    let avoided = (0..n)
        .filter(|&t| curtailed[t])
        .map(|t| (baseline[t] - load[t]) * lme.values[t])
        .sum();

    let energy = EnergySeries {
        facility_id: spec.facility_id.clone(),
        start: lme.start,
        values: load.into_iter().map(Some).collect(),
        partial: vec![false; n],
        origin_resolution: Resolution::Hourly,
    };
    let truth = GroundTruth {
        facility_id: spec.facility_id.clone(),
        events: true_events(lme.start, &curtailed),
        curtailed,
        baseline,
        avoided,
    };
    Ok((energy, truth))
}

/// Ground-truth avoided emissions for `spec` on `lme`.
pub fn ground_truth_avoided(spec: &FacilitySpec, lme: &LmeSeries) -> Result<f64> {
    gen_facility(spec, lme).map(|(_, truth)| truth.avoided)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetHeader {
    /// First UTC day of the span.
    pub start: NaiveDate,
    pub days: u32,
    #[serde(default)]
    pub seed: u64,
}

/// A whole synthetic fleet, as read from a TOML spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSpec {
    pub fleet: FleetHeader,
    #[serde(rename = "grid")]
    pub grids: Vec<GridSpec>,
    #[serde(rename = "facility")]
    pub facilities: Vec<FacilitySpec>,
}

#[derive(Debug, Clone)]
pub struct SynthFacility {
    pub spec: FacilitySpec,
    pub energy: EnergySeries,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone)]
pub struct SynthFleet {
    pub span: HourSpan,
    pub grids: Vec<(GridSpec, LmeSeries, f64)>,
    pub facilities: Vec<SynthFacility>,
}

impl FleetSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn span(&self) -> Result<HourSpan> {
        let last = self
            .fleet
            .start
            .checked_add_days(chrono::Days::new(self.fleet.days.max(1) as u64 - 1))
            .ok_or_else(|| Error::Config("fleet span out of range".into()))?;
        HourSpan::from_dates(self.fleet.start, last).ok_or_else(|| Error::Config("empty fleet span".into()))
    }

    /// Fills in missing seeds from the fleet seed so every item has its own stream.
    pub fn resolve_seeds(&mut self) {
        let seed = self.fleet.seed;
        for (i, g) in self.grids.iter_mut().enumerate() {
            g.seed.get_or_insert(derive_seed(seed, i as u64));
        }
        let offset = self.grids.len() as u64;
        for (i, f) in self.facilities.iter_mut().enumerate() {
            f.seed.get_or_insert(derive_seed(seed, offset + i as u64));
        }
    }

    pub fn generate(&self) -> Result<SynthFleet> {
        let mut spec = self.clone();
        spec.resolve_seeds();
        let span = spec.span()?;
        let grids = spec
            .grids
            .iter()
            .map(|g| gen_lme(g, span).map(|(lme, lmev)| (g.clone(), lme, lmev)))
            .collect::<Result<Vec<_>>>()?;
        let facilities = spec
            .facilities
            .iter()
            .map(|f| {
                let (_, lme, _) = grids
                    .iter()
                    .find(|(g, _, _)| g.region_id == f.region_id)
                    .ok_or_else(|| Error::Config(format!("{}: unknown region {:?}", f.facility_id, f.region_id)))?;
                let (energy, truth) = gen_facility(f, lme)?;
                Ok(SynthFacility {
                    spec: f.clone(),
                    energy,
                    truth,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SynthFleet {
            span,
            grids,
            facilities,
        })
    }
}

/// Archetype presets for grids and facilities.
pub mod presets {
    use super::*;

    /// Marginal stack of similar gas units: LME σ around 0.10–0.14.
    pub fn steady_grid(region_id: &str, seed: u64) -> GridSpec {
        GridSpec {
            region_id: region_id.into(),
            lme_mean: 0.45,
            diurnal_amplitude: 0.12,
            peak_hour: 19.0,
            regime_switch_prob: 0.05,
            regime_step: 0.08,
            negative_hour_prob: 0.0,
            noise: 0.06,
            seed: Some(seed),
        }
    }

    /// Stack cycling between gas, coal and zero-emission units: LME σ around 0.20–0.25.
    pub fn volatile_grid(region_id: &str, seed: u64) -> GridSpec {
        GridSpec {
            region_id: region_id.into(),
            lme_mean: 0.50,
            diurnal_amplitude: 0.20,
            peak_hour: 18.0,
            regime_switch_prob: 0.05,
            regime_step: 0.28,
            negative_hour_prob: 0.01,
            noise: 0.08,
            seed: Some(seed),
        }
    }

    /// Large, steady load with a single long shallow event.
    pub fn steady_facility(id: &str, region: &str, base_load: f64, seed: u64) -> FacilitySpec {
        FacilitySpec {
            facility_id: id.into(),
            region_id: region.into(),
            base_load,
            curtail_depth: 0.25,
            schedule: Schedule::Single {
                day: 40,
                start_hour: 6,
                hours: 19,
            },
            schedule_jitter: 0.0,
            noise: 0.01,
            ramp: 0.08,
            capacity_mw: None,
            seed: Some(seed),
        }
    }

    /// Deep curtailment whenever LME (as a price proxy) runs high.
    pub fn price_responsive_facility(
        id: &str,
        region: &str,
        base_load: f64,
        percentile: f64,
        seed: u64,
    ) -> FacilitySpec {
        FacilitySpec {
            facility_id: id.into(),
            region_id: region.into(),
            base_load,
            curtail_depth: 0.985,
            schedule: Schedule::PriceResponsive { percentile },
            schedule_jitter: 0.0,
            noise: 0.01,
            ramp: 0.0,
            capacity_mw: None,
            seed: Some(seed),
        }
    }

    /// Deep curtailment on a fixed daily on-peak window.
    pub fn scheduled_facility(
        id: &str,
        region: &str,
        base_load: f64,
        start_hour: u32,
        end_hour: u32,
        seed: u64,
    ) -> FacilitySpec {
        FacilitySpec {
            facility_id: id.into(),
            region_id: region.into(),
            base_load,
            curtail_depth: 0.998,
            schedule: Schedule::DailyWindow { start_hour, end_hour },
            schedule_jitter: 0.0,
            noise: 0.01,
            ramp: 0.0,
            capacity_mw: None,
            seed: Some(seed),
        }
    }

    /// A 21-facility, 92-day fleet mixing the three archetypes over four grids.
    pub fn reference_fleet(seed: u64) -> FleetSpec {
        let s = |i: u64| derive_seed(seed, i);
        let grids = vec![
            volatile_grid("TX", s(0)),
            volatile_grid("GA", s(1)),
            steady_grid("NY", s(2)),
            steady_grid("KY", s(3)),
        ];
        let loads = [
            12.4, 45.0, 3.34, 22.0, 60.5, 88.0, 101.2, 9.8, 33.3, 128.03, 127.9, 18.7, 75.0, 54.2, 40.1, 7.5, 15.2,
            5.91, 66.6, 28.4, 95.5,
        ];
        let facilities = loads
            .iter()
            .enumerate()
            .map(|(i, &load)| {
                let id = format!("F{:02}", i + 1);
                let k = 10 + i as u64;
                match i % 3 {
                    0 => steady_facility(&id, ["NY", "KY", "GA"][i % 3 + (i / 3) % 2], load, s(k)),
                    1 => price_responsive_facility(
                        &id,
                        ["TX", "GA"][(i / 3) % 2],
                        load,
                        0.65 + 0.02 * (i % 7) as f64,
                        s(k),
                    ),
                    _ => {
                        let start = 13 + (i % 4) as u32;
                        let mut f =
                            scheduled_facility(&id, ["GA", "TX", "NY"][(i / 3) % 3], load, start, start + 7, s(k));
                        f.schedule_jitter = 0.3 * (i % 4) as f64;
                        f
                    }
                }
            })
            .collect();
        FleetSpec {
            fleet: FleetHeader {
                start: NaiveDate::from_ymd_opt(2023, 7, 1).unwrap(),
                days: 92,
                seed,
            },
            grids,
            facilities,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTruth {
    pub region_id: String,
    pub lmev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetTruth {
    pub span_start: HourIndex,
    pub span_hours: usize,
    pub grids: Vec<GridTruth>,
    pub facilities: Vec<GroundTruth>,
}

fn series_csv(start: HourIndex, values: impl Iterator<Item = Option<f64>>) -> Vec<Vec<String>> {
    values
        .enumerate()
        .map(|(i, v)| vec![start.offset(i as i64).to_string(), fmt_opt(v)])
        .collect()
}

/// Writes `energy/<id>.csv`, `lme/<region>.csv`, `manifest.toml` and
/// `truth.json` under `out`.
pub fn write_fleet(fleet: &SynthFleet, out: &Path) -> Result<()> {
    for (grid, lme, _) in &fleet.grids {
        write_csv(
            &out.join("lme").join(format!("{}.csv", grid.region_id)),
            &["timestamp", "value"],
            series_csv(lme.start, lme.values.iter().map(|v| Some(*v))),
        )?;
    }
    let mut manifest = Manifest::default();
    for f in &fleet.facilities {
        let energy = PathBuf::from("energy").join(format!("{}.csv", f.spec.facility_id));
        write_csv(
            &out.join(&energy),
            &["timestamp", "value"],
            series_csv(f.energy.start, f.energy.values.iter().copied()),
        )?;
        manifest.facilities.push(FacilityEntry {
            facility_id: f.spec.facility_id.clone(),
            energy,
            lme: PathBuf::from("lme").join(format!("{}.csv", f.spec.region_id)),
            region: f.spec.region_id.clone(),
            capacity_mw: f.spec.capacity_mw,
            timezone: "UTC".into(),
        });
    }
    write_bytes(&out.join("manifest.toml"), manifest.to_toml().as_bytes())?;
    let truth = FleetTruth {
        span_start: fleet.span.start,
        span_hours: fleet.span.len(),
        grids: fleet
            .grids
            .iter()
            .map(|(g, _, lmev)| GridTruth {
                region_id: g.region_id.clone(),
                lmev: *lmev,
            })
            .collect(),
        facilities: fleet.facilities.iter().map(|f| f.truth.clone()).collect(),
    };
    write_json(&out.join("truth.json"), &truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(hours: usize) -> HourSpan {
        let start = NaiveDate::from_ymd_opt(2023, 7, 1).unwrap();
        HourSpan::with_len(HourSpan::from_dates(start, start).unwrap().start, hours)
    }

    fn flat_grid(amplitude: f64) -> GridSpec {
        GridSpec {
            region_id: "R".into(),
            lme_mean: 0.5,
            diurnal_amplitude: amplitude,
            peak_hour: 18.0,
            regime_switch_prob: 0.0,
            regime_step: 0.0,
            negative_hour_prob: 0.0,
            noise: 0.0,
            seed: Some(1),
        }
    }

    fn facility(depth: f64, schedule: Schedule) -> FacilitySpec {
        FacilitySpec {
            facility_id: "F".into(),
            region_id: "R".into(),
            base_load: 100.0,
            curtail_depth: depth,
            schedule,
            schedule_jitter: 0.0,
            noise: 0.0,
            ramp: 0.0,
            capacity_mw: None,
            seed: Some(9),
        }
    }

    #[test]
    fn constant_grid() {
        let (lme, lmev) = gen_lme(&flat_grid(0.0), span(96)).unwrap();
        assert!(lme.values.iter().all(|v| *v == 0.5));
        assert_eq!(lmev, 0.0);
        assert!(gen_lme(&flat_grid(0.0), span(47)).is_err());
    }

    #[test]
    fn sinusoid_sigma() {
        let a = 0.2;
        let (_, lmev) = gen_lme(&flat_grid(a), span(24 * 92)).unwrap();
        assert!((lmev / (a / 2f64.sqrt()) - 1.0).abs() < 0.02, "{lmev}");
    }

    #[test]
    fn volatile_grid_calibration() {
        for seed in 0..5 {
            let (_, lmev) = gen_lme(&presets::volatile_grid("GA", seed), span(2208)).unwrap();
            assert!((0.20..=0.25).contains(&lmev), "seed {seed}: {lmev}");
            let (_, lmev) = gen_lme(&presets::steady_grid("NY", seed), span(2208)).unwrap();
            assert!((0.10..=0.15).contains(&lmev), "seed {seed}: {lmev}");
        }
    }

    #[test]
    fn zero_depth_has_no_effect() {
        let (lme, _) = gen_lme(&flat_grid(0.1), span(96)).unwrap();
        let mut spec = facility(
            0.0,
            Schedule::DailyWindow {
                start_hour: 14,
                end_hour: 21,
            },
        );
        spec.noise = 0.01;
        let (energy, truth) = gen_facility(&spec, &lme).unwrap();
        assert_eq!(truth.avoided, 0.0);
        assert!(truth.events.is_empty());
        let (plain, _) = gen_facility(
            &FacilitySpec {
                schedule: Schedule::None,
                ..spec.clone()
            },
            &lme,
        )
        .unwrap();
        assert_eq!(energy, plain);
        let (_, none) = gen_facility(&facility(0.0, Schedule::None), &lme).unwrap();
        assert!(none.events.is_empty());
    }

    #[test]
    fn daily_window_events() {
        let (lme, _) = gen_lme(&flat_grid(0.1), span(24 * 5)).unwrap();
        let (energy, truth) = gen_facility(
            &facility(
                1.0,
                Schedule::DailyWindow {
                    start_hour: 14,
                    end_hour: 21,
                },
            ),
            &lme,
        )
        .unwrap();
        assert_eq!(truth.events.len(), 5);
        assert!(truth
            .events
            .iter()
            .all(|e| e.hours == 7 && e.start.0.rem_euclid(24) == 14));
        assert_eq!(energy.values[14], Some(0.0));
        assert_eq!(energy.values[13], Some(100.0));
    }

    #[test]
    fn single_window_truth() {
        let lme = LmeSeries {
            region_id: "R".into(),
            start: span(24).start,
            values: vec![0.5; 24],
        };
        let spec = facility(
            1.0,
            Schedule::Single {
                day: 0,
                start_hour: 14,
                hours: 2,
            },
        );
        assert_eq!(ground_truth_avoided(&spec, &lme).unwrap(), 100.0);
        assert_eq!(ground_truth_avoided(&facility(0.0, Schedule::None), &lme).unwrap(), 0.0);
    }

    #[test]
    fn seed_determinism() {
        let fleet = presets::reference_fleet(7);
        let a = fleet.generate().unwrap();
        let b = fleet.generate().unwrap();
        for (x, y) in a.facilities.iter().zip(&b.facilities) {
            assert_eq!(x.energy, y.energy);
            assert_eq!(x.truth, y.truth);
        }
        assert_eq!(a.facilities.len(), 21);
        let c = presets::reference_fleet(8).generate().unwrap();
        assert_ne!(a.facilities[0].energy, c.facilities[0].energy);
    }

    #[test]
    fn validation() {
        let (lme, _) = gen_lme(&flat_grid(0.1), span(48)).unwrap();
        assert!(gen_facility(&facility(1.5, Schedule::None), &lme).is_err());
        let mut f = facility(0.5, Schedule::None);
        f.noise = -1.0;
        assert!(gen_facility(&f, &lme).is_err());
        let mut g = flat_grid(0.1);
        g.negative_hour_prob = 2.0;
        assert!(gen_lme(&g, span(48)).is_err());
    }

    #[test]
    fn fleet_toml_round_trip() {
        let text = r#"
[fleet]
start = "2023-07-01"
days = 3
seed = 5

[[grid]]
region_id = "GA"
lme_mean = 0.4
diurnal_amplitude = 0.1

[[facility]]
facility_id = "F18"
region_id = "GA"
base_load = 5.91
curtail_depth = 0.99
schedule = { kind = "daily-window", start_hour = 14, end_hour = 21 }
"#;
        let spec = FleetSpec::from_toml(text).unwrap();
        let fleet = spec.generate().unwrap();
        assert_eq!(fleet.span.len(), 72);
        assert_eq!(fleet.facilities[0].truth.events.len(), 3);
        assert!(FleetSpec::from_toml("[fleet]\nstart = 1").is_err());
    }
}
