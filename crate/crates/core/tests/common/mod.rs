//! Seeded synthetic fixtures shared by the integration tests.
#![allow(dead_code)]

use chrono::NaiveDate;
use flexlens::ingest::{repair_outliers, EnergySeries, FacilityFrame, LmeSeries};
use flexlens::synth::{derive_seed, gen_facility, gen_lme, presets, FacilitySpec, GridSpec, GroundTruth, Schedule};
use flexlens::time::{utc, HourSpan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub spec: FacilitySpec,
    pub grid: GridSpec,
    pub lme: LmeSeries,
    pub energy: EnergySeries,
    pub truth: GroundTruth,
}

impl Fixture {
    /// Repaired, aligned frame, as the pipeline would build it.
    pub fn frame(&self) -> FacilityFrame {
        let energy = repair_outliers(&self.energy, utc());
        FacilityFrame::from_columns(
            &self.spec.facility_id,
            &self.lme.region_id,
            self.lme.start,
            &energy.values,
            &self.lme.values,
            utc(),
        )
        .unwrap()
    }
}

/// Jul 1 to Sep 30: 92 days, 2208 hours.
pub fn study_span() -> HourSpan {
    HourSpan::from_dates(
        NaiveDate::from_ymd_opt(2023, 7, 1).unwrap(),
        NaiveDate::from_ymd_opt(2023, 9, 30).unwrap(),
    )
    .unwrap()
}

pub struct FixtureParams {
    pub max_noise: f64,
    pub ramp: bool,
    pub min_depth: f64,
    pub max_depth: f64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        FixtureParams {
            max_noise: 0.02,
            ramp: true,
            min_depth: 0.5,
            max_depth: 0.99,
        }
    }
}

/// Alternates scheduled (daily window, jittered) and price-responsive
/// facilities over steady and volatile grids.
pub fn fixtures(count: usize, seed: u64, p: &FixtureParams) -> Vec<Fixture> {
    let span = study_span();
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let region = format!("R{i:02}");
            let grid = if i % 4 < 2 {
                presets::volatile_grid(&region, rng.random())
            } else {
                presets::steady_grid(&region, rng.random())
            };
            let (lme, _) = gen_lme(&grid, span).unwrap();
            let schedule = if i % 2 == 0 {
                let start = rng.random_range(12..=18);
                let len = rng.random_range(3..=8);
                Schedule::DailyWindow {
                    start_hour: start,
                    end_hour: (start + len) % 24,
                }
            } else {
                Schedule::PriceResponsive {
                    percentile: rng.random_range(0.65..0.85),
                }
            };
            let spec = FacilitySpec {
                facility_id: format!("S{i:02}"),
                region_id: region,
                base_load: rng.random_range(3.3..128.0),
                curtail_depth: rng.random_range(p.min_depth..=p.max_depth),
                schedule,
                schedule_jitter: if i % 2 == 0 { rng.random_range(0.0..1.5) } else { 0.0 },
                noise: rng.random_range(0.0..=p.max_noise),
                ramp: if p.ramp { rng.random_range(0.0..0.1) } else { 0.0 },
                capacity_mw: None,
                seed: Some(rng.random()),
            };
            let (energy, truth) = gen_facility(&spec, &lme).unwrap();
            Fixture {
                spec,
                grid,
                lme,
                energy,
                truth,
            }
        })
        .collect()
}
