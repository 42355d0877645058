//! Per-facility metric vector.

use crate::detect::{CurtailmentEvent, DrFlags};
use crate::error::{Error, Result};
use crate::ingest::FacilityFrame;
use chrono::{FixedOffset, Timelike};
use serde::{Deserialize, Serialize};

/// Field order matches the columns of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityMetrics {
    /// % of valid hours not flagged.
    pub uptime_pct: f64,
    /// Curtailment magnitude, %.
    pub cm: Option<f64>,
    /// Curtailment regularity, hours.
    pub cr: Option<f64>,
    /// Maximum hourly energy, MWh.
    pub me: f64,
    /// Normalised avoided emissions, tons CO₂/MWh.
    pub nae: Option<f64>,
    /// Emissions ratio A/I.
    pub er: Option<f64>,
    /// LME variability, tons CO₂/MWh.
    pub lmev: Option<f64>,
    /// Avoided emissions, tons CO₂.
    pub avoided: f64,
    /// Induced emissions, tons CO₂.
    pub induced: f64,
    pub pearson_r: Option<f64>,
}

impl FacilityMetrics {
    pub const COLUMNS: [&'static str; 10] = [
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
    ];

    pub fn values(&self) -> [Option<f64>; 10] {
        [
            Some(self.uptime_pct),
            self.cm,
            self.cr,
            Some(self.me),
            self.nae,
            self.er,
            self.lmev,
            Some(self.avoided),
            Some(self.induced),
            self.pearson_r,
        ]
    }

    /// Looks a metric up by column name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Self::COLUMNS
            .iter()
            .position(|c| *c == name)
            .and_then(|i| self.values()[i])
    }
}

pub fn uptime_pct(flags: &DrFlags) -> Result<f64> {
    let valid = flags.valid_hours();
    if valid == 0 {
        return Err(Error::NoValidHours);
    }
    let unflagged = valid - flags.flagged_hours();
    Ok(100.0 * unflagged as f64 / valid as f64)
}

/// `100 × (1 − mean(lowest quarter of flagged energies) / mean(unflagged energies))`.
/// The lowest quarter holds `ceil(n/4)` hours, at least one. `None` when
/// there are no flagged or no unflagged hours.
pub fn curtailment_magnitude(frame: &FacilityFrame, flags: &DrFlags) -> Option<f64> {
    let mut flagged = Vec::new();
    let mut unflagged = Vec::new();
    for (row, &f) in frame.rows.iter().zip(&flags.dr_flag) {
        if let Some(e) = row.energy {
            if f {
                flagged.push(e);
            } else {
                unflagged.push(e);
            }
        }
    }
    if flagged.is_empty() || unflagged.is_empty() {
        return None;
    }
    flagged.sort_by(f64::total_cmp);
    let k = flagged.len().div_ceil(4).max(1);
    let low = flagged[..k].iter().sum::<f64>() / k as f64;
    let normal = unflagged.iter().sum::<f64>() / unflagged.len() as f64;
    (normal > 0.0).then(|| 100.0 * (1.0 - low / normal))
}

/// Sample standard deviation of event start times (seconds since local
/// midnight) divided by 3600. `None` with fewer than two events.
pub fn curtailment_regularity(events: &[CurtailmentEvent], offset: FixedOffset) -> Option<f64> {
    let starts: Vec<f64> = events
        .iter()
        .map(|e| e.start.to_datetime().with_timezone(&offset).num_seconds_from_midnight() as f64)
        .collect();
    sample_std(&starts).map(|s| s / 3600.0)
}

/// Largest non-null hourly energy.
pub fn max_energy(energy: &[Option<f64>]) -> Result<f64> {
    energy
        .iter()
        .flatten()
        .copied()
        .reduce(f64::max)
        .ok_or(Error::NoValidHours)
}

pub fn normalized_avoided(avoided: f64, me: f64) -> Result<f64> {
    if me > 0.0 {
        Ok(avoided / me)
    } else {
        Err(Error::ZeroMaxEnergy)
    }
}

/// `A / I`; `None` when induced emissions are zero.
pub fn emissions_ratio(avoided: f64, induced: f64) -> Option<f64> {
    (induced != 0.0).then(|| avoided / induced)
}

pub fn lme_variability(lme: &[f64]) -> Result<f64> {
    sample_std(lme).ok_or(Error::TooFewValues {
        needed: 2,
        got: lme.len(),
    })
}

/// Product-moment correlation over hours where energy is present. `None`
/// for fewer than two pairs or a constant series.
pub fn pearson_r(energy: &[Option<f64>], lme: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = energy.iter().zip(lme).filter_map(|(e, &l)| e.map(|e| (e, l))).collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Sample (n − 1) standard deviation.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let pivot = values[0];
    let mean = pivot + values.iter().map(|v| v - pivot).sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Some((ss / (n - 1.0)).sqrt())
}

/// Assembles the full metric vector from detection and emissions outputs.
pub fn facility_metrics(
    frame: &FacilityFrame,
    flags: &DrFlags,
    events: &[CurtailmentEvent],
    avoided: f64,
    induced: f64,
) -> Result<FacilityMetrics> {
    let energy = frame.energy();
    let lme = frame.lme();
    let me = max_energy(&energy)?;
    Ok(FacilityMetrics {
        uptime_pct: uptime_pct(flags)?,
        cm: curtailment_magnitude(frame, flags),
        cr: curtailment_regularity(events, frame.offset),
        me,
        nae: normalized_avoided(avoided, me).ok(),
        er: emissions_ratio(avoided, induced),
        lmev: lme_variability(&lme).ok(),
        avoided,
        induced,
        pearson_r: pearson_r(&energy, &lme),
    })
}
