//! Four-way classification on uptime and avoided emissions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadrantMode {
    /// Cuts at the fleet mean.
    Mean,
    /// Cuts at the fleet 75th percentile (linear interpolation).
    P75,
}

impl FromStr for QuadrantMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mean" => Ok(QuadrantMode::Mean),
            "p75" => Ok(QuadrantMode::P75),
            other => Err(format!("unknown quadrant mode {other:?} (expected mean or p75)")),
        }
    }
}

impl fmt::Display for QuadrantMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuadrantMode::Mean => "mean",
            QuadrantMode::P75 => "p75",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    High,
    Low,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::High => "High",
            Level::Low => "Low",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantAssignment {
    pub facility_id: String,
    pub uptime: Level,
    pub avoided: Level,
    pub uptime_cut: f64,
    pub avoided_cut: f64,
    pub mode: QuadrantMode,
}

impl QuadrantAssignment {
    pub fn label(&self) -> String {
        format!("{} Uptime & {} Avoided Emissions", self.uptime, self.avoided)
    }
}

/// Linear-interpolated quantile of `values` (numpy's default definition).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn cut(values: &[f64], mode: QuadrantMode) -> f64 {
    match mode {
        QuadrantMode::Mean => values.iter().sum::<f64>() / values.len() as f64,
        QuadrantMode::P75 => quantile(values, 0.75),
    }
}

/// Labels each `(facility_id, uptime_pct, avoided)` as high on an axis when
/// its value is strictly above the fleet cut.
pub fn quadrant_classify(fleet: &[(String, f64, f64)], mode: QuadrantMode) -> Result<Vec<QuadrantAssignment>> {
    if fleet.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: fleet.len(),
        });
    }
    let uptimes: Vec<f64> = fleet.iter().map(|f| f.1).collect();
    let avoided: Vec<f64> = fleet.iter().map(|f| f.2).collect();
    let (uptime_cut, avoided_cut) = (cut(&uptimes, mode), cut(&avoided, mode));
    let level = |v: f64, c: f64| if v > c { Level::High } else { Level::Low };
    Ok(fleet
        .iter()
        .map(|(id, u, a)| QuadrantAssignment {
            facility_id: id.clone(),
            uptime: level(*u, uptime_cut),
            avoided: level(*a, avoided_cut),
            uptime_cut,
            avoided_cut,
            mode,
        })
        .collect())
}
