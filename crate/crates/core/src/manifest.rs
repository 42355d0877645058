//! Fleet manifest and run configuration.

use crate::analysis::QuadrantMode;
use crate::error::{Error, Result};
use crate::output::read_to_string;
use crate::time::{parse_offset, HourSpan};
use chrono::{FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilityEntry {
    pub facility_id: String,
    /// Energy CSV, relative to the manifest's directory.
    pub energy: PathBuf,
    /// LME CSV, relative to the manifest's directory.
    pub lme: PathBuf,
    pub region: String,
    #[serde(default)]
    pub capacity_mw: Option<f64>,
    /// `UTC` or `±HH:MM`; used for naive timestamps and calendar days.
    #[serde(default = "default_timezone")]
    pub timezone: String,
}

fn default_timezone() -> String {
    "UTC".into()
}

impl FacilityEntry {
    pub fn offset(&self) -> Result<FixedOffset> {
        parse_offset(&self.timezone).map_err(|e| Error::Config(format!("{}: {e}", self.facility_id)))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, rename = "facility")]
    pub facilities: Vec<FacilityEntry>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut m: Manifest = toml::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        m.base_dir = base_dir.to_path_buf();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&read_to_string(path)?, base)
    }

    fn validate(&self) -> Result<()> {
        let mut ids: Vec<&str> = self.facilities.iter().map(|f| f.facility_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate facility_id {:?}", w[0])));
        }
        for f in &self.facilities {
            f.offset()?;
            if let Some(c) = f.capacity_mw {
                if !(c > 0.0) {
                    return Err(Error::Config(format!("{}: capacity_mw must be > 0", f.facility_id)));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serialises")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowSpec {
    /// Largest span covered by every facility.
    Auto,
    /// Inclusive UTC calendar days.
    Dates(NaiveDate, NaiveDate),
}

impl WindowSpec {
    pub fn span(&self) -> Option<HourSpan> {
        match self {
            WindowSpec::Auto => None,
            WindowSpec::Dates(a, b) => HourSpan::from_dates(*a, *b),
        }
    }
}

impl FromStr for WindowSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(WindowSpec::Auto);
        }
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("window {s:?}: expected auto or YYYY-MM-DD..YYYY-MM-DD"))?;
        let parse = |d: &str| NaiveDate::parse_from_str(d, "%Y-%m-%d").map_err(|e| format!("window date {d:?}: {e}"));
        let (a, b) = (parse(a)?, parse(b)?);
        if a >= b {
            return Err(format!("window {s:?}: start must precede end"));
        }
        Ok(WindowSpec::Dates(a, b))
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowSpec::Auto => f.write_str("auto"),
            WindowSpec::Dates(a, b) => write!(f, "{a}..{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdMode {
    Kneedle,
    Fleet,
    Fixed(f64),
}

impl FromStr for ThresholdMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kneedle" => Ok(ThresholdMode::Kneedle),
            "fleet" => Ok(ThresholdMode::Fleet),
            _ => {
                let v = s
                    .strip_prefix("fixed:")
                    .ok_or_else(|| format!("threshold mode {s:?}: expected kneedle, fleet or fixed:<v>"))?;
                let v: f64 = v.parse().map_err(|e| format!("threshold mode {s:?}: {e}"))?;
                if v > 0.0 && v <= 1.0 {
                    Ok(ThresholdMode::Fixed(v))
                } else {
                    Err(format!("fixed threshold {v} is outside (0, 1]"))
                }
            }
        }
    }
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdMode::Kneedle => f.write_str("kneedle"),
            ThresholdMode::Fleet => f.write_str("fleet"),
            ThresholdMode::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub window: WindowSpec,
    pub threshold: ThresholdMode,
    pub quadrant: QuadrantMode,
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads for facility-level stages; 0 means one per core.
    pub jobs: usize,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            manifest: manifest.into(),
            window: WindowSpec::Auto,
            threshold: ThresholdMode::Kneedle,
            quadrant: QuadrantMode::Mean,
            out: out.into(),
            seed: 0,
            jobs: 0,
        }
    }
}
