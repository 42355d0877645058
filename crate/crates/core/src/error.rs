use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("no readings")]
    NoReadings,

    #[error("line {line}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { line: usize, timestamp: String },

    #[error("timestamp {timestamp} is not on the {grid} grid")]
    OffGrid { timestamp: String, grid: &'static str },

    #[error("line {line}: negative energy value {value}")]
    NegativeEnergy { line: usize, value: f64 },

    #[error("LME series has no reading for {timestamp}")]
    LmeGap { timestamp: String },

    #[error("energy and LME series do not overlap")]
    EmptyIntersection,

    #[error("hour {timestamp}: {value} MWh exceeds declared capacity {capacity} MW")]
    CapacityExceeded {
        timestamp: String,
        value: f64,
        capacity: f64,
    },

    #[error("threshold {0} is outside (0, 1]")]
    InvalidThreshold(f64),

    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),

    #[error("no valid (non-null) hours")]
    NoValidHours,

    #[error("day {0} has no non-null hours")]
    NullDay(String),

    #[error("maximum energy is zero")]
    ZeroMaxEnergy,

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("need n >= k + 2 observations (n = {n}, k = {k})")]
    TooFewObservations { n: usize, k: usize },

    #[error("predictor matrix is rank deficient")]
    RankDeficient,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("no facilities")]
    NoFacilities,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("facility {facility}, stage {stage}: {source}")]
    Stage {
        facility: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_stage(self, facility: &str, stage: &'static str) -> Self {
        Error::Stage {
            facility: facility.to_string(),
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 for bad input, 2 for internal invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
