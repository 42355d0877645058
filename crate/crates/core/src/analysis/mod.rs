//! Fleet-level statistics: OLS fits, forward-backward stepwise selection and
//! performance quadrants.

pub mod dist;
pub mod ols;
pub mod quadrant;
pub mod stepwise;

pub use ols::{ols_fit, Coefficient, RegressionFit};
pub use quadrant::{quadrant_classify, Level, QuadrantAssignment, QuadrantMode};
pub use stepwise::{stepwise_select, Step, StepAction, StepwiseTrace};

/// Significance level for stepwise entry and exit.
pub const ALPHA: f64 = 0.05;
