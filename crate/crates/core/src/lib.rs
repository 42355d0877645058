//! Curtailment detection and marginal-emissions accounting for facilities
//! with flexible loads.
//!
//! The pipeline runs in a fixed order: [`ingest`] parses and aligns hourly
//! energy and locational marginal emission (LME) series, [`detect`] picks a
//! per-facility curtailment threshold and extracts events, [`emissions`]
//! computes avoided and induced emissions, [`metrics`] builds the per-facility
//! metric vector and [`analysis`] fits regressions and performance quadrants
//! across the fleet. [`synth`] generates labelled synthetic fleets used as the
//! end-to-end oracle, and [`pipeline`] ties everything to files on disk.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod detect;
pub mod emissions;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod metrics;
pub mod output;
pub mod pipeline;
pub mod plots;
pub mod report;
pub mod synth;
pub mod time;

pub use error::{Error, Result};
