//! Command-line interface.

use crate::analysis::QuadrantMode;
use crate::error::{Error, Result};
use crate::manifest::{RunConfig, ThresholdMode, WindowSpec};
use crate::output::{read_json, read_to_string, write_bytes, write_json};
use crate::pipeline::{self, FleetReport};
use crate::synth::{presets, write_fleet, FleetSpec};
use crate::{plots, report};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

pub const LOG_ENV: &str = "FLEXLENS_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "flexlens",
    version,
    about = "Curtailment detection and marginal-emissions analysis for flexible loads"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic fleet (CSV series, manifest and truth.json).
    Synth(SynthArgs),
    /// Run the full pipeline on a manifest and write every artifact.
    Analyze(AnalyzeArgs),
    /// Refit the regressions from an output directory's metrics.csv.
    Regress(StageArgs),
    /// Reclassify quadrants from an output directory's metrics.csv.
    Classify(ClassifyArgs),
    /// Rebuild report.md and plots from an output directory.
    Report(StageArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Fleet spec (TOML). Without it the built-in 21-facility preset is used.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the fleet seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `auto` or `YYYY-MM-DD..YYYY-MM-DD` (inclusive UTC days).
    #[arg(long, default_value = "auto")]
    pub window: WindowSpec,
    /// `kneedle`, `fleet` or `fixed:<v>`.
    #[arg(long, default_value = "kneedle")]
    pub threshold_mode: ThresholdMode,
    /// `mean` or `p75`.
    #[arg(long, default_value = "mean")]
    pub quadrant_mode: QuadrantMode,
    /// Worker threads for facility-level stages (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    /// Output directory of a previous `analyze` run.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, default_value = "mean")]
    pub quadrant_mode: QuadrantMode,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Analyze(a) => {
            let config = RunConfig {
                manifest: a.manifest,
                window: a.window,
                threshold: a.threshold_mode,
                quadrant: a.quadrant_mode,
                out: a.out,
                seed: a.seed,
                jobs: a.jobs,
            };
            let report = pipeline::run_analyze(&config)?;
            log::info!(
                "analysed {} facilities into {}",
                report.facilities.len(),
                config.out.display()
            );
            Ok(())
        }
        Command::Regress(a) => regress(&a.out),
        Command::Classify(a) => classify(&a.out, a.quadrant_mode),
        Command::Report(a) => rebuild_report(&a.out),
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => FleetSpec::from_toml(&read_to_string(path)?)?,
        None => presets::reference_fleet(a.seed.unwrap_or(0)),
    };
    if let Some(seed) = a.seed {
        spec.fleet.seed = seed;
    }
    let fleet = spec.generate()?;
    write_fleet(&fleet, &a.out)
}

fn metric_rows(out: &Path) -> Result<Vec<(String, crate::metrics::FacilityMetrics)>> {
    Ok(pipeline::read_metrics(&out.join("metrics.csv"))?
        .into_iter()
        .map(|(id, _, m)| (id, m))
        .collect())
}

fn regress(out: &Path) -> Result<()> {
    let rows = metric_rows(out)?;
    if rows.is_empty() {
        return Err(Error::NoFacilities);
    }
    write_json(&out.join("regression.json"), &pipeline::run_regression(&rows))
}

fn classify(out: &Path, mode: QuadrantMode) -> Result<()> {
    let rows = metric_rows(out)?;
    if rows.is_empty() {
        return Err(Error::NoFacilities);
    }
    pipeline::write_quadrants(&out.join("quadrants.csv"), &pipeline::run_quadrants(&rows, mode))
}

/// Re-renders `report.md`, `summary.json` and plots from the stage files,
/// picking up any `regress` or `classify` reruns.
fn rebuild_report(out: &Path) -> Result<()> {
    let mut fleet: FleetReport = read_json(&out.join("summary.json"))?;
    fleet.regression = read_json(&out.join("regression.json"))?;
    fleet.quadrants = pipeline::read_quadrants(&out.join("quadrants.csv"), fleet.quadrants.mode)?;
    let metrics = pipeline::read_metrics(&out.join("metrics.csv"))?;
    for f in &mut fleet.facilities {
        if let Some((_, _, m)) = metrics.iter().find(|(id, _, _)| *id == f.facility_id) {
            f.metrics = m.clone();
        }
    }
    write_json(&out.join("summary.json"), &fleet)?;
    let series = plots::load_series(out, &fleet)?;
    plots::emit_plots(out, &fleet, &series)?;
    write_bytes(&out.join("report.md"), report::render(&fleet).as_bytes())
}
