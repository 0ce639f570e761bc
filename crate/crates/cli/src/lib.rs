//! Experiment harness around the `swarmtopo` simulator: region loading,
//! report files, oracle scoring and the full-scale reproduction run.

pub mod report;
pub mod score;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use swarmtopo::boundary::BoundaryError;
use swarmtopo::geometry::{GeometryError, Region, RegionFile};
use swarmtopo::netgraph::analytic_mu;
use swarmtopo::pipeline::{run_pipeline, PipelineConfig, PipelineError};
use swarmtopo::regions;
use thiserror::Error;

use report::{read_nodes, read_summary, write_json, Summary};
use score::ScoreReport;

/// Caps the worker threads used for independent runs.
pub const THREADS_ENV: &str = "SWARMTOPO_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("region: {0}")]
    Region(#[from] GeometryError),
    #[error("region file {path}: {reason}")]
    RegionFile { path: PathBuf, reason: String },
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error("run in {dir} was made with a different configuration: {reason}")]
    MismatchedRun { dir: PathBuf, reason: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Region(GeometryError::DomainError { .. }) => 7,
            CliError::Region(_) | CliError::RegionFile { .. } => 4,
            CliError::MismatchedRun { .. } => 6,
            CliError::Pipeline(e) => match e {
                PipelineError::Config(_) => 2,
                PipelineError::Io(_) => 3,
                PipelineError::Geometry(GeometryError::DomainError { .. }) => 7,
                PipelineError::Geometry(_) => 4,
                PipelineError::Boundary(BoundaryError::DegenerateHistogram { .. } | BoundaryError::NoPlateau) => 7,
                PipelineError::Boundary(_) | PipelineError::Sim(_) | PipelineError::Disconnected => 5,
            },
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Geometry(g) => CliError::Region(g),
            other => CliError::Pipeline(other),
        }
    }
}

/// Resolves a builtin region name or reads a region file.
pub fn load_region(spec: &str) -> Result<Region, CliError> {
    if let Some(r) = regions::builtin(spec) {
        return Ok(r);
    }
    let path = PathBuf::from(spec);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let file: RegionFile = serde_json::from_str(&text).map_err(|e| CliError::RegionFile {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    Ok(file.into_region()?)
}

/// Builds the global thread pool, honoring [`THREADS_ENV`].
pub fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Runs the pipeline and writes every report into `out`.
pub fn cmd_run(region_name: &str, region: &Region, cfg: &PipelineConfig, out: &Path, trace: bool) -> Result<Summary, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let result = run_pipeline(region, cfg, trace.then_some(out))?;
    report::write_run(out, &result, region_name).map_err(|e| CliError::io(out, e))
}

pub const SCORE_FILE: &str = "score.json";

/// Scores the run stored in `dir` against the region's geometry. The run
/// must have been made with `cfg` on `region_name`.
pub fn cmd_oracle(region_name: &str, region: &Region, cfg: &PipelineConfig, dir: &Path) -> Result<ScoreReport, CliError> {
    let summary = read_summary(dir).map_err(|e| CliError::io(dir.join(report::SUMMARY_FILE), e))?;
    let mismatch = |reason: String| CliError::MismatchedRun {
        dir: dir.to_path_buf(),
        reason,
    };
    if summary.schema != report::SCHEMA_VERSION {
        return Err(mismatch(format!("schema {} instead of {}", summary.schema, report::SCHEMA_VERSION)));
    }
    if summary.region != region_name {
        return Err(mismatch(format!("region {:?} instead of {region_name:?}", summary.region)));
    }
    if summary.config.seed != cfg.seed {
        return Err(mismatch(format!("seed {} instead of {}", summary.config.seed, cfg.seed)));
    }
    if summary.config != *cfg {
        return Err(mismatch("parameters differ".into()));
    }
    let nodes = read_nodes(dir).map_err(|e| CliError::io(dir.join(report::NODES_FILE), e))?;
    let scores = score::score(region, &summary, &nodes, None)?;
    write_json(&dir.join(SCORE_FILE), &scores).map_err(|e| CliError::io(dir.join(SCORE_FILE), e))?;
    Ok(scores)
}

pub const REPRO_NODES: usize = 45_000;
pub const REPRO_SEEDS: [u64; 3] = [1, 2, 3];
/// Reference counts and ratios for a 45,000-node deployment with four boundaries.
pub const REFERENCE_BOUNDARY_AND_NEAR: usize = 11_358;
pub const REFERENCE_INTERIOR: usize = 33_642;
pub const REFERENCE_RATIOS: [f64; 4] = [2.809, 4.512, 4.959, 3.844];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproRow {
    pub seed: u64,
    pub mu_analytic: f64,
    pub mu_est: u32,
    pub mu_error: f64,
    pub delta_over_mu: f64,
    pub alpha_star: f64,
    pub components: usize,
    pub boundary_and_near: usize,
    pub interior: usize,
    pub outer_id: Option<swarmtopo::netgraph::NodeId>,
    /// `(size, near_size, ratio)` per component, outer first, then by size.
    pub ratios: Vec<(u64, u64, f64)>,
    pub thickness_estimate: Option<f64>,
}

impl ReproRow {
    pub fn from_summary(s: &Summary) -> Self {
        let mut comps = s.components.clone();
        comps.sort_by_key(|c| (Some(c.id) != s.outer_id, std::cmp::Reverse(c.size), c.id));
        Self {
            seed: s.config.seed,
            mu_analytic: s.mu_analytic,
            mu_est: s.mu_est,
            mu_error: (f64::from(s.mu_est) - s.mu_analytic).abs() / s.mu_analytic,
            delta_over_mu: f64::from(s.delta) / s.mu_analytic,
            alpha_star: s.alpha_star,
            components: s.components.len(),
            boundary_and_near: s.classes.boundary + s.classes.near_boundary,
            interior: s.classes.interior,
            outer_id: s.outer_id,
            ratios: comps.iter().map(|c| (c.size, c.near_size, c.ratio)).collect(),
            thickness_estimate: s.thickness_estimate,
        }
    }
}

/// Full-scale runs on the standard region, one per seed, in parallel.
pub fn cmd_paper_repro(out: Option<&Path>) -> Result<Vec<ReproRow>, CliError> {
    let region = regions::standard_region();
    let rows: Result<Vec<ReproRow>, CliError> = REPRO_SEEDS
        .par_iter()
        .map(|&seed| {
            let cfg = PipelineConfig {
                nodes: REPRO_NODES,
                seed,
                ..Default::default()
            };
            let summary = match out {
                Some(dir) => cmd_run("standard", &region, &cfg, &dir.join(format!("seed_{seed}")), false)?,
                None => report::summarize(&run_pipeline(&region, &cfg, None)?, "standard"),
            };
            Ok(ReproRow::from_summary(&summary))
        })
        .collect();
    let rows = rows?;
    if let Some(dir) = out {
        write_json(&dir.join("repro.json"), &rows).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(rows)
}

/// Expected neighborhood size of the full-scale example.
pub fn repro_mu() -> f64 {
    analytic_mu(REPRO_NODES, 1.0, regions::STANDARD_AREA)
}
