//! End-to-end run: deployment, tree, density estimate, alpha calibration,
//! boundary recognition and topological post-processing, phase by phase.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{
    classify, default_grid, detect_voronoi, distance_flood, estimate_mu, form_components, token_loops, AlphaSweep,
    BoundaryError, Classification, Components, DensityEstimate, DistanceInfo, TokenLoops, DEFAULT_MIN_COMPONENT_SIZE,
    DEFAULT_ROOT_AFTER_HOPS, DEFAULT_VORONOI_TOLERANCE,
};
use crate::convergetree::{aggregate, broadcast_down, build_tree, ComponentCount, ComponentTally, HistogramMerge, Max, SpanningTree, TreeLink};
use crate::geometry::{sample_uniform, validate_region, GeometryError, Point, Region, DEFAULT_MIN_ANGLE};
use crate::netgraph::{analytic_mu, DegreeHistogram, NodeId, UnitDiskGraph, DEFAULT_BIN_COUNT, MIN_BIN_COUNT};
use crate::simkernel::{with_trace, CostLedger, SimError};
use crate::topo::{classify_outer, component_stats, fractional_distance, thickness, ComponentStats, NearCounting, ThicknessReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaChoice {
    Fixed(f64),
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub nodes: usize,
    pub seed: u64,
    pub radius: f64,
    pub alpha: AlphaChoice,
    pub grid: Vec<f64>,
    pub bin_count: usize,
    pub voronoi_tolerance: u32,
    pub min_component_size: usize,
    pub root_after_hops: u32,
    pub near_counting: NearCounting,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            nodes: 20_000,
            seed: 1,
            radius: 1.0,
            alpha: AlphaChoice::Sweep,
            grid: default_grid(),
            bin_count: DEFAULT_BIN_COUNT,
            voronoi_tolerance: DEFAULT_VORONOI_TOLERANCE,
            min_component_size: DEFAULT_MIN_COMPONENT_SIZE,
            root_after_hops: DEFAULT_ROOT_AFTER_HOPS,
            near_counting: NearCounting::Inclusive,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error("the deployed network is disconnected")]
    Disconnected,
    #[error("trace output failed: {0}")]
    Io(#[from] io::Error),
}

/// Message cost of one phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCost {
    pub phase: String,
    pub rounds: u64,
    pub broadcasts: u64,
    pub id_units: u64,
    pub max_node_broadcasts: u64,
    pub max_node_units: u64,
}

impl PhaseCost {
    fn new(phase: &str) -> Self {
        Self {
            phase: phase.to_string(),
            rounds: 0,
            broadcasts: 0,
            id_units: 0,
            max_node_broadcasts: 0,
            max_node_units: 0,
        }
    }
}

struct Costs {
    phases: Vec<PhaseCost>,
    current: Option<(PhaseCost, CostLedger)>,
}

impl Costs {
    fn add(&mut self, rounds: u32, ledger: &CostLedger) {
        let (phase, acc) = self.current.as_mut().expect("inside a phase");
        phase.rounds += u64::from(rounds);
        acc.absorb(ledger);
    }

    fn begin(&mut self, name: &str) {
        self.current = Some((PhaseCost::new(name), CostLedger::default()));
    }

    fn end(&mut self) {
        let (mut phase, acc) = self.current.take().expect("inside a phase");
        phase.broadcasts = acc.total_broadcasts;
        phase.id_units = acc.total_id_units;
        phase.max_node_broadcasts = acc.broadcasts_sent.iter().copied().max().unwrap_or(0);
        phase.max_node_units = acc.id_units_sent.iter().copied().max().unwrap_or(0);
        self.phases.push(phase);
    }
}

/// Everything a run produces, indexed like the graph.
#[derive(Debug)]
pub struct RunResult {
    pub config: PipelineConfig,
    pub graph: UnitDiskGraph,
    pub tree: SpanningTree,
    pub histogram: DegreeHistogram,
    pub density: DensityEstimate,
    pub sweep: Option<AlphaSweep>,
    pub alpha: f64,
    pub threshold: f64,
    pub classification: Classification,
    pub components: Components,
    pub distances: DistanceInfo,
    pub voronoi: Vec<bool>,
    pub loops: TokenLoops,
    pub stats: Vec<ComponentStats>,
    pub outer: Option<NodeId>,
    pub d_frac: Vec<Option<f64>>,
    pub thickness: Option<ThicknessReport>,
    pub costs: Vec<PhaseCost>,
    pub warnings: Vec<String>,
}

impl RunResult {
    pub fn mu_analytic(&self) -> f64 {
        self.density.mu_analytic
    }

    pub fn voronoi_count(&self) -> usize {
        self.voronoi.iter().filter(|&&v| v).count()
    }
}

struct Runner<'a> {
    costs: Costs,
    trace_dir: Option<&'a Path>,
}

impl Runner<'_> {
    fn phase<T>(&mut self, name: &str, f: impl FnOnce(&mut Costs) -> Result<T, PipelineError>) -> Result<T, PipelineError> {
        self.costs.begin(name);
        let out = match self.trace_dir {
            Some(dir) => {
                let file = File::create(dir.join(format!("trace_{name}.csv")))?;
                let costs = &mut self.costs;
                with_trace(Box::new(BufWriter::new(file)), || f(costs))??
            }
            None => f(&mut self.costs)?,
        };
        self.costs.end();
        Ok(out)
    }
}

fn check_config(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    if cfg.bin_count < MIN_BIN_COUNT {
        return Err(PipelineError::Config(format!("bin count must be at least {MIN_BIN_COUNT}")));
    }
    if !(cfg.radius > 0.0 && cfg.radius.is_finite()) {
        return Err(PipelineError::Config("radius must be positive".into()));
    }
    if cfg.nodes < 2 {
        return Err(PipelineError::Config("need at least two nodes".into()));
    }
    match cfg.alpha {
        AlphaChoice::Fixed(a) if !(a.is_finite() && a >= 0.0) => {
            return Err(PipelineError::Config("alpha must be a non-negative number".into()))
        }
        AlphaChoice::Sweep if cfg.grid.is_empty() || cfg.grid.windows(2).any(|w| w[0] >= w[1]) => {
            return Err(PipelineError::Config("alpha grid must be non-empty and strictly increasing".into()))
        }
        _ => {}
    }
    Ok(())
}

fn threshold_down(g: &UnitDiskGraph, tree: &SpanningTree, costs: &mut Costs, value: f64) -> Result<Vec<f64>, PipelineError> {
    let down = broadcast_down(g, tree, value, 1)?;
    costs.add(down.rounds_used, &down.ledger);
    Ok(down.values)
}

fn recognize(
    g: &UnitDiskGraph,
    tree: &SpanningTree,
    links: &[TreeLink],
    costs: &mut Costs,
    threshold: f64,
    min_size: usize,
) -> Result<(Classification, Components, ComponentTally), PipelineError> {
    let thresholds = threshold_down(g, tree, costs, threshold)?;
    let classes = classify(g, thresholds)?;
    costs.add(classes.rounds_used, &classes.ledger);
    let comps = form_components(g, &classes, min_size)?;
    costs.add(comps.rounds_used, &comps.ledger);
    let tallies = (0..g.len())
        .map(|i| ComponentTally {
            components: u64::from(comps.member[i].as_ref().is_some_and(|m| m.parent.is_none() && comps.is_recognized(m.component_size))),
            boundary_nodes: u64::from(classes.is_boundary(i)),
        })
        .collect();
    let count = aggregate(g, links, &ComponentCount, tallies)?;
    costs.add(count.rounds_used, &count.ledger);
    Ok((classes, comps, count.value))
}

/// Warnings for deployments too sparse for degree-based recognition.
pub fn density_warnings(region: &Region, cfg: &PipelineConfig) -> Vec<String> {
    let mut warnings = Vec::new();
    let mu = analytic_mu(cfg.nodes, cfg.radius, region.area());
    if cfg.nodes < 100 {
        warnings.push(format!("only {} nodes; the method assumes dense deployments", cfg.nodes));
    }
    if mu < 100.0 {
        warnings.push(format!("expected neighborhood size {mu:.1} is below 100"));
    }
    warnings
}

/// Samples the deployment and builds its graph. Positions are stored in
/// row-major cell order, which keeps neighbors close in memory.
pub fn deploy(region: &Region, cfg: &PipelineConfig) -> Result<UnitDiskGraph, PipelineError> {
    check_config(cfg)?;
    validate_region(region, DEFAULT_MIN_ANGLE)?;
    let mut positions = sample_uniform(region, cfg.nodes, cfg.seed)?;
    let cell = |p: &Point| ((p.y / cfg.radius).floor() as i64, (p.x / cfg.radius).floor() as i64);
    positions.sort_by_key(cell);
    let g = UnitDiskGraph::build_seeded(positions, cfg.radius, cfg.seed);
    if !g.is_connected() {
        return Err(PipelineError::Disconnected);
    }
    Ok(g)
}

struct Front<'a> {
    g: UnitDiskGraph,
    tree: SpanningTree,
    links: Vec<TreeLink>,
    histogram: DegreeHistogram,
    density: DensityEstimate,
    warnings: Vec<String>,
    run: Runner<'a>,
}

fn dump(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()
}

fn front<'a>(region: &Region, cfg: &PipelineConfig, trace_dir: Option<&'a Path>) -> Result<Front<'a>, PipelineError> {
    let g = deploy(region, cfg)?;
    let warnings = density_warnings(region, cfg);
    let mu_analytic = analytic_mu(cfg.nodes, cfg.radius, region.area());
    let mut run = Runner {
        costs: Costs {
            phases: Vec::new(),
            current: None,
        },
        trace_dir,
    };

    let tree = run.phase("tree", |c| {
        let t = build_tree(&g)?;
        c.add(t.rounds_used, &t.ledger);
        Ok(t)
    })?;
    let links = tree.links();
    if let Some(dir) = trace_dir {
        dump(&dir.join("edges.txt"), |w| g.write_edge_list(w))?;
        dump(&dir.join("positions.csv"), |w| g.write_positions_csv(w))?;
        dump(&dir.join("tree.csv"), |w| tree.write_csv(&g, w))?;
    }

    let (histogram, density) = run.phase("density", |c| {
        let degrees = (0..g.len()).map(|i| g.degree(i) as u64).collect();
        let delta = aggregate(&g, &links, &Max, degrees)?;
        c.add(delta.rounds_used, &delta.ledger);
        let delta = broadcast_down(&g, &tree, delta.value as usize, 1)?;
        c.add(delta.rounds_used, &delta.ledger);
        let local = (0..g.len())
            .map(|i| DegreeHistogram::from_degrees([g.degree(i)], delta.values[i], cfg.bin_count))
            .collect();
        let hist = aggregate(&g, &links, &HistogramMerge, local)?;
        c.add(hist.rounds_used, &hist.ledger);
        let density = estimate_mu(&hist.value, mu_analytic)?;
        let down = broadcast_down(&g, &tree, density.mu_est, 1)?;
        c.add(down.rounds_used, &down.ledger);
        Ok((hist.value, density))
    })?;
    Ok(Front {
        g,
        tree,
        links,
        histogram,
        density,
        warnings,
        run,
    })
}

fn sweep_phase(front: &mut Front<'_>, cfg: &PipelineConfig) -> Result<AlphaSweep, PipelineError> {
    let Front { g, tree, links, density, run, .. } = front;
    let mu_est = f64::from(density.mu_est);
    run.phase("sweep", |c| {
        let mut components = Vec::with_capacity(cfg.grid.len());
        let mut boundary = Vec::with_capacity(cfg.grid.len());
        for &alpha in &cfg.grid {
            let (_, _, tally) = recognize(g, tree, links, c, alpha * mu_est, cfg.min_component_size)?;
            components.push(tally.components);
            boundary.push(tally.boundary_nodes);
        }
        Ok(AlphaSweep::new(cfg.grid.clone(), components, boundary))
    })
}

/// Outcome of the phases up to the density estimate.
#[derive(Debug)]
pub struct DensityRun {
    pub graph: UnitDiskGraph,
    pub tree: SpanningTree,
    pub histogram: DegreeHistogram,
    pub density: DensityEstimate,
    pub costs: Vec<PhaseCost>,
    pub warnings: Vec<String>,
}

/// Deploys, builds the tree and estimates the density, nothing more.
pub fn run_density(region: &Region, cfg: &PipelineConfig) -> Result<DensityRun, PipelineError> {
    let f = front(region, cfg, None)?;
    Ok(DensityRun {
        graph: f.g,
        tree: f.tree,
        histogram: f.histogram,
        density: f.density,
        costs: f.run.costs.phases,
        warnings: f.warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub density: DensityEstimate,
    pub sweep: AlphaSweep,
    pub costs: Vec<PhaseCost>,
    pub warnings: Vec<String>,
}

/// Runs the phases through the alpha sweep, whatever `cfg.alpha` says.
pub fn run_sweep(region: &Region, cfg: &PipelineConfig, trace_dir: Option<&Path>) -> Result<SweepRun, PipelineError> {
    let mut f = front(region, cfg, trace_dir)?;
    let sweep = sweep_phase(&mut f, cfg)?;
    Ok(SweepRun {
        density: f.density,
        sweep,
        costs: f.run.costs.phases,
        warnings: f.warnings,
    })
}

/// Deploys `cfg.nodes` nodes uniformly in `region` and runs every phase.
/// With `trace_dir`, each phase writes `trace_<phase>.csv` there.
pub fn run_pipeline(region: &Region, cfg: &PipelineConfig, trace_dir: Option<&Path>) -> Result<RunResult, PipelineError> {
    let mut f = front(region, cfg, trace_dir)?;
    let sweep = match cfg.alpha {
        AlphaChoice::Fixed(_) => None,
        AlphaChoice::Sweep => Some(sweep_phase(&mut f, cfg)?),
    };
    let Front {
        g,
        tree,
        links,
        histogram,
        density,
        mut warnings,
        mut run,
    } = f;
    let mu_est = f64::from(density.mu_est);
    if sweep.as_ref().is_some_and(|s| s.plateau.is_none()) {
        warnings.push("alpha sweep found no plateau; using the default alpha".into());
    }
    let alpha = match (&cfg.alpha, &sweep) {
        (AlphaChoice::Fixed(a), _) => *a,
        (AlphaChoice::Sweep, Some(s)) => s.alpha_star,
        (AlphaChoice::Sweep, None) => unreachable!(),
    };
    let threshold = alpha * mu_est;

    let (classification, components) = run.phase("recognize", |c| {
        let (classes, comps, _) = recognize(&g, &tree, &links, c, threshold, cfg.min_component_size)?;
        Ok((classes, comps))
    })?;

    let (distances, voronoi) = run.phase("distance", |c| {
        let d = distance_flood(&g, &components)?;
        c.add(d.rounds_used, &d.ledger);
        let v = detect_voronoi(&d, cfg.voronoi_tolerance);
        Ok((d, v))
    })?;

    let loops = run.phase("token_loop", |c| {
        let l = token_loops(&g, &components, cfg.root_after_hops)?;
        c.add(l.rounds_used, &l.ledger);
        Ok(l)
    })?;
    for f in &loops.failures {
        warnings.push(f.to_string());
    }

    let (stats, outer) = run.phase("outer", |c| {
        let (stats, agg) = component_stats(&g, &links, &components, cfg.near_counting)?;
        c.add(agg.rounds_used, &agg.ledger);
        let outer = classify_outer(&stats);
        let down = broadcast_down(&g, &tree, outer, 1)?;
        c.add(down.rounds_used, &down.ledger);
        Ok((stats, outer))
    })?;

    let (d_frac, thick) = run.phase("thickness", |c| {
        let f = fractional_distance(&g, &distances.hop_dist, mu_est)?;
        c.add(f.rounds_used, &f.ledger);
        let (report, agg) = thickness(&g, &links, &distances.hop_dist, &f.d_frac)?;
        c.add(agg.rounds_used, &agg.ledger);
        Ok((f.d_frac, report))
    })?;

    Ok(RunResult {
        config: cfg.clone(),
        graph: g,
        tree,
        histogram,
        density,
        sweep,
        alpha,
        threshold,
        classification,
        components,
        distances,
        voronoi,
        loops,
        stats,
        outer,
        d_frac,
        thickness: thick,
        costs: run.costs.phases,
        warnings,
    })
}
