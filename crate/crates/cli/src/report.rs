//! Output files of a run. Every file is a pure function of the run, so equal
//! configurations give byte-identical files.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use swarmtopo::boundary::{AlphaSweep, NodeClass, Plateau};
use swarmtopo::netgraph::{NodeId, UNREACHABLE};
use swarmtopo::pipeline::{PhaseCost, PipelineConfig, RunResult};
use swarmtopo::topo::ThicknessReport;

pub const SCHEMA_VERSION: u32 = 1;

pub const SUMMARY_FILE: &str = "summary.json";
pub const NODES_FILE: &str = "nodes.csv";
pub const CLASSIFICATION_FILE: &str = "classification.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const COSTS_FILE: &str = "costs.csv";
pub const LOOPS_FILE: &str = "loops.csv";

/// Final state of one node, as the network knows it, plus its position for
/// scoring against the geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub degree: usize,
    pub class: NodeClass,
    /// Recognized component the node belongs to.
    pub component: Option<NodeId>,
    pub boundary_id: Option<NodeId>,
    pub hop_dist: Option<u32>,
    pub runner_up_id: Option<NodeId>,
    pub runner_up_hop: Option<u32>,
    pub voronoi: bool,
    pub d_frac: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassificationRow {
    id: NodeId,
    class: NodeClass,
    boundary_id: Option<NodeId>,
    hop_dist: Option<u32>,
    voronoi: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SweepRow {
    alpha: f64,
    component_count: u64,
    boundary_node_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LoopRow {
    component: NodeId,
    position: usize,
    node: NodeId,
    relay: bool,
}

/// Node reports ordered by ID.
pub fn node_reports(r: &RunResult) -> Vec<NodeReport> {
    let g = &r.graph;
    g.order_by_id()
        .iter()
        .map(|&i| {
            let i = i as usize;
            let p = g.position(i);
            let hop = r.distances.hop_dist[i];
            let second = r.distances.runner_up[i];
            NodeReport {
                id: g.id(i),
                x: p.x,
                y: p.y,
                degree: g.degree(i),
                class: r.classification.class[i],
                component: r.components.recognized_component(i),
                boundary_id: r.distances.boundary_id[i],
                hop_dist: (hop != UNREACHABLE).then_some(hop),
                runner_up_id: second.map(|(_, c)| c),
                runner_up_hop: second.map(|(d, _)| d),
                voronoi: r.voronoi[i],
                d_frac: r.d_frac[i],
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub id: NodeId,
    pub size: u64,
    pub near_size: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSummary {
    pub component: NodeId,
    pub steps: usize,
    pub walk_length: usize,
    pub closed: bool,
    /// Members neither on the walk nor adjacent to it.
    pub uncovered: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub boundary: usize,
    pub near_boundary: usize,
    pub interior: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub region: String,
    pub config: PipelineConfig,
    pub edges: usize,
    pub max_degree: usize,
    pub mu_analytic: f64,
    pub mu_est: u32,
    pub delta: u32,
    pub plateau: Option<Plateau>,
    pub alpha_star: f64,
    pub threshold: f64,
    pub classes: ClassCounts,
    pub components: Vec<ComponentSummary>,
    pub outer_id: Option<NodeId>,
    pub thickness: Option<ThicknessReport>,
    pub thickness_estimate: Option<f64>,
    pub voronoi_count: usize,
    pub loops: Vec<LoopSummary>,
    pub tree_rounds: u32,
    pub warnings: Vec<String>,
}

fn loop_summaries(r: &RunResult) -> Vec<LoopSummary> {
    let g = &r.graph;
    r.loops
        .loops
        .iter()
        .map(|l| {
            let walk = l.walk();
            let mut near = vec![false; g.len()];
            for id in &walk {
                let i = g.index(*id).expect("walk nodes exist");
                near[i] = true;
                for &u in g.neighbors(i) {
                    near[u as usize] = true;
                }
            }
            let uncovered = (0..g.len())
                .filter(|&i| r.components.recognized_component(i) == Some(l.component) && !near[i])
                .count();
            LoopSummary {
                component: l.component,
                steps: l.steps(),
                walk_length: walk.len(),
                closed: l.holders.first() == Some(&l.component) && l.holders.last() == Some(&l.component),
                uncovered,
                excluded: l.excluded.len(),
            }
        })
        .collect()
}

pub fn summarize(r: &RunResult, region: &str) -> Summary {
    let count = |c| r.classification.class.iter().filter(|&&x| x == c).count();
    Summary {
        schema: SCHEMA_VERSION,
        region: region.to_string(),
        config: r.config.clone(),
        edges: r.graph.edge_count(),
        max_degree: r.graph.max_degree(),
        mu_analytic: r.density.mu_analytic,
        mu_est: r.density.mu_est,
        delta: r.density.delta,
        plateau: r.sweep.as_ref().and_then(|s| s.plateau.clone()),
        alpha_star: r.alpha,
        threshold: r.threshold,
        classes: ClassCounts {
            boundary: count(NodeClass::Boundary),
            near_boundary: count(NodeClass::NearBoundary),
            interior: count(NodeClass::Interior),
        },
        components: r
            .stats
            .iter()
            .map(|s| ComponentSummary {
                id: s.component_id,
                size: s.boundary_count,
                near_size: s.near_count,
                ratio: s.ratio,
            })
            .collect(),
        outer_id: r.outer,
        thickness: r.thickness,
        thickness_estimate: r.thickness.map(|t| t.thickness_estimate),
        voronoi_count: r.voronoi_count(),
        loops: loop_summaries(r),
        tree_rounds: r.tree.rounds_used,
        warnings: r.warnings.clone(),
    }
}

fn csv_writer(path: &Path) -> io::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
}

pub fn write_sweep(path: &Path, sweep: &AlphaSweep) -> io::Result<()> {
    write_rows(
        path,
        sweep.grid.iter().zip(&sweep.component_counts).zip(&sweep.boundary_counts).map(|((&alpha, &c), &b)| SweepRow {
            alpha,
            component_count: c,
            boundary_node_count: b,
        }),
    )
}

pub fn write_costs(path: &Path, costs: &[PhaseCost]) -> io::Result<()> {
    write_rows(path, costs)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Writes every output file of a run into `dir` and returns the summary.
pub fn write_run(dir: &Path, r: &RunResult, region: &str) -> io::Result<Summary> {
    fs::create_dir_all(dir)?;
    let nodes = node_reports(r);
    write_rows(
        &dir.join(CLASSIFICATION_FILE),
        nodes.iter().map(|n| ClassificationRow {
            id: n.id,
            class: n.class,
            boundary_id: n.boundary_id,
            hop_dist: n.hop_dist,
            voronoi: n.voronoi,
        }),
    )?;
    write_rows(&dir.join(NODES_FILE), &nodes)?;
    if let Some(sweep) = &r.sweep {
        write_sweep(&dir.join(SWEEP_FILE), sweep)?;
    }
    write_costs(&dir.join(COSTS_FILE), &r.costs)?;
    write_rows(
        &dir.join(LOOPS_FILE),
        r.loops.loops.iter().flat_map(|l| {
            let mut rows = vec![(l.holders[0], false)];
            for (k, h) in l.holders[1..].iter().enumerate() {
                if let Some(relay) = l.relays[k] {
                    rows.push((relay, true));
                }
                rows.push((*h, false));
            }
            rows.into_iter().enumerate().map(|(position, (node, relay))| LoopRow {
                component: l.component,
                position,
                node,
                relay,
            })
        }),
    )?;
    let summary = summarize(r, region);
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

pub fn read_summary(dir: &Path) -> io::Result<Summary> {
    let text = fs::read_to_string(dir.join(SUMMARY_FILE))?;
    serde_json::from_str(&text).map_err(io::Error::from)
}

pub fn read_nodes(dir: &Path) -> io::Result<Vec<NodeReport>> {
    let mut r = csv::Reader::from_path(dir.join(NODES_FILE)).map_err(io::Error::from)?;
    r.deserialize().map(|row| row.map_err(io::Error::from)).collect()
}
