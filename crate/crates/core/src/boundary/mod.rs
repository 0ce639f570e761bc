//! Boundary recognition from neighborhood sizes.
//!
//! Nodes whose degree is at most `alpha * mu_est` declare themselves boundary
//! nodes. Boundary nodes within two hops of each other are grouped into
//! components, every node learns its hop distance to the two nearest
//! components, and a token walks each component to lay a closed loop through
//! it. `alpha` is calibrated by sweeping it and looking for a plateau in the
//! number of components.

mod components;
mod distance;
mod token;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::{DegreeHistogram, NodeId, UnitDiskGraph};
use crate::simkernel::{run_protocol, CostLedger, Envelope, Message, NodeCtx, Outbox, Protocol, SimError};

pub use components::{form_components, ComponentMember, Components, DEFAULT_MIN_COMPONENT_SIZE};
pub use distance::{detect_voronoi, distance_flood, DistanceInfo, DEFAULT_VORONOI_TOLERANCE};
pub use token::{token_loops, TokenLoop, TokenLoops, DEFAULT_ROOT_AFTER_HOPS};

pub const DEFAULT_ALPHA: f64 = 0.77;

pub fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("degree histogram is degenerate: no mass above delta/2 (delta = {delta})")]
    DegenerateHistogram { delta: usize },
    #[error("alpha sweep shows no plateau")]
    NoPlateau,
    #[error("token loop of component {component} failed: backtracking exhausted the component")]
    LoopFailure { component: NodeId },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub mu_est: u32,
    pub mu_analytic: f64,
    pub delta: u32,
}

/// Modal neighborhood size among bins centered above `delta / 2`; ties go to
/// the higher bin. The interior peak sits near `mu` while boundary nodes pile
/// up near `mu / 2`.
pub fn estimate_mu(histogram: &DegreeHistogram, mu_analytic: f64) -> Result<DensityEstimate, BoundaryError> {
    let delta = histogram.delta;
    if delta < 4 {
        return Err(BoundaryError::DegenerateHistogram { delta });
    }
    let half = delta as f64 / 2.0;
    let mut best: Option<usize> = None;
    for (bin, &count) in histogram.counts.iter().enumerate() {
        if histogram.bin_center(bin) <= half || count == 0 {
            continue;
        }
        if best.is_none_or(|b| count >= histogram.counts[b]) {
            best = Some(bin);
        }
    }
    let bin = best.ok_or(BoundaryError::DegenerateHistogram { delta })?;
    Ok(DensityEstimate {
        mu_est: histogram.bin_center(bin).round() as u32,
        mu_analytic,
        delta: delta as u32,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Boundary,
    NearBoundary,
    Interior,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Boundary => "boundary",
            NodeClass::NearBoundary => "near_boundary",
            NodeClass::Interior => "interior",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Announce;

impl Message for Announce {
    fn kind(&self) -> u8 {
        0
    }
    fn kind_name(&self) -> &'static str {
        "boundary_announce"
    }
    fn size_units(&self) -> usize {
        1
    }
}

struct Classify;

#[derive(Debug, Clone)]
struct ClassifyNode {
    class: NodeClass,
    boundary_neighbors: Vec<NodeId>,
}

impl Protocol for Classify {
    type Input = f64;
    type State = ClassifyNode;
    type Msg = Announce;

    fn init(&self, ctx: &NodeCtx<'_>, threshold: f64, out: &mut Outbox<Announce>) -> ClassifyNode {
        let class = if ctx.degree() as f64 <= threshold {
            out.broadcast(Announce);
            NodeClass::Boundary
        } else {
            NodeClass::Interior
        };
        ClassifyNode {
            class,
            boundary_neighbors: Vec::new(),
        }
    }

    fn on_round(&self, _: &NodeCtx<'_>, st: &mut ClassifyNode, inbox: &[Envelope<'_, Announce>], _: &mut Outbox<Announce>) {
        st.boundary_neighbors.extend(inbox.iter().map(|e| e.from));
        if st.class != NodeClass::Boundary && !st.boundary_neighbors.is_empty() {
            st.class = NodeClass::NearBoundary;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub class: Vec<NodeClass>,
    /// Boundary neighbors of each node, sorted by ID.
    pub boundary_neighbors: Vec<Vec<NodeId>>,
    pub ledger: CostLedger,
    pub rounds_used: u32,
}

impl Classification {
    pub fn is_boundary(&self, index: usize) -> bool {
        self.class[index] == NodeClass::Boundary
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.class.iter().filter(|&&c| c == class).count()
    }
}

/// Each node compares its degree with the threshold it received; boundary
/// nodes announce themselves once.
pub fn classify(g: &UnitDiskGraph, thresholds: Vec<f64>) -> Result<Classification, SimError> {
    let run = run_protocol(g, &Classify, thresholds)?;
    let (class, boundary_neighbors) = run.states.into_iter().map(|s| (s.class, s.boundary_neighbors)).unzip();
    Ok(Classification {
        class,
        boundary_neighbors,
        ledger: run.ledger,
        rounds_used: run.rounds_used,
    })
}

/// `0.05, 0.10, ..., 1.30`.
pub fn default_grid() -> Vec<f64> {
    (1..=26).map(|k| (k * 5) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub count: u64,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweep {
    pub grid: Vec<f64>,
    pub component_counts: Vec<u64>,
    pub boundary_counts: Vec<u64>,
    pub plateau: Option<Plateau>,
    pub alpha_star: f64,
}

impl AlphaSweep {
    /// Builds the sweep record; without a plateau `alpha_star` falls back to
    /// [`default_alpha`].
    pub fn new(grid: Vec<f64>, component_counts: Vec<u64>, boundary_counts: Vec<u64>) -> Self {
        let plateau = find_plateau(&grid, &component_counts).ok();
        let alpha_star = plateau
            .as_ref()
            .map_or(DEFAULT_ALPHA, |p| (p.alpha_lo + p.alpha_hi) / 2.0);
        Self {
            grid,
            component_counts,
            boundary_counts,
            plateau,
            alpha_star,
        }
    }
}

/// Longest maximal run of constant positive count (ties to smaller alpha).
///
/// A run of count 1 that reaches the end of the grid is the whole network
/// collapsing into one component, so it is skipped whenever another run of
/// length at least 2 exists.
pub fn find_plateau(grid: &[f64], counts: &[u64]) -> Result<Plateau, BoundaryError> {
    assert_eq!(grid.len(), counts.len());
    assert!(grid.windows(2).all(|w| w[0] < w[1]), "grid must be strictly increasing");
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=counts.len() {
        if i == counts.len() || counts[i] != counts[start] {
            if counts[start] > 0 && i - start >= 2 {
                runs.push((start, i - 1));
            }
            start = i;
        }
    }
    if runs.len() > 1 {
        let &(lo, hi) = runs.last().unwrap();
        if hi == counts.len() - 1 && counts[lo] == 1 {
            runs.pop();
        }
    }
    let mut best: Option<(usize, usize)> = None;
    for (lo, hi) in runs {
        if best.is_none_or(|(bl, bh)| hi - lo > bh - bl) {
            best = Some((lo, hi));
        }
    }
    let (lo, hi) = best.ok_or(BoundaryError::NoPlateau)?;
    Ok(Plateau {
        alpha_lo: grid[lo],
        alpha_hi: grid[hi],
        count: counts[lo],
        len: hi - lo + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simkernel::tests::path_graph;

    #[test]
    fn mu_of_uniform_degrees() {
        for d in [4usize, 17, 100, 181] {
            let h = DegreeHistogram::from_degrees(vec![d; 50], d, 64);
            assert_eq!(estimate_mu(&h, d as f64).unwrap().mu_est, d as u32);
        }
    }

    #[test]
    fn mu_ignores_boundary_peak() {
        let mut degrees = vec![90; 500];
        degrees.extend(vec![180; 300]);
        degrees.push(230);
        let h = DegreeHistogram::from_degrees(degrees, 230, 64);
        let est = estimate_mu(&h, 180.0).unwrap();
        assert!((est.mu_est as f64 - 180.0).abs() <= h.bin_width() / 2.0 + 0.5);
        assert_eq!(est.delta, 230);
    }

    #[test]
    fn mu_tie_goes_up() {
        let h = DegreeHistogram {
            delta: 10,
            counts: vec![0, 0, 0, 0, 0, 0, 5, 0, 5, 0, 0],
        };
        assert_eq!(estimate_mu(&h, 8.0).unwrap().mu_est, 8);
    }

    #[test]
    fn degenerate_histograms() {
        let h = DegreeHistogram::from_degrees(vec![2, 3], 3, 16);
        assert!(matches!(estimate_mu(&h, 3.0), Err(BoundaryError::DegenerateHistogram { .. })));
        let h = DegreeHistogram {
            delta: 10,
            counts: vec![4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        };
        assert!(matches!(estimate_mu(&h, 3.0), Err(BoundaryError::DegenerateHistogram { .. })));
    }

    #[test]
    fn classify_is_inclusive() {
        // Path degrees: 1, 2, 2, 2, 1.
        let g = path_graph(5);
        let c = classify(&g, vec![1.0; 5]).unwrap();
        assert_eq!(
            c.class,
            vec![
                NodeClass::Boundary,
                NodeClass::NearBoundary,
                NodeClass::Interior,
                NodeClass::NearBoundary,
                NodeClass::Boundary
            ]
        );
        assert_eq!(c.boundary_neighbors[1], vec![NodeId(1)]);
        assert_eq!(c.ledger.total_broadcasts, 2);

        let none = classify(&g, vec![0.0; 5]).unwrap();
        assert_eq!(none.count(NodeClass::Interior), 5);
        assert_eq!(none.ledger.total_broadcasts, 0);
    }

    #[test]
    fn plateau_selection() {
        let grid = default_grid();
        assert_eq!(grid.len(), 26);
        assert_eq!(grid[0], 0.05);
        assert_eq!(grid[25], 1.3);
        let mut counts = vec![0u64; 26];
        counts[8..11].copy_from_slice(&[5, 12, 9]);
        counts[11..15].fill(4);
        counts[15..17].copy_from_slice(&[6, 3]);
        counts[17..].fill(1);
        let p = find_plateau(&grid, &counts).unwrap();
        assert_eq!((p.alpha_lo, p.alpha_hi, p.count, p.len), (0.6, 0.75, 4, 4));
        let sweep = AlphaSweep::new(grid.clone(), counts, vec![0; 26]);
        assert!((sweep.alpha_star - 0.675).abs() < 1e-12);

        let mut counts = vec![0u64; 26];
        counts[10..13].fill(2);
        counts[13..16].fill(3);
        let p = find_plateau(&grid, &counts).unwrap();
        assert_eq!(p.count, 2);

        let only_collapse: Vec<u64> = (0..26).map(|i| u64::from(i >= 20)).collect();
        assert_eq!(find_plateau(&grid, &only_collapse).unwrap().count, 1);

        let noisy: Vec<u64> = (0..26).map(|i| i % 2 + 1).collect();
        assert!(matches!(find_plateau(&grid, &noisy), Err(BoundaryError::NoPlateau)));
        let sweep = AlphaSweep::new(grid, noisy, vec![0; 26]);
        assert_eq!(sweep.alpha_star, default_alpha());
    }
}
