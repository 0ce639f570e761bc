//! Unit disk graphs over sampled node positions.
//!
//! Nodes are stored densely by index; every node also carries a unique
//! [`NodeId`]. Adjacency lists are sorted by neighbor ID, which is the order
//! in which the simulator delivers messages.

use std::collections::VecDeque;
use std::fmt;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::geometry::{seeded_rng, Point, STREAM_IDS};

/// Globally unique node identifier; fits in `O(log n)` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl NodeId {
    /// A seeded random permutation of `1..=n`, so IDs carry no positional
    /// information.
    pub fn permutation(n: usize, seed: u64) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = (1..=n as u32).map(NodeId).collect();
        ids.shuffle(&mut seeded_rng(seed, STREAM_IDS));
        ids
    }
}

/// Hop distance returned for nodes no source can reach.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct UnitDiskGraph {
    radius: f64,
    ids: Vec<NodeId>,
    positions: Vec<Point>,
    offsets: Vec<usize>,
    neighbor_index: Vec<u32>,
    neighbor_ids: Vec<NodeId>,
    index_of: Vec<u32>,
    order_by_id: Vec<u32>,
}

impl UnitDiskGraph {
    /// Builds the graph with an edge between every pair at distance `<= radius`.
    ///
    /// Candidate pairs come from a uniform grid with cell size `radius`, so the
    /// expected cost is `O(n * mu)`.
    pub fn build(positions: Vec<Point>, ids: Vec<NodeId>, radius: f64) -> Self {
        assert_eq!(positions.len(), ids.len(), "one ID per position");
        assert!(radius > 0.0, "radius must be positive");
        let n = positions.len();

        let max_id = ids.iter().map(|id| id.0 as usize).max().unwrap_or(0);
        let mut index_of = vec![u32::MAX; max_id + 1];
        for (i, id) in ids.iter().enumerate() {
            assert_eq!(index_of[id.0 as usize], u32::MAX, "duplicate node ID {id}");
            index_of[id.0 as usize] = i as u32;
        }

        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n];
        if n > 0 {
            let (mut lo_x, mut lo_y) = (f64::INFINITY, f64::INFINITY);
            let (mut hi_x, mut hi_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for p in &positions {
                lo_x = lo_x.min(p.x);
                lo_y = lo_y.min(p.y);
                hi_x = hi_x.max(p.x);
                hi_y = hi_y.max(p.y);
            }
            let cols = (((hi_x - lo_x) / radius).floor() as usize) + 1;
            let rows = (((hi_y - lo_y) / radius).floor() as usize) + 1;
            let cell_of = |p: &Point| {
                let cx = (((p.x - lo_x) / radius).floor() as usize).min(cols - 1);
                let cy = (((p.y - lo_y) / radius).floor() as usize).min(rows - 1);
                (cx, cy)
            };
            let mut cell_start = vec![0usize; cols * rows + 1];
            for p in &positions {
                let (cx, cy) = cell_of(p);
                cell_start[cy * cols + cx + 1] += 1;
            }
            for c in 0..cols * rows {
                cell_start[c + 1] += cell_start[c];
            }
            let mut fill = cell_start.clone();
            let mut members = vec![0u32; n];
            for (i, p) in positions.iter().enumerate() {
                let (cx, cy) = cell_of(p);
                let c = cy * cols + cx;
                members[fill[c]] = i as u32;
                fill[c] += 1;
            }

            let r2 = radius * radius;
            for (i, p) in positions.iter().enumerate() {
                let (cx, cy) = cell_of(p);
                for ny in cy.saturating_sub(1)..=(cy + 1).min(rows - 1) {
                    for nx in cx.saturating_sub(1)..=(cx + 1).min(cols - 1) {
                        let c = ny * cols + nx;
                        for &j in &members[cell_start[c]..cell_start[c + 1]] {
                            if j as usize != i && p.dist_sq(positions[j as usize]) <= r2 {
                                lists[i].push(j);
                            }
                        }
                    }
                }
            }
        }

        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbor_index = Vec::new();
        let mut neighbor_ids = Vec::new();
        for list in &mut lists {
            list.sort_unstable_by_key(|&j| ids[j as usize]);
            neighbor_index.extend_from_slice(list);
            neighbor_ids.extend(list.iter().map(|&j| ids[j as usize]));
            offsets.push(neighbor_index.len());
        }

        let mut order_by_id: Vec<u32> = (0..n as u32).collect();
        order_by_id.sort_unstable_by_key(|&i| ids[i as usize]);

        Self {
            radius,
            ids,
            positions,
            offsets,
            neighbor_index,
            neighbor_ids,
            index_of,
            order_by_id,
        }
    }

    /// Builds the graph with IDs drawn as a seeded permutation of `1..=n`.
    pub fn build_seeded(positions: Vec<Point>, radius: f64, seed: u64) -> Self {
        let ids = NodeId::permutation(positions.len(), seed);
        Self::build(positions, ids, radius)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn id(&self, index: usize) -> NodeId {
        self.ids[index]
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn index(&self, id: NodeId) -> Option<usize> {
        self.index_of
            .get(id.0 as usize)
            .copied()
            .filter(|&i| i != u32::MAX)
            .map(|i| i as usize)
    }

    /// Node position. Oracle-side only; protocols never see this.
    pub fn position(&self, index: usize) -> Point {
        self.positions[index]
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    /// Neighbor indices, sorted by neighbor ID.
    pub fn neighbors(&self, index: usize) -> &[u32] {
        &self.neighbor_index[self.offsets[index]..self.offsets[index + 1]]
    }

    /// Neighbor IDs in ascending order.
    pub fn neighbor_ids(&self, index: usize) -> &[NodeId] {
        &self.neighbor_ids[self.offsets[index]..self.offsets[index + 1]]
    }

    /// Node indices in ascending ID order.
    pub fn order_by_id(&self) -> &[u32] {
        &self.order_by_id
    }

    pub fn degree(&self, index: usize) -> usize {
        self.offsets[index + 1] - self.offsets[index]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.len()).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.neighbor_index.len() / 2
    }

    pub fn histogram(&self, bin_count: usize) -> DegreeHistogram {
        DegreeHistogram::from_degrees((0..self.len()).map(|i| self.degree(i)), self.max_degree(), bin_count)
    }

    pub fn is_connected(&self) -> bool {
        if self.len() <= 1 {
            return true;
        }
        hop_bfs(self, &[0]).iter().all(|&d| d != UNREACHABLE)
    }

    /// Writes `u v` per undirected edge with `u < v` by ID, sorted.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for &i in &self.order_by_id {
            let u = self.ids[i as usize];
            for &v in self.neighbor_ids(i as usize) {
                if u < v {
                    writeln!(out, "{u} {v}")?;
                }
            }
        }
        Ok(())
    }

    /// Writes `id,x,y` rows in ID order.
    pub fn write_positions_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "id,x,y")?;
        for &i in &self.order_by_id {
            let p = self.positions[i as usize];
            writeln!(out, "{},{},{}", self.ids[i as usize], p.x, p.y)?;
        }
        Ok(())
    }
}

/// Quantized census of neighborhood sizes.
///
/// Bin `i` is centered on degree `i * bin_width` with
/// `bin_width = delta / (bin_count - 1)`, so the first bin is centered on 0 and
/// the last on `delta`. A degree `d` falls in bin `round(d / bin_width)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeHistogram {
    pub delta: usize,
    pub counts: Vec<u64>,
}

pub const DEFAULT_BIN_COUNT: usize = 64;
pub const MIN_BIN_COUNT: usize = 16;

impl DegreeHistogram {
    pub fn empty(delta: usize, bin_count: usize) -> Self {
        assert!(bin_count >= 2, "need at least two bins");
        Self {
            delta,
            counts: vec![0; bin_count],
        }
    }

    pub fn from_degrees(degrees: impl IntoIterator<Item = usize>, delta: usize, bin_count: usize) -> Self {
        let mut h = Self::empty(delta, bin_count);
        for d in degrees {
            h.add(d);
        }
        h
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.delta as f64 / (self.counts.len() - 1) as f64
    }

    pub fn bin_of(&self, degree: usize) -> usize {
        if self.delta == 0 {
            return 0;
        }
        let bin = (degree as f64 / self.bin_width() + 0.5).floor() as usize;
        bin.min(self.counts.len() - 1)
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width()
    }

    pub fn add(&mut self, degree: usize) {
        let b = self.bin_of(degree);
        self.counts[b] += 1;
    }

    pub fn merge(&mut self, other: &DegreeHistogram) {
        assert_eq!(self.counts.len(), other.counts.len(), "bin counts differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Multi-source BFS hop counts, indexed by node; [`UNREACHABLE`] if no path.
pub fn hop_bfs(g: &UnitDiskGraph, sources: &[usize]) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; g.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if dist[s] != 0 {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        let next = dist[u] + 1;
        for &v in g.neighbors(u) {
            let v = v as usize;
            if dist[v] == UNREACHABLE {
                dist[v] = next;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Analytic expected degree of a node whose disk lies inside the region.
pub fn analytic_mu(n: usize, radius: f64, area: f64) -> f64 {
    (n as f64 - 1.0) * std::f64::consts::PI * radius * radius / area
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<NodeId> {
        (1..=n as u32).map(NodeId).collect()
    }

    #[test]
    fn inclusive_radius() {
        let g = UnitDiskGraph::build(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)],
            ids(2),
            1.0,
        );
        assert_eq!(g.neighbor_ids(0), &[NodeId(2)]);
        let g = UnitDiskGraph::build(
            vec![Point::new(0.0, 0.0), Point::new(1.0 + 1e-9, 0.0)],
            ids(2),
            1.0,
        );
        assert_eq!(g.degree(0), 0);
        assert!(!g.is_connected());
    }

    #[test]
    fn degrees() {
        let mut pts = vec![Point::new(10.0, 10.0)];
        pts.extend(std::iter::repeat_n(Point::new(0.0, 0.0), 5));
        let g = UnitDiskGraph::build(pts, ids(6), 1.0);
        assert_eq!(g.degree(0), 0);
        assert_eq!(g.degree(1), 4);
        assert_eq!(g.max_degree(), 4);
    }

    #[test]
    fn path_bfs() {
        let g = UnitDiskGraph::build(
            vec![Point::new(0.0, 0.0), Point::new(0.9, 0.0), Point::new(1.8, 0.0)],
            ids(3),
            1.0,
        );
        assert_eq!(hop_bfs(&g, &[0]), vec![0, 1, 2]);
        assert!(g.is_connected());
    }

    #[test]
    fn singleton_is_connected() {
        let g = UnitDiskGraph::build(vec![Point::new(0.0, 0.0)], ids(1), 1.0);
        assert!(g.is_connected());
    }

    #[test]
    fn histogram_single_value() {
        let h = DegreeHistogram::from_degrees(std::iter::repeat_n(37, 100), 37, 64);
        assert_eq!(h.total(), 100);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts[63], 100);
        assert_eq!(h.bin_center(63), 37.0);
    }

    #[test]
    fn edge_list_and_positions() {
        let g = UnitDiskGraph::build(
            vec![Point::new(0.0, 0.0), Point::new(0.5, 0.0), Point::new(5.0, 0.0)],
            vec![NodeId(3), NodeId(1), NodeId(2)],
            1.0,
        );
        let mut edges = Vec::new();
        g.write_edge_list(&mut edges).unwrap();
        assert_eq!(String::from_utf8(edges).unwrap(), "1 3\n");
        let mut csv = Vec::new();
        g.write_positions_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "id,x,y\n1,0.5,0\n2,5,0\n3,0,0\n");
    }

    fn brute_force(pts: &[Point], r: f64) -> Vec<Vec<usize>> {
        (0..pts.len())
            .map(|i| {
                (0..pts.len())
                    .filter(|&j| j != i && pts[i].dist_sq(pts[j]) <= r * r)
                    .collect()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            raw in prop::collection::vec((0.0f64..6.0, 0.0f64..6.0), 2..80),
            seed in 0u64..1000,
        ) {
            let pts: Vec<Point> = raw.iter().map(|&(x, y)| Point::new(x, y)).collect();
            let g = UnitDiskGraph::build_seeded(pts.clone(), 1.0, seed);
            let expected = brute_force(&pts, 1.0);
            for i in 0..pts.len() {
                let mut got: Vec<usize> = g.neighbors(i).iter().map(|&j| j as usize).collect();
                got.sort_unstable();
                prop_assert_eq!(&got, &expected[i]);
                // Sorted by ID, symmetric, irreflexive.
                prop_assert!(g.neighbor_ids(i).windows(2).all(|w| w[0] < w[1]));
                for &j in g.neighbors(i) {
                    prop_assert!(g.neighbors(j as usize).contains(&(i as u32)));
                }
            }
            prop_assert_eq!(g.histogram(16).total(), pts.len() as u64);
        }

        #[test]
        fn insertion_order_does_not_matter(
            raw in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 2..60),
        ) {
            let pts: Vec<Point> = raw.iter().map(|&(x, y)| Point::new(x, y)).collect();
            let ids: Vec<NodeId> = (1..=pts.len() as u32).map(NodeId).collect();
            let a = UnitDiskGraph::build(pts.clone(), ids.clone(), 1.0);
            let b = UnitDiskGraph::build(
                pts.iter().rev().copied().collect(),
                ids.iter().rev().copied().collect(),
                1.0,
            );
            let mut ea = Vec::new();
            let mut eb = Vec::new();
            a.write_edge_list(&mut ea).unwrap();
            b.write_edge_list(&mut eb).unwrap();
            prop_assert_eq!(ea, eb);
        }
    }
}
