//! Topological parameters from recognized boundaries.
//!
//! The ratio of near-boundary to boundary nodes separates the outer boundary
//! from holes: a strip along the outside of a convex hole is wider than the
//! hole's length suggests, the strip inside the outer boundary narrower.
//! Fractional distances refine hop counts near the boundary by inverting the
//! expected neighborhood fraction of a node next to a straight boundary, and
//! the node of maximum refined distance estimates the region's thickness.

use serde::{Deserialize, Serialize};

use crate::boundary::Components;
use crate::convergetree::{aggregate, AggregateOp, Aggregated, TreeLink};
use crate::geometry::invert_visibility;
use crate::netgraph::{NodeId, UnitDiskGraph, UNREACHABLE};
use crate::simkernel::{run_protocol, CostLedger, Envelope, Message, NodeCtx, Outbox, Protocol, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub component_id: NodeId,
    pub boundary_count: u64,
    pub near_count: u64,
    pub ratio: f64,
}

impl ComponentStats {
    pub fn new(component_id: NodeId, boundary_count: u64, near_count: u64) -> Self {
        Self {
            component_id,
            boundary_count,
            near_count,
            ratio: near_count as f64 / boundary_count as f64,
        }
    }
}

/// Whether a component's own members count towards its near set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NearCounting {
    #[default]
    Inclusive,
    Exclusive,
}

/// Per-component `(members, near)` counts keyed by component ID.
pub struct KeyedCounts;

impl AggregateOp for KeyedCounts {
    type Value = Vec<(NodeId, u64, u64)>;

    fn combine(&self, acc: &mut Self::Value, other: &Self::Value) {
        for &(c, d, n) in other {
            match acc.binary_search_by_key(&c, |e| e.0) {
                Ok(k) => {
                    acc[k].1 += d;
                    acc[k].2 += n;
                }
                Err(k) => acc.insert(k, (c, d, n)),
            }
        }
    }

    fn payload_units(&self, value: &Self::Value) -> usize {
        (3 * value.len()).max(1)
    }
}

/// Per-component counts plus the convergecast that produced them.
pub type StatsRun = (Vec<ComponentStats>, Aggregated<Vec<(NodeId, u64, u64)>>);

/// Counts members and near nodes of every recognized component with one
/// convergecast over the global tree. A non-member counts as near to the
/// component of its boundary neighbors; it cannot border two components,
/// since two such members would be two hops apart.
pub fn component_stats(
    g: &UnitDiskGraph,
    links: &[TreeLink],
    comps: &Components,
    counting: NearCounting,
) -> Result<StatsRun, SimError> {
    let own = u64::from(counting == NearCounting::Inclusive);
    let values = (0..g.len())
        .map(|i| {
            if let Some(c) = comps.recognized_component(i) {
                return vec![(c, 1, own)];
            }
            if comps.member[i].is_some() {
                return Vec::new();
            }
            let recognized = |c: &NodeId| comps.sizes.binary_search_by_key(c, |e| e.0).is_ok_and(|k| comps.is_recognized(comps.sizes[k].1));
            match comps.neighbor_components[i].iter().map(|e| e.1).find(recognized) {
                Some(c) => vec![(c, 0, 1)],
                None => Vec::new(),
            }
        })
        .collect();
    let agg = aggregate(g, links, &KeyedCounts, values)?;
    let stats = agg.value.iter().map(|&(c, d, n)| ComponentStats::new(c, d, n)).collect();
    Ok((stats, agg))
}

/// Component with the smallest near/boundary ratio; ties go to the larger
/// component, then to the smaller ID.
pub fn classify_outer(stats: &[ComponentStats]) -> Option<NodeId> {
    stats
        .iter()
        .min_by(|a, b| {
            a.ratio
                .total_cmp(&b.ratio)
                .then(b.boundary_count.cmp(&a.boundary_count))
                .then(a.component_id.cmp(&b.component_id))
        })
        .map(|s| s.component_id)
}

/// Distance, in units of R, of a node next to a straight boundary whose
/// neighborhood holds `degree` nodes out of an expected `mu_est`.
pub fn anchor_distance(degree: usize, mu_est: f64) -> f64 {
    let r = (degree as f64 / mu_est).clamp(0.5, 1.0);
    invert_visibility(r).expect("clamped into the domain")
}

#[derive(Debug, Clone, Copy)]
struct Frac {
    hop: u32,
    d: f64,
}

impl Message for Frac {
    fn kind(&self) -> u8 {
        0
    }
    fn kind_name(&self) -> &'static str {
        "fractional_distance"
    }
    fn size_units(&self) -> usize {
        3
    }
}

struct FractionalFlood {
    mu_est: f64,
}

impl Protocol for FractionalFlood {
    type Input = u32;
    type State = (u32, Option<f64>);
    type Msg = Frac;

    fn init(&self, ctx: &NodeCtx<'_>, hop: u32, out: &mut Outbox<Frac>) -> (u32, Option<f64>) {
        if hop > 1 {
            return (hop, None);
        }
        let d = anchor_distance(ctx.degree(), self.mu_est);
        if hop == 1 {
            out.broadcast(Frac { hop, d });
        }
        (hop, Some(d))
    }

    fn on_round(&self, _: &NodeCtx<'_>, st: &mut (u32, Option<f64>), inbox: &[Envelope<'_, Frac>], out: &mut Outbox<Frac>) {
        let (hop, d) = st;
        if d.is_some() || *hop == UNREACHABLE {
            return;
        }
        let best = inbox
            .iter()
            .filter(|e| e.msg.hop + 1 == *hop)
            .map(|e| e.msg.d + 1.0)
            .min_by(f64::total_cmp);
        if let Some(v) = best {
            *d = Some(v);
            out.broadcast(Frac { hop: *hop, d: v });
        }
    }
}

#[derive(Debug, Clone)]
pub struct FractionalDistances {
    /// In units of R; `None` where no boundary is reachable.
    pub d_frac: Vec<Option<f64>>,
    pub ledger: CostLedger,
    pub rounds_used: u32,
}

/// Nodes up to one hop from a boundary use the visibility inversion of their
/// own degree; deeper nodes add one R per hop to the best anchor below them.
pub fn fractional_distance(g: &UnitDiskGraph, hop_dist: &[u32], mu_est: f64) -> Result<FractionalDistances, SimError> {
    let run = run_protocol(g, &FractionalFlood { mu_est }, hop_dist.to_vec())?;
    Ok(FractionalDistances {
        d_frac: run.states.into_iter().map(|(_, d)| d).collect(),
        ledger: run.ledger,
        rounds_used: run.rounds_used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthKey {
    pub hop: u32,
    pub frac: f64,
    pub id: NodeId,
}

/// Deepest node: larger hop count, then larger fractional distance, then
/// smaller ID.
pub struct Deepest;

impl Deepest {
    fn better(a: &DepthKey, b: &DepthKey) -> bool {
        (a.hop, a.frac).partial_cmp(&(b.hop, b.frac)) == Some(std::cmp::Ordering::Greater)
            || (a.hop == b.hop && a.frac == b.frac && a.id < b.id)
    }
}

impl AggregateOp for Deepest {
    type Value = Option<DepthKey>;

    fn combine(&self, acc: &mut Option<DepthKey>, other: &Option<DepthKey>) {
        if let Some(o) = other {
            if acc.is_none_or(|a| Self::better(o, &a)) {
                *acc = Some(*o);
            }
        }
    }

    fn payload_units(&self, _: &Option<DepthKey>) -> usize {
        3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThicknessReport {
    pub best_node: NodeId,
    pub hop_dist: u32,
    pub frac_dist: f64,
    pub thickness_estimate: f64,
}

pub fn thickness(
    g: &UnitDiskGraph,
    links: &[TreeLink],
    hop_dist: &[u32],
    d_frac: &[Option<f64>],
) -> Result<(Option<ThicknessReport>, Aggregated<Option<DepthKey>>), SimError> {
    let values = (0..g.len())
        .map(|i| {
            d_frac[i].map(|frac| DepthKey {
                hop: hop_dist[i],
                frac,
                id: g.id(i),
            })
        })
        .collect();
    let agg = aggregate(g, links, &Deepest, values)?;
    let report = agg.value.map(|k| ThicknessReport {
        best_node: k.id,
        hop_dist: k.hop,
        frac_dist: k.frac,
        thickness_estimate: k.frac * g.radius(),
    });
    Ok((report, agg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergetree::build_tree;
    use crate::simkernel::tests::path_graph;

    #[test]
    fn table_ratios() {
        let counts = [(6093, 2169), (1304, 289), (1319, 266), (2368, 616)];
        let stats: Vec<ComponentStats> = counts
            .iter()
            .enumerate()
            .map(|(k, &(near, d))| ComponentStats::new(NodeId(k as u32 + 1), d, near))
            .collect();
        let ratios: Vec<f64> = stats.iter().map(|s| (s.ratio * 1000.0).round() / 1000.0).collect();
        assert_eq!(ratios, vec![2.809, 4.512, 4.959, 3.844]);
        assert_eq!(classify_outer(&stats), Some(NodeId(1)));
        let scaled: Vec<ComponentStats> = counts
            .iter()
            .enumerate()
            .map(|(k, &(near, d))| ComponentStats::new(NodeId(k as u32 + 1), 7 * d, 7 * near))
            .collect();
        assert_eq!(classify_outer(&scaled), Some(NodeId(1)));
    }

    #[test]
    fn outer_ties() {
        let stats = [ComponentStats::new(NodeId(5), 10, 30), ComponentStats::new(NodeId(2), 20, 60)];
        assert_eq!(classify_outer(&stats), Some(NodeId(2)));
        assert_eq!(classify_outer(&stats[..1]), Some(NodeId(5)));
        assert_eq!(classify_outer(&[]), None);
    }

    #[test]
    fn anchors() {
        assert!(anchor_distance(50, 100.0).abs() < 1e-6);
        assert!(anchor_distance(20, 100.0).abs() < 1e-6);
        assert!((anchor_distance(100, 100.0) - 1.0).abs() < 1e-6);
        assert!((anchor_distance(130, 100.0) - 1.0).abs() < 1e-6);
        let mut last = 0.0;
        for deg in 50..=100 {
            let d = anchor_distance(deg, 100.0);
            assert!(d >= last);
            last = d;
        }
    }

    #[test]
    fn fractional_on_path() {
        let g = path_graph(6);
        let hops = vec![0, 1, 2, 3, 4, UNREACHABLE];
        let f = fractional_distance(&g, &hops, 2.0).unwrap();
        assert!(f.d_frac[0].unwrap().abs() < 1e-6);
        let anchor = f.d_frac[1].unwrap();
        assert!((anchor - 1.0).abs() < 1e-6);
        assert!((f.d_frac[4].unwrap() - (anchor + 3.0)).abs() < 1e-9);
        assert_eq!(f.d_frac[5], None);
        assert_eq!(f.ledger.total_broadcasts, 4);

        let tree = build_tree(&g).unwrap();
        let (report, _) = thickness(&g, &tree.links(), &hops, &f.d_frac).unwrap();
        let report = report.unwrap();
        assert_eq!(report.best_node, NodeId(5));
        assert_eq!(report.hop_dist, 4);
    }
}
