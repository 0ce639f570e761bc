//! End-to-end recognition on a square with one square hole, checked against
//! centralized recomputations.

use std::collections::HashMap;
use std::sync::OnceLock;

use proptest::prelude::*;
use swarmtopo::boundary::NodeClass;
use swarmtopo::geometry::{boundary_distance, BoundaryCurve, Point, Region};
use swarmtopo::netgraph::{hop_bfs, NodeId, UnitDiskGraph, UNREACHABLE};
use swarmtopo::pipeline::{run_pipeline, PipelineConfig, RunResult};
use swarmtopo::topo::{anchor_distance, classify_outer, ComponentStats};

fn square(x0: f64, y0: f64, side: f64) -> BoundaryCurve {
    BoundaryCurve::polygon(vec![
        Point::new(x0, y0),
        Point::new(x0 + side, y0),
        Point::new(x0 + side, y0 + side),
        Point::new(x0, y0 + side),
    ])
}

fn framed_square() -> Region {
    Region::new(vec![square(0.0, 0.0, 16.0), square(6.0, 6.0, 4.0)]).unwrap()
}

fn run() -> &'static RunResult {
    static RUN: OnceLock<RunResult> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = PipelineConfig {
            nodes: 14_000,
            seed: 11,
            ..Default::default()
        };
        run_pipeline(&framed_square(), &cfg, None).expect("pipeline runs")
    })
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

/// Boundary nodes grouped by two-hop reachability, as sorted ID lists.
fn two_hop_partition(g: &UnitDiskGraph, boundary: &[bool]) -> Vec<Vec<NodeId>> {
    let mut parent: Vec<usize> = (0..g.len()).collect();
    for v in 0..g.len() {
        // A common neighbor `v` joins every pair of its boundary neighbors.
        let anchor = g.neighbors(v).iter().map(|&w| w as usize).find(|&w| boundary[w]);
        for &u in g.neighbors(v) {
            let u = u as usize;
            if !boundary[u] {
                continue;
            }
            for w in [boundary[v].then_some(v), anchor].into_iter().flatten() {
                let (a, b) = (find(&mut parent, u), find(&mut parent, w));
                parent[a] = b;
            }
        }
    }
    let mut groups: HashMap<usize, Vec<NodeId>> = HashMap::new();
    for v in (0..g.len()).filter(|&v| boundary[v]) {
        let root = find(&mut parent, v);
        groups.entry(root).or_default().push(g.id(v));
    }
    let mut out: Vec<Vec<NodeId>> = groups.into_values().collect();
    for grp in &mut out {
        grp.sort();
    }
    out.sort();
    out
}

#[test]
fn histogram_matches_degrees() {
    let r = run();
    let g = &r.graph;
    assert_eq!(r.histogram.delta, g.max_degree());
    assert_eq!(r.histogram.total() as usize, g.len());
    let width = g.max_degree() as f64 / (r.histogram.bin_count() - 1) as f64;
    let mut counts = vec![0u64; r.histogram.bin_count()];
    for i in 0..g.len() {
        let bin = ((g.degree(i) as f64 / width + 0.5).floor() as usize).min(counts.len() - 1);
        counts[bin] += 1;
    }
    assert_eq!(r.histogram.counts, counts);
}

#[test]
fn classes_follow_threshold() {
    let r = run();
    let g = &r.graph;
    let boundary: Vec<bool> = (0..g.len()).map(|i| g.degree(i) as f64 <= r.threshold).collect();
    for i in 0..g.len() {
        let expected = if boundary[i] {
            NodeClass::Boundary
        } else if g.neighbors(i).iter().any(|&u| boundary[u as usize]) {
            NodeClass::NearBoundary
        } else {
            NodeClass::Interior
        };
        assert_eq!(r.classification.class[i], expected, "node {}", g.id(i));
    }
}

#[test]
fn components_are_two_hop_classes() {
    let r = run();
    let g = &r.graph;
    let boundary: Vec<bool> = (0..g.len()).map(|i| r.classification.is_boundary(i)).collect();
    let expected = two_hop_partition(g, &boundary);

    let mut by_comp: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for i in 0..g.len() {
        if let Some(m) = &r.components.member[i] {
            assert!(boundary[i]);
            by_comp.entry(m.component).or_default().push(g.id(i));
        } else {
            assert!(!boundary[i]);
        }
    }
    for (c, members) in &by_comp {
        assert_eq!(members.iter().max(), Some(c), "component named after its largest ID");
    }
    let mut got: Vec<Vec<NodeId>> = by_comp.into_values().collect();
    for grp in &mut got {
        grp.sort();
    }
    got.sort();
    assert_eq!(got, expected);

    let total: u64 = r.components.sizes.iter().map(|&(_, s)| u64::from(s)).sum();
    assert_eq!(total as usize, r.classification.count(NodeClass::Boundary));
}

#[test]
fn two_boundaries_recognized() {
    let r = run();
    assert_eq!(r.components.recognized_count(), 2);
    if let Some(p) = &r.sweep.as_ref().unwrap().plateau {
        assert_eq!(p.count, 2);
    }
}

#[test]
fn outer_component_hugs_the_frame() {
    let r = run();
    let region = framed_square();
    let g = &r.graph;
    let mut votes: HashMap<NodeId, usize> = HashMap::new();
    for i in 0..g.len() {
        if let Some(c) = r.components.recognized_component(i) {
            let bd = boundary_distance(&region, g.position(i)).unwrap();
            if bd.curve == 0 {
                *votes.entry(c).or_default() += 1;
            }
        }
    }
    let frame = votes.into_iter().max_by_key(|&(c, v)| (v, c)).unwrap().0;
    assert_eq!(r.outer, Some(frame));
}

#[test]
fn token_loops_close() {
    let r = run();
    let g = &r.graph;
    assert!(r.loops.failures.is_empty(), "{:?}", r.loops.failures);
    assert_eq!(r.loops.loops.len(), 2);
    for lp in &r.loops.loops {
        let walk = lp.walk();
        assert_eq!(walk.first(), walk.last(), "loop of {:?} returns home", lp.component);
        for w in walk.windows(2) {
            let a = g.index(w[0]).unwrap();
            assert!(g.neighbor_ids(a).contains(&w[1]), "walk steps along edges");
        }
    }
}

/// Per-component BFS, keeping the two nearest distinct components.
fn top_two(g: &UnitDiskGraph, r: &RunResult) -> Vec<Vec<(u32, NodeId)>> {
    let mut best: Vec<Vec<(u32, NodeId)>> = vec![Vec::new(); g.len()];
    for (c, _) in r.components.recognized() {
        let sources: Vec<usize> = (0..g.len()).filter(|&i| r.components.recognized_component(i) == Some(c)).collect();
        let dist = hop_bfs(g, &sources);
        for (i, &d) in dist.iter().enumerate() {
            if d != UNREACHABLE {
                best[i].push((d, c));
            }
        }
    }
    for b in &mut best {
        b.sort();
        b.truncate(2);
    }
    best
}

#[test]
fn distance_flood_matches_bfs() {
    let r = run();
    let g = &r.graph;
    let expected = top_two(g, r);
    for i in 0..g.len() {
        let first = expected[i].first().copied();
        assert_eq!(r.distances.hop_dist[i], first.map_or(UNREACHABLE, |e| e.0));
        assert_eq!(r.distances.boundary_id[i], first.map(|e| e.1));
        assert_eq!(r.distances.runner_up[i].map(|e| e.0), expected[i].get(1).map(|e| e.0));
    }
}

#[test]
fn hop_counts_bound_true_depth() {
    let r = run();
    let region = framed_square();
    let g = &r.graph;
    let truth: Vec<f64> = (0..g.len()).map(|i| boundary_distance(&region, g.position(i)).unwrap().distance).collect();
    let source_depth = (0..g.len())
        .filter(|&i| r.components.recognized_component(i).is_some())
        .map(|i| truth[i])
        .fold(0.0, f64::max);
    for i in 0..g.len() {
        let h = r.distances.hop_dist[i];
        assert_ne!(h, UNREACHABLE);
        assert!(f64::from(h) + source_depth >= truth[i] - 1e-9, "node {} at depth {}", g.id(i), truth[i]);
    }
}

#[test]
fn fractional_distance_shrinks_with_degree() {
    let r = run();
    let g = &r.graph;
    let mu = f64::from(r.density.mu_est);
    let mut pairs: Vec<(usize, f64)> = (0..g.len())
        .filter(|&i| r.distances.hop_dist[i] <= 1)
        .map(|i| (g.degree(i), r.d_frac[i].unwrap()))
        .collect();
    for &(deg, d) in &pairs {
        assert_eq!(d, anchor_distance(deg, mu));
        assert!((0.0..=1.0).contains(&d));
    }
    pairs.sort_by_key(|p| p.0);
    assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));

    // Deeper nodes: one R past the best anchor one hop nearer.
    for i in (0..g.len()).filter(|&i| r.distances.hop_dist[i] > 1) {
        let h = r.distances.hop_dist[i];
        let best = g
            .neighbors(i)
            .iter()
            .map(|&u| u as usize)
            .filter(|&u| r.distances.hop_dist[u] + 1 == h)
            .map(|u| r.d_frac[u].unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.d_frac[i], Some(best + 1.0));
    }
}

#[test]
fn message_cost_per_phase_is_recorded() {
    let r = run();
    let phases: Vec<&str> = r.costs.iter().map(|c| c.phase.as_str()).collect();
    assert_eq!(phases.first(), Some(&"tree"));
    assert!(phases.contains(&"sweep"));
    assert!(r.costs.iter().all(|c| c.broadcasts > 0 && c.id_units >= c.broadcasts));
}

fn stats_strategy() -> impl Strategy<Value = Vec<ComponentStats>> {
    prop::collection::vec((1u64..5_000, 1u64..20_000), 1..8).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(k, (d, n))| ComponentStats::new(NodeId(k as u32 * 7 + 3), d, n))
            .collect()
    })
}

proptest! {
    #[test]
    fn outer_choice_ignores_uniform_scaling(stats in stats_strategy(), scale in 1u64..50) {
        let scaled: Vec<ComponentStats> = stats
            .iter()
            .map(|s| ComponentStats::new(s.component_id, s.boundary_count * scale, s.near_count * scale))
            .collect();
        prop_assert_eq!(classify_outer(&stats), classify_outer(&scaled));
    }

    #[test]
    fn outer_choice_has_smallest_ratio(stats in stats_strategy()) {
        let outer = classify_outer(&stats).unwrap();
        let chosen = stats.iter().find(|s| s.component_id == outer).unwrap();
        prop_assert!(stats.iter().all(|s| chosen.ratio <= s.ratio));
    }
}
