//! Scores node reports against the true geometry of the region.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use swarmtopo::boundary::NodeClass;
use swarmtopo::geometry::{
    band_areas_closed_form, band_areas_oracle, boundary_distance, inradius_oracle, point_segment_distance, BoundaryCurve,
    BoundaryDistance, GeometryError, Point, Region,
};
use swarmtopo::netgraph::NodeId;

use crate::report::{NodeReport, Summary};

/// Distance bands for precision and recall.
pub const BANDS: [f64; 3] = [0.25, 0.5, 1.0];
/// Nodes at least this deep must not be classified as boundary.
pub const FALSE_DEPTH: f64 = 1.5;
/// A sampled boundary point is detected if a boundary node lies this close.
pub const DETECT_RADIUS: f64 = 0.25;
/// Sampled points closer than this to a corner are skipped.
pub const CORNER_CLEARANCE: f64 = 1.0;
pub const SAMPLE_SPACING: f64 = 0.25;
/// A Voronoi node hits when its two boundaries are within this distance.
pub const VORONOI_SLACK: f64 = 2.0;
pub const INRADIUS_STEP: f64 = 0.05;
pub const BAND_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub hits: usize,
    pub total: usize,
}

impl Rate {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.hits as f64 / self.total as f64
        }
    }

    pub fn add(&mut self, other: Rate) {
        self.hits += other.hits;
        self.total += other.total;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandScore {
    pub band: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub actual: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMatch {
    pub component: NodeId,
    pub curve: usize,
    /// Share of members whose nearest curve is `curve`.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessScore {
    pub inradius: f64,
    pub estimate: f64,
    pub best_node_distance: f64,
    /// `inradius <= estimate <= 1.5 inradius`.
    pub within_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopCheck {
    /// Nodes with `hop * R` below their true distance.
    pub plain_violations: usize,
    /// Deepest recognized member.
    pub source_depth: f64,
    /// Nodes with `hop * R + source_depth` below their true distance.
    pub corrected_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandAreaRow {
    pub curve: usize,
    pub closed_outer: f64,
    pub closed_inner: f64,
    pub sampled_outer: f64,
    pub sampled_inner: f64,
    pub outer_error: f64,
    pub inner_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub bands: Vec<BandScore>,
    pub false_boundary: Rate,
    pub detection: Rate,
    pub components: Vec<ComponentMatch>,
    /// One component per curve, each mapped to a different curve.
    pub all_recognized: bool,
    pub outer_correct: bool,
    pub voronoi: Rate,
    pub thickness: Option<ThicknessScore>,
    pub hops: HopCheck,
    /// Mean `|d_frac - true|` near straight stretches, and its sample.
    pub fractional_error: Option<f64>,
    pub fractional_nodes: usize,
    pub band_areas: Vec<BandAreaRow>,
}

/// True distances of every report, in report order.
pub fn truths(region: &Region, nodes: &[NodeReport]) -> Result<Vec<BoundaryDistance>, GeometryError> {
    nodes.iter().map(|n| boundary_distance(region, Point::new(n.x, n.y))).collect()
}

pub fn band_scores(nodes: &[NodeReport], truth: &[BoundaryDistance], radius: f64) -> Vec<BandScore> {
    BANDS
        .iter()
        .map(|&band| {
            let (mut tp, mut predicted, mut actual) = (0, 0, 0);
            for (n, t) in nodes.iter().zip(truth) {
                let p = n.class == NodeClass::Boundary;
                let a = t.distance <= band * radius;
                predicted += usize::from(p);
                actual += usize::from(a);
                tp += usize::from(p && a);
            }
            let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            BandScore {
                band,
                true_positives: tp,
                predicted,
                actual,
                precision: ratio(tp, predicted),
                recall: ratio(tp, actual),
            }
        })
        .collect()
}

pub fn false_boundary_rate(nodes: &[NodeReport], truth: &[BoundaryDistance], radius: f64) -> Rate {
    let mut r = Rate::default();
    for (n, t) in nodes.iter().zip(truth) {
        if t.distance >= FALSE_DEPTH * radius {
            r.total += 1;
            r.hits += usize::from(n.class == NodeClass::Boundary);
        }
    }
    r
}

/// Evenly spaced points on the polygon edges of `region`, at least
/// [`CORNER_CLEARANCE`] from every corner. Circles have no straight stretch.
pub fn straight_samples(region: &Region, radius: f64) -> Vec<Point> {
    let (clearance, spacing) = (CORNER_CLEARANCE * radius, SAMPLE_SPACING * radius);
    let mut out = Vec::new();
    for curve in region.curves() {
        let BoundaryCurve::Polygon { vertices } = curve else {
            continue;
        };
        for (k, &a) in vertices.iter().enumerate() {
            let b = vertices[(k + 1) % vertices.len()];
            let len = a.dist(b);
            let usable = len - 2.0 * clearance;
            if usable < 0.0 {
                continue;
            }
            let steps = (usable / spacing).floor() as usize;
            for s in 0..=steps {
                let t = (clearance + s as f64 * spacing) / len;
                out.push(Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
            }
        }
    }
    out
}

/// Share of [`straight_samples`] with a boundary node within
/// [`DETECT_RADIUS`].
pub fn detection_rate(region: &Region, nodes: &[NodeReport], radius: f64) -> Rate {
    let cell = |p: Point| ((p.x / radius).floor() as i64, (p.y / radius).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<Point>> = HashMap::new();
    for n in nodes.iter().filter(|n| n.class == NodeClass::Boundary) {
        let p = Point::new(n.x, n.y);
        grid.entry(cell(p)).or_default().push(p);
    }
    let mut r = Rate::default();
    for q in straight_samples(region, radius) {
        let (cx, cy) = cell(q);
        let hit = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| {
                grid.get(&(cx + dx, cy + dy))
                    .is_some_and(|ps| ps.iter().any(|p| p.dist(q) <= DETECT_RADIUS * radius))
            })
        });
        r.total += 1;
        r.hits += usize::from(hit);
    }
    r
}

/// Maps each recognized component to the curve most of its members are
/// nearest to; ties go to the smaller curve index.
pub fn match_components(nodes: &[NodeReport], truth: &[BoundaryDistance], curves: usize) -> Vec<ComponentMatch> {
    let mut votes: HashMap<NodeId, Vec<usize>> = HashMap::new();
    for (n, t) in nodes.iter().zip(truth) {
        if let Some(c) = n.component {
            votes.entry(c).or_insert_with(|| vec![0; curves])[t.curve] += 1;
        }
    }
    let mut out: Vec<ComponentMatch> = votes
        .into_iter()
        .map(|(component, v)| {
            let total: usize = v.iter().sum();
            let (curve, &best) = v.iter().enumerate().rev().max_by_key(|(_, &c)| c).expect("at least one curve");
            ComponentMatch {
                component,
                curve,
                share: best as f64 / total as f64,
            }
        })
        .collect();
    out.sort_by_key(|m| m.component);
    out
}

pub fn all_recognized(matches: &[ComponentMatch], curves: usize) -> bool {
    let mut seen = vec![false; curves];
    for m in matches {
        if std::mem::replace(&mut seen[m.curve], true) {
            return false;
        }
    }
    matches.len() == curves
}

/// Voronoi nodes whose two components map to different curves at true
/// distances within [`VORONOI_SLACK`] of each other.
pub fn voronoi_hits(region: &Region, nodes: &[NodeReport], matches: &[ComponentMatch], radius: f64) -> Rate {
    let curve_of = |c: Option<NodeId>| c.and_then(|c| matches.iter().find(|m| m.component == c)).map(|m| m.curve);
    let mut r = Rate::default();
    for n in nodes.iter().filter(|n| n.voronoi) {
        r.total += 1;
        let (Some(a), Some(b)) = (curve_of(n.boundary_id), curve_of(n.runner_up_id)) else {
            continue;
        };
        let p = Point::new(n.x, n.y);
        let curves = region.curves();
        r.hits += usize::from(a != b && (curves[a].distance(p) - curves[b].distance(p)).abs() <= VORONOI_SLACK * radius);
    }
    r
}

pub fn hop_check(nodes: &[NodeReport], truth: &[BoundaryDistance], radius: f64) -> HopCheck {
    let source_depth = nodes
        .iter()
        .zip(truth)
        .filter(|(n, _)| n.component.is_some())
        .map(|(_, t)| t.distance)
        .fold(0.0, f64::max);
    let (mut plain, mut corrected) = (0, 0);
    for (n, t) in nodes.iter().zip(truth) {
        if let Some(h) = n.hop_dist {
            let reach = f64::from(h) * radius;
            plain += usize::from(reach < t.distance);
            corrected += usize::from(reach + source_depth < t.distance - 1e-9);
        }
    }
    HopCheck {
        plain_violations: plain,
        source_depth,
        corrected_violations: corrected,
    }
}

/// Whether the nearest boundary point of `p` lies on a polygon edge at least
/// [`CORNER_CLEARANCE`] from both of the edge's corners.
fn near_straight_stretch(curve: &BoundaryCurve, p: Point, clearance: f64) -> bool {
    let BoundaryCurve::Polygon { vertices } = curve else {
        return false;
    };
    let m = vertices.len();
    let (k, _) = (0..m)
        .map(|k| (k, point_segment_distance(p, vertices[k], vertices[(k + 1) % m])))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("polygon has edges");
    let (a, b) = (vertices[k], vertices[(k + 1) % m]);
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    let along = t * ab.norm();
    along >= clearance && ab.norm() - along >= clearance
}

/// Mean fractional-distance error over nodes within one `R` of a straight
/// stretch, with the sample size.
pub fn fractional_error(region: &Region, nodes: &[NodeReport], truth: &[BoundaryDistance], radius: f64) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for (n, t) in nodes.iter().zip(truth) {
        let Some(d) = n.d_frac else { continue };
        if t.distance > radius || !near_straight_stretch(&region.curves()[t.curve], Point::new(n.x, n.y), CORNER_CLEARANCE * radius) {
            continue;
        }
        sum += (d * radius - t.distance).abs();
        count += 1;
    }
    ((count > 0).then(|| sum / count as f64 / radius), count)
}

pub fn thickness_score(region: &Region, summary: &Summary, nodes: &[NodeReport], inradius: f64) -> Option<ThicknessScore> {
    let t = summary.thickness?;
    let best = nodes.iter().find(|n| n.id == t.best_node)?;
    let best_node_distance = boundary_distance(region, Point::new(best.x, best.y)).ok()?.distance;
    Some(ThicknessScore {
        inradius,
        estimate: t.thickness_estimate,
        best_node_distance,
        within_band: t.thickness_estimate >= inradius && t.thickness_estimate <= 1.5 * inradius,
    })
}

/// Closed-form strip areas against the sampled ones for each polygon curve.
pub fn band_area_table(region: &Region, radius: f64, seed: u64) -> Vec<BandAreaRow> {
    region
        .curves()
        .iter()
        .enumerate()
        .filter_map(|(k, c)| match c {
            BoundaryCurve::Polygon { vertices } => {
                let closed = band_areas_closed_form(vertices, radius).ok()?;
                let sampled = band_areas_oracle(vertices, radius, BAND_SAMPLES, seed.wrapping_add(k as u64)).areas;
                let rel = |a: f64, b: f64| (a - b).abs() / b;
                Some(BandAreaRow {
                    curve: k,
                    closed_outer: closed.outer_band,
                    closed_inner: closed.inner_band,
                    sampled_outer: sampled.outer_band,
                    sampled_inner: sampled.inner_band,
                    outer_error: rel(closed.outer_band, sampled.outer_band),
                    inner_error: rel(closed.inner_band, sampled.inner_band),
                })
            }
            BoundaryCurve::Circle { .. } => None,
        })
        .collect()
}

/// Every score of a run. `inradius` may be passed in to reuse an earlier
/// evaluation of the same region.
pub fn score(region: &Region, summary: &Summary, nodes: &[NodeReport], inradius: Option<f64>) -> Result<ScoreReport, GeometryError> {
    let radius = summary.config.radius;
    let truth = truths(region, nodes)?;
    let curves = region.curves().len();
    let components = match_components(nodes, &truth, curves);
    let outer_correct = summary
        .outer_id
        .is_some_and(|o| components.iter().any(|m| m.component == o && m.curve == 0));
    let inradius = match inradius {
        Some(t) => t,
        None => inradius_oracle(region, INRADIUS_STEP)?.0,
    };
    let (fractional_error, fractional_nodes) = fractional_error(region, nodes, &truth, radius);
    Ok(ScoreReport {
        bands: band_scores(nodes, &truth, radius),
        false_boundary: false_boundary_rate(nodes, &truth, radius),
        detection: detection_rate(region, nodes, radius),
        all_recognized: all_recognized(&components, curves),
        outer_correct,
        voronoi: voronoi_hits(region, nodes, &components, radius),
        thickness: thickness_score(region, summary, nodes, inradius),
        hops: hop_check(nodes, &truth, radius),
        fractional_error,
        fractional_nodes,
        band_areas: band_area_table(region, radius, summary.config.seed),
        components,
    })
}
