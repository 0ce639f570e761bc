//! Planar regions bounded by polygons and circles, plus the ground-truth
//! oracles used to score the distributed algorithms.
//!
//! All lengths are in units of the communication radius `R`; the simulator
//! works with `R = 1` internally.

mod band;
mod inradius;
mod sampling;
mod visibility;

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use band::{
    band_areas_closed_form, band_areas_oracle, random_feature_polygon, BandAreas, BandEstimate,
};
pub use inradius::inradius_oracle;
pub use sampling::{sample_uniform, seeded_rng, SeededRng, STREAM_IDS, STREAM_POSITIONS};
pub use visibility::{invert_visibility, visibility_fraction};

/// Default lower bound on interior angles accepted by [`validate_region`].
pub const DEFAULT_MIN_ANGLE: f64 = PI / 3.0;

/// Minimum feature size, in units of `R`.
pub const MIN_FEATURE_SIZE: f64 = 2.0;

const ON_BOUNDARY_EPS: f64 = 1e-12;
const FEATURE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("curve {curve}: {reason}")]
    Malformed { curve: usize, reason: String },
    #[error(
        "feature size {distance:.4} < {bound} at curve {curve}{} (against curve {other_curve})",
        vertex.map(|v| format!(" vertex {v}")).unwrap_or_default()
    )]
    FeatureSizeViolation {
        curve: usize,
        vertex: Option<usize>,
        other_curve: usize,
        distance: f64,
        bound: f64,
    },
    #[error("interior angle {angle:.4} rad out of bounds at curve {curve} vertex {vertex}")]
    AngleViolation {
        curve: usize,
        vertex: usize,
        angle: f64,
    },
    #[error("curve {curve}: {reason}")]
    TopologyViolation { curve: usize, reason: String },
    #[error("point ({x}, {y}) lies outside the region")]
    OutsideRegion { x: f64, y: f64 },
    #[error("rejection sampling accepted {accepted} of {attempts} candidates")]
    NonConvergence { accepted: usize, attempts: usize },
    #[error("value {value} outside the domain [{lo}, {hi}]")]
    DomainError { value: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let d = self - other;
        d.dot(d)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Distance from `p` to the closed segment `a`-`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    point_segment_distance_sq(p, a, b).sqrt()
}

pub(crate) fn point_segment_distance_sq(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len_sq = ab.dot(ab);
    let t = if len_sq > 0.0 {
        ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist_sq(a + ab * t)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Distance between two closed segments (zero if they intersect).
pub fn segment_segment_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance_sq(a, c, d)
        .min(point_segment_distance_sq(b, c, d))
        .min(point_segment_distance_sq(c, a, b))
        .min(point_segment_distance_sq(d, a, b))
        .sqrt()
}

/// Distance between a segment and a circle curve (not the disk).
fn segment_circle_distance(a: Point, b: Point, center: Point, radius: f64) -> f64 {
    let near = point_segment_distance(center, a, b);
    let far = center.dist(a).max(center.dist(b));
    if near >= radius {
        near - radius
    } else if far <= radius {
        radius - far
    } else {
        0.0
    }
}

fn circle_circle_distance(c1: Point, r1: f64, c2: Point, r2: f64) -> f64 {
    let d = c1.dist(c2);
    if d >= r1 + r2 {
        d - r1 - r2
    } else if d + r1.min(r2) <= r1.max(r2) {
        r1.max(r2) - d - r1.min(r2)
    } else {
        0.0
    }
}

/// Signed polygon area (positive for counter-clockwise vertex order).
pub fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

pub fn perimeter(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    (0..n).map(|i| vertices[i].dist(vertices[(i + 1) % n])).sum()
}

/// Crossing-number test; boundary points give an unspecified answer.
pub fn point_in_polygon(p: Point, vertices: &[Point]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (vertices[i], vertices[j]);
        if (vi.y > p.y) != (vj.y > p.y) {
            let x = (vj.x - vi.x) * (p.y - vi.y) / (vj.y - vi.y) + vi.x;
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn polygon_distance_sq(p: Point, vertices: &[Point]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| point_segment_distance_sq(p, vertices[i], vertices[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Signed turn angle at each vertex: positive for left turns.
///
/// For a counter-clockwise polygon a positive value is a convex corner.
pub fn turn_angles(vertices: &[Point]) -> Vec<f64> {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let prev = vertices[(i + n - 1) % n];
            let cur = vertices[i];
            let next = vertices[(i + 1) % n];
            let e1 = cur - prev;
            let e2 = next - cur;
            e1.cross(e2).atan2(e1.dot(e2))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BoundaryCurve {
    Polygon { vertices: Vec<Point> },
    Circle { center: Point, radius: f64 },
}

impl BoundaryCurve {
    pub fn polygon(vertices: Vec<Point>) -> Self {
        Self::Polygon { vertices }
    }

    pub fn circle(center: Point, radius: f64) -> Self {
        Self::Circle { center, radius }
    }

    /// Area enclosed by the curve.
    pub fn enclosed_area(&self) -> f64 {
        match self {
            Self::Polygon { vertices } => signed_area(vertices).abs(),
            Self::Circle { radius, .. } => PI * radius * radius,
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Self::Polygon { vertices } => perimeter(vertices),
            Self::Circle { radius, .. } => 2.0 * PI * radius,
        }
    }

    /// Strict interior test for the curve alone.
    pub fn encloses(&self, p: Point) -> bool {
        match self {
            Self::Polygon { vertices } => point_in_polygon(p, vertices),
            Self::Circle { center, radius } => p.dist_sq(*center) < radius * radius,
        }
    }

    pub fn distance(&self, p: Point) -> f64 {
        match self {
            Self::Polygon { vertices } => polygon_distance_sq(p, vertices).sqrt(),
            Self::Circle { center, radius } => (p.dist(*center) - radius).abs(),
        }
    }

    fn bbox(&self) -> (Point, Point) {
        match self {
            Self::Polygon { vertices } => {
                let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for v in vertices {
                    lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
                    hi = Point::new(hi.x.max(v.x), hi.y.max(v.y));
                }
                (lo, hi)
            }
            Self::Circle { center, radius } => (
                Point::new(center.x - radius, center.y - radius),
                Point::new(center.x + radius, center.y + radius),
            ),
        }
    }

    /// A point guaranteed to lie on the curve.
    fn anchor(&self) -> Point {
        match self {
            Self::Polygon { vertices } => vertices[0],
            Self::Circle { center, radius } => Point::new(center.x + radius, center.y),
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        match self {
            Self::Polygon { vertices } => Self::Polygon {
                vertices: vertices.iter().map(|&v| v * factor).collect(),
            },
            Self::Circle { center, radius } => Self::Circle {
                center: *center * factor,
                radius: radius * factor,
            },
        }
    }
}

/// A planar region: curve 0 is the outer boundary, the rest are holes.
///
/// Polygon orientation is normalized on construction: the outer polygon is
/// counter-clockwise and hole polygons are clockwise, so the region interior
/// always lies to the left of every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    curves: Vec<BoundaryCurve>,
}

impl Region {
    pub fn new(curves: Vec<BoundaryCurve>) -> Result<Self, GeometryError> {
        if curves.is_empty() {
            return Err(GeometryError::Malformed {
                curve: 0,
                reason: "region needs at least one curve".into(),
            });
        }
        let mut normalized = Vec::with_capacity(curves.len());
        for (i, curve) in curves.into_iter().enumerate() {
            normalized.push(normalize_curve(i, curve)?);
        }
        Ok(Self { curves: normalized })
    }

    pub fn curves(&self) -> &[BoundaryCurve] {
        &self.curves
    }

    pub fn outer(&self) -> &BoundaryCurve {
        &self.curves[0]
    }

    pub fn holes(&self) -> &[BoundaryCurve] {
        &self.curves[1..]
    }

    /// Number of boundary curves `k`.
    pub fn boundary_count(&self) -> usize {
        self.curves.len()
    }

    pub fn bbox(&self) -> (Point, Point) {
        self.outer().bbox()
    }

    pub fn area(&self) -> f64 {
        region_area(self)
    }

    pub fn contains(&self, p: Point) -> bool {
        contains(self, p)
    }

    pub fn perimeter(&self) -> f64 {
        self.curves.iter().map(BoundaryCurve::length).sum()
    }
}

fn normalize_curve(index: usize, curve: BoundaryCurve) -> Result<BoundaryCurve, GeometryError> {
    let malformed = |reason: &str| GeometryError::Malformed {
        curve: index,
        reason: reason.into(),
    };
    match curve {
        BoundaryCurve::Polygon { mut vertices } => {
            if vertices.len() < 3 {
                return Err(malformed("polygon needs at least 3 vertices"));
            }
            if !vertices.iter().all(|v| v.is_finite()) {
                return Err(malformed("non-finite vertex"));
            }
            if vertices.len() > 3 && vertices.first() == vertices.last() {
                vertices.pop();
            }
            let n = vertices.len();
            if (0..n).any(|i| vertices[i] == vertices[(i + 1) % n]) {
                return Err(malformed("zero-length edge"));
            }
            let area = signed_area(&vertices);
            if area == 0.0 {
                return Err(malformed("degenerate polygon"));
            }
            let want_ccw = index == 0;
            if (area > 0.0) != want_ccw {
                vertices.reverse();
            }
            Ok(BoundaryCurve::Polygon { vertices })
        }
        BoundaryCurve::Circle { center, radius } => {
            if !center.is_finite() || !radius.is_finite() || radius <= 0.0 {
                return Err(malformed("circle needs finite center and radius > 0"));
            }
            Ok(BoundaryCurve::Circle { center, radius })
        }
    }
}

/// On-disk region document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionFile {
    #[serde(default = "unit_radius")]
    pub radius_unit: f64,
    pub curves: Vec<BoundaryCurve>,
}

fn unit_radius() -> f64 {
    1.0
}

impl RegionFile {
    /// Converts file coordinates into `R` units.
    pub fn into_region(self) -> Result<Region, GeometryError> {
        if !(self.radius_unit.is_finite() && self.radius_unit > 0.0) {
            return Err(GeometryError::Malformed {
                curve: 0,
                reason: format!("radius_unit must be positive, got {}", self.radius_unit),
            });
        }
        let factor = 1.0 / self.radius_unit;
        Region::new(self.curves.iter().map(|c| c.scaled(factor)).collect())
    }

    pub fn from_region(region: &Region) -> Self {
        Self {
            radius_unit: 1.0,
            curves: region.curves.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub d_min: f64,
    pub min_angle: f64,
    pub max_angle: f64,
    pub area: f64,
    pub k: usize,
}

pub(crate) struct FeatureWitness {
    distance: f64,
    curve: usize,
    vertex: Option<usize>,
    other_curve: usize,
}

impl FeatureWitness {
    fn offer(&mut self, distance: f64, curve: usize, vertex: Option<usize>, other_curve: usize) {
        if distance < self.distance {
            *self = FeatureWitness {
                distance,
                curve,
                vertex,
                other_curve,
            };
        }
    }
}

pub(crate) fn intra_curve_feature(index: usize, curve: &BoundaryCurve, witness: &mut FeatureWitness) {
    match curve {
        BoundaryCurve::Circle { radius, .. } => witness.offer(2.0 * radius, index, None, index),
        BoundaryCurve::Polygon { vertices } => {
            let n = vertices.len();
            let seg = |i: usize| (vertices[i], vertices[(i + 1) % n]);
            // Corner to non-incident edge. Edge i runs from vertex i to i+1.
            for v in 0..n {
                for e in 0..n {
                    if e == v || (e + 1) % n == v {
                        continue;
                    }
                    let (a, b) = seg(e);
                    witness.offer(point_segment_distance(vertices[v], a, b), index, Some(v), index);
                }
            }
            // Edge to non-adjacent edge.
            for e in 0..n {
                for f in e + 1..n {
                    if f == e + 1 || (f + 1) % n == e {
                        continue;
                    }
                    let (a, b) = seg(e);
                    let (c, d) = seg(f);
                    witness.offer(segment_segment_distance(a, b, c, d), index, Some(e), index);
                }
            }
        }
    }
}

fn polygon_self_intersects(vertices: &[Point]) -> Option<usize> {
    let n = vertices.len();
    let seg = |i: usize| (vertices[i], vertices[(i + 1) % n]);
    for e in 0..n {
        for f in e + 1..n {
            let adjacent = f == e + 1 || (f + 1) % n == e;
            let (a, b) = seg(e);
            let (c, d) = seg(f);
            if adjacent {
                // Adjacent edges may only share their common vertex.
                let (shared, p, q) = if f == e + 1 { (b, a, d) } else { (a, b, c) };
                if orient(p, shared, q) == 0.0 && (q - shared).dot(p - shared) > 0.0 {
                    return Some(e);
                }
            } else if segments_intersect(a, b, c, d) {
                return Some(e);
            }
        }
    }
    None
}

/// Distance between two curves along with a witness vertex on the first.
fn curve_curve_distance(a: &BoundaryCurve, b: &BoundaryCurve) -> (f64, Option<usize>) {
    use BoundaryCurve::*;
    match (a, b) {
        (Polygon { vertices: va }, Polygon { vertices: vb }) => {
            let (na, nb) = (va.len(), vb.len());
            let mut best = (f64::INFINITY, None);
            for i in 0..na {
                for j in 0..nb {
                    let d = segment_segment_distance(
                        va[i],
                        va[(i + 1) % na],
                        vb[j],
                        vb[(j + 1) % nb],
                    );
                    if d < best.0 {
                        best = (d, Some(i));
                    }
                }
            }
            best
        }
        (Polygon { vertices }, Circle { center, radius })
        | (Circle { center, radius }, Polygon { vertices }) => {
            let n = vertices.len();
            let mut best = (f64::INFINITY, None);
            for i in 0..n {
                let d = segment_circle_distance(vertices[i], vertices[(i + 1) % n], *center, *radius);
                if d < best.0 {
                    best = (d, Some(i));
                }
            }
            if matches!(a, Circle { .. }) {
                best.1 = None;
            }
            best
        }
        (
            Circle {
                center: c1,
                radius: r1,
            },
            Circle {
                center: c2,
                radius: r2,
            },
        ) => (circle_circle_distance(*c1, *r1, *c2, *r2), None),
    }
}

/// Checks the geometric assumptions on a region and reports its parameters.
///
/// Feature size is the stricter of two readings: every corner against every
/// non-incident edge, and every edge against every non-adjacent edge, plus all
/// distances between distinct curves.
pub fn validate_region(region: &Region, min_angle: f64) -> Result<FeatureReport, GeometryError> {
    let curves = region.curves();

    for (i, curve) in curves.iter().enumerate() {
        if let BoundaryCurve::Polygon { vertices } = curve {
            if let Some(edge) = polygon_self_intersects(vertices) {
                return Err(GeometryError::TopologyViolation {
                    curve: i,
                    reason: format!("polygon self-intersects at edge {edge}"),
                });
            }
        }
    }

    let mut witness = FeatureWitness {
        distance: f64::INFINITY,
        curve: 0,
        vertex: None,
        other_curve: 0,
    };
    for (i, curve) in curves.iter().enumerate() {
        intra_curve_feature(i, curve, &mut witness);
    }

    let outer = &curves[0];
    for (i, hole) in curves.iter().enumerate().skip(1) {
        let (d, vertex) = curve_curve_distance(hole, outer);
        if d == 0.0 || !outer.encloses(hole.anchor()) {
            return Err(GeometryError::TopologyViolation {
                curve: i,
                reason: "hole is not strictly inside the outer boundary".into(),
            });
        }
        witness.offer(d, i, vertex, 0);
        for (j, other) in curves.iter().enumerate().skip(i + 1) {
            let (d, vertex) = curve_curve_distance(hole, other);
            if d == 0.0 || hole.encloses(other.anchor()) || other.encloses(hole.anchor()) {
                return Err(GeometryError::TopologyViolation {
                    curve: j,
                    reason: format!("hole overlaps or is nested in hole {i}"),
                });
            }
            witness.offer(d, i, vertex, j);
        }
    }

    if witness.distance < MIN_FEATURE_SIZE - FEATURE_EPS {
        return Err(GeometryError::FeatureSizeViolation {
            curve: witness.curve,
            vertex: witness.vertex,
            other_curve: witness.other_curve,
            distance: witness.distance,
            bound: MIN_FEATURE_SIZE,
        });
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, curve) in curves.iter().enumerate() {
        if let BoundaryCurve::Polygon { vertices } = curve {
            for (v, turn) in turn_angles(vertices).into_iter().enumerate() {
                let angle = PI - turn;
                if angle < min_angle || angle > 2.0 * PI - min_angle {
                    return Err(GeometryError::AngleViolation {
                        curve: i,
                        vertex: v,
                        angle,
                    });
                }
                lo = lo.min(angle);
                hi = hi.max(angle);
            }
        }
    }
    if lo > hi {
        // Only smooth curves.
        lo = PI;
        hi = PI;
    }

    let area = region_area(region);
    if area <= 0.0 {
        return Err(GeometryError::TopologyViolation {
            curve: 0,
            reason: "holes cover the whole region".into(),
        });
    }

    Ok(FeatureReport {
        d_min: witness.distance,
        min_angle: lo,
        max_angle: hi,
        area,
        k: curves.len(),
    })
}

/// Exact area: outer curve minus holes.
pub fn region_area(region: &Region) -> f64 {
    let outer = region.outer().enclosed_area();
    outer - region.holes().iter().map(BoundaryCurve::enclosed_area).sum::<f64>()
}

/// Even-odd membership; points on any boundary curve count as inside.
pub fn contains(region: &Region, p: Point) -> bool {
    let mut inside = false;
    for curve in region.curves() {
        if curve.distance(p) <= ON_BOUNDARY_EPS {
            return true;
        }
        if curve.encloses(p) {
            inside = !inside;
        }
    }
    inside
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryDistance {
    pub distance: f64,
    pub curve: usize,
    /// Nearest distinct other curve; `None` for single-curve regions.
    pub second: Option<(f64, usize)>,
}

/// Euclidean distance from an interior point to its nearest and second-nearest
/// boundary curves.
pub fn boundary_distance(region: &Region, p: Point) -> Result<BoundaryDistance, GeometryError> {
    if !contains(region, p) {
        return Err(GeometryError::OutsideRegion { x: p.x, y: p.y });
    }
    Ok(boundary_distance_unchecked(region, p))
}

pub(crate) fn boundary_distance_unchecked(region: &Region, p: Point) -> BoundaryDistance {
    let mut best = (f64::INFINITY, 0usize);
    let mut second: Option<(f64, usize)> = None;
    for (i, curve) in region.curves().iter().enumerate() {
        let d = curve.distance(p);
        if d < best.0 {
            if best.0.is_finite() {
                second = Some(best);
            }
            best = (d, i);
        } else if second.is_none_or(|(s, _)| d < s) {
            second = Some((d, i));
        }
    }
    BoundaryDistance {
        distance: best.0,
        curve: best.1,
        second,
    }
}
