//! Builtin regions.

use std::f64::consts::PI;

use crate::geometry::{BoundaryCurve, Point, Region};

pub const STANDARD_SIDE: f64 = 30.0;
pub const STANDARD_AREA: f64 = 786.9;

const EYE_SIDE: f64 = 2.02;
const EYE_CENTERS: [Point; 2] = [Point::new(10.0, 20.0), Point::new(20.0, 20.0)];
const MOUTH_CENTER: Point = Point::new(15.0, 9.0);
const MOUTH_HEIGHT: f64 = 6.0;
const MOUTH_CUT: f64 = 1.8;

fn regular_octagon(center: Point, side: f64) -> Vec<Point> {
    let r = side / (2.0 * (PI / 8.0).sin());
    (0..8)
        .map(|k| {
            let a = PI / 8.0 + k as f64 * PI / 4.0;
            Point::new(center.x + r * a.cos(), center.y + r * a.sin())
        })
        .collect()
}

fn regular_octagon_area(side: f64) -> f64 {
    2.0 * (1.0 + 2f64.sqrt()) * side * side
}

/// Axis-aligned `w` x `h` rectangle with its four corners cut at 45 degrees.
fn cut_rectangle(center: Point, w: f64, h: f64, cut: f64) -> Vec<Point> {
    let (x0, x1) = (center.x - w / 2.0, center.x + w / 2.0);
    let (y0, y1) = (center.y - h / 2.0, center.y + h / 2.0);
    vec![
        Point::new(x0 + cut, y0),
        Point::new(x1 - cut, y0),
        Point::new(x1, y0 + cut),
        Point::new(x1, y1 - cut),
        Point::new(x1 - cut, y1),
        Point::new(x0 + cut, y1),
        Point::new(x0, y1 - cut),
        Point::new(x0, y0 + cut),
    ]
}

/// A 30 x 30 square with two octagonal "eyes" and an elongated octagonal
/// "mouth". The mouth width is chosen so the free area is exactly 786.9.
pub fn standard_region() -> Region {
    let outer = vec![
        Point::new(0.0, 0.0),
        Point::new(STANDARD_SIDE, 0.0),
        Point::new(STANDARD_SIDE, STANDARD_SIDE),
        Point::new(0.0, STANDARD_SIDE),
    ];
    let holes = STANDARD_SIDE * STANDARD_SIDE - STANDARD_AREA;
    let mouth_area = holes - 2.0 * regular_octagon_area(EYE_SIDE);
    let mouth_width = (mouth_area + 2.0 * MOUTH_CUT * MOUTH_CUT) / MOUTH_HEIGHT;
    let mut curves = vec![BoundaryCurve::polygon(outer)];
    for c in EYE_CENTERS {
        curves.push(BoundaryCurve::polygon(regular_octagon(c, EYE_SIDE)));
    }
    curves.push(BoundaryCurve::polygon(cut_rectangle(
        MOUTH_CENTER,
        mouth_width,
        MOUTH_HEIGHT,
        MOUTH_CUT,
    )));
    Region::new(curves).expect("standard region is well formed")
}

pub const ANNULUS_OUTER: f64 = 12.0;
pub const ANNULUS_INNER: f64 = 6.0;

/// Concentric circles of radius 12 and 6; the largest inscribed disk has
/// radius 3.
pub fn annulus() -> Region {
    let c = Point::new(ANNULUS_OUTER, ANNULUS_OUTER);
    Region::new(vec![
        BoundaryCurve::circle(c, ANNULUS_OUTER),
        BoundaryCurve::circle(c, ANNULUS_INNER),
    ])
    .expect("annulus is well formed")
}

/// Node count giving the annulus the same density as `n_standard` nodes on
/// the standard region.
pub fn annulus_nodes(n_standard: usize) -> usize {
    (n_standard as f64 * annulus().area() / STANDARD_AREA).round() as usize
}

/// Looks up a builtin region by name.
pub fn builtin(name: &str) -> Option<Region> {
    match name {
        "standard" => Some(standard_region()),
        "annulus" => Some(annulus()),
        _ => None,
    }
}
