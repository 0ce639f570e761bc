//! Areas of the two width-`R` strips along a simple closed polygon.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    intra_curve_feature, perimeter, point_in_polygon, point_segment_distance_sq, seeded_rng,
    signed_area, turn_angles, BoundaryCurve, FeatureWitness, GeometryError, Point,
    MIN_FEATURE_SIZE,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandAreas {
    /// Points inside the polygon within distance `R` of it: the strip the
    /// polygon produces when it is the outer boundary of a region.
    pub outer_band: f64,
    /// Points outside the polygon within distance `R` of it: the strip the
    /// polygon produces when it bounds a hole.
    pub inner_band: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEstimate {
    pub areas: BandAreas,
    pub outer_std_err: f64,
    pub inner_std_err: f64,
}

fn ccw(vertices: &[Point]) -> Vec<Point> {
    let mut v = vertices.to_vec();
    if signed_area(&v) < 0.0 {
        v.reverse();
    }
    v
}

/// Closed-form strip areas from edge lengths and corner turn angles.
///
/// With `phi` the turn angle at a corner (positive when convex), the inside
/// strip loses a kite of area `R^2 tan(phi/2)` at convex corners and gains a
/// circular sector `R^2 |phi|/2` at reflex ones; the outside strip is the
/// mirror image. Requires feature size at least `2R` so strips of
/// non-adjacent edges never overlap.
pub fn band_areas_closed_form(vertices: &[Point], radius: f64) -> Result<BandAreas, GeometryError> {
    if vertices.len() < 3 {
        return Err(GeometryError::Malformed {
            curve: 0,
            reason: "polygon needs at least 3 vertices".into(),
        });
    }
    let poly = ccw(vertices);
    let mut witness = FeatureWitness {
        distance: f64::INFINITY,
        curve: 0,
        vertex: None,
        other_curve: 0,
    };
    intra_curve_feature(0, &BoundaryCurve::polygon(poly.clone()), &mut witness);
    let bound = MIN_FEATURE_SIZE * radius;
    if witness.distance < bound - 1e-9 * radius {
        return Err(GeometryError::FeatureSizeViolation {
            curve: 0,
            vertex: witness.vertex,
            other_curve: 0,
            distance: witness.distance,
            bound,
        });
    }

    let r2 = radius * radius;
    let straight = radius * perimeter(&poly);
    let mut outer_band = straight;
    let mut inner_band = straight;
    for phi in turn_angles(&poly) {
        if phi > 0.0 {
            outer_band -= r2 * (phi / 2.0).tan();
            inner_band += r2 * phi / 2.0;
        } else if phi < 0.0 {
            outer_band += r2 * (-phi) / 2.0;
            inner_band -= r2 * (-phi / 2.0).tan();
        }
    }
    Ok(BandAreas {
        outer_band,
        inner_band,
    })
}

/// Monte Carlo estimate of both strip areas over the `R`-inflated bounding box.
pub fn band_areas_oracle(vertices: &[Point], radius: f64, samples: usize, seed: u64) -> BandEstimate {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Point::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    lo = Point::new(lo.x - radius, lo.y - radius);
    hi = Point::new(hi.x + radius, hi.y + radius);
    let box_area = (hi.x - lo.x) * (hi.y - lo.y);
    let r2 = radius * radius;
    let n = vertices.len();

    let mut rng = seeded_rng(seed, 0);
    let (mut inside_hits, mut outside_hits) = (0u64, 0u64);
    for _ in 0..samples {
        let p = Point::new(
            lo.x + (hi.x - lo.x) * rng.gen::<f64>(),
            lo.y + (hi.y - lo.y) * rng.gen::<f64>(),
        );
        let near = (0..n).any(|i| point_segment_distance_sq(p, vertices[i], vertices[(i + 1) % n]) <= r2);
        if near {
            if point_in_polygon(p, vertices) {
                inside_hits += 1;
            } else {
                outside_hits += 1;
            }
        }
    }

    let estimate = |hits: u64| {
        let p = hits as f64 / samples as f64;
        (
            box_area * p,
            box_area * (p * (1.0 - p) / samples as f64).sqrt(),
        )
    };
    let (outer_band, outer_std_err) = estimate(inside_hits);
    let (inner_band, inner_std_err) = estimate(outside_hits);
    BandEstimate {
        areas: BandAreas {
            outer_band,
            inner_band,
        },
        outer_std_err,
        inner_std_err,
    }
}

/// A random star-shaped polygon whose feature size is at least `2R` (`R = 1`).
///
/// Vertices sit at jittered angles around the origin with random radii;
/// candidates are redrawn until the feature-size check passes.
pub fn random_feature_polygon(seed: u64) -> Vec<Point> {
    let mut rng = seeded_rng(seed, 7);
    loop {
        let m = rng.gen_range(4..=9);
        let base = rng.gen_range(6.0..14.0);
        let mut angles: Vec<f64> = (0..m)
            .map(|i| (i as f64 + rng.gen_range(-0.3..0.3)) * 2.0 * PI / m as f64)
            .collect();
        angles.sort_by(f64::total_cmp);
        let vertices: Vec<Point> = angles
            .iter()
            .map(|&a| {
                let r = base * rng.gen_range(0.55..1.0);
                Point::new(r * a.cos(), r * a.sin())
            })
            .collect();
        if band_areas_closed_form(&vertices, 1.0).is_ok() && signed_area(&vertices).abs() > 1.0 {
            return vertices;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: f64) -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(side, 0.0),
            Point::new(side, side),
            Point::new(0.0, side),
        ]
    }

    #[test]
    fn square_side_four() {
        let l = 4.0;
        let r = 1.0;
        let bands = band_areas_closed_form(&square(l), r).unwrap();
        assert!((bands.outer_band - 12.0).abs() < 1e-12);
        assert!((bands.outer_band - (l * l - (l - 2.0 * r).powi(2))).abs() < 1e-12);
        assert!((bands.inner_band - (16.0 + PI)).abs() < 1e-12);
        assert!((bands.inner_band - (4.0 * l * r + PI * r * r)).abs() < 1e-12);
    }

    #[test]
    fn orientation_does_not_matter() {
        let mut cw = square(6.0);
        cw.reverse();
        assert_eq!(
            band_areas_closed_form(&cw, 1.0).unwrap(),
            band_areas_closed_form(&square(6.0), 1.0).unwrap()
        );
    }

    #[test]
    fn rejects_small_feature_size() {
        assert!(matches!(
            band_areas_closed_form(&square(1.5), 1.0),
            Err(GeometryError::FeatureSizeViolation { .. })
        ));
    }

    #[test]
    fn reflex_corner_l_shape() {
        // L-shape: 8x8 square minus the 4x4 top-right quadrant; one reflex corner.
        let l_shape = vec![
            Point::new(0.0, 0.0),
            Point::new(8.0, 0.0),
            Point::new(8.0, 4.0),
            Point::new(4.0, 4.0),
            Point::new(4.0, 8.0),
            Point::new(0.0, 8.0),
        ];
        let bands = band_areas_closed_form(&l_shape, 1.0).unwrap();
        // Inside strip: 32 edge length, five convex corners lose 1 each,
        // the reflex corner gains a quarter disk.
        assert!((bands.outer_band - (32.0 - 5.0 + PI / 4.0)).abs() < 1e-12);
        // Outside strip: five quarter disks, reflex overlap of 1.
        assert!((bands.inner_band - (32.0 + 5.0 * PI / 4.0 - 1.0)).abs() < 1e-12);
        let mc = band_areas_oracle(&l_shape, 1.0, 400_000, 5);
        assert!((mc.areas.outer_band - bands.outer_band).abs() < 4.0 * mc.outer_std_err);
        assert!((mc.areas.inner_band - bands.inner_band).abs() < 4.0 * mc.inner_std_err);
    }

    #[test]
    fn oracle_matches_square() {
        let est = band_areas_oracle(&square(4.0), 1.0, 200_000, 1);
        assert!((est.areas.outer_band - 12.0).abs() < 3.0 * est.outer_std_err);
        assert!((est.areas.inner_band - (16.0 + PI)).abs() < 3.0 * est.inner_std_err);
    }

    #[test]
    fn oracle_error_halves_with_four_times_samples() {
        let a = band_areas_oracle(&square(4.0), 1.0, 100_000, 2);
        let b = band_areas_oracle(&square(4.0), 1.0, 400_000, 2);
        let ratio = a.outer_std_err / b.outer_std_err;
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn convex_outside_strip_exceeds_inside_strip() {
        for seed in 0..5 {
            let poly = random_feature_polygon(seed);
            let bands = band_areas_closed_form(&poly, 1.0).unwrap();
            let convex = turn_angles(&ccw(&poly)).iter().all(|&phi| phi >= 0.0);
            if convex {
                let expected: f64 = turn_angles(&ccw(&poly))
                    .iter()
                    .map(|&phi| phi / 2.0 + (phi / 2.0).tan())
                    .sum();
                assert!((bands.inner_band - bands.outer_band - expected).abs() < 1e-9);
                assert!(bands.inner_band > bands.outer_band);
            }
        }
    }
}
