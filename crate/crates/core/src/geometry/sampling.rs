use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, Point, Region};

/// The simulator's only randomness source.
///
/// ChaCha8 keyed by `seed_from_u64(seed)` with an explicit stream number per
/// purpose. ChaCha is a counter-based cipher, so the output for a given
/// `(seed, stream)` pair is identical on every platform.
pub type SeededRng = ChaCha8Rng;

/// Stream used for node positions.
pub const STREAM_POSITIONS: u64 = 0;
/// Stream used for the node ID permutation.
pub const STREAM_IDS: u64 = 1;

pub fn seeded_rng(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const MIN_ACCEPTANCE: f64 = 0.01;
const MIN_ATTEMPTS_BEFORE_CHECK: usize = 10_000;

/// `n` i.i.d. uniform points in the region by rejection from the bounding box.
pub fn sample_uniform(region: &Region, n: usize, seed: u64) -> Result<Vec<Point>, GeometryError> {
    let (lo, hi) = region.bbox();
    let mut rng = seeded_rng(seed, STREAM_POSITIONS);
    let mut points = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while points.len() < n {
        attempts += 1;
        let p = Point::new(
            lo.x + (hi.x - lo.x) * rng.gen::<f64>(),
            lo.y + (hi.y - lo.y) * rng.gen::<f64>(),
        );
        if region.contains(p) {
            points.push(p);
        }
        if attempts >= MIN_ATTEMPTS_BEFORE_CHECK
            && (points.len() as f64) < MIN_ACCEPTANCE * attempts as f64
        {
            return Err(GeometryError::NonConvergence {
                accepted: points.len(),
                attempts,
            });
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryCurve;

    fn square(side: f64) -> BoundaryCurve {
        BoundaryCurve::polygon(vec![
            Point::new(0.0, 0.0),
            Point::new(side, 0.0),
            Point::new(side, side),
            Point::new(0.0, side),
        ])
    }

    #[test]
    fn deterministic_for_seed() {
        let region = Region::new(vec![square(10.0)]).unwrap();
        let a = sample_uniform(&region, 500, 7).unwrap();
        let b = sample_uniform(&region, 500, 7).unwrap();
        let c = sample_uniform(&region, 500, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mean_within_clt_bound() {
        let side = 10.0;
        let region = Region::new(vec![square(side)]).unwrap();
        let n = 100_000;
        let pts = sample_uniform(&region, n, 3).unwrap();
        let mean = pts.iter().map(|p| p.x).sum::<f64>() / n as f64;
        // Uniform on [0, L]: sd = L / sqrt(12).
        let sigma = side / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - side / 2.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn no_points_in_holes() {
        let hole = BoundaryCurve::circle(Point::new(5.0, 5.0), 3.0);
        let region = Region::new(vec![square(10.0), hole]).unwrap();
        let pts = sample_uniform(&region, 20_000, 11).unwrap();
        assert!(pts.iter().all(|p| p.dist(Point::new(5.0, 5.0)) >= 3.0));
        assert!(pts.iter().all(|&p| region.contains(p)));
    }

    #[test]
    fn degenerate_region_does_not_converge() {
        // A thin triangle occupies far less than 1% of its bounding box.
        let sliver = BoundaryCurve::polygon(vec![
            Point::new(0.0, 0.0),
            Point::new(1000.0, 1000.0),
            Point::new(1000.0, 1000.5),
        ]);
        let region = Region::new(vec![sliver]).unwrap();
        assert!(matches!(
            sample_uniform(&region, 100, 1),
            Err(GeometryError::NonConvergence { .. })
        ));
    }
}
