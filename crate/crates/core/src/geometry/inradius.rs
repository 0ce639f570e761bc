use super::{boundary_distance_unchecked, GeometryError, Point, Region};

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn clearance(region: &Region, p: Point) -> f64 {
    if region.contains(p) {
        boundary_distance_unchecked(region, p).distance
    } else {
        f64::NEG_INFINITY
    }
}

fn golden_max(lo: f64, hi: f64, iterations: usize, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iterations {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Radius of the largest inscribed disk and its center.
///
/// Grid search over the bounding box followed by alternating golden-section
/// line searches in a one-cell window around the best grid point.
pub fn inradius_oracle(region: &Region, grid_step: f64) -> Result<(f64, Point), GeometryError> {
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(GeometryError::DomainError {
            value: grid_step,
            lo: 0.0,
            hi: 0.1,
        });
    }
    let (lo, hi) = region.bbox();
    let nx = ((hi.x - lo.x) / grid_step).ceil() as usize;
    let ny = ((hi.y - lo.y) / grid_step).ceil() as usize;
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..=nx {
        for j in 0..=ny {
            let p = Point::new(lo.x + i as f64 * grid_step, lo.y + j as f64 * grid_step);
            let d = clearance(region, p);
            if d > best.0 {
                best = (d, p);
            }
        }
    }

    let mut center = best.1;
    let mut value = best.0;
    for _ in 0..8 {
        let (x, fx) = golden_max(center.x - grid_step, center.x + grid_step, 40, |x| {
            clearance(region, Point::new(x, center.y))
        });
        if fx > value {
            value = fx;
            center.x = x;
        }
        let (y, fy) = golden_max(center.y - grid_step, center.y + grid_step, 40, |y| {
            clearance(region, Point::new(center.x, y))
        });
        if fy > value {
            value = fy;
            center.y = y;
        }
    }
    Ok((value, center))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryCurve;

    #[test]
    fn square_side_two() {
        let region = Region::new(vec![BoundaryCurve::polygon(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
        ])])
        .unwrap();
        let (t, c) = inradius_oracle(&region, 0.1).unwrap();
        assert!((t - 1.0).abs() <= 0.1);
        assert!(c.dist(Point::new(1.0, 1.0)) < 0.2);
    }

    #[test]
    fn annulus() {
        let region = Region::new(vec![
            BoundaryCurve::circle(Point::new(0.0, 0.0), 5.0),
            BoundaryCurve::circle(Point::new(0.0, 0.0), 1.0),
        ])
        .unwrap();
        let (t, _) = inradius_oracle(&region, 0.1).unwrap();
        assert!((t - 2.0).abs() <= 0.1, "{t}");
    }

    #[test]
    fn rejects_coarse_grid() {
        let region = Region::new(vec![BoundaryCurve::circle(Point::new(0.0, 0.0), 5.0)]).unwrap();
        assert!(inradius_oracle(&region, 0.5).is_err());
    }
}
