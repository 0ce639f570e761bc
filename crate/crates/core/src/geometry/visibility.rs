use std::f64::consts::PI;

use super::GeometryError;

const INVERT_TOL: f64 = 1e-9;

/// Fraction of a unit disk centered at distance `t` from an infinite straight
/// boundary that lies on the region side.
///
/// `rho(0) = 1/2`, `rho(1) = 1`, strictly increasing on `[0, 1]`.
pub fn visibility_fraction(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    1.0 - (t.acos() - t * (1.0 - t * t).sqrt()) / PI
}

/// Distance `t` in `[0, 1]` with `visibility_fraction(t) = r`, by bisection.
pub fn invert_visibility(r: f64) -> Result<f64, GeometryError> {
    if !(0.5..=1.0).contains(&r) {
        return Err(GeometryError::DomainError {
            value: r,
            lo: 0.5,
            hi: 1.0,
        });
    }
    // Both endpoints invert exactly.
    if r == 0.5 {
        return Ok(0.0);
    }
    if r == 1.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > INVERT_TOL {
        let mid = 0.5 * (lo + hi);
        if visibility_fraction(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints() {
        assert!((visibility_fraction(0.0) - 0.5).abs() < 1e-15);
        assert!((visibility_fraction(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(invert_visibility(0.5).unwrap(), 0.0);
        assert_eq!(invert_visibility(1.0).unwrap(), 1.0);
    }

    #[test]
    fn round_trip_at_point_three() {
        let t = invert_visibility(visibility_fraction(0.3)).unwrap();
        assert!((t - 0.3).abs() <= 1e-6);
    }

    #[test]
    fn rejects_out_of_domain() {
        assert!(invert_visibility(0.49).is_err());
        assert!(invert_visibility(1.01).is_err());
    }

    #[test]
    fn matches_numerical_quadrature() {
        // Area of the unit disk at height t above the line y = 0 that lies
        // above the line, integrated with the midpoint rule.
        for &t in &[0.0, 0.2, 0.5, 0.9] {
            let steps = 200_000;
            let h = 2.0 / steps as f64;
            let mut area = 0.0;
            for i in 0..steps {
                let y = -1.0 + (i as f64 + 0.5) * h;
                if y + t >= 0.0 {
                    area += 2.0 * (1.0 - y * y).sqrt() * h;
                }
            }
            assert!((area / PI - visibility_fraction(t)).abs() < 1e-5, "t = {t}");
        }
    }

    proptest! {
        #[test]
        fn inverse_is_identity(t in 0.0f64..=1.0) {
            let back = invert_visibility(visibility_fraction(t)).unwrap();
            prop_assert!((back - t).abs() <= 1e-6);
        }

        #[test]
        fn strictly_increasing(a in 0.0f64..1.0, delta in 1e-4f64..0.5) {
            let b = (a + delta).min(1.0);
            prop_assert!(visibility_fraction(b) > visibility_fraction(a));
        }
    }
}
