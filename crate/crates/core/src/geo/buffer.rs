use super::{GeoError, LocalPoint, Polygon};
use crate::scalar::Scalar;

// Joins sharper than this fall back to a bevel.
const MITER_LIMIT: f64 = 4.0;

/// Buffers a polyline into a corridor of total `width` with flat ends and
/// mitered joins.
pub fn polyline_to_polygon<T: Scalar>(line: &[LocalPoint<T>], width: T) -> Result<Polygon<T>, GeoError> {
    let mut pts: Vec<LocalPoint<T>> = Vec::with_capacity(line.len());
    for &p in line {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    if pts.len() < 2 {
        return Err(GeoError::DegenerateLine);
    }
    if !(width > T::zero()) {
        return Err(GeoError::DegeneratePolygon(format!("corridor width {width}")));
    }
    let half = width / T::lit(2.0);
    let normals: Vec<LocalPoint<T>> = pts
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            let len = d.norm();
            // left-hand normal
            LocalPoint::new(-d.y / len, d.x / len)
        })
        .collect();

    let mut left = Vec::with_capacity(pts.len() + 2);
    let mut right = Vec::with_capacity(pts.len() + 2);
    left.push(pts[0] + normals[0] * half);
    right.push(pts[0] - normals[0] * half);
    for i in 1..pts.len() - 1 {
        let (n0, n1) = (normals[i - 1], normals[i]);
        let bisector = n0 + n1;
        let blen = bisector.norm();
        let cos_half = if blen > T::zero() { blen / T::lit(2.0) } else { T::zero() };
        if cos_half > T::one() / T::lit(MITER_LIMIT) {
            let m = bisector * (half / (blen / T::lit(2.0)) / blen);
            left.push(pts[i] + m);
            right.push(pts[i] - m);
        } else {
            left.push(pts[i] + n0 * half);
            left.push(pts[i] + n1 * half);
            right.push(pts[i] - n0 * half);
            right.push(pts[i] - n1 * half);
        }
    }
    let last = pts.len() - 1;
    left.push(pts[last] + normals[last - 1] * half);
    right.push(pts[last] - normals[last - 1] * half);

    right.reverse();
    left.extend(right);
    Polygon::new(left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn straight_line_is_a_rectangle() {
        let line = [LocalPoint::new(0.0, 0.0), LocalPoint::new(100.0, 0.0)];
        let p = polyline_to_polygon(&line, 6.0).unwrap();
        assert_relative_eq!(p.area(), 600.0, max_relative = 1e-12);
    }

    #[test]
    fn single_point_is_degenerate() {
        assert_eq!(
            polyline_to_polygon(&[LocalPoint::new(1.0, 1.0), LocalPoint::new(1.0, 1.0)], 6.0),
            Err(GeoError::DegenerateLine)
        );
    }

    #[test]
    fn right_angle_miter_keeps_length_times_width() {
        let line = [
            LocalPoint::new(0.0, 0.0),
            LocalPoint::new(50.0, 0.0),
            LocalPoint::new(50.0, 50.0),
        ];
        let p = polyline_to_polygon(&line, 4.0).unwrap();
        assert_relative_eq!(p.area(), 400.0, max_relative = 1e-9);
    }
}
