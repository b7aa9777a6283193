use serde::{Deserialize, Serialize};

use super::planar::{bounds_of, clip_convex, ring_signed_area};
use super::{GeoError, LocalPoint, Polygon};
use crate::scalar::{normalize_degrees, Scalar};

/// Arc chords used by [`sector_polygonize`] when no count is given.
pub const DEFAULT_ARC_SEGMENTS: usize = 32;
pub const MIN_ARC_SEGMENTS: usize = 8;
/// Chords per convex (≤ 90°) pie piece inside [`overlap_area`].
pub const OVERLAP_SEGMENTS_PER_PIECE: usize = 32;

/// Half-ring region between two radii and two bearings. The sector sweeps
/// clockwise from `bearing_start` to `bearing_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnularSector<T = f64> {
    pub center: LocalPoint<T>,
    pub r_inner: T,
    pub r_outer: T,
    pub bearing_start: T,
    pub bearing_end: T,
}

impl<T: Scalar> AnnularSector<T> {
    pub fn new(
        center: LocalPoint<T>,
        r_inner: T,
        r_outer: T,
        bearing_start: T,
        bearing_end: T,
    ) -> Result<Self, GeoError> {
        if !(r_inner >= T::zero() && r_outer > r_inner && r_outer.is_finite()) {
            return Err(GeoError::InvalidSector(format!(
                "radii must satisfy 0 <= {r_inner} < {r_outer}"
            )));
        }
        let s = Self {
            center,
            r_inner,
            r_outer,
            bearing_start: normalize_degrees(bearing_start),
            bearing_end: normalize_degrees(bearing_end),
        };
        let span = s.span();
        if !(span > T::zero() && span <= T::lit(180.0) + T::lit(1e-9)) {
            return Err(GeoError::InvalidSector(format!(
                "angular span {span} outside (0, 180]"
            )));
        }
        Ok(s)
    }

    /// Clockwise angular width in degrees.
    pub fn span(&self) -> T {
        let d = normalize_degrees(self.bearing_end - self.bearing_start);
        if d == T::zero() {
            T::lit(360.0)
        } else {
            d
        }
    }

    /// Exact area of the curved region.
    pub fn analytic_area(&self) -> T {
        self.span() / T::lit(360.0)
            * T::PI()
            * (self.r_outer * self.r_outer - self.r_inner * self.r_inner)
    }

    /// Membership test against the exact curved region.
    pub fn contains(&self, p: LocalPoint<T>) -> bool {
        let d = p - self.center;
        let r = d.norm();
        if r < self.r_inner || r > self.r_outer {
            return false;
        }
        let off = normalize_degrees(d.bearing() - self.bearing_start);
        off <= self.span()
    }

    fn arc(&self, radius: T, from: T, span: T, segments: usize) -> impl Iterator<Item = LocalPoint<T>> + '_ {
        let step = span / T::from_usize(segments);
        (0..=segments).map(move |i| {
            self.center
                .offset_polar(from + step * T::from_usize(i), radius)
        })
    }
}

/// Discretizes the sector into a polygon with `arc_segments` chords on each
/// arc (clamped to at least [`MIN_ARC_SEGMENTS`]). With `r_inner == 0` the
/// inner arc collapses onto the center.
pub fn sector_polygonize<T: Scalar>(s: &AnnularSector<T>, arc_segments: usize) -> Polygon<T> {
    let n = arc_segments.max(MIN_ARC_SEGMENTS);
    let span = s.span();
    let mut ring: Vec<LocalPoint<T>> = s.arc(s.r_outer, s.bearing_start, span, n).collect();
    if s.r_inner > T::zero() {
        let mut inner: Vec<_> = s.arc(s.r_inner, s.bearing_start, span, n).collect();
        inner.reverse();
        ring.extend(inner);
    } else {
        ring.push(s.center);
    }
    Polygon::new(ring).expect("validated sector polygonizes to a non-degenerate ring")
}

/// Area of `s ∩ poly` using [`OVERLAP_SEGMENTS_PER_PIECE`] chords per piece.
pub fn overlap_area<T: Scalar>(s: &AnnularSector<T>, poly: &Polygon<T>) -> T {
    overlap_area_with(s, poly, OVERLAP_SEGMENTS_PER_PIECE)
}

/// Computes `Area(poly ∩ pie(r_outer)) − Area(poly ∩ pie(r_inner))`. Each
/// pie is split into ≤ 90° pieces, which are convex, and the polygon is
/// clipped against every piece.
pub fn overlap_area_with<T: Scalar>(s: &AnnularSector<T>, poly: &Polygon<T>, segments_per_piece: usize) -> T {
    let (lo, hi) = poly.bounds();
    let c = s.center;
    let r = s.r_outer;
    if lo.x > c.x + r || hi.x < c.x - r || lo.y > c.y + r || hi.y < c.y - r {
        return T::zero();
    }
    let span = s.span();
    let pieces = (span / T::lit(90.0)).ceil().to_usize().unwrap_or(1).max(1);
    let piece_span = span / T::from_usize(pieces);
    let n = segments_per_piece.max(1);
    let verts = poly.vertices();

    let mut total = T::zero();
    let mut sector_discrete = T::zero();
    let mut pie = Vec::with_capacity(n + 2);
    for k in 0..pieces {
        let from = s.bearing_start + piece_span * T::from_usize(k);
        for radius in [s.r_outer, s.r_inner] {
            if radius <= T::zero() {
                continue;
            }
            pie.clear();
            pie.push(c);
            pie.extend(s.arc(radius, from, piece_span, n));
            // arc runs clockwise; the clipper wants counterclockwise
            pie.reverse();
            let (plo, phi) = bounds_of(&pie);
            let sign = if radius == s.r_outer { T::one() } else { -T::one() };
            sector_discrete = sector_discrete + sign * ring_signed_area(&pie);
            if plo.x > hi.x || phi.x < lo.x || plo.y > hi.y || phi.y < lo.y {
                continue;
            }
            let clipped = clip_convex(verts, &pie);
            total = total + sign * ring_signed_area(&clipped).abs();
        }
    }
    total.max(T::zero()).min(sector_discrete).min(poly.area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sector(ri: f64, ro: f64, b0: f64, b1: f64) -> AnnularSector {
        AnnularSector::new(LocalPoint::origin(), ri, ro, b0, b1).unwrap()
    }

    #[test]
    fn rejects_bad_sectors() {
        let o = LocalPoint::<f64>::origin();
        assert!(AnnularSector::new(o, 5.0, 5.0, 0.0, 10.0).is_err());
        assert!(AnnularSector::new(o, -1.0, 5.0, 0.0, 10.0).is_err());
        assert!(AnnularSector::new(o, 0.0, 5.0, 0.0, 200.0).is_err());
        assert!(AnnularSector::new(o, 0.0, 5.0, 10.0, 10.0).is_err());
        let w = AnnularSector::new(o, 0.0, 5.0, 350.0, 20.0).unwrap();
        assert_relative_eq!(w.span(), 30.0, epsilon = 1e-12);
    }

    #[test]
    fn full_disc_as_two_halves() {
        let a = sector_polygonize(&sector(0.0, 10.0, 0.0, 180.0), 32).area()
            + sector_polygonize(&sector(0.0, 10.0, 180.0, 0.0), 32).area();
        assert_relative_eq!(a, std::f64::consts::PI * 100.0, max_relative = 0.005);
    }

    #[test]
    fn annulus_piece_area() {
        let s = sector(5.0, 20.0, 10.0, 50.0);
        assert_relative_eq!(s.analytic_area(), 130.899_693_899_574_7, max_relative = 1e-12);
        assert_relative_eq!(
            sector_polygonize(&s, DEFAULT_ARC_SEGMENTS).area(),
            130.90,
            max_relative = 0.005
        );
    }

    #[test]
    fn f32_sector_area() {
        let s = AnnularSector::<f32>::new(LocalPoint::origin(), 5.0, 20.0, 10.0, 50.0).unwrap();
        let a = sector_polygonize(&s, 32).area();
        assert!((a - 130.90).abs() / 130.90 < 0.005);
    }

    #[test]
    fn disjoint_is_zero() {
        let s = sector(0.0, 10.0, 0.0, 90.0);
        let far = Polygon::new(vec![
            LocalPoint::new(-50.0, -50.0),
            LocalPoint::new(-40.0, -50.0),
            LocalPoint::new(-40.0, -40.0),
        ])
        .unwrap();
        assert_eq!(overlap_area(&s, &far), 0.0);
        // behind the camera but inside the outer radius
        let behind = Polygon::new(vec![
            LocalPoint::new(-5.0, -5.0),
            LocalPoint::new(-1.0, -5.0),
            LocalPoint::new(-1.0, -1.0),
        ])
        .unwrap();
        assert_eq!(overlap_area(&s, &behind), 0.0);
    }

    #[test]
    fn sector_inside_huge_polygon() {
        let big = Polygon::new(vec![
            LocalPoint::new(-1e3, -1e3),
            LocalPoint::new(1e3, -1e3),
            LocalPoint::new(1e3, 1e3),
            LocalPoint::new(-1e3, 1e3),
        ])
        .unwrap();
        for s in [sector(0.0, 30.0, 300.0, 100.0), sector(12.0, 28.0, 290.0, 330.0)] {
            assert_relative_eq!(overlap_area(&s, &big), s.analytic_area(), max_relative = 0.005);
        }
    }

    #[test]
    fn contains_respects_wraparound() {
        let s = sector(5.0, 20.0, 350.0, 20.0);
        assert!(s.contains(LocalPoint::new(0.0, 10.0)));
        assert!(!s.contains(LocalPoint::new(0.0, 2.0)));
        assert!(!s.contains(LocalPoint::new(10.0, 0.0)));
    }
}
