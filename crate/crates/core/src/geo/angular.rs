use serde::{Deserialize, Serialize};

use super::{GeoError, LocalPoint, Polygon};
use crate::scalar::{normalize_degrees, signed_degrees, Scalar};

/// Clockwise arc of bearings from `start` to `end`. `start == end` encodes
/// the full circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularInterval<T = f64> {
    pub start: T,
    pub end: T,
    pub wraps: bool,
}

impl<T: Scalar> AngularInterval<T> {
    pub fn from_start_span(start: T, span: T) -> Result<Self, GeoError> {
        if !(span > T::zero() && span <= T::lit(360.0)) {
            return Err(GeoError::InvalidInterval(span.as_f64()));
        }
        if span >= T::lit(360.0) {
            return Ok(Self::full());
        }
        let start = normalize_degrees(start);
        let end = normalize_degrees(start + span);
        Ok(Self {
            start,
            end,
            wraps: start + span >= T::lit(360.0),
        })
    }

    /// Interval centered on `center` with total width `width`.
    pub fn centered(center: T, width: T) -> Result<Self, GeoError> {
        Self::from_start_span(center - width / T::lit(2.0), width)
    }

    pub fn full() -> Self {
        Self {
            start: T::zero(),
            end: T::zero(),
            wraps: true,
        }
    }

    pub fn is_full(&self) -> bool {
        self.start == self.end
    }

    pub fn span(&self) -> T {
        if self.is_full() {
            T::lit(360.0)
        } else {
            normalize_degrees(self.end - self.start)
        }
    }

    pub fn midpoint(&self) -> T {
        normalize_degrees(self.start + self.span() / T::lit(2.0))
    }

    pub fn contains(&self, bearing: T) -> bool {
        self.is_full() || normalize_degrees(bearing - self.start) <= self.span()
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.contains(other.start) || other.contains(self.start)
    }

    /// Midpoint relative to `heading`, in `(-180, 180]`.
    pub fn relative_midpoint(&self, heading: T) -> T {
        signed_degrees(self.midpoint() - heading)
    }

    /// Smallest interval covering both.
    pub fn hull(&self, other: &Self) -> Self {
        if self.is_full() || other.is_full() {
            return Self::full();
        }
        let t = T::lit(1e-9);
        union_hull(&[(self.start, self.span()), (other.start, other.span())], t)
    }
}

fn union_hull<T: Scalar>(arcs: &[(T, T)], tolerance: T) -> AngularInterval<T> {
    let full = T::lit(360.0);
    let mut flat: Vec<(T, T)> = Vec::with_capacity(arcs.len() * 2);
    for &(start, len) in arcs {
        let s = normalize_degrees(start);
        let e = s + len;
        if e > full {
            flat.push((s, full));
            flat.push((T::zero(), e - full));
        } else {
            flat.push((s, e));
        }
    }
    flat.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut merged: Vec<(T, T)> = Vec::with_capacity(flat.len());
    for (s, e) in flat {
        match merged.last_mut() {
            Some(last) if s <= last.1 + tolerance => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    // largest uncovered gap, including the one that wraps past north
    let first = merged[0];
    let last = merged[merged.len() - 1];
    let mut gap_len = first.0 + full - last.1;
    let mut gap_start = last.1;
    for w in merged.windows(2) {
        let g = w[1].0 - w[0].1;
        if g > gap_len {
            gap_len = g;
            gap_start = w[0].1;
        }
    }
    if gap_len <= tolerance {
        return AngularInterval::full();
    }
    let span = full - gap_len;
    AngularInterval::from_start_span(gap_start + gap_len, span.max(tolerance))
        .unwrap_or_else(|_| AngularInterval::full())
}

/// Bearings under which `poly` is seen from `origin`. Returns the full circle
/// when `origin` is inside or on the polygon.
pub fn angular_extent<T: Scalar>(origin: LocalPoint<T>, poly: &Polygon<T>) -> AngularInterval<T> {
    let eps = T::lit(1e-9);
    if poly.contains(origin) || poly.boundary_distance(origin) <= eps {
        return AngularInterval::full();
    }
    let arcs: Vec<(T, T)> = poly
        .edges()
        .map(|(a, b)| {
            let ba = (a - origin).bearing();
            let bb = (b - origin).bearing();
            let d = signed_degrees(bb - ba);
            if d >= T::zero() {
                (ba, d)
            } else {
                (bb, -d)
            }
        })
        .collect();
    union_hull(&arcs, eps)
}

/// Smallest interval covering every part.
pub fn angular_extent_all<T: Scalar>(origin: LocalPoint<T>, parts: &[Polygon<T>]) -> Option<AngularInterval<T>> {
    parts
        .iter()
        .map(|p| angular_extent(origin, p))
        .reduce(|a, b| a.hull(&b))
}
