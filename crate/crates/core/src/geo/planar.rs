use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use super::GeoError;
use crate::scalar::Scalar;

/// Polygons with less area than this (m²) are rejected.
pub const MIN_POLYGON_AREA: f64 = 1e-9;

/// Meters east (`x`) and north (`y`) of a projection origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPoint<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> LocalPoint<T> {
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Point at `range` meters along `bearing_deg` from `self`.
    pub fn offset_polar(self, bearing_deg: T, range: T) -> Self {
        let b = bearing_deg.to_radians();
        Self::new(self.x + range * b.sin(), self.y + range * b.cos())
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// Bearing of `self` seen from the origin, in `[0, 360)`.
    pub fn bearing(self) -> T {
        crate::scalar::normalize_degrees(self.x.atan2(self.y).to_degrees())
    }

    /// Rotates clockwise (in bearing terms) by `deg` about the origin.
    pub fn rotate_bearing(self, deg: T) -> Self {
        let r = deg.to_radians();
        let (s, c) = r.sin_cos();
        Self::new(self.x * c + self.y * s, -self.x * s + self.y * c)
    }
}

impl<T: Scalar> Add for LocalPoint<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for LocalPoint<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for LocalPoint<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

/// Shoelace sum; positive for counterclockwise rings.
pub fn ring_signed_area<T: Scalar>(ring: &[LocalPoint<T>]) -> T {
    if ring.len() < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    let mut prev = ring[ring.len() - 1];
    for &p in ring {
        acc = acc + prev.cross(p);
        prev = p;
    }
    acc / T::lit(2.0)
}

/// Absolute shoelace area of a raw vertex ring.
pub fn polygon_area<T: Scalar>(ring: &[LocalPoint<T>]) -> Result<T, GeoError> {
    let a = ring_signed_area(ring).abs();
    if ring.len() < 3 || !(a >= T::lit(MIN_POLYGON_AREA)) {
        return Err(GeoError::DegeneratePolygon(format!(
            "{} vertices, area {}",
            ring.len(),
            a
        )));
    }
    Ok(a)
}

/// Simple polygon in the local frame, stored counterclockwise with the
/// closing edge implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon<T = f64> {
    vertices: Vec<LocalPoint<T>>,
}

impl<T: Scalar> Polygon<T> {
    /// Drops consecutive duplicate vertices (including a repeated closing
    /// vertex), rejects rings with fewer than three vertices or negligible
    /// area, and orients the ring counterclockwise.
    pub fn new(vertices: Vec<LocalPoint<T>>) -> Result<Self, GeoError> {
        let mut vs: Vec<LocalPoint<T>> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if !(v.x.is_finite() && v.y.is_finite()) {
                return Err(GeoError::DegeneratePolygon("non-finite vertex".into()));
            }
            if vs.last() != Some(&v) {
                vs.push(v);
            }
        }
        while vs.len() > 1 && vs.first() == vs.last() {
            vs.pop();
        }
        let signed = ring_signed_area(&vs);
        polygon_area(&vs)?;
        if signed < T::zero() {
            vs.reverse();
        }
        Ok(Self { vertices: vs })
    }

    pub fn vertices(&self) -> &[LocalPoint<T>] {
        &self.vertices
    }

    pub fn area(&self) -> T {
        ring_signed_area(&self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = (LocalPoint<T>, LocalPoint<T>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Area centroid.
    pub fn centroid(&self) -> LocalPoint<T> {
        let mut cx = T::zero();
        let mut cy = T::zero();
        for (a, b) in self.edges() {
            let w = a.cross(b);
            cx = cx + (a.x + b.x) * w;
            cy = cy + (a.y + b.y) * w;
        }
        let k = T::lit(6.0) * self.area();
        LocalPoint::new(cx / k, cy / k)
    }

    /// `(min, max)` corners of the axis-aligned bounding box.
    pub fn bounds(&self) -> (LocalPoint<T>, LocalPoint<T>) {
        bounds_of(&self.vertices)
    }

    pub fn contains(&self, p: LocalPoint<T>) -> bool {
        point_in_polygon(p, &self.vertices)
    }

    /// Euclidean distance from `p` to the polygon region (0 inside).
    pub fn distance_to(&self, p: LocalPoint<T>) -> T {
        if self.contains(p) {
            return T::zero();
        }
        self.boundary_distance(p)
    }

    pub fn boundary_distance(&self, p: LocalPoint<T>) -> T {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(T::infinity(), T::min)
    }

    /// Minimum distance between two polygon regions (0 when they touch).
    pub fn distance_to_polygon(&self, other: &Self) -> T {
        if self.vertices.iter().any(|&v| other.contains(v))
            || other.vertices.iter().any(|&v| self.contains(v))
        {
            return T::zero();
        }
        let mut best = T::infinity();
        for (a, b) in self.edges() {
            for (c, d) in other.edges() {
                if segments_intersect(a, b, c, d) {
                    return T::zero();
                }
                best = best
                    .min(point_segment_distance(a, c, d))
                    .min(point_segment_distance(b, c, d))
                    .min(point_segment_distance(c, a, b))
                    .min(point_segment_distance(d, a, b));
            }
        }
        best
    }

    /// Applies `f` to every vertex and re-validates.
    pub fn map_points(&self, f: impl Fn(LocalPoint<T>) -> LocalPoint<T>) -> Result<Self, GeoError> {
        Self::new(self.vertices.iter().map(|&p| f(p)).collect())
    }
}

pub(crate) fn bounds_of<T: Scalar>(pts: &[LocalPoint<T>]) -> (LocalPoint<T>, LocalPoint<T>) {
    let mut lo = LocalPoint::new(T::infinity(), T::infinity());
    let mut hi = LocalPoint::new(T::neg_infinity(), T::neg_infinity());
    for p in pts {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Even-odd crossing test.
pub fn point_in_polygon<T: Scalar>(p: LocalPoint<T>, ring: &[LocalPoint<T>]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = ring[i];
        let b = ring[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn point_segment_distance<T: Scalar>(p: LocalPoint<T>, a: LocalPoint<T>, b: LocalPoint<T>) -> T {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= T::zero() {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).max(T::zero()).min(T::one());
    p.distance(a + ab * t)
}

fn orient<T: Scalar>(a: LocalPoint<T>, b: LocalPoint<T>, c: LocalPoint<T>) -> T {
    (b - a).cross(c - a)
}

fn segments_intersect<T: Scalar>(
    a: LocalPoint<T>,
    b: LocalPoint<T>,
    c: LocalPoint<T>,
    d: LocalPoint<T>,
) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    (o1 * o2 < T::zero()) && (o3 * o4 < T::zero())
}

/// Sutherland–Hodgman clip of `subject` (any simple ring) against a convex,
/// counterclockwise `clip` ring. The result may contain degenerate
/// zero-width spikes when the subject is concave; its shoelace area is still
/// the area of the intersection.
pub fn clip_convex<T: Scalar>(subject: &[LocalPoint<T>], clip: &[LocalPoint<T>]) -> Vec<LocalPoint<T>> {
    if subject.len() < 3 || clip.len() < 3 {
        return Vec::new();
    }
    let mut output = subject.to_vec();
    let mut input = Vec::with_capacity(subject.len() + clip.len());
    let m = clip.len();
    for i in 0..m {
        let a = clip[i];
        let b = clip[(i + 1) % m];
        std::mem::swap(&mut input, &mut output);
        output.clear();
        let n = input.len();
        if n == 0 {
            break;
        }
        let edge = b - a;
        let side = |p: LocalPoint<T>| edge.cross(p - a);
        let mut s = input[n - 1];
        let mut s_side = side(s);
        for &e in input.iter() {
            let e_side = side(e);
            let s_in = s_side >= T::zero();
            let e_in = e_side >= T::zero();
            if e_in {
                if !s_in {
                    output.push(intersect(s, e, s_side, e_side));
                }
                output.push(e);
            } else if s_in {
                output.push(intersect(s, e, s_side, e_side));
            }
            s = e;
            s_side = e_side;
        }
    }
    output
}

#[inline]
fn intersect<T: Scalar>(s: LocalPoint<T>, e: LocalPoint<T>, s_side: T, e_side: T) -> LocalPoint<T> {
    let t = s_side / (s_side - e_side);
    s + (e - s) * t
}
