//! Geodesy and planar geometry.
//!
//! Everything here is generic over [`Scalar`](crate::Scalar). Bearings are
//! degrees clockwise from true north; the local frame has `x` pointing east
//! and `y` pointing north, in meters.

mod angular;
mod buffer;
mod geodesy;
mod planar;
mod sector;

pub use angular::{angular_extent, angular_extent_all, AngularInterval};
pub use buffer::polyline_to_polygon;
pub use geodesy::{
    haversine_distance, initial_bearing, project_local, unproject_local, GeoPoint, EARTH_RADIUS_M,
    PROJECTION_RADIUS_M,
};
pub use planar::{
    clip_convex, point_in_polygon, point_segment_distance, polygon_area, ring_signed_area,
    LocalPoint, Polygon, MIN_POLYGON_AREA,
};
pub use sector::{
    overlap_area, overlap_area_with, sector_polygonize, AnnularSector, DEFAULT_ARC_SEGMENTS,
    MIN_ARC_SEGMENTS, OVERLAP_SEGMENTS_PER_PIECE,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid coordinate (lat {lat}, lon {lon})")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("bearing is undefined between coincident points")]
    CoincidentPoints,
    #[error("point lies {distance_m:.1} m from the projection origin (limit {limit_m} m)")]
    OutOfProjectionRange { distance_m: f64, limit_m: f64 },
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("degenerate line: fewer than two distinct points")]
    DegenerateLine,
    #[error("invalid sector: {0}")]
    InvalidSector(String),
    #[error("invalid angular interval span {0}")]
    InvalidInterval(f64),
}
