use super::OsmError;
use crate::geo::GeoPoint;

pub const DEFAULT_RADIUS_M: f64 = 300.0;
pub const MIN_RADIUS_M: f64 = 50.0;
pub const MAX_RADIUS_M: f64 = 1000.0;

/// Overpass QL statement for every node, way and relation within `radius`
/// meters of `center`, returned with tags and inline geometry.
pub fn build_overpass_query(center: GeoPoint, radius: f64) -> Result<String, OsmError> {
    if !(MIN_RADIUS_M..=MAX_RADIUS_M).contains(&radius) {
        return Err(OsmError::RadiusOutOfRange(radius));
    }
    let around = format!("around:{},{},{}", radius, center.lat, center.lon);
    Ok(format!(
        "[out:json][timeout:25];(node({around});way({around});relation({around}););out body geom;"
    ))
}
