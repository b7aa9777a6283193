use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::category::{categorize, FeatureCategory};
use super::unify::{GeoGeometry, UnifiedWay};
use crate::geo::{
    angular_extent_all, polyline_to_polygon, project_local, AngularInterval, GeoError, GeoPoint,
    LocalPoint, Polygon,
};
use crate::scene::CameraPose;

/// Side length of the square footprint given to standalone point features.
pub const POINT_FOOTPRINT_M: f64 = 3.0;

/// Corridor widths used to give linear features an area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineWidths {
    pub road: f64,
    pub footway: f64,
    pub waterway: f64,
}

impl Default for LineWidths {
    fn default() -> Self {
        Self {
            road: 6.0,
            footway: 2.0,
            waterway: 10.0,
        }
    }
}

impl LineWidths {
    pub fn for_tags(&self, tags: &BTreeMap<String, String>, category: FeatureCategory) -> f64 {
        const FOOT: [&str; 8] = [
            "footway", "path", "pedestrian", "steps", "cycleway", "bridleway", "corridor", "track",
        ];
        match category {
            FeatureCategory::Waterway => self.waterway,
            FeatureCategory::Road => match tags.get("highway") {
                Some(h) if FOOT.contains(&h.as_str()) => self.footway,
                _ => self.road,
            },
            _ => self.footway,
        }
    }
}

/// A unified, matchable map feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoFeature {
    pub id: String,
    pub name: Option<String>,
    pub category: FeatureCategory,
    pub geometry: GeoGeometry,
    pub inclusive_info: Vec<String>,
    pub nearby_info: Vec<String>,
    pub distance_m: f64,
    pub angular_interval: AngularInterval,
    /// Area footprint in the camera-centered local frame.
    #[serde(skip)]
    pub footprint: Vec<Polygon>,
}

impl GeoFeature {
    /// Builds a feature straight from a local-frame footprint.
    pub fn from_footprint(
        id: impl Into<String>,
        name: Option<String>,
        category: FeatureCategory,
        footprint: Vec<Polygon>,
    ) -> Self {
        let origin = LocalPoint::origin();
        let distance_m = footprint
            .iter()
            .map(|p| p.distance_to(origin))
            .fold(f64::INFINITY, f64::min);
        let angular_interval = angular_extent_all(origin, &footprint).unwrap_or_else(AngularInterval::full);
        Self {
            id: id.into(),
            name,
            category,
            geometry: GeoGeometry::Area(Vec::new()),
            inclusive_info: Vec::new(),
            nearby_info: Vec::new(),
            distance_m,
            angular_interval,
            footprint,
        }
    }

    pub fn area(&self) -> f64 {
        self.footprint.iter().map(Polygon::area).sum()
    }

    /// Area-weighted centroid of the footprint.
    pub fn centroid(&self) -> LocalPoint {
        let total = self.area();
        let mut acc = LocalPoint::origin();
        for p in &self.footprint {
            acc = acc + p.centroid() * (p.area() / total);
        }
        acc
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.id)
    }

    /// Minimum distance between two footprints.
    pub fn footprint_distance(&self, other: &GeoFeature) -> f64 {
        let mut best = f64::INFINITY;
        for a in &self.footprint {
            for b in &other.footprint {
                best = best.min(a.distance_to_polygon(b));
            }
        }
        best
    }
}

fn square_around(c: LocalPoint, side: f64) -> Result<Polygon, GeoError> {
    let h = side / 2.0;
    Polygon::new(vec![
        LocalPoint::new(c.x - h, c.y - h),
        LocalPoint::new(c.x + h, c.y - h),
        LocalPoint::new(c.x + h, c.y + h),
        LocalPoint::new(c.x - h, c.y + h),
    ])
}

fn project_all(origin: GeoPoint, pts: &[GeoPoint]) -> Result<Vec<LocalPoint>, GeoError> {
    pts.iter().map(|&p| project_local(origin, p)).collect()
}

/// Local-frame area footprint of a geometry.
pub fn footprint_of(
    geometry: &GeoGeometry,
    origin: GeoPoint,
    width: f64,
) -> Result<Vec<Polygon>, GeoError> {
    match geometry {
        GeoGeometry::Point(p) => Ok(vec![square_around(project_local(origin, *p)?, POINT_FOOTPRINT_M)?]),
        GeoGeometry::Line(pts) => Ok(vec![polyline_to_polygon(&project_all(origin, pts)?, width)?]),
        GeoGeometry::Area(rings) => rings
            .iter()
            .map(|r| Polygon::new(project_all(origin, r)?))
            .collect(),
    }
}

/// Projects unified entities into the camera frame and derives category,
/// distance and angular extent. Unnamed `Other` entities are dropped, as are
/// entities whose geometry is degenerate or beyond the projection range.
pub fn build_geo_features(ways: &[UnifiedWay], camera: &CameraPose, widths: &LineWidths) -> Vec<GeoFeature> {
    let mut out = Vec::new();
    for w in ways {
        let category = categorize(&w.tags);
        let name = w.name().map(str::to_string);
        if category == FeatureCategory::Other && name.is_none() {
            continue;
        }
        let width = widths.for_tags(&w.tags, category);
        let footprint = match footprint_of(&w.geometry, camera.position, width) {
            Ok(f) if !f.is_empty() => f,
            Ok(_) => continue,
            Err(e) => {
                log::debug!("{}: dropped ({e})", w.id);
                continue;
            }
        };
        let mut f = GeoFeature::from_footprint(w.id.clone(), name, category, footprint);
        f.geometry = w.geometry.clone();
        f.inclusive_info = w.inclusive_info.clone();
        out.push(f);
    }
    out
}
