//! Visibility reduction of map features: field-of-view filtering,
//! occlusion filtering and left-to-right ordering.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{AngularInterval, GeoPoint};
use crate::osm::{FeatureCategory, GeoFeature};
use crate::scalar::normalize_degrees;

pub const DEFAULT_FOV_DEG: f64 = 70.0;
pub const DEFAULT_FOV_MARGIN_DEG: f64 = 15.0;
/// Fraction of a feature's angular extent that must be hidden to drop it.
pub const OCCLUSION_COVERAGE: f64 = 0.9;
/// An occluder must be closer than the occluded feature by more than this.
pub const OCCLUSION_DEPTH_GAP_M: f64 = 2.0;
/// Neighborhood radius for nearby information.
pub const NEARBY_RADIUS_M: f64 = 25.0;

const GRID_BINS: usize = 3600;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("invalid camera pose: {0}")]
    InvalidPose(String),
}

/// Photo capture position and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: GeoPoint,
    /// Degrees clockwise from true north, in `[0, 360)`.
    pub heading: f64,
    pub fov_deg: f64,
    pub fov_margin_deg: f64,
}

impl CameraPose {
    pub fn new(position: GeoPoint, heading: f64) -> Result<Self, SceneError> {
        Self::with_fov(position, heading, DEFAULT_FOV_DEG, DEFAULT_FOV_MARGIN_DEG)
    }

    pub fn with_fov(position: GeoPoint, heading: f64, fov_deg: f64, fov_margin_deg: f64) -> Result<Self, SceneError> {
        let pose = Self {
            position,
            heading,
            fov_deg,
            fov_margin_deg,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !self.position.is_valid() {
            return Err(SceneError::InvalidPose(format!(
                "position ({}, {}) out of range",
                self.position.lat, self.position.lon
            )));
        }
        if !(self.heading >= 0.0 && self.heading < 360.0) {
            return Err(SceneError::InvalidPose(format!("heading {} outside [0, 360)", self.heading)));
        }
        if !(20.0..=120.0).contains(&self.fov_deg) {
            return Err(SceneError::InvalidPose(format!("fov {} outside [20, 120]", self.fov_deg)));
        }
        if !(self.fov_margin_deg >= 0.0 && self.fov_margin_deg <= 90.0) {
            return Err(SceneError::InvalidPose(format!(
                "fov margin {} outside [0, 90]",
                self.fov_margin_deg
            )));
        }
        Ok(())
    }

    /// Bearings considered inside the view, margin included.
    pub fn view_window(&self) -> AngularInterval {
        let width = self.fov_deg + 2.0 * self.fov_margin_deg;
        AngularInterval::centered(self.heading, width.min(360.0)).expect("validated fov is positive")
    }
}

pub fn fov_filter(features: &[GeoFeature], camera: &CameraPose) -> Vec<GeoFeature> {
    let window = camera.view_window();
    features
        .iter()
        .filter(|f| f.angular_interval.intersects(&window))
        .cloned()
        .collect()
}

fn occludes(category: FeatureCategory) -> bool {
    category == FeatureCategory::Building
}

fn occludable(category: FeatureCategory) -> bool {
    !matches!(
        category,
        FeatureCategory::Park | FeatureCategory::Road | FeatureCategory::Waterway
    )
}

/// 0.1° bins whose centers fall inside the interval. Intervals narrower than
/// a bin still claim the bin holding their midpoint.
fn bins(iv: &AngularInterval) -> Vec<bool> {
    let mut out = vec![false; GRID_BINS];
    let mut any = false;
    for (i, b) in out.iter_mut().enumerate() {
        if iv.contains((i as f64 + 0.5) * 360.0 / GRID_BINS as f64) {
            *b = true;
            any = true;
        }
    }
    if !any {
        let i = ((iv.midpoint() / 360.0 * GRID_BINS as f64) as usize).min(GRID_BINS - 1);
        out[i] = true;
    }
    out
}

/// Drops features whose angular extent is at least 90% hidden behind
/// strictly closer buildings. Coverage is measured against every input
/// feature, so the filter is idempotent.
pub fn occlusion_filter(features: &[GeoFeature], _camera: &CameraPose) -> Vec<GeoFeature> {
    let grids: Vec<Vec<bool>> = features.iter().map(|f| bins(&f.angular_interval)).collect();
    let mut keep = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        if !occludable(f.category) {
            keep.push(f.clone());
            continue;
        }
        let occluders: Vec<&Vec<bool>> = features
            .iter()
            .zip(&grids)
            .filter(|(o, _)| occludes(o.category) && o.distance_m < f.distance_m - OCCLUSION_DEPTH_GAP_M)
            .map(|(_, g)| g)
            .collect();
        let own = &grids[i];
        let total = own.iter().filter(|b| **b).count();
        let covered = (0..GRID_BINS)
            .filter(|&k| own[k] && occluders.iter().any(|g| g[k]))
            .count();
        if (covered as f64) < OCCLUSION_COVERAGE * total as f64 {
            keep.push(f.clone());
        }
    }
    keep
}

fn left_to_right(a: &GeoFeature, b: &GeoFeature, heading: f64) -> Ordering {
    let ra = a.angular_interval.relative_midpoint(heading);
    let rb = b.angular_interval.relative_midpoint(heading);
    ra.total_cmp(&rb)
        .then(a.distance_m.total_cmp(&b.distance_m))
        .then_with(|| a.id.cmp(&b.id))
}

/// Orders features by the relative bearing of their interval midpoints,
/// then distance, then id.
pub fn sort_left_to_right(features: &[GeoFeature], camera: &CameraPose) -> Vec<GeoFeature> {
    let heading = normalize_degrees(camera.heading);
    let mut out = features.to_vec();
    out.sort_by(|a, b| left_to_right(a, b, heading));
    out
}

/// Fills `nearby_info` with the names of each feature's left and right
/// neighbors plus every feature within 25 m.
pub fn summarize_nearby(features: &[GeoFeature]) -> Vec<GeoFeature> {
    let mut out = features.to_vec();
    for i in 0..features.len() {
        let mut names: Vec<String> = Vec::new();
        let mut push = |f: &GeoFeature| {
            if let Some(n) = &f.name {
                if Some(n) != features[i].name.as_ref() && !names.contains(n) {
                    names.push(n.clone());
                }
            }
        };
        if i > 0 {
            push(&features[i - 1]);
        }
        if i + 1 < features.len() {
            push(&features[i + 1]);
        }
        for (j, other) in features.iter().enumerate() {
            if j != i && features[i].footprint_distance(other) <= NEARBY_RADIUS_M {
                push(other);
            }
        }
        out[i].nearby_info = names;
    }
    out
}

/// FOV filter, occlusion filter, ordering and nearby summaries in sequence.
pub fn visible_features(features: &[GeoFeature], camera: &CameraPose) -> Vec<GeoFeature> {
    let in_view = fov_filter(features, camera);
    let unoccluded = occlusion_filter(&in_view, camera);
    summarize_nearby(&sort_left_to_right(&unoccluded, camera))
}
