//! Final annotation records and the versioned result document.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::matcher::MatchResult;
use crate::osm::FeatureCategory;
use crate::photo::{BoundingBox, FixDecision, LabeledBox, Modified, PhotoFeature};
use crate::scene::CameraPose;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_CROP_SHRINK: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PresentationError {
    #[error("{matches} match results but {annotations} annotations")]
    ArityMismatch { matches: usize, annotations: usize },
    #[error("fix decision for {found:?} applied to draft {expected:?}")]
    LabelMismatch { expected: String, found: String },
    #[error("crop shrink {0} outside [0, 0.5)")]
    InvalidShrink(f64),
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error("malformed result document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub label: String,
    /// Name reported by the detector.
    pub detected_name: String,
    pub modified: Modified,
    pub bounding_box: BoundingBox,
    pub crop_range: BoundingBox,
    pub category: FeatureCategory,
    pub matched_feature_id: Option<String>,
    pub r_norm: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedSummary {
    pub name: String,
    pub category: FeatureCategory,
    pub angle_span: (f64, f64),
    pub distance_range: (f64, f64),
    pub description: String,
}

impl From<&PhotoFeature> for UnmatchedSummary {
    fn from(pf: &PhotoFeature) -> Self {
        Self {
            name: pf.name.clone(),
            category: pf.category,
            angle_span: pf.angle_span,
            distance_range: pf.distance_range,
            description: pf.description.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneResult {
    pub schema_version: u32,
    pub photo_id: String,
    pub camera: CameraPose,
    pub annotations: Vec<AnnotationRecord>,
    pub tour_text: String,
    pub unmatched: Vec<UnmatchedSummary>,
    /// Wall-clock stage timings. Left out of the canonical document.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<StageTiming>,
}

/// Stable identifier of a photo: 16 hex digits of its SHA-256.
pub fn photo_id(photo: &[u8]) -> String {
    let d = Sha256::digest(photo);
    d[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn merge_bbox_fix(draft: &LabeledBox, decision: &FixDecision) -> Result<BoundingBox, PresentationError> {
    if draft.label != decision.label {
        return Err(PresentationError::LabelMismatch {
            expected: draft.label.clone(),
            found: decision.label.clone(),
        });
    }
    Ok(match decision.modified {
        Modified::Yes => decision.bounding_box,
        Modified::No => draft.bounding_box,
    })
}

/// Moves each edge toward the center by `shrink / 2` of the box size, so
/// the crop keeps `1 − shrink` of each dimension.
pub fn compute_crop_range(bbox: &BoundingBox, shrink: f64) -> Result<BoundingBox, PresentationError> {
    if !(0.0..0.5).contains(&shrink) {
        return Err(PresentationError::InvalidShrink(shrink));
    }
    let dx = (bbox.x_max - bbox.x_min) * shrink / 2.0;
    let dy = (bbox.y_max - bbox.y_min) * shrink / 2.0;
    let crop = BoundingBox {
        x_min: (bbox.x_min + dx).clamp(0.0, 1.0),
        y_min: (bbox.y_min + dy).clamp(0.0, 1.0),
        x_max: (bbox.x_max - dx).clamp(0.0, 1.0),
        y_max: (bbox.y_max - dy).clamp(0.0, 1.0),
    };
    Ok(crop)
}

/// Record-level text: map facts for matched features, the model's own
/// description otherwise.
pub fn feature_description(m: &MatchResult) -> String {
    let pf = &m.photo_feature;
    match &m.matched {
        None => pf.description.clone(),
        Some(g) => {
            let mut parts = vec![format!("{} ({})", g.display_name(), g.category)];
            if !pf.description.is_empty() {
                parts.push(pf.description.clone());
            }
            if !g.inclusive_info.is_empty() {
                parts.push(format!("Includes {}", g.inclusive_info.join("; ")));
            }
            if !g.nearby_info.is_empty() {
                parts.push(format!("Near {}", g.nearby_info.join(", ")));
            }
            parts.join(". ")
        }
    }
}

/// Label shown for a match: the map name when there is one.
pub fn display_label(m: &MatchResult) -> String {
    m.matched
        .as_ref()
        .and_then(|g| g.name.clone())
        .unwrap_or_else(|| m.photo_feature.name.clone())
}

pub fn build_annotation(
    m: &MatchResult,
    draft: &LabeledBox,
    decision: &FixDecision,
    shrink: f64,
) -> Result<AnnotationRecord, PresentationError> {
    let bounding_box = merge_bbox_fix(draft, decision)?;
    Ok(AnnotationRecord {
        label: display_label(m),
        detected_name: m.photo_feature.name.clone(),
        modified: decision.modified,
        bounding_box,
        crop_range: compute_crop_range(&bounding_box, shrink)?,
        category: m.matched.as_ref().map_or(m.photo_feature.category, |g| g.category),
        matched_feature_id: m.matched_id().map(str::to_string),
        r_norm: m.r_norm,
        description: feature_description(m),
    })
}

pub fn build_scene_result(
    photo_id: String,
    camera: CameraPose,
    matches: &[MatchResult],
    annotations: Vec<AnnotationRecord>,
    tour_text: String,
    timings: Vec<StageTiming>,
) -> Result<SceneResult, PresentationError> {
    if matches.len() != annotations.len() {
        return Err(PresentationError::ArityMismatch {
            matches: matches.len(),
            annotations: annotations.len(),
        });
    }
    let unmatched = matches
        .iter()
        .filter(|m| m.matched.is_none())
        .map(|m| UnmatchedSummary::from(&m.photo_feature))
        .collect();
    Ok(SceneResult {
        schema_version: SCHEMA_VERSION,
        photo_id,
        camera,
        annotations,
        tour_text,
        unmatched,
        timings,
    })
}

/// Canonical document: fixed field order, four-decimal relative
/// coordinates, no timings, trailing newline.
pub fn serialize_result(result: &SceneResult) -> String {
    let canonical = SceneResult {
        timings: Vec::new(),
        ..result.clone()
    };
    let mut s = serde_json::to_string_pretty(&canonical).expect("result serializes");
    s.push('\n');
    s
}

/// Same as [`serialize_result`] but keeping timings.
pub fn serialize_result_with_timings(result: &SceneResult) -> String {
    let mut s = serde_json::to_string_pretty(result).expect("result serializes");
    s.push('\n');
    s
}

pub fn parse_result(doc: &str) -> Result<SceneResult, PresentationError> {
    let r: SceneResult = serde_json::from_str(doc).map_err(|e| PresentationError::Malformed(e.to_string()))?;
    if r.schema_version != SCHEMA_VERSION {
        return Err(PresentationError::SchemaVersion(r.schema_version));
    }
    Ok(r)
}
