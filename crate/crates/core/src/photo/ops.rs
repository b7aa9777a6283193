use log::{debug, info};
use serde_json::Value;

use super::parse::parse_detection_output;
use super::prompt::detection_prompt;
use super::provider::{DescribeItem, DescribeRequest, ProviderError, VlmProvider};
use super::{BoundingBox, FixDecision, LabeledBox, Modified, PhotoError, PhotoFeature};
use crate::matcher::MatchResult;
use crate::osm::FeatureCategory;
use crate::scene::CameraPose;

/// Smallest coordinate change that counts as a real correction.
const FIX_EPSILON: f64 = 0.005;

/// Proper-noun-like: a capitalized word after the first, or script without
/// letter case (e.g. CJK).
pub fn is_landmark_name(name: &str) -> bool {
    let words: Vec<&str> = name
        .split(|c: char| c.is_whitespace() || "()[],;:".contains(c))
        .filter(|w| !w.is_empty())
        .collect();
    let uncased = name
        .chars()
        .any(|c| c.is_alphabetic() && !c.is_lowercase() && !c.is_uppercase());
    uncased || words.iter().skip(1).any(|w| w.chars().next().is_some_and(char::is_uppercase))
}

/// Keeps core-category features and landmark-like Other features.
pub fn align_categories(features: Vec<PhotoFeature>) -> Vec<PhotoFeature> {
    features
        .into_iter()
        .filter(|f| {
            let keep = f.category.is_core() || is_landmark_name(&f.name);
            if !keep {
                info!("dropping generic feature {:?} (no core category)", f.name);
            }
            keep
        })
        .collect()
}

/// Runs detection and returns aligned features ordered left to right.
pub fn detect(provider: &dyn VlmProvider, photo: &[u8], _camera: &CameraPose) -> Result<Vec<PhotoFeature>, PhotoError> {
    let text = provider.detect(detection_prompt(), photo)?;
    let parsed = parse_detection_output(&text)?;
    for r in &parsed.rejects {
        debug!("rejected detection line {}: {} ({})", r.line_no, r.text, r.reason);
    }
    let mut features = align_categories(parsed.features);
    features.sort_by(|a, b| {
        let ma = a.angle_span.0 + a.angle_span.1;
        let mb = b.angle_span.0 + b.angle_span.1;
        ma.total_cmp(&mb)
    });
    Ok(features)
}

/// Pulls the first JSON object out of model text, tolerating code fences
/// and surrounding prose.
fn extract_json(text: &str) -> Option<Value> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    if end < start {
        return None;
    }
    serde_json::from_str(&text[start..=end]).ok()
}

fn box_from(v: &Value) -> Option<[f64; 4]> {
    let arr = v.get("bounding_box").or_else(|| v.get("bbox"))?.as_array()?;
    if arr.len() != 4 {
        return None;
    }
    let mut out = [0.0; 4];
    for (o, x) in out.iter_mut().zip(arr) {
        *o = x.as_f64()?;
    }
    Some(out)
}

pub fn ground(provider: &dyn VlmProvider, photo: &[u8], label: &str) -> Result<BoundingBox, PhotoError> {
    let text = provider.ground(photo, label)?;
    if text.contains("NOT_FOUND") {
        return Err(PhotoError::GroundingRefused(label.to_string()));
    }
    let v = extract_json(&text)
        .ok_or_else(|| ProviderError::BadResponse(format!("no JSON object in grounding reply for {label:?}")))?;
    if v.get("found").and_then(Value::as_bool) == Some(false) {
        return Err(PhotoError::GroundingRefused(label.to_string()));
    }
    let coords = box_from(&v).ok_or_else(|| ProviderError::BadResponse("grounding reply lacks bounding_box".into()))?;
    BoundingBox::clamped(coords)
}

pub fn fix_bbox(provider: &dyn VlmProvider, photo: &[u8], draft: &LabeledBox) -> Result<FixDecision, PhotoError> {
    let text = provider.fix(photo, draft)?;
    let v = extract_json(&text).ok_or_else(|| ProviderError::BadResponse("no JSON object in fix reply".into()))?;
    let modified = match v.get("modified").and_then(Value::as_str).map(str::to_ascii_lowercase) {
        Some(m) if m == "yes" => Modified::Yes,
        Some(m) if m == "no" => Modified::No,
        other => return Err(ProviderError::BadResponse(format!("modified flag {other:?}")).into()),
    };
    let unchanged = FixDecision {
        label: draft.label.clone(),
        modified: Modified::No,
        bounding_box: draft.bounding_box,
    };
    if modified == Modified::No {
        return Ok(unchanged);
    }
    let coords = box_from(&v).ok_or_else(|| ProviderError::BadResponse("fix reply lacks bounding_box".into()))?;
    let fixed = BoundingBox::clamped(coords)?;
    if fixed.max_delta(&draft.bounding_box) < FIX_EPSILON {
        return Ok(unchanged);
    }
    Ok(FixDecision {
        label: draft.label.clone(),
        modified: Modified::Yes,
        bounding_box: fixed,
    })
}

pub fn describe_request(matches: &[MatchResult], camera: &CameraPose) -> DescribeRequest {
    let items = matches
        .iter()
        .map(|m| {
            let pf = &m.photo_feature;
            let rel = (pf.angle_span.0 + pf.angle_span.1) / 2.0;
            match &m.matched {
                Some(g) => DescribeItem {
                    name: g.name.clone().unwrap_or_else(|| pf.name.clone()),
                    category: g.category.as_str().to_string(),
                    relative_bearing: g.angular_interval.relative_midpoint(camera.heading),
                    distance_m: g.distance_m,
                    matched: true,
                    osm_id: Some(g.id.clone()),
                    inclusive_info: g.inclusive_info.clone(),
                    nearby_info: g.nearby_info.clone(),
                    vlm_description: pf.description.clone(),
                },
                None => DescribeItem {
                    name: pf.name.clone(),
                    category: category_word(pf.category).to_string(),
                    relative_bearing: rel,
                    distance_m: (pf.distance_range.0 + pf.distance_range.1) / 2.0,
                    matched: false,
                    osm_id: None,
                    inclusive_info: Vec::new(),
                    nearby_info: Vec::new(),
                    vlm_description: pf.description.clone(),
                },
            }
        })
        .collect();
    DescribeRequest { items }
}

fn category_word(c: FeatureCategory) -> &'static str {
    match c {
        FeatureCategory::Other => "landmark",
        c => c.as_str(),
    }
}

/// Tour-guide narrative over all matched and unmatched features.
pub fn describe(
    provider: &dyn VlmProvider,
    photo: &[u8],
    matches: &[MatchResult],
    camera: &CameraPose,
) -> Result<String, PhotoError> {
    if matches.is_empty() {
        return Err(PhotoError::EmptyScene);
    }
    let text = provider.describe(photo, &describe_request(matches, camera))?;
    Ok(text.trim().to_string())
}
