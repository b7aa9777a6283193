//! Sector-overlap matching of photo features to map features.
//!
//! Each photo feature defines a half-ring search region around the camera.
//! Candidates of the same category are scored by the share of their own
//! footprint that falls inside the region, and the best one above the
//! threshold is selected. Within a scene every map feature is assigned to
//! at most one photo feature.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::geo::{overlap_area, AnnularSector, GeoError, LocalPoint};
use crate::osm::{FeatureCategory, GeoFeature};
use crate::photo::PhotoFeature;
use crate::scalar::normalize_degrees;
use crate::scene::CameraPose;

pub const DEFAULT_THRESHOLD: f64 = 0.02;
/// Scores closer than this are treated as tied.
pub const TIE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerUp {
    pub id: String,
    pub r_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub photo_feature: PhotoFeature,
    pub matched: Option<GeoFeature>,
    pub r_norm: f64,
    pub a_overlap: f64,
    pub runner_up: Option<RunnerUp>,
}

impl MatchResult {
    pub fn unmatched(pf: PhotoFeature, runner_up: Option<RunnerUp>) -> Self {
        Self {
            photo_feature: pf,
            matched: None,
            r_norm: 0.0,
            a_overlap: 0.0,
            runner_up,
        }
    }

    pub fn matched_id(&self) -> Option<&str> {
        self.matched.as_ref().map(|g| g.id.as_str())
    }
}

/// Search region for a photo feature. Spans wider than 180° come back as
/// two halves split at the midpoint.
pub fn sector_from_photo_feature(camera: &CameraPose, pf: &PhotoFeature) -> Vec<AnnularSector> {
    let (left, right) = pf.angle_span;
    let (r_in, r_out) = pf.distance_range;
    let make = |a: f64, b: f64| {
        AnnularSector::new(
            LocalPoint::origin(),
            r_in,
            r_out,
            normalize_degrees(camera.heading + a),
            normalize_degrees(camera.heading + b),
        )
        .expect("validated photo feature yields a valid sector")
    };
    if right - left > 180.0 {
        let mid = (left + right) / 2.0;
        vec![make(left, mid), make(mid, right)]
    } else {
        vec![make(left, right)]
    }
}

/// Candidates of the given category; `Other` admits everything.
pub fn candidate_filter(features: &[GeoFeature], category: FeatureCategory) -> Vec<GeoFeature> {
    features
        .iter()
        .filter(|f| category == FeatureCategory::Other || f.category == category)
        .cloned()
        .collect()
}

/// `(r_norm, a_overlap)` of a feature against one or more sector pieces.
pub fn overlap_ratio(sectors: &[AnnularSector], feature: &GeoFeature) -> Result<(f64, f64), GeoError> {
    let area = feature.area();
    if feature.footprint.is_empty() || area.is_nan() || area < crate::geo::MIN_POLYGON_AREA {
        return Err(GeoError::DegeneratePolygon(format!("feature {} has no area", feature.id)));
    }
    let a_overlap: f64 = sectors
        .iter()
        .flat_map(|s| feature.footprint.iter().map(move |p| overlap_area(s, p)))
        .sum();
    let a_overlap = a_overlap.min(area);
    Ok(((a_overlap / area).clamp(0.0, 1.0), a_overlap))
}

#[derive(Debug, Clone, Copy)]
struct Score {
    r_norm: f64,
    a_overlap: f64,
}

fn centroid_distance(f: &GeoFeature) -> f64 {
    f.centroid().norm()
}

/// Total order used for selection: higher score first, then nearer
/// centroid, then smaller id.
fn prefer(a: (f64, &GeoFeature), b: (f64, &GeoFeature)) -> Ordering {
    if (a.0 - b.0).abs() > TIE_EPSILON {
        return b.0.total_cmp(&a.0);
    }
    centroid_distance(a.1)
        .total_cmp(&centroid_distance(b.1))
        .then_with(|| a.1.id.cmp(&b.1.id))
}

fn score_row(camera: &CameraPose, pf: &PhotoFeature, gfs: &[GeoFeature]) -> Vec<Option<Score>> {
    let sectors = sector_from_photo_feature(camera, pf);
    gfs.iter()
        .map(|g| {
            if pf.category != FeatureCategory::Other && g.category != pf.category {
                return None;
            }
            match overlap_ratio(&sectors, g) {
                Ok((r_norm, a_overlap)) => Some(Score { r_norm, a_overlap }),
                Err(e) => {
                    log::warn!("skipping candidate {}: {e}", g.id);
                    None
                }
            }
        })
        .collect()
}

/// Normalized overlap of every photo feature against every map feature;
/// `None` where the categories disagree.
pub fn score_matrix(pfs: &[PhotoFeature], gfs: &[GeoFeature], camera: &CameraPose) -> Vec<Vec<Option<f64>>> {
    pfs.iter()
        .map(|pf| score_row(camera, pf, gfs).into_iter().map(|s| s.map(|s| s.r_norm)).collect())
        .collect()
}

fn best_of(row: &[Option<Score>], gfs: &[GeoFeature], skip: impl Fn(usize) -> bool) -> Option<(usize, Score)> {
    let mut best: Option<(usize, Score)> = None;
    for (j, s) in row.iter().enumerate() {
        let Some(s) = s else { continue };
        if skip(j) {
            continue;
        }
        best = match best {
            Some((bj, bs)) if prefer((bs.r_norm, &gfs[bj]), (s.r_norm, &gfs[j])) != Ordering::Greater => Some((bj, bs)),
            _ => Some((j, *s)),
        };
    }
    best
}

fn runner_up(row: &[Option<Score>], gfs: &[GeoFeature], exclude: Option<usize>) -> Option<RunnerUp> {
    best_of(row, gfs, |j| Some(j) == exclude)
        .filter(|(_, s)| s.r_norm > 0.0)
        .map(|(j, s)| RunnerUp {
            id: gfs[j].id.clone(),
            r_norm: s.r_norm,
        })
}

/// Best candidate for a single photo feature.
pub fn match_feature(pf: &PhotoFeature, candidates: &[GeoFeature], camera: &CameraPose, tau: f64) -> MatchResult {
    let row = score_row(camera, pf, candidates);
    match best_of(&row, candidates, |_| false) {
        Some((j, s)) if s.r_norm >= tau => MatchResult {
            photo_feature: pf.clone(),
            matched: Some(candidates[j].clone()),
            r_norm: s.r_norm,
            a_overlap: s.a_overlap,
            runner_up: runner_up(&row, candidates, Some(j)),
        },
        _ => MatchResult::unmatched(pf.clone(), runner_up(&row, candidates, None)),
    }
}

/// Greedy one-to-one assignment over a score matrix. The highest remaining
/// score above `tau` is fixed first; ties follow the candidate order
/// (nearer centroid, smaller id), then the photo feature order.
pub fn greedy_assign(scores: &[Vec<Option<f64>>], gfs: &[GeoFeature], tau: f64) -> Vec<Option<usize>> {
    let mut assigned: Vec<Option<usize>> = vec![None; scores.len()];
    let mut taken = vec![false; gfs.len()];
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, row) in scores.iter().enumerate() {
            if assigned[i].is_some() {
                continue;
            }
            for (j, s) in row.iter().enumerate() {
                let Some(s) = *s else { continue };
                if taken[j] || s < tau {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, bj, bs)) => match prefer((s, &gfs[j]), (bs, &gfs[bj])) {
                        Ordering::Less => true,
                        Ordering::Equal => i < bi,
                        Ordering::Greater => false,
                    },
                };
                if better {
                    best = Some((i, j, s));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        assigned[i] = Some(j);
        taken[j] = true;
    }
    assigned
}

/// Matches every photo feature of a scene, preserving input order.
pub fn match_scene(pfs: &[PhotoFeature], gfs: &[GeoFeature], camera: &CameraPose, tau: f64) -> Vec<MatchResult> {
    let rows: Vec<Vec<Option<Score>>> = pfs.iter().map(|pf| score_row(camera, pf, gfs)).collect();
    let ratios: Vec<Vec<Option<f64>>> = rows
        .iter()
        .map(|r| r.iter().map(|s| s.map(|s| s.r_norm)).collect())
        .collect();
    let assignment = greedy_assign(&ratios, gfs, tau);
    pfs.iter()
        .zip(&rows)
        .zip(assignment)
        .map(|((pf, row), a)| match a {
            Some(j) => {
                let s = row[j].expect("assigned cell has a score");
                MatchResult {
                    photo_feature: pf.clone(),
                    matched: Some(gfs[j].clone()),
                    r_norm: s.r_norm,
                    a_overlap: s.a_overlap,
                    runner_up: runner_up(row, gfs, Some(j)),
                }
            }
            None => MatchResult::unmatched(pf.clone(), runner_up(row, gfs, None)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoPoint, Polygon};

    fn camera(heading: f64) -> CameraPose {
        CameraPose::new(GeoPoint::new(0.0, 0.0).unwrap(), heading).unwrap()
    }

    fn pf(span: (f64, f64), dist: (f64, f64), cat: FeatureCategory) -> PhotoFeature {
        PhotoFeature::new("pf", span, "desc", dist, cat).unwrap()
    }

    fn square(id: &str, cat: FeatureCategory, bearing: f64, range: f64, side: f64) -> GeoFeature {
        let c = LocalPoint::origin().offset_polar(bearing, range);
        let h = side / 2.0;
        let p = Polygon::new(vec![
            LocalPoint::new(c.x - h, c.y - h),
            LocalPoint::new(c.x + h, c.y - h),
            LocalPoint::new(c.x + h, c.y + h),
            LocalPoint::new(c.x - h, c.y + h),
        ])
        .unwrap();
        GeoFeature::from_footprint(id, Some(id.to_string()), cat, vec![p])
    }

    #[test]
    fn sector_geometry() {
        let s = sector_from_photo_feature(&camera(0.0), &pf((-70.0, -30.0), (12.0, 28.0), FeatureCategory::Building));
        assert_eq!(s.len(), 1);
        assert!((s[0].bearing_start - 290.0).abs() < 1e-9 && (s[0].bearing_end - 330.0).abs() < 1e-9);
        assert_eq!((s[0].r_inner, s[0].r_outer), (12.0, 28.0));

        let s = sector_from_photo_feature(&camera(90.0), &pf((-10.0, 10.0), (5.0, 20.0), FeatureCategory::Road));
        assert!((s[0].bearing_start - 80.0).abs() < 1e-9 && (s[0].bearing_end - 100.0).abs() < 1e-9);

        let s = sector_from_photo_feature(&camera(0.0), &pf((-100.0, 100.0), (5.0, 20.0), FeatureCategory::Road));
        assert_eq!(s.len(), 2);
        assert!((s[0].bearing_start - 260.0).abs() < 1e-9 && s[0].bearing_end.abs() < 1e-9);
        assert!(s[1].bearing_start.abs() < 1e-9 && (s[1].bearing_end - 100.0).abs() < 1e-9);
    }

    #[test]
    fn category_filter() {
        let mut fs: Vec<_> = (0..5).map(|i| square(&format!("b{i}"), FeatureCategory::Building, 0.0, 50.0, 5.0)).collect();
        fs.extend((0..2).map(|i| square(&format!("r{i}"), FeatureCategory::Road, 0.0, 50.0, 5.0)));
        assert_eq!(candidate_filter(&fs, FeatureCategory::Building).len(), 5);
        assert_eq!(candidate_filter(&fs, FeatureCategory::Other).len(), 7);
        assert!(candidate_filter(&[], FeatureCategory::Road).is_empty());
    }

    #[test]
    fn contained_and_disjoint() {
        let cam = camera(0.0);
        let p = pf((-20.0, 20.0), (10.0, 60.0), FeatureCategory::Building);
        let sectors = sector_from_photo_feature(&cam, &p);
        let inside = square("in", FeatureCategory::Building, 0.0, 30.0, 4.0);
        let (r, a) = overlap_ratio(&sectors, &inside).unwrap();
        assert!((r - 1.0).abs() <= 0.005 && (a - 16.0).abs() < 0.1);
        let out = square("out", FeatureCategory::Building, 180.0, 30.0, 4.0);
        assert_eq!(overlap_ratio(&sectors, &out).unwrap(), (0.0, 0.0));

        let m = match_feature(&p, &[out], &cam, DEFAULT_THRESHOLD);
        assert!(m.matched.is_none());
        assert_eq!(m.r_norm, 0.0);
        assert_eq!(m.photo_feature.description, "desc");
    }

    #[test]
    fn nearer_centroid_wins_tie() {
        let cam = camera(0.0);
        let p = pf((-30.0, 30.0), (5.0, 100.0), FeatureCategory::Building);
        let far = square("a", FeatureCategory::Building, 0.0, 60.0, 4.0);
        let near = square("z", FeatureCategory::Building, 0.0, 30.0, 4.0);
        let m = match_feature(&p, &[far, near], &cam, DEFAULT_THRESHOLD);
        assert_eq!(m.matched_id(), Some("z"));
        assert_eq!(m.runner_up.as_ref().map(|r| r.id.as_str()), Some("a"));
    }

    #[test]
    fn greedy_conflict() {
        let gfs = vec![
            square("g0", FeatureCategory::Building, 0.0, 30.0, 4.0),
            square("g1", FeatureCategory::Building, 0.0, 60.0, 4.0),
        ];
        let scores = vec![vec![Some(0.3), Some(0.1)], vec![Some(0.8), None]];
        assert_eq!(greedy_assign(&scores, &gfs, 0.02), vec![Some(1), Some(0)]);
        let scores = vec![vec![Some(0.3), Some(0.01)], vec![Some(0.8), None]];
        assert_eq!(greedy_assign(&scores, &gfs, 0.02), vec![None, Some(0)]);
    }
}
