use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::element::{ElementKind, OsmElement};
use crate::geo::{project_local, GeoPoint, LocalPoint, Polygon};

/// Tagged nodes farther than this from every way become standalone features.
pub const NODE_ATTACH_RADIUS_M: f64 = 15.0;

/// Geometry of a unified entity, in geographic coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coordinates", rename_all = "lowercase")]
pub enum GeoGeometry {
    Point(GeoPoint),
    Line(Vec<GeoPoint>),
    /// One or more outer rings, each closed implicitly.
    Area(Vec<Vec<GeoPoint>>),
}

/// A way-level entity after nodes and relations have been folded in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedWay {
    pub id: String,
    pub tags: BTreeMap<String, String>,
    pub geometry: GeoGeometry,
    pub inclusive_info: Vec<String>,
}

impl UnifiedWay {
    pub fn name(&self) -> Option<&str> {
        self.tags.get("name").map(String::as_str).filter(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UnifyStats {
    pub attached_nodes: usize,
    pub standalone_nodes: usize,
    pub dropped_ways: usize,
    pub unresolvable_members: usize,
    pub multipolygons: usize,
}

/// Whether a closed way describes an area rather than a loop of line.
pub fn is_area(tags: &BTreeMap<String, String>) -> bool {
    let get = |k: &str| tags.get(k).map(String::as_str);
    match get("area") {
        Some("yes") => return true,
        Some("no") => return false,
        _ => {}
    }
    if tags.contains_key("highway") || tags.contains_key("barrier") || tags.contains_key("railway") {
        return false;
    }
    if matches!(get("natural"), Some("coastline" | "tree_row" | "cliff" | "ridge")) {
        return false;
    }
    if let Some(w) = get("waterway") {
        return matches!(w, "riverbank" | "dock" | "boatyard");
    }
    true
}

fn closed(pts: &[GeoPoint]) -> bool {
    pts.len() >= 4 && pts.first() == pts.last()
}

fn way_geometry(el: &OsmElement, nodes: &HashMap<i64, GeoPoint>) -> Option<Vec<GeoPoint>> {
    let pts: Vec<GeoPoint> = if !el.geometry.is_empty() {
        el.geometry.clone()
    } else {
        el.node_refs.iter().filter_map(|r| nodes.get(r).copied()).collect()
    };
    (pts.len() >= 2).then_some(pts)
}

/// Short description of a tagged node for a way's inclusive info, such as
/// `cafe: Starbucks` or `amenity=bench`.
pub fn node_summary(tags: &BTreeMap<String, String>) -> String {
    const KEYS: [&str; 12] = [
        "amenity", "shop", "tourism", "historic", "leisure", "office", "public_transport",
        "railway", "highway", "craft", "man_made", "entrance",
    ];
    let name = tags.get("name").filter(|s| !s.is_empty());
    let primary = KEYS.iter().find_map(|k| tags.get(*k).map(|v| (*k, v.as_str())));
    match (primary, name) {
        (Some((_, v)), Some(n)) => format!("{v}: {n}"),
        (Some((k, v)), None) => format!("{k}={v}"),
        (None, Some(n)) => n.clone(),
        (None, None) => tags
            .iter()
            .next()
            .map(|(k, v)| format!("{k}={v}"))
            .unwrap_or_default(),
    }
}

/// Relation summary attached to its member ways, e.g. `route: Central Line`.
pub fn relation_summary(rel: &OsmElement) -> String {
    let kind = rel.tags.get("type").map(String::as_str).unwrap_or("relation");
    match rel.name() {
        Some(n) => format!("{kind}: {n}"),
        None => kind.to_string(),
    }
}

/// Distance from `p` to a way's geometry, in meters, using a tangent plane
/// at `p`. `None` when the way lies outside the projection range.
pub fn node_way_distance(p: GeoPoint, geom: &GeoGeometry) -> Option<f64> {
    let project = |ring: &[GeoPoint]| -> Option<Vec<LocalPoint>> {
        ring.iter().map(|&q| project_local(p, q).ok()).collect()
    };
    let origin = LocalPoint::origin();
    match geom {
        GeoGeometry::Point(q) => Some(project_local(p, *q).ok()?.norm()),
        GeoGeometry::Line(pts) => {
            let l = project(pts)?;
            Some(
                l.windows(2)
                    .map(|w| crate::geo::point_segment_distance(origin, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min),
            )
        }
        GeoGeometry::Area(rings) => {
            let mut best = f64::INFINITY;
            for ring in rings {
                let local = project(ring)?;
                if let Ok(poly) = Polygon::new(local) {
                    best = best.min(poly.distance_to(origin));
                }
            }
            best.is_finite().then_some(best)
        }
    }
}

fn area_m2_around(p: GeoPoint, geom: &GeoGeometry) -> f64 {
    match geom {
        GeoGeometry::Area(rings) => rings
            .iter()
            .filter_map(|r| {
                let local: Option<Vec<LocalPoint>> = r.iter().map(|&q| project_local(p, q).ok()).collect();
                Polygon::new(local?).ok().map(|poly| poly.area())
            })
            .sum(),
        _ => 0.0,
    }
}

/// Picks the way a tagged node belongs to: the smallest containing area,
/// else the nearest way within [`NODE_ATTACH_RADIUS_M`]. Returns an index
/// into `ways`.
pub fn attachment_target(p: GeoPoint, ways: &[UnifiedWay]) -> Option<usize> {
    let mut containing: Option<(f64, &str, usize)> = None;
    let mut nearest: Option<(f64, &str, usize)> = None;
    for (i, w) in ways.iter().enumerate() {
        if w.tags.is_empty() {
            continue;
        }
        let Some(d) = node_way_distance(p, &w.geometry) else {
            continue;
        };
        if d == 0.0 && matches!(w.geometry, GeoGeometry::Area(_)) {
            let a = area_m2_around(p, &w.geometry);
            if containing.is_none_or(|(ba, bid, _)| (a, w.id.as_str()) < (ba, bid)) {
                containing = Some((a, &w.id, i));
            }
        } else if d <= NODE_ATTACH_RADIUS_M
            && nearest.is_none_or(|(bd, bid, _)| (d, w.id.as_str()) < (bd, bid))
        {
            nearest = Some((d, &w.id, i));
        }
    }
    containing.or(nearest).map(|(_, _, i)| i)
}

/// Turns ways into [`UnifiedWay`]s and folds every tagged node into the way
/// that contains it (or the nearest one within 15 m). Tagged nodes with no
/// such way become standalone point entities; untagged nodes only supply
/// way geometry.
pub fn embed_nodes_into_ways(elements: &[OsmElement]) -> (Vec<UnifiedWay>, UnifyStats) {
    let mut stats = UnifyStats::default();
    let nodes: HashMap<i64, GeoPoint> = elements
        .iter()
        .filter(|e| e.kind == ElementKind::Node)
        .filter_map(|e| Some((e.id, e.coords?)))
        .collect();

    let mut ways = Vec::new();
    for el in elements.iter().filter(|e| e.kind == ElementKind::Way) {
        let Some(pts) = way_geometry(el, &nodes) else {
            log::warn!("{}: unresolvable geometry, dropped", el.key());
            stats.dropped_ways += 1;
            continue;
        };
        let geometry = if closed(&pts) && is_area(&el.tags) {
            GeoGeometry::Area(vec![pts])
        } else {
            GeoGeometry::Line(pts)
        };
        ways.push(UnifiedWay {
            id: el.key(),
            tags: el.tags.clone(),
            geometry,
            inclusive_info: Vec::new(),
        });
    }

    let mut standalone = Vec::new();
    for el in elements.iter().filter(|e| e.kind == ElementKind::Node && !e.tags.is_empty()) {
        let Some(p) = el.coords else { continue };
        match attachment_target(p, &ways) {
            Some(i) => {
                ways[i].inclusive_info.push(node_summary(&el.tags));
                stats.attached_nodes += 1;
            }
            None => {
                standalone.push(UnifiedWay {
                    id: el.key(),
                    tags: el.tags.clone(),
                    geometry: GeoGeometry::Point(p),
                    inclusive_info: Vec::new(),
                });
                stats.standalone_nodes += 1;
            }
        }
    }
    ways.extend(standalone);
    (ways, stats)
}

/// Chains open segments end to end into closed rings.
pub fn assemble_rings(mut segments: Vec<Vec<GeoPoint>>) -> Vec<Vec<GeoPoint>> {
    let mut rings = Vec::new();
    segments.retain(|s| s.len() >= 2);
    while let Some(mut ring) = segments.pop() {
        while ring.first() != ring.last() {
            let end = *ring.last().expect("non-empty");
            let Some(pos) = segments
                .iter()
                .position(|s| s.first() == Some(&end) || s.last() == Some(&end))
            else {
                break;
            };
            let mut next = segments.swap_remove(pos);
            if next.first() != Some(&end) {
                next.reverse();
            }
            ring.extend(next.into_iter().skip(1));
        }
        if closed(&ring) {
            rings.push(ring);
        }
    }
    rings
}

/// Appends each relation's summary to its outer member ways (every member
/// way when the relation uses no roles). Multipolygon relations also become
/// area entities built from their outer rings.
pub fn lift_relations_to_ways(
    mut ways: Vec<UnifiedWay>,
    elements: &[OsmElement],
    stats: &mut UnifyStats,
) -> Vec<UnifiedWay> {
    let index: HashMap<String, usize> = ways.iter().enumerate().map(|(i, w)| (w.id.clone(), i)).collect();
    let mut lifted = Vec::new();
    for rel in elements.iter().filter(|e| e.kind == ElementKind::Relation) {
        let summary = relation_summary(rel);
        let way_members: Vec<_> = rel.members.iter().filter(|m| m.kind == ElementKind::Way).collect();
        let uses_roles = way_members.iter().any(|m| !m.role.is_empty());
        let mut outer_segments = Vec::new();
        for m in &way_members {
            let is_outer = m.role == "outer";
            if uses_roles && !is_outer {
                continue;
            }
            let key = format!("way/{}", m.id);
            match index.get(&key) {
                Some(&i) => {
                    if !ways[i].inclusive_info.contains(&summary) {
                        ways[i].inclusive_info.push(summary.clone());
                    }
                    if is_outer {
                        let seg = match &ways[i].geometry {
                            GeoGeometry::Line(p) => p.clone(),
                            GeoGeometry::Area(r) => r[0].clone(),
                            GeoGeometry::Point(_) => continue,
                        };
                        outer_segments.push(seg);
                    }
                }
                None if is_outer && m.geometry.len() >= 2 => outer_segments.push(m.geometry.clone()),
                None => {
                    log::warn!("relation/{}: member {key} not in response, skipped", rel.id);
                    stats.unresolvable_members += 1;
                }
            }
        }
        let is_multipolygon = matches!(
            rel.tags.get("type").map(String::as_str),
            Some("multipolygon" | "boundary")
        );
        if is_multipolygon {
            let rings = assemble_rings(outer_segments);
            if rings.is_empty() {
                log::warn!("relation/{}: no closed outer ring", rel.id);
                continue;
            }
            let mut tags = rel.tags.clone();
            tags.remove("type");
            stats.multipolygons += 1;
            lifted.push(UnifiedWay {
                id: rel.key(),
                tags,
                geometry: GeoGeometry::Area(rings),
                inclusive_info: Vec::new(),
            });
        }
    }
    ways.extend(lifted);
    ways
}

/// Node embedding followed by relation lifting.
pub fn unify(elements: &[OsmElement]) -> (Vec<UnifiedWay>, UnifyStats) {
    let (ways, mut stats) = embed_nodes_into_ways(elements);
    let ways = lift_relations_to_ways(ways, elements, &mut stats);
    (ways, stats)
}
