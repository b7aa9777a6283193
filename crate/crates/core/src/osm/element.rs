use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::OsmError;
use crate::geo::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Node,
    Way,
    Relation,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Node => "node",
            ElementKind::Way => "way",
            ElementKind::Relation => "relation",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "node" => Some(Self::Node),
            "way" => Some(Self::Way),
            "relation" => Some(Self::Relation),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub kind: ElementKind,
    pub id: i64,
    pub role: String,
    /// Inline member geometry when the response was requested with `out geom`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub geometry: Vec<GeoPoint>,
}

/// One node, way or relation from an Overpass response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsmElement {
    pub kind: ElementKind,
    pub id: i64,
    pub tags: BTreeMap<String, String>,
    /// Nodes only.
    pub coords: Option<GeoPoint>,
    /// Ways only.
    pub node_refs: Vec<i64>,
    /// Ways only, when the response inlined geometry.
    pub geometry: Vec<GeoPoint>,
    /// Relations only.
    pub members: Vec<Member>,
}

impl OsmElement {
    pub fn key(&self) -> String {
        format!("{}/{}", self.kind.as_str(), self.id)
    }

    pub fn name(&self) -> Option<&str> {
        self.tags.get("name").map(String::as_str).filter(|s| !s.is_empty())
    }
}

/// Parser output plus counts of what was skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedDocument {
    pub elements: Vec<OsmElement>,
    pub skipped_unknown: usize,
    pub skipped_invalid: usize,
}

impl ParsedDocument {
    pub fn count(&self, kind: ElementKind) -> usize {
        self.elements.iter().filter(|e| e.kind == kind).count()
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    text.split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1)
}

fn point_of(v: &Value) -> Option<GeoPoint> {
    let lat = v.get("lat")?.as_f64()?;
    let lon = v.get("lon")?.as_f64()?;
    GeoPoint::new(lat, lon).ok()
}

fn geometry_of(v: Option<&Value>) -> Vec<GeoPoint> {
    v.and_then(Value::as_array)
        .map(|pts| pts.iter().filter_map(point_of).collect())
        .unwrap_or_default()
}

fn tags_of(v: Option<&Value>) -> Option<BTreeMap<String, String>> {
    let mut tags = BTreeMap::new();
    if let Some(obj) = v.and_then(Value::as_object) {
        for (k, val) in obj {
            if k.is_empty() {
                return None;
            }
            let s = match val {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            tags.insert(k.clone(), s);
        }
    }
    Some(tags)
}

fn element_of(v: &Value, kind: ElementKind) -> Option<OsmElement> {
    let id = v.get("id")?.as_i64()?;
    let tags = tags_of(v.get("tags"))?;
    let mut el = OsmElement {
        kind,
        id,
        tags,
        coords: None,
        node_refs: Vec::new(),
        geometry: Vec::new(),
        members: Vec::new(),
    };
    match kind {
        ElementKind::Node => el.coords = Some(point_of(v)?),
        ElementKind::Way => {
            el.node_refs = v
                .get("nodes")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(Value::as_i64).collect())
                .unwrap_or_default();
            el.geometry = geometry_of(v.get("geometry"));
            if el.node_refs.len() < 2 && el.geometry.len() < 2 {
                return None;
            }
        }
        ElementKind::Relation => {
            for m in v.get("members").and_then(Value::as_array).into_iter().flatten() {
                let Some(kind) = m.get("type").and_then(Value::as_str).and_then(ElementKind::parse) else {
                    continue;
                };
                let Some(id) = m.get("ref").and_then(Value::as_i64) else {
                    continue;
                };
                el.members.push(Member {
                    kind,
                    id,
                    role: m.get("role").and_then(Value::as_str).unwrap_or("").to_string(),
                    geometry: geometry_of(m.get("geometry")),
                });
            }
        }
    }
    Some(el)
}

/// Parses an Overpass JSON response. Unknown element kinds and elements
/// that break the model's invariants are skipped and counted.
pub fn parse_overpass(doc: &[u8]) -> Result<ParsedDocument, OsmError> {
    let text = std::str::from_utf8(doc).map_err(|e| OsmError::MalformedDocument {
        offset: e.valid_up_to(),
        reason: "invalid UTF-8".into(),
    })?;
    let root: Value = serde_json::from_str(text).map_err(|e| OsmError::MalformedDocument {
        offset: byte_offset(text, e.line(), e.column()),
        reason: e.to_string(),
    })?;
    let elements = root
        .get("elements")
        .and_then(Value::as_array)
        .ok_or_else(|| OsmError::MalformedDocument {
            offset: 0,
            reason: "missing `elements` array".into(),
        })?;
    let mut out = ParsedDocument::default();
    for v in elements {
        let Some(kind) = v.get("type").and_then(Value::as_str).and_then(ElementKind::parse) else {
            out.skipped_unknown += 1;
            continue;
        };
        match element_of(v, kind) {
            Some(el) => out.elements.push(el),
            None => out.skipped_invalid += 1,
        }
    }
    if out.skipped_unknown + out.skipped_invalid > 0 {
        log::warn!(
            "overpass: skipped {} unknown and {} invalid elements",
            out.skipped_unknown,
            out.skipped_invalid
        );
    }
    Ok(out)
}

fn geometry_json(pts: &[GeoPoint]) -> Value {
    Value::Array(pts.iter().map(|p| json!({"lat": p.lat, "lon": p.lon})).collect())
}

/// Writes elements back out in Overpass JSON form.
pub fn serialize_overpass(elements: &[OsmElement]) -> String {
    let els: Vec<Value> = elements
        .iter()
        .map(|e| {
            let mut v = json!({"type": e.kind.as_str(), "id": e.id});
            if !e.tags.is_empty() {
                v["tags"] = json!(e.tags);
            }
            match e.kind {
                ElementKind::Node => {
                    if let Some(p) = e.coords {
                        v["lat"] = json!(p.lat);
                        v["lon"] = json!(p.lon);
                    }
                }
                ElementKind::Way => {
                    v["nodes"] = json!(e.node_refs);
                    if !e.geometry.is_empty() {
                        v["geometry"] = geometry_json(&e.geometry);
                    }
                }
                ElementKind::Relation => {
                    v["members"] = Value::Array(
                        e.members
                            .iter()
                            .map(|m| {
                                let mut mv = json!({"type": m.kind.as_str(), "ref": m.id, "role": m.role});
                                if !m.geometry.is_empty() {
                                    mv["geometry"] = geometry_json(&m.geometry);
                                }
                                mv
                            })
                            .collect(),
                    );
                }
            }
            v
        })
        .collect();
    serde_json::to_string_pretty(&json!({"version": 0.6, "elements": els}))
        .expect("overpass document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
      "version": 0.6,
      "elements": [
        {"type": "node", "id": 1, "lat": 22.3364, "lon": 114.2655, "tags": {"amenity": "cafe"}},
        {"type": "node", "id": 2, "lat": 22.3365, "lon": 114.2656},
        {"type": "way", "id": 10, "nodes": [1, 2], "tags": {"highway": "footway"}},
        {"type": "relation", "id": 100, "members": [{"type": "way", "ref": 10, "role": ""}],
         "tags": {"type": "route", "name": "Central Line"}},
        {"type": "area", "id": 5}
      ]
    }"#;

    #[test]
    fn types_every_element_and_counts_unknown() {
        let doc = parse_overpass(SAMPLE.as_bytes()).unwrap();
        assert_eq!(doc.count(ElementKind::Node), 2);
        assert_eq!(doc.count(ElementKind::Way), 1);
        assert_eq!(doc.count(ElementKind::Relation), 1);
        assert_eq!(doc.skipped_unknown, 1);
        assert_eq!(doc.elements[3].members[0].kind, ElementKind::Way);
        assert_eq!(doc.elements[0].tags["amenity"], "cafe");
    }

    #[test]
    fn empty_elements() {
        let doc = parse_overpass(br#"{"elements": []}"#).unwrap();
        assert!(doc.elements.is_empty());
    }

    #[test]
    fn truncated_document_reports_offset() {
        let cut = &SAMPLE.as_bytes()[..120];
        match parse_overpass(cut) {
            Err(OsmError::MalformedDocument { offset, .. }) => assert!(offset <= 120),
            other => panic!("expected MalformedDocument, got {other:?}"),
        }
        assert!(matches!(
            parse_overpass(b"{\"remark\": 1}"),
            Err(OsmError::MalformedDocument { offset: 0, .. })
        ));
    }

    #[test]
    fn way_with_one_node_is_invalid() {
        let doc = parse_overpass(br#"{"elements": [{"type": "way", "id": 3, "nodes": [1]}]}"#).unwrap();
        assert!(doc.elements.is_empty());
        assert_eq!(doc.skipped_invalid, 1);
    }

    #[test]
    fn serialize_then_parse_is_identity() {
        let doc = parse_overpass(SAMPLE.as_bytes()).unwrap();
        let again = parse_overpass(serialize_overpass(&doc.elements).as_bytes()).unwrap();
        assert_eq!(doc.elements, again.elements);
    }
}
