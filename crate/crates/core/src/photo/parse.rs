use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{PhotoError, PhotoFeature};
use crate::osm::FeatureCategory;

/// A single distance `~d m` is widened to `((1 - s)·d, (1 + s)·d)`.
pub const SINGLE_DISTANCE_SPREAD: f64 = 0.4;

static BRACKET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]").unwrap());
static SEPARATOR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:--|—|–|-|―|‒|\|)\s*$").unwrap());
static LEADER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:[-*•]|\d+[.)])?\s*$").unwrap());
static ANGLE_TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)
        (?P<side>left|right)\s*(?P<v1>\d+(?:\.\d+)?)\s*(?:°|deg(?:rees?)?)?
        | (?P<v2>\d+(?:\.\d+)?)\s*(?:°|deg(?:rees?)?)?\s*(?P<side2>left|right)
        | (?P<center>center|centre|straight\s+ahead|ahead)
        | (?P<signed>[+-]?\d+(?:\.\d+)?)\s*°",
    )
    .unwrap()
});
static DISTANCE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)^\s*
        (?:~|≈|∼|\$\\sim\$|about|approx\.?|approximately|around)?\s*
        (?P<a>\d+(?:\.\d+)?)\s*(?P<ua>m|meters?|metres?|km)?
        (?:\s*(?:-|–|—|to)\s*(?:~|≈|∼)?\s*(?P<b>\d+(?:\.\d+)?))?
        \s*(?P<unit>m|meters?|metres?|km)\s*$",
    )
    .unwrap()
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedLine {
    pub line_no: usize,
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedDetections {
    pub features: Vec<PhotoFeature>,
    pub rejects: Vec<RejectedLine>,
}

fn token_angle(c: &regex::Captures<'_>) -> Option<f64> {
    if let Some(v) = c.name("v1") {
        let v: f64 = v.as_str().parse().ok()?;
        let left = c.name("side")?.as_str().eq_ignore_ascii_case("left");
        return Some(if left { -v } else { v });
    }
    if let Some(v) = c.name("v2") {
        let v: f64 = v.as_str().parse().ok()?;
        let left = c.name("side2")?.as_str().eq_ignore_ascii_case("left");
        return Some(if left { -v } else { v });
    }
    if c.name("center").is_some() {
        return Some(0.0);
    }
    c.name("signed")?.as_str().parse().ok()
}

/// Parses `left 70° to left 30°` style spans into signed `(left, right)`.
pub fn parse_angle_span(text: &str) -> Option<(f64, f64)> {
    let angles: Vec<f64> = ANGLE_TOKEN.captures_iter(text).filter_map(|c| token_angle(&c)).collect();
    match angles.as_slice() {
        [a, b] => Some((a.min(*b), a.max(*b))),
        _ => None,
    }
}

/// Parses `~20 m` or `~5–20 m`. A single value expands by ±40%.
pub fn parse_distance_range(text: &str) -> Option<(f64, f64)> {
    let c = DISTANCE.captures(text)?;
    let scale = |u: Option<regex::Match<'_>>| match u.map(|m| m.as_str().to_ascii_lowercase()) {
        Some(u) if u == "km" => 1000.0,
        _ => 1.0,
    };
    let unit = scale(c.name("unit"));
    let a: f64 = c.name("a")?.as_str().parse().ok()?;
    match c.name("b") {
        Some(b) => {
            let b: f64 = b.as_str().parse().ok()?;
            let a_unit = if c.name("ua").is_some() { scale(c.name("ua")) } else { unit };
            let (lo, hi) = (a * a_unit, b * unit);
            (lo < hi).then_some((lo, hi))
        }
        None => {
            let d = a * unit;
            (d > 0.0).then_some(((1.0 - SINGLE_DISTANCE_SPREAD) * d, (1.0 + SINGLE_DISTANCE_SPREAD) * d))
        }
    }
}

const KEYWORDS: [(FeatureCategory, &[&str]); 5] = [
    (
        FeatureCategory::Road,
        &[
            "road", "street", "bridge", "walkway", "footbridge", "flyover", "overpass", "highway", "avenue",
            "lane", "path", "footpath", "sidewalk", "crossing", "crosswalk", "boulevard", "expressway",
            "tunnel", "railway", "viaduct",
        ],
    ),
    (
        FeatureCategory::Building,
        &[
            "building", "tower", "block", "skyscraper", "house", "apartment", "hall", "church", "temple",
            "mall", "hotel", "library", "station", "storey", "story", "office", "pagoda", "museum",
            "stadium", "high-rise", "highrise",
        ],
    ),
    (
        FeatureCategory::Waterway,
        &[
            "lake", "river", "sea", "bay", "harbour", "harbor", "pond", "stream", "canal", "creek", "water",
            "waterfront", "reservoir",
        ],
    ),
    (FeatureCategory::Park, &["park", "garden", "playground", "lawn"]),
    (
        FeatureCategory::Natural,
        &["tree", "hill", "mountain", "forest", "wood", "cliff", "rock", "beach", "peak", "foliage"],
    ),
];

fn words(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out: Vec<String> = lower
        .split(|c: char| !(c.is_alphanumeric() || c == '-'))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect();
    // hyphenated words also count by their parts
    let parts: Vec<String> = out
        .iter()
        .filter(|w| w.contains('-'))
        .flat_map(|w| w.split('-').map(str::to_string).collect::<Vec<_>>())
        .collect();
    out.extend(parts);
    out
}

fn keyword_match(word: &str, kw: &str) -> bool {
    word == kw
        || word.strip_suffix('s') == Some(kw)
        || word.strip_suffix("es") == Some(kw)
        || (kw.ends_with('y') && word.strip_suffix("ies").map(|s| format!("{s}y")).as_deref() == Some(kw))
}

fn category_of(text: &str) -> Option<FeatureCategory> {
    let ws = words(text);
    KEYWORDS
        .iter()
        .find(|(_, kws)| ws.iter().any(|w| kws.iter().any(|k| keyword_match(w, k))))
        .map(|(c, _)| *c)
}

/// Keyword-table category from the feature name, falling back to the
/// description.
pub fn infer_category(name: &str, description: &str) -> FeatureCategory {
    category_of(name)
        .or_else(|| category_of(description))
        .unwrap_or(FeatureCategory::Other)
}

fn parse_line(line: &str) -> Result<PhotoFeature, String> {
    let groups: Vec<regex::Match<'_>> = BRACKET.find_iter(line).collect();
    if groups.len() != 4 {
        return Err(format!("expected 4 bracketed fields, found {}", groups.len()));
    }
    if !LEADER.is_match(&line[..groups[0].start()]) || !line[groups[3].end()..].trim().is_empty() {
        return Err("text outside bracketed fields".into());
    }
    for w in groups.windows(2) {
        if !SEPARATOR.is_match(&line[w[0].end()..w[1].start()]) {
            return Err("fields not separated by a dash".into());
        }
    }
    let fields: Vec<&str> = groups.iter().map(|m| m.as_str()[1..m.as_str().len() - 1].trim()).collect();
    let angle_at = fields.iter().position(|f| parse_angle_span(f).is_some() && parse_distance_range(f).is_none());
    let dist_at = fields.iter().rposition(|f| parse_distance_range(f).is_some());
    let (Some(ai), Some(di)) = (angle_at, dist_at) else {
        return Err(match angle_at {
            None => "no angle span field".into(),
            Some(_) => "no distance field".into(),
        });
    };
    if ai == di {
        return Err("angle span and distance in the same field".into());
    }
    let rest: Vec<&str> = (0..4).filter(|i| *i != ai && *i != di).map(|i| fields[i]).collect();
    let (name, description) = (rest[0], rest[1]);
    let angle_span = parse_angle_span(fields[ai]).expect("checked above");
    let distance_range = parse_distance_range(fields[di]).expect("checked above");
    PhotoFeature::new(
        name,
        angle_span,
        description,
        distance_range,
        infer_category(name, description),
    )
    .map_err(|e| e.to_string())
}

/// Parses the model's feature lines. Malformed lines are collected as
/// rejects; the call fails only when no line parses.
pub fn parse_detection_output(text: &str) -> Result<ParsedDetections, PhotoError> {
    let mut out = ParsedDetections::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim().trim_end_matches("\\newline").trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        match parse_line(line) {
            Ok(f) => out.features.push(f),
            Err(reason) => out.rejects.push(RejectedLine {
                line_no: i + 1,
                text: line.to_string(),
                reason,
            }),
        }
    }
    if out.features.is_empty() {
        return Err(PhotoError::NoParsableLines(out.rejects));
    }
    Ok(out)
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

fn fmt_angle(v: f64) -> String {
    if v < 0.0 {
        format!("left {}°", fmt_num(-v))
    } else {
        format!("right {}°", fmt_num(v))
    }
}

/// Canonical rendering of one feature in the detection line format.
pub fn render_detection_line(f: &PhotoFeature) -> String {
    format!(
        "[{}] — [{} to {}] — [{}] — [~{}–{} m]",
        f.name,
        fmt_angle(f.angle_span.0),
        fmt_angle(f.angle_span.1),
        f.description,
        fmt_num(f.distance_range.0),
        fmt_num(f.distance_range.1)
    )
}

pub fn render_detection_output(features: &[PhotoFeature]) -> String {
    features.iter().map(render_detection_line).collect::<Vec<_>>().join("\n")
}
