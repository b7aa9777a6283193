use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Coarse feature class shared by map and photo features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureCategory {
    Building,
    Road,
    Park,
    Natural,
    Waterway,
    Other,
}

impl FeatureCategory {
    pub const CORE: [FeatureCategory; 5] = [
        FeatureCategory::Building,
        FeatureCategory::Road,
        FeatureCategory::Park,
        FeatureCategory::Natural,
        FeatureCategory::Waterway,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureCategory::Building => "building",
            FeatureCategory::Road => "road",
            FeatureCategory::Park => "park",
            FeatureCategory::Natural => "natural",
            FeatureCategory::Waterway => "waterway",
            FeatureCategory::Other => "other",
        }
    }

    pub fn is_core(self) -> bool {
        self != FeatureCategory::Other
    }
}

impl fmt::Display for FeatureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "building" => Ok(Self::Building),
            "road" | "highway" => Ok(Self::Road),
            "park" => Ok(Self::Park),
            "natural" => Ok(Self::Natural),
            "waterway" | "water" => Ok(Self::Waterway),
            "other" => Ok(Self::Other),
            other => Err(format!("unknown feature category {other:?}")),
        }
    }
}

/// Maps OSM tags to a category. Checked in order: building, highway, park,
/// water, natural.
pub fn categorize(tags: &BTreeMap<String, String>) -> FeatureCategory {
    let has = |k: &str| tags.contains_key(k);
    let is = |k: &str, v: &str| tags.get(k).map(String::as_str) == Some(v);
    if has("building") || has("building:part") {
        FeatureCategory::Building
    } else if has("highway") {
        FeatureCategory::Road
    } else if is("leisure", "park") || is("leisure", "garden") || is("landuse", "park") {
        FeatureCategory::Park
    } else if has("waterway") || is("natural", "water") {
        FeatureCategory::Waterway
    } else if has("natural") {
        FeatureCategory::Natural
    } else {
        FeatureCategory::Other
    }
}
