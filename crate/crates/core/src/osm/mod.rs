//! OpenStreetMap ingestion: Overpass queries, response parsing, and the
//! unification of nodes and relations into way-level [`GeoFeature`]s.

mod category;
mod element;
mod feature;
mod fetch;
mod query;
mod unify;

pub use category::{categorize, FeatureCategory};
pub use element::{parse_overpass, serialize_overpass, ElementKind, Member, OsmElement, ParsedDocument};
pub use feature::{build_geo_features, footprint_of, GeoFeature, LineWidths, POINT_FOOTPRINT_M};
pub use fetch::{
    fetch_elements, ElementSource, FetchMode, FixtureSource, OverpassClient, RetryPolicy, DEFAULT_ENDPOINT,
};
pub use query::{build_overpass_query, DEFAULT_RADIUS_M, MAX_RADIUS_M, MIN_RADIUS_M};
pub use unify::{
    assemble_rings, attachment_target, embed_nodes_into_ways, is_area, lift_relations_to_ways,
    node_summary, node_way_distance, relation_summary, unify, GeoGeometry, UnifiedWay, UnifyStats,
    NODE_ATTACH_RADIUS_M,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OsmError {
    #[error("query radius {0} m outside [50, 1000]")]
    RadiusOutOfRange(f64),
    #[error("network error: {0}")]
    Network(String),
    #[error("rate limited by Overpass (HTTP 429)")]
    RateLimited,
    #[error("fixture not found: {}", .0.display())]
    FixtureNotFound(PathBuf),
    #[error("malformed Overpass document at byte {offset}: {reason}")]
    MalformedDocument { offset: usize, reason: String },
}
