//! Landmark annotation for geotagged photos.
//!
//! Map features around the camera come from OpenStreetMap, landmarks in the
//! photo come from a vision-language model, and the two are paired by how
//! much of each map footprint falls inside the half-ring region implied by
//! the landmark's angle and distance estimates.

pub mod config;
pub mod evalkit;
pub mod geo;
pub mod matcher;
pub mod net;
pub mod osm;
pub mod photo;
pub mod pipeline;
pub mod presentation;
pub mod scalar;
pub mod scene;

pub use scalar::Scalar;

pub type GeoPoint = geo::GeoPoint<f64>;
pub type LocalPoint = geo::LocalPoint<f64>;
pub type Polygon = geo::Polygon<f64>;
pub type AnnularSector = geo::AnnularSector<f64>;
pub type AngularInterval = geo::AngularInterval<f64>;

pub use matcher::MatchResult;
pub use osm::{FeatureCategory, GeoFeature};
pub use photo::PhotoFeature;
pub use presentation::SceneResult;
pub use scene::CameraPose;
