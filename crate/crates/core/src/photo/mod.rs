//! Photo feature detection through a vision-language model: the detection
//! prompt, parsing of its structured output, category alignment, and the
//! provider abstraction used for detection, grounding, box fixing and
//! description.

mod http;
mod mock;
mod ops;
mod parse;
mod prompt;
mod provider;
mod types;

pub use http::{HttpVlmProvider, HttpVlmSettings};
pub use mock::MockProvider;
pub use ops::{align_categories, describe, describe_request, detect, fix_bbox, ground, is_landmark_name};
pub use parse::{
    infer_category, parse_angle_span, parse_detection_output, parse_distance_range, render_detection_line,
    render_detection_output, ParsedDetections, RejectedLine, SINGLE_DISTANCE_SPREAD,
};
pub use prompt::detection_prompt;
pub use provider::{
    input_digest, CachingProvider, DescribeItem, DescribeRequest, ProviderError, VlmOp, VlmProvider,
};
pub use types::{BoundingBox, FixDecision, LabeledBox, Modified, PhotoFeature};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhotoError {
    #[error("provider error: {0}")]
    Provider(#[from] ProviderError),
    #[error("no parsable feature lines ({} rejected)", .0.len())]
    NoParsableLines(Vec<RejectedLine>),
    #[error("grounding refused for label {0:?}")]
    GroundingRefused(String),
    #[error("nothing to describe")]
    EmptyScene,
    #[error("unknown mock scenario {0:?}")]
    UnknownScenario(String),
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
    #[error("invalid photo feature: {0}")]
    InvalidFeature(String),
}
