use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::LabeledBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VlmOp {
    Detect,
    Ground,
    Fix,
    Describe,
}

impl VlmOp {
    pub fn as_str(self) -> &'static str {
        match self {
            VlmOp::Detect => "detect",
            VlmOp::Ground => "ground",
            VlmOp::Fix => "fix",
            VlmOp::Describe => "describe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("provider transport failure: {0}")]
    Transport(String),
    #[error("provider timed out after {0} ms")]
    Timeout(u64),
    #[error("provider returned an unusable response: {0}")]
    BadResponse(String),
    #[error("provider does not support {0:?}")]
    Unsupported(VlmOp),
    #[error("provider misconfigured: {0}")]
    Config(String),
}

/// One feature handed to the description step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribeItem {
    pub name: String,
    pub category: String,
    /// Signed degrees from the photo center.
    pub relative_bearing: f64,
    pub distance_m: f64,
    pub matched: bool,
    pub osm_id: Option<String>,
    pub inclusive_info: Vec<String>,
    pub nearby_info: Vec<String>,
    pub vlm_description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribeRequest {
    pub items: Vec<DescribeItem>,
}

impl DescribeRequest {
    pub fn prompt(&self) -> String {
        let mut out = String::from(
            "You are a friendly tour guide. Using the photo and the map facts below, write a short \
             narrative that introduces every listed feature from left to right, mentioning what kind \
             of place it is and where it sits relative to its neighbors.\n\n",
        );
        out.push_str(&serde_json::to_string_pretty(&self.items).expect("plain data serializes"));
        out
    }
}

/// Vision-language model operations. Implementations return raw model text;
/// parsing and validation happen in the callers.
pub trait VlmProvider: Send + Sync {
    fn name(&self) -> &str;
    fn detect(&self, prompt: &str, photo: &[u8]) -> Result<String, ProviderError>;
    fn ground(&self, photo: &[u8], label: &str) -> Result<String, ProviderError>;
    fn fix(&self, photo: &[u8], draft: &LabeledBox) -> Result<String, ProviderError>;
    fn describe(&self, photo: &[u8], request: &DescribeRequest) -> Result<String, ProviderError>;
    /// Reachability check used by health endpoints.
    fn probe(&self) -> bool {
        true
    }
}

/// First 16 hex digits of SHA-256 over the operation name and parts, each
/// followed by a zero byte.
pub fn input_digest(op: VlmOp, parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    h.update(op.as_str().as_bytes());
    h.update([0u8]);
    for p in parts {
        h.update(p);
        h.update([0u8]);
    }
    let d = h.finalize();
    d[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Memoizes responses by input digest so repeated calls within a job are
/// answered once.
pub struct CachingProvider<P> {
    inner: P,
    cache: Mutex<HashMap<(VlmOp, String), String>>,
}

impl<P: VlmProvider> CachingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    fn memo(
        &self,
        op: VlmOp,
        parts: &[&[u8]],
        call: impl FnOnce() -> Result<String, ProviderError>,
    ) -> Result<String, ProviderError> {
        let key = (op, input_digest(op, parts));
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let value = call()?;
        self.cache.lock().unwrap().entry(key).or_insert(value.clone());
        Ok(value)
    }
}

impl<P: VlmProvider> VlmProvider for CachingProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn detect(&self, prompt: &str, photo: &[u8]) -> Result<String, ProviderError> {
        self.memo(VlmOp::Detect, &[prompt.as_bytes(), photo], || self.inner.detect(prompt, photo))
    }

    fn ground(&self, photo: &[u8], label: &str) -> Result<String, ProviderError> {
        self.memo(VlmOp::Ground, &[photo, label.as_bytes()], || self.inner.ground(photo, label))
    }

    fn fix(&self, photo: &[u8], draft: &LabeledBox) -> Result<String, ProviderError> {
        let b = draft.bounding_box.canonical_text();
        self.memo(VlmOp::Fix, &[photo, draft.label.as_bytes(), b.as_bytes()], || {
            self.inner.fix(photo, draft)
        })
    }

    fn describe(&self, photo: &[u8], request: &DescribeRequest) -> Result<String, ProviderError> {
        let body = serde_json::to_vec(request).expect("plain data serializes");
        self.memo(VlmOp::Describe, &[photo, &body], || self.inner.describe(photo, request))
    }

    fn probe(&self) -> bool {
        self.inner.probe()
    }
}

impl<T: VlmProvider + ?Sized> VlmProvider for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn detect(&self, prompt: &str, photo: &[u8]) -> Result<String, ProviderError> {
        (**self).detect(prompt, photo)
    }
    fn ground(&self, photo: &[u8], label: &str) -> Result<String, ProviderError> {
        (**self).ground(photo, label)
    }
    fn fix(&self, photo: &[u8], draft: &LabeledBox) -> Result<String, ProviderError> {
        (**self).fix(photo, draft)
    }
    fn describe(&self, photo: &[u8], request: &DescribeRequest) -> Result<String, ProviderError> {
        (**self).describe(photo, request)
    }
    fn probe(&self) -> bool {
        (**self).probe()
    }
}

impl<T: VlmProvider + ?Sized> VlmProvider for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn detect(&self, prompt: &str, photo: &[u8]) -> Result<String, ProviderError> {
        (**self).detect(prompt, photo)
    }
    fn ground(&self, photo: &[u8], label: &str) -> Result<String, ProviderError> {
        (**self).ground(photo, label)
    }
    fn fix(&self, photo: &[u8], draft: &LabeledBox) -> Result<String, ProviderError> {
        (**self).fix(photo, draft)
    }
    fn describe(&self, photo: &[u8], request: &DescribeRequest) -> Result<String, ProviderError> {
        (**self).describe(photo, request)
    }
    fn probe(&self) -> bool {
        (**self).probe()
    }
}
