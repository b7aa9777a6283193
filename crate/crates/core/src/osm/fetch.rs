use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use super::OsmError;
use crate::net;

pub const DEFAULT_ENDPOINT: &str = "https://overpass-api.de/api/interpreter";

/// Where Overpass documents come from.
pub trait ElementSource: Send + Sync {
    fn fetch(&self, query: &str) -> Result<Vec<u8>, OsmError>;

    /// Cheap reachability probe.
    fn probe(&self) -> bool {
        true
    }
}

/// Replays a stored response verbatim.
#[derive(Debug, Clone)]
pub struct FixtureSource {
    path: PathBuf,
}

impl FixtureSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    /// `<root>/<scene>/overpass.json`
    pub fn for_scene(root: &Path, scene: &str) -> Self {
        Self::new(root.join(scene).join("overpass.json"))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl ElementSource for FixtureSource {
    fn fetch(&self, _query: &str) -> Result<Vec<u8>, OsmError> {
        std::fs::read(&self.path).map_err(|_| OsmError::FixtureNotFound(self.path.clone()))
    }

    fn probe(&self) -> bool {
        self.path.is_file()
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

/// HTTP client for an Overpass interpreter endpoint.
#[derive(Debug, Clone)]
pub struct OverpassClient {
    endpoint: String,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

enum Attempt {
    Transient(OsmError),
    Fatal(OsmError),
}

impl OverpassClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_retry(endpoint, RetryPolicy::default())
    }

    pub fn with_retry(endpoint: impl Into<String>, retry: RetryPolicy) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .user_agent(concat!("autotour/", env!("CARGO_PKG_VERSION")))
            .build()
            .expect("http client builds");
        Self {
            endpoint: endpoint.into(),
            retry,
            client,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, query: &str) -> Result<Vec<u8>, Attempt> {
        net::record_outbound();
        let resp = self
            .client
            .post(&self.endpoint)
            .form(&[("data", query)])
            .send()
            .map_err(|e| Attempt::Transient(OsmError::Network(e.to_string())))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(Attempt::Transient(OsmError::RateLimited));
        }
        if status.is_server_error() {
            return Err(Attempt::Transient(OsmError::Network(format!("HTTP {status}"))));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(OsmError::Network(format!("HTTP {status}"))));
        }
        resp.bytes()
            .map(|b| b.to_vec())
            .map_err(|e| Attempt::Transient(OsmError::Network(e.to_string())))
    }
}

impl ElementSource for OverpassClient {
    fn fetch(&self, query: &str) -> Result<Vec<u8>, OsmError> {
        let attempts = self.retry.attempts.max(1);
        let mut last = OsmError::Network("no attempt made".into());
        for i in 0..attempts {
            match self.attempt(query) {
                Ok(body) => return Ok(body),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(e)) => {
                    log::warn!("overpass attempt {}/{} failed: {e}", i + 1, attempts);
                    last = e;
                    if i + 1 < attempts {
                        thread::sleep(self.retry.base_delay * 2u32.pow(i));
                    }
                }
            }
        }
        Err(match last {
            OsmError::RateLimited => OsmError::RateLimited,
            OsmError::Network(msg) => OsmError::Network(format!("after {attempts} attempts: {msg}")),
            other => other,
        })
    }

    fn probe(&self) -> bool {
        net::record_outbound();
        // the interpreter answers an empty statement cheaply
        self.client
            .post(&self.endpoint)
            .form(&[("data", "[out:json];out;")])
            .timeout(Duration::from_secs(5))
            .send()
            .map(|r| r.status().is_success() || r.status().as_u16() == 400)
            .unwrap_or(false)
    }
}

#[derive(Debug, Clone)]
pub enum FetchMode {
    Live,
    Fixture(PathBuf),
}

/// One-shot fetch: a live POST to `endpoint`, or the fixture file's bytes.
pub fn fetch_elements(query: &str, endpoint: &str, mode: &FetchMode) -> Result<Vec<u8>, OsmError> {
    match mode {
        FetchMode::Live => OverpassClient::new(endpoint).fetch(query),
        FetchMode::Fixture(path) => FixtureSource::new(path.clone()).fetch(query),
    }
}
