//! TOML configuration shared by the CLI and the service.
//!
//! The file named by `AUTOTOUR_CONFIG` is read when no explicit path is
//! given; every key is optional. The model API key is only ever taken from
//! `AUTOTOUR_VLM_KEY`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcher::DEFAULT_THRESHOLD;
use crate::osm::{
    ElementSource, FixtureSource, LineWidths, OverpassClient, DEFAULT_ENDPOINT, DEFAULT_RADIUS_M, MAX_RADIUS_M,
    MIN_RADIUS_M,
};
use crate::photo::{HttpVlmProvider, HttpVlmSettings, MockProvider, VlmProvider};
use crate::presentation::DEFAULT_CROP_SHRINK;
use crate::scene::{DEFAULT_FOV_DEG, DEFAULT_FOV_MARGIN_DEG};

pub const CONFIG_ENV: &str = "AUTOTOUR_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid setting {key}: {message}")]
    Invalid { key: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    #[default]
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverpassConfig {
    pub endpoint: String,
    pub radius_m: f64,
}

impl Default for OverpassConfig {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.into(),
            radius_m: DEFAULT_RADIUS_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub fov_deg: f64,
    pub fov_margin_deg: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            fov_deg: DEFAULT_FOV_DEG,
            fov_margin_deg: DEFAULT_FOV_MARGIN_DEG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderSlot {
    pub provider: ProviderKind,
    #[serde(flatten)]
    pub http: HttpVlmSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VlmConfig {
    /// Mock scenario used when a slot is `mock`.
    pub scenario: String,
    pub detect: ProviderSlot,
    pub ground: ProviderSlot,
}

impl Default for VlmConfig {
    fn default() -> Self {
        Self {
            scenario: "choi_hung".into(),
            detect: ProviderSlot::default(),
            ground: ProviderSlot::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PresentationConfig {
    pub crop_shrink: f64,
    /// The box-fixing pass roughly doubles grounding latency.
    pub fix_boxes: bool,
}

impl Default for PresentationConfig {
    fn default() -> Self {
        Self {
            crop_shrink: DEFAULT_CROP_SHRINK,
            fix_boxes: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreKind {
    #[default]
    Memory,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    /// Concurrent jobs; defaults to the core count capped at 4.
    pub workers: Option<usize>,
    pub result_ttl_secs: u64,
    pub max_upload_bytes: usize,
    pub store: StoreKind,
    pub store_dir: Option<PathBuf>,
    pub cors_origin: Option<String>,
    /// Fixture scene used for jobs that name none.
    pub default_scene: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            workers: None,
            result_ttl_secs: 3600,
            max_upload_bytes: 15 * 1024 * 1024,
            store: StoreKind::Memory,
            store_dir: None,
            cors_origin: None,
            default_scene: None,
        }
    }
}

impl ServiceConfig {
    pub fn worker_count(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, |n| n.get()).min(4)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub mode: Mode,
    pub fixtures_root: PathBuf,
    pub overpass: OverpassConfig,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub camera: CameraConfig,
    pub widths: LineWidths,
    pub vlm: VlmConfig,
    pub presentation: PresentationConfig,
    pub service: ServiceConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            mode: Mode::Fixture,
            fixtures_root: PathBuf::from("fixtures"),
            overpass: OverpassConfig::default(),
            matching: MatchConfig::default(),
            camera: CameraConfig::default(),
            widths: LineWidths::default(),
            vlm: VlmConfig::default(),
            presentation: PresentationConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Explicit path, else `AUTOTOUR_CONFIG`, else defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        if let Some(p) = explicit {
            return Self::from_file(p);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::from_file(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = self.overpass.radius_m;
        if !(MIN_RADIUS_M..=MAX_RADIUS_M).contains(&r) {
            return Err(ConfigError::Invalid {
                key: "overpass.radius_m",
                message: format!("{r} outside [{MIN_RADIUS_M}, {MAX_RADIUS_M}]"),
            });
        }
        let t = self.matching.threshold;
        if !(0.0..=1.0).contains(&t) {
            return Err(ConfigError::Invalid {
                key: "match.threshold",
                message: format!("{t} outside [0, 1]"),
            });
        }
        if !(20.0..=120.0).contains(&self.camera.fov_deg) {
            return Err(ConfigError::Invalid {
                key: "camera.fov_deg",
                message: format!("{} outside [20, 120]", self.camera.fov_deg),
            });
        }
        if !(0.0..0.5).contains(&self.presentation.crop_shrink) {
            return Err(ConfigError::Invalid {
                key: "presentation.crop_shrink",
                message: format!("{} outside [0, 0.5)", self.presentation.crop_shrink),
            });
        }
        for w in [self.widths.road, self.widths.footway, self.widths.waterway] {
            if !(w > 0.0) {
                return Err(ConfigError::Invalid {
                    key: "widths",
                    message: format!("width {w} must be positive"),
                });
            }
        }
        Ok(())
    }

    /// Map data source for a scene: its fixture file in fixture mode, the
    /// Overpass endpoint otherwise.
    pub fn element_source(&self, scene: &str) -> Arc<dyn ElementSource> {
        match self.mode {
            Mode::Fixture => Arc::new(FixtureSource::for_scene(&self.fixtures_root, scene)),
            Mode::Live => Arc::new(OverpassClient::new(self.overpass.endpoint.clone())),
        }
    }

    pub fn provider(&self, slot: &ProviderSlot, scenario: &str) -> Result<Arc<dyn VlmProvider>, crate::photo::PhotoError> {
        Ok(match slot.provider {
            ProviderKind::Mock => Arc::new(MockProvider::new(&self.fixtures_root, scenario)?),
            ProviderKind::Http => Arc::new(HttpVlmProvider::from_env(slot.http.clone())?),
        })
    }
}
