//! Asynchronous REST jobs over the scene pipeline.
//!
//! Jobs are queued on submit and run on a bounded pool of blocking workers.
//! Status exposes the per-stage events as they happen.

pub mod error;
pub mod store;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tower_http::cors::{AllowOrigin, CorsLayer};

use autotour::config::{Config, StoreKind};
use autotour::geo::GeoPoint;
use autotour::osm::GeoFeature;
use autotour::photo::PhotoFeature;
use autotour::pipeline::{dry_run, DryRun, Pipeline, PipelineSettings, StageEvent};
use autotour::presentation::{photo_id, serialize_result};
use autotour::scene::CameraPose;

pub use error::ApiError;
use store::{FileStore, Job, JobFailure, JobInput, JobState, JobStore, MemoryStore};

pub const HEALTH_TTL: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub live: bool,
    pub overpass_ok: bool,
    pub provider_ok: bool,
}

pub struct AppState {
    pub config: Config,
    pub store: Arc<dyn JobStore>,
    workers: Arc<Semaphore>,
    health: Mutex<Option<(Instant, Health)>>,
    probes: AtomicU64,
}

impl AppState {
    pub fn new(config: Config) -> Result<Arc<Self>, String> {
        let ttl = Duration::from_secs(config.service.result_ttl_secs);
        let store: Arc<dyn JobStore> = match config.service.store {
            StoreKind::Memory => Arc::new(MemoryStore::new(ttl)),
            StoreKind::File => {
                let dir = config.service.store_dir.clone().unwrap_or_else(|| "jobs".into());
                Arc::new(FileStore::open(dir, ttl).map_err(|e| e.to_string())?)
            }
        };
        Ok(Self::with_store(config, store))
    }

    pub fn with_store(config: Config, store: Arc<dyn JobStore>) -> Arc<Self> {
        let workers = Arc::new(Semaphore::new(config.service.worker_count().max(1)));
        Arc::new(Self {
            config,
            store,
            workers,
            health: Mutex::new(None),
            probes: AtomicU64::new(0),
        })
    }

    /// The worker pool; holding its permits pauses job execution.
    pub fn workers(&self) -> Arc<Semaphore> {
        self.workers.clone()
    }

    /// Upstream probe rounds performed so far.
    pub fn probe_count(&self) -> u64 {
        self.probes.load(Ordering::SeqCst)
    }

    fn scene_for(&self, requested: Option<String>) -> Result<String, ApiError> {
        let scene = requested
            .or_else(|| self.config.service.default_scene.clone())
            .unwrap_or_else(|| self.config.vlm.scenario.clone());
        let ok = !scene.is_empty()
            && scene.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
            && !scene.starts_with('.');
        if !ok {
            return Err(ApiError::invalid_metadata(format!("bad scene name {scene:?}")));
        }
        Ok(scene)
    }

    fn health(&self) -> Health {
        let mut cached = self.health.lock().expect("health lock");
        if let Some((at, h)) = *cached {
            if at.elapsed() < HEALTH_TTL {
                return h;
            }
        }
        self.probes.fetch_add(1, Ordering::SeqCst);
        let scene = self.scene_for(None).unwrap_or_default();
        let overpass_ok = self.config.element_source(&scene).probe();
        let provider_ok = self
            .config
            .provider(&self.config.vlm.detect, &scene)
            .is_ok_and(|p| p.probe())
            && self.config.provider(&self.config.vlm.ground, &scene).is_ok_and(|p| p.probe());
        let h = Health {
            live: true,
            overpass_ok,
            provider_ok,
        };
        *cached = Some((Instant::now(), h));
        h
    }
}

/// Camera metadata sent with a photo.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub lat: f64,
    pub lon: f64,
    pub heading_deg: f64,
    #[serde(default)]
    pub fov_deg: Option<f64>,
    /// Fixture scene or mock scenario; defaults from config.
    #[serde(default)]
    pub scene: Option<String>,
}

impl Meta {
    pub fn camera(&self, cfg: &Config) -> Result<CameraPose, ApiError> {
        let pos = GeoPoint::new(self.lat, self.lon).map_err(|e| ApiError::invalid_metadata(e.to_string()))?;
        CameraPose::with_fov(
            pos,
            self.heading_deg,
            self.fov_deg.unwrap_or(cfg.camera.fov_deg),
            cfg.camera.fov_margin_deg,
        )
        .map_err(|e| ApiError::invalid_metadata(e.to_string()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Submitted {
    pub job_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Status {
    pub job_id: String,
    pub state: JobState,
    pub progress: Vec<StageEvent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<JobFailure>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DryRunRequest {
    #[serde(flatten)]
    pub meta: Meta,
    pub features: Vec<PhotoFeature>,
    #[serde(default)]
    pub threshold: Option<f64>,
}

/// Dry-run answer; candidates carry their footprints for drawing.
#[derive(Debug, Serialize)]
pub struct DryRunResponse {
    #[serde(flatten)]
    pub run: DryRun,
    pub footprints: Vec<Footprint>,
}

#[derive(Debug, Serialize)]
pub struct Footprint {
    pub id: String,
    /// Camera-frame rings as [x_east, y_north] metres, same frame as the sectors.
    pub rings: Vec<Vec<[f64; 2]>>,
}

fn footprint(f: &GeoFeature) -> Footprint {
    Footprint {
        id: f.id.clone(),
        rings: f
            .footprint
            .iter()
            .map(|poly| poly.vertices().iter().map(|p| [p.x, p.y]).collect())
            .collect(),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.service.max_upload_bytes;
    let cors = match &state.config.service.cors_origin {
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => AllowOrigin::any(),
        },
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(cors)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/v1/jobs", post(submit_job))
        .route("/v1/jobs/{id}/status", get(get_status))
        .route("/v1/jobs/{id}/result", get(get_result))
        .route("/v1/health", get(health))
        .route("/v1/dryrun", post(dryrun))
        .layer(DefaultBodyLimit::max(limit.saturating_add(64 * 1024)))
        .layer(cors)
        .with_state(state)
}

async fn submit_job(State(state): State<Arc<AppState>>, mut form: Multipart) -> Result<Response, ApiError> {
    let limit = state.config.service.max_upload_bytes;
    let mut photo: Option<Vec<u8>> = None;
    let mut meta: Option<Meta> = None;
    loop {
        let field = match form.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => return Err(multipart_error(e.status(), e.body_text(), limit)),
        };
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| multipart_error(e.status(), e.body_text(), limit))?;
        match name.as_str() {
            "photo" => {
                if bytes.len() > limit {
                    return Err(ApiError::too_large(limit));
                }
                photo = Some(bytes.to_vec());
            }
            "meta" => {
                let m = serde_json::from_slice(&bytes).map_err(|e| ApiError::invalid_metadata(format!("meta: {e}")))?;
                meta = Some(m);
            }
            _ => {}
        }
    }
    let photo = photo.filter(|p| !p.is_empty()).ok_or_else(|| ApiError::invalid_metadata("missing or empty photo"))?;
    let meta = meta.ok_or_else(|| ApiError::invalid_metadata("missing meta"))?;
    let camera = meta.camera(&state.config)?;
    let scene = state.scene_for(meta.scene.clone())?;

    let id = uuid::Uuid::new_v4().simple().to_string();
    let job = Job::new(
        id.clone(),
        JobInput {
            photo_id: photo_id(&photo),
            photo_bytes: photo.len(),
            camera,
            scene: scene.clone(),
        },
    );
    state.store.insert(job)?;
    log::info!("job {id} queued for scene {scene}");
    tokio::spawn(run_job(state.clone(), id.clone(), photo, camera, scene));
    Ok((StatusCode::ACCEPTED, Json(Submitted { job_id: id })).into_response())
}

fn multipart_error(status: StatusCode, text: String, limit: usize) -> ApiError {
    if status == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::too_large(limit)
    } else {
        ApiError::invalid_metadata(text)
    }
}

async fn run_job(state: Arc<AppState>, id: String, photo: Vec<u8>, camera: CameraPose, scene: String) {
    let Ok(_permit) = state.workers.clone().acquire_owned().await else {
        return;
    };
    if let Err(e) = state.store.update(&id, &mut |j| j.start()) {
        log::error!("job {id}: {e}");
        return;
    }
    let worker = state.clone();
    let job_id = id.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let pipeline = Pipeline::from_config(&worker.config, &scene).map_err(|e| JobFailure {
            stage: None,
            message: e.to_string(),
        })?;
        let progress = |ev: &StageEvent| {
            let _ = worker.store.update(&job_id, &mut |j| {
                j.progress.push(ev.clone());
                Ok(())
            });
        };
        pipeline.run(&photo, &camera, &progress).map_err(|e| JobFailure {
            stage: Some(e.stage),
            message: e.message,
        })
    })
    .await
    .unwrap_or_else(|e| {
        Err(JobFailure {
            stage: None,
            message: format!("worker panicked: {e}"),
        })
    });
    let r = match outcome {
        Ok(result) => {
            log::info!("job {id} done with {} annotations", result.annotations.len());
            state.store.update(&id, &mut |j| j.finish(result.clone()))
        }
        Err(failure) => {
            log::warn!("job {id} failed: {}", failure.message);
            state.store.update(&id, &mut |j| j.fail(failure.clone()))
        }
    };
    if let Err(e) = r {
        log::error!("job {id}: {e}");
    }
}

async fn get_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Status>, ApiError> {
    let job = state.store.get(&id)?;
    Ok(Json(Status {
        job_id: job.id,
        state: job.state,
        progress: job.progress,
        error: job.error,
    }))
}

async fn get_result(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let job = state.store.get(&id)?;
    match (job.state, job.result, job.error) {
        (JobState::Done, Some(result), _) => {
            let body = serialize_result(&result);
            Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
        }
        (JobState::Failed, _, err) => {
            let err = err.unwrap_or(JobFailure {
                stage: None,
                message: "unknown".into(),
            });
            let mut e = ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "JobFailed", err.message);
            e.stage = err.stage.map(|s| s.as_str().to_string());
            Err(e)
        }
        (state, ..) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "NotReady",
            format!("job is {}", serde_json::to_string(&state).unwrap_or_default().trim_matches('"')),
        )),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let s = state.clone();
    let h = tokio::task::spawn_blocking(move || s.health()).await.unwrap_or(Health {
        live: true,
        overpass_ok: false,
        provider_ok: false,
    });
    Json(h)
}

async fn dryrun(State(state): State<Arc<AppState>>, Json(req): Json<DryRunRequest>) -> Result<Json<DryRunResponse>, ApiError> {
    let camera = req.meta.camera(&state.config)?;
    let scene = state.scene_for(req.meta.scene.clone())?;
    let mut settings = PipelineSettings::from(&state.config);
    if let Some(t) = req.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(ApiError::invalid_metadata(format!("threshold {t} outside [0, 1]")));
        }
        settings.threshold = t;
    }
    let source = state.config.element_source(&scene);
    let run = tokio::task::spawn_blocking(move || dry_run(source.as_ref(), &camera, &req.features, &settings))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| {
            let mut err = ApiError::new(StatusCode::BAD_GATEWAY, "UpstreamError", e.message);
            err.stage = Some(e.stage.as_str().into());
            err
        })?;
    let footprints = run.candidates.iter().map(footprint).collect();
    Ok(Json(DryRunResponse { run, footprints }))
}
