//! End-to-end scene analysis.
//!
//! Map retrieval and feature extraction run on one thread while the model
//! detects photo features on another; both join at matching. Grounding and
//! box fixing then run in parallel per feature, and results are put back in
//! left-to-right order.

use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::geo::AnnularSector;
use crate::matcher::{match_scene, sector_from_photo_feature, MatchResult};
use crate::osm::{build_geo_features, build_overpass_query, parse_overpass, unify, ElementSource, GeoFeature, LineWidths};
use crate::photo::{
    describe, detect, fix_bbox, ground, BoundingBox, CachingProvider, FixDecision, LabeledBox, Modified, PhotoError,
    PhotoFeature, VlmProvider,
};
use crate::presentation::{build_annotation, build_scene_result, photo_id, SceneResult, StageTiming};
use crate::scene::{visible_features, CameraPose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    OsmIngest,
    SceneFilter,
    PhotoFeatures,
    Matcher,
    Grounding,
    BboxFix,
    Description,
    Presentation,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::OsmIngest,
        Stage::SceneFilter,
        Stage::PhotoFeatures,
        Stage::Matcher,
        Stage::Grounding,
        Stage::BboxFix,
        Stage::Description,
        Stage::Presentation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::OsmIngest => "osm_ingest",
            Stage::SceneFilter => "scene_filter",
            Stage::PhotoFeatures => "photo_features",
            Stage::Matcher => "matcher",
            Stage::Grounding => "grounding",
            Stage::BboxFix => "bbox_fix",
            Stage::Description => "description",
            Stage::Presentation => "presentation",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Started,
    Finished,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEvent {
    pub stage: Stage,
    pub phase: Phase,
    /// Milliseconds since the run started.
    pub at_ms: f64,
    /// Stage duration, set on finish and failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage} failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    fn new(stage: Stage, e: impl std::fmt::Display) -> Self {
        Self {
            stage,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub radius_m: f64,
    pub threshold: f64,
    pub widths: LineWidths,
    pub crop_shrink: f64,
    pub fix_boxes: bool,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self::from(&Config::default())
    }
}

impl From<&Config> for PipelineSettings {
    fn from(c: &Config) -> Self {
        Self {
            radius_m: c.overpass.radius_m,
            threshold: c.matching.threshold,
            widths: c.widths,
            crop_shrink: c.presentation.crop_shrink,
            fix_boxes: c.presentation.fix_boxes,
        }
    }
}

/// Progress sink; called from worker threads.
pub type Progress<'a> = &'a (dyn Fn(&StageEvent) + Sync);

pub fn no_progress(_: &StageEvent) {}

struct Clock<'a> {
    start: Instant,
    sink: Progress<'a>,
    // serializes emission so recorded timestamps are monotone
    lock: Mutex<Vec<StageTiming>>,
}

impl<'a> Clock<'a> {
    fn new(sink: Progress<'a>) -> Self {
        Self {
            start: Instant::now(),
            sink,
            lock: Mutex::new(Vec::new()),
        }
    }

    fn emit(&self, stage: Stage, phase: Phase, ms: Option<f64>) {
        let mut timings = self.lock.lock().unwrap();
        if let (Some(ms), Phase::Finished) = (ms, phase) {
            timings.push(StageTiming {
                stage: stage.as_str().into(),
                ms,
            });
        }
        let ev = StageEvent {
            stage,
            phase,
            at_ms: self.start.elapsed().as_secs_f64() * 1e3,
            ms,
        };
        (self.sink)(&ev);
    }

    fn stage<T, E: std::fmt::Display>(&self, stage: Stage, f: impl FnOnce() -> Result<T, E>) -> Result<T, PipelineError> {
        self.emit(stage, Phase::Started, None);
        let t = Instant::now();
        let out = f();
        let ms = Some(t.elapsed().as_secs_f64() * 1e3);
        match out {
            Ok(v) => {
                self.emit(stage, Phase::Finished, ms);
                Ok(v)
            }
            Err(e) => {
                self.emit(stage, Phase::Failed, ms);
                Err(PipelineError::new(stage, e))
            }
        }
    }

    fn timings(&self) -> Vec<StageTiming> {
        let mut t = self.lock.lock().unwrap().clone();
        t.sort_by_key(|s| Stage::ALL.iter().position(|x| x.as_str() == s.stage));
        t
    }
}

/// Map features of a scene before and after visibility reduction.
#[derive(Debug, Clone)]
pub struct GeoScene {
    pub all: Vec<GeoFeature>,
    pub visible: Vec<GeoFeature>,
}

/// Fetches, parses and unifies map data around the camera.
pub fn ingest(source: &dyn ElementSource, camera: &CameraPose, settings: &PipelineSettings) -> Result<Vec<GeoFeature>, PipelineError> {
    let err = |e: crate::osm::OsmError| PipelineError::new(Stage::OsmIngest, e);
    let query = build_overpass_query(camera.position, settings.radius_m).map_err(err)?;
    let doc = source.fetch(&query).map_err(err)?;
    let parsed = parse_overpass(&doc).map_err(err)?;
    let (ways, stats) = unify(&parsed.elements);
    log::debug!("unified {} entities ({stats:?})", ways.len());
    Ok(build_geo_features(&ways, camera, &settings.widths))
}

pub fn load_geo_scene(
    source: &dyn ElementSource,
    camera: &CameraPose,
    settings: &PipelineSettings,
) -> Result<GeoScene, PipelineError> {
    let all = ingest(source, camera, settings)?;
    let visible = visible_features(&all, camera);
    Ok(GeoScene { all, visible })
}

/// Box covering the feature's angle span when the grounding model cannot
/// locate it; angles map linearly across the field of view.
pub fn fallback_box(pf: &PhotoFeature, camera: &CameraPose) -> BoundingBox {
    let x = |a: f64| (a / camera.fov_deg + 0.5).clamp(0.0, 1.0);
    BoundingBox::new(x(pf.angle_span.0), 0.0, x(pf.angle_span.1), 1.0).unwrap_or(BoundingBox::FULL)
}

/// Maps `f` over items on scoped threads, keeping input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    thread::scope(|s| {
        let handles: Vec<_> = items.iter().map(|it| s.spawn(|| f(it))).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    })
}

pub struct Pipeline {
    pub settings: PipelineSettings,
    pub source: Arc<dyn ElementSource>,
    pub detector: Arc<dyn VlmProvider>,
    pub grounder: Arc<dyn VlmProvider>,
}

impl Pipeline {
    pub fn new(
        settings: PipelineSettings,
        source: Arc<dyn ElementSource>,
        detector: Arc<dyn VlmProvider>,
        grounder: Arc<dyn VlmProvider>,
    ) -> Self {
        Self {
            settings,
            source,
            detector,
            grounder,
        }
    }

    /// Source and providers wired from config for one scenario.
    pub fn from_config(cfg: &Config, scenario: &str) -> Result<Self, PhotoError> {
        Ok(Self::new(
            PipelineSettings::from(cfg),
            cfg.element_source(scenario),
            cfg.provider(&cfg.vlm.detect, scenario)?,
            cfg.provider(&cfg.vlm.ground, scenario)?,
        ))
    }

    pub fn run(&self, photo: &[u8], camera: &CameraPose, progress: Progress<'_>) -> Result<SceneResult, PipelineError> {
        let clock = Clock::new(progress);
        let detector = CachingProvider::new(self.detector.clone());
        let grounder = CachingProvider::new(self.grounder.clone());

        let (geo, pfs) = thread::scope(|s| {
            let geo = s.spawn(|| {
                let all = clock.stage(Stage::OsmIngest, || ingest(self.source.as_ref(), camera, &self.settings))?;
                clock.stage(Stage::SceneFilter, || Ok::<_, PipelineError>(visible_features(&all, camera)))
            });
            let pfs = clock.stage(Stage::PhotoFeatures, || detect(&detector, photo, camera));
            (geo.join().expect("geo branch panicked"), pfs)
        });
        let pfs = pfs?;
        let visible = geo?;

        let threshold = self.settings.threshold;
        let matches = clock.stage(Stage::Matcher, || {
            Ok::<_, PipelineError>(match_scene(&pfs, &visible, camera, threshold))
        })?;

        let drafts = clock.stage(Stage::Grounding, || {
            parallel_map(&matches, |m| {
                let pf = &m.photo_feature;
                match ground(&grounder, photo, &pf.name) {
                    Ok(b) => Ok(LabeledBox {
                        label: pf.name.clone(),
                        bounding_box: b,
                    }),
                    Err(PhotoError::GroundingRefused(label)) => {
                        log::info!("grounding refused for {label:?}; using the angle span");
                        Ok(LabeledBox {
                            label,
                            bounding_box: fallback_box(pf, camera),
                        })
                    }
                    Err(e) => Err(e),
                }
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
        })?;

        let decisions: Vec<FixDecision> = if self.settings.fix_boxes {
            clock.stage(Stage::BboxFix, || {
                parallel_map(&drafts, |d| fix_bbox(&grounder, photo, d))
                    .into_iter()
                    .collect::<Result<Vec<_>, _>>()
            })?
        } else {
            drafts
                .iter()
                .map(|d| FixDecision {
                    label: d.label.clone(),
                    modified: Modified::No,
                    bounding_box: d.bounding_box,
                })
                .collect()
        };

        let tour_text = clock.stage(Stage::Description, || {
            if matches.is_empty() {
                Ok("No landmarks were identified in this photo.".to_string())
            } else {
                describe(&detector, photo, &matches, camera)
            }
        })?;

        let mut result = clock.stage(Stage::Presentation, || {
            let annotations = matches
                .iter()
                .zip(&drafts)
                .zip(&decisions)
                .map(|((m, d), fix)| build_annotation(m, d, fix, self.settings.crop_shrink))
                .collect::<Result<Vec<_>, _>>()?;
            build_scene_result(photo_id(photo), *camera, &matches, annotations, tour_text, Vec::new())
        })?;
        result.timings = clock.timings();
        Ok(result)
    }
}

/// What-if matching for a given camera and photo features, without any
/// model call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DryRun {
    pub camera: CameraPose,
    pub candidates: Vec<GeoFeature>,
    pub sectors: Vec<Vec<AnnularSector>>,
    pub matches: Vec<MatchResult>,
}

pub fn dry_run(
    source: &dyn ElementSource,
    camera: &CameraPose,
    pfs: &[PhotoFeature],
    settings: &PipelineSettings,
) -> Result<DryRun, PipelineError> {
    let scene = load_geo_scene(source, camera, settings)?;
    let matches = match_scene(pfs, &scene.visible, camera, settings.threshold);
    Ok(DryRun {
        camera: *camera,
        sectors: pfs.iter().map(|pf| sector_from_photo_feature(camera, pf)).collect(),
        candidates: scene.visible,
        matches,
    })
}
