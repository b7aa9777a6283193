//! Job records and the pluggable stores that hold them.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use autotour::pipeline::{Stage, StageEvent};
use autotour::presentation::SceneResult;
use autotour::scene::CameraPose;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn can_become(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running) | (JobState::Running, JobState::Done) | (JobState::Running, JobState::Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobInput {
    pub photo_id: String,
    pub photo_bytes: usize,
    pub camera: CameraPose,
    pub scene: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    /// Unset when the job failed before any stage ran.
    pub stage: Option<Stage>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub state: JobState,
    /// Unix milliseconds.
    pub submitted_at: u64,
    pub finished_at: Option<u64>,
    pub input: JobInput,
    pub result: Option<SceneResult>,
    pub error: Option<JobFailure>,
    pub progress: Vec<StageEvent>,
}

#[derive(Debug, Error, PartialEq)]
pub enum StoreError {
    #[error("job {0} not found")]
    NotFound(String),
    #[error("job {id}: illegal transition {from:?} -> {to:?}")]
    IllegalTransition { id: String, from: JobState, to: JobState },
    #[error("job {0} already exists")]
    Duplicate(String),
    #[error("store io: {0}")]
    Io(String),
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Job {
    pub fn new(id: String, input: JobInput) -> Self {
        Self {
            id,
            state: JobState::Queued,
            submitted_at: now_ms(),
            finished_at: None,
            input,
            result: None,
            error: None,
            progress: Vec::new(),
        }
    }

    fn transition(&mut self, to: JobState) -> Result<(), StoreError> {
        if !self.state.can_become(to) {
            return Err(StoreError::IllegalTransition {
                id: self.id.clone(),
                from: self.state,
                to,
            });
        }
        self.state = to;
        if to.is_terminal() {
            self.finished_at = Some(now_ms());
        }
        Ok(())
    }

    pub fn start(&mut self) -> Result<(), StoreError> {
        self.transition(JobState::Running)
    }

    pub fn finish(&mut self, result: SceneResult) -> Result<(), StoreError> {
        self.transition(JobState::Done)?;
        self.result = Some(result);
        Ok(())
    }

    pub fn fail(&mut self, failure: JobFailure) -> Result<(), StoreError> {
        self.transition(JobState::Failed)?;
        self.error = Some(failure);
        Ok(())
    }
}

/// Storage of jobs by id. Updates to one job are serialized.
pub trait JobStore: Send + Sync {
    fn insert(&self, job: Job) -> Result<(), StoreError>;
    fn get(&self, id: &str) -> Result<Job, StoreError>;
    /// Applies `f` to the stored job under the store lock.
    fn update(&self, id: &str, f: &mut dyn FnMut(&mut Job) -> Result<(), StoreError>) -> Result<(), StoreError>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn expired(job: &Job, ttl: Duration, now: u64) -> bool {
    job.finished_at.is_some_and(|f| now.saturating_sub(f) > ttl.as_millis() as u64)
}

/// Jobs kept in process memory; finished jobs are dropped after the TTL.
/// A restart loses every job.
pub struct MemoryStore {
    ttl: Duration,
    jobs: Mutex<HashMap<String, Job>>,
}

impl MemoryStore {
    pub fn new(ttl: Duration) -> Self {
        Self {
            ttl,
            jobs: Mutex::new(HashMap::new()),
        }
    }

    fn purge(&self, jobs: &mut HashMap<String, Job>) {
        let now = now_ms();
        jobs.retain(|_, j| !expired(j, self.ttl, now));
    }
}

impl JobStore for MemoryStore {
    fn insert(&self, job: Job) -> Result<(), StoreError> {
        let mut jobs = self.jobs.lock().expect("store lock");
        self.purge(&mut jobs);
        if jobs.contains_key(&job.id) {
            return Err(StoreError::Duplicate(job.id));
        }
        jobs.insert(job.id.clone(), job);
        Ok(())
    }

    fn get(&self, id: &str) -> Result<Job, StoreError> {
        let mut jobs = self.jobs.lock().expect("store lock");
        self.purge(&mut jobs);
        jobs.get(id).cloned().ok_or_else(|| StoreError::NotFound(id.into()))
    }

    fn update(&self, id: &str, f: &mut dyn FnMut(&mut Job) -> Result<(), StoreError>) -> Result<(), StoreError> {
        let mut jobs = self.jobs.lock().expect("store lock");
        let job = jobs.get_mut(id).ok_or_else(|| StoreError::NotFound(id.into()))?;
        let mut draft = job.clone();
        f(&mut draft)?;
        *job = draft;
        Ok(())
    }

    fn len(&self) -> usize {
        self.jobs.lock().expect("store lock").len()
    }
}

/// One JSON file per job; survives restarts.
pub struct FileStore {
    dir: PathBuf,
    ttl: Duration,
    lock: Mutex<()>,
}

impl FileStore {
    pub fn open(dir: impl Into<PathBuf>, ttl: Duration) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| StoreError::Io(e.to_string()))?;
        Ok(Self {
            dir,
            ttl,
            lock: Mutex::new(()),
        })
    }

    fn path(&self, id: &str) -> Option<PathBuf> {
        let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
        ok.then(|| self.dir.join(format!("{id}.json")))
    }

    fn read(path: &Path) -> Result<Option<Job>, StoreError> {
        match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| StoreError::Io(e.to_string())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(StoreError::Io(e.to_string())),
        }
    }

    fn write(path: &Path, job: &Job) -> Result<(), StoreError> {
        let tmp = path.with_extension("json.tmp");
        let bytes = serde_json::to_vec(job).map_err(|e| StoreError::Io(e.to_string()))?;
        fs::write(&tmp, bytes).map_err(|e| StoreError::Io(e.to_string()))?;
        fs::rename(&tmp, path).map_err(|e| StoreError::Io(e.to_string()))
    }
}

impl JobStore for FileStore {
    fn insert(&self, job: Job) -> Result<(), StoreError> {
        let _g = self.lock.lock().expect("store lock");
        let path = self.path(&job.id).ok_or_else(|| StoreError::NotFound(job.id.clone()))?;
        if path.exists() {
            return Err(StoreError::Duplicate(job.id));
        }
        Self::write(&path, &job)
    }

    fn get(&self, id: &str) -> Result<Job, StoreError> {
        let _g = self.lock.lock().expect("store lock");
        let path = self.path(id).ok_or_else(|| StoreError::NotFound(id.into()))?;
        match Self::read(&path)? {
            Some(j) if expired(&j, self.ttl, now_ms()) => {
                let _ = fs::remove_file(&path);
                Err(StoreError::NotFound(id.into()))
            }
            Some(j) => Ok(j),
            None => Err(StoreError::NotFound(id.into())),
        }
    }

    fn update(&self, id: &str, f: &mut dyn FnMut(&mut Job) -> Result<(), StoreError>) -> Result<(), StoreError> {
        let _g = self.lock.lock().expect("store lock");
        let path = self.path(id).ok_or_else(|| StoreError::NotFound(id.into()))?;
        let mut job = Self::read(&path)?.ok_or_else(|| StoreError::NotFound(id.into()))?;
        f(&mut job)?;
        Self::write(&path, &job)
    }

    fn len(&self) -> usize {
        fs::read_dir(&self.dir).map_or(0, |d| {
            d.filter_map(Result::ok)
                .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                .count()
        })
    }
}
