use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::provider::{input_digest, DescribeItem, DescribeRequest, ProviderError, VlmOp, VlmProvider};
use super::{LabeledBox, PhotoError};

/// Replays canned responses from `<root>/<scenario>/vlm/<op>/<digest>.txt`.
///
/// Digests cover the operation inputs that identify a request: the photo for
/// detection, the label for grounding, and the label plus draft box for
/// fixing. Missing files fall back to `default.txt` for detection, a refusal
/// for grounding and an unmodified verdict for fixing. Descriptions are
/// rendered from a template.
#[derive(Debug)]
pub struct MockProvider {
    scenario: String,
    dir: PathBuf,
    calls: [AtomicUsize; 4],
}

impl MockProvider {
    pub fn new(fixtures_root: &Path, scenario: &str) -> Result<Self, PhotoError> {
        let dir = fixtures_root.join(scenario);
        if scenario.is_empty() || scenario.contains(['/', '\\']) || !dir.is_dir() {
            return Err(PhotoError::UnknownScenario(scenario.to_string()));
        }
        Ok(Self {
            scenario: scenario.to_string(),
            dir,
            calls: Default::default(),
        })
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn calls(&self, op: VlmOp) -> usize {
        self.calls[op as usize].load(Ordering::SeqCst)
    }

    /// Path of the canned response for an operation and its key parts.
    pub fn response_path(&self, op: VlmOp, parts: &[&[u8]]) -> PathBuf {
        self.dir
            .join("vlm")
            .join(op.as_str())
            .join(format!("{}.txt", input_digest(op, parts)))
    }

    fn read(&self, path: &Path) -> Result<Option<String>, ProviderError> {
        match fs::read_to_string(path) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ProviderError::Transport(format!("{}: {e}", path.display()))),
        }
    }

    fn count(&self, op: VlmOp) {
        self.calls[op as usize].fetch_add(1, Ordering::SeqCst);
    }
}

fn side_phrase(rel: f64) -> &'static str {
    if rel < -10.0 {
        "on your left"
    } else if rel > 10.0 {
        "on your right"
    } else {
        "straight ahead"
    }
}

fn describe_item(item: &DescribeItem) -> String {
    let mut s = format!(
        "{} is a {} about {:.0} m away {}.",
        item.name,
        item.category,
        item.distance_m,
        side_phrase(item.relative_bearing)
    );
    if !item.vlm_description.is_empty() {
        s.push_str(&format!(" {}.", item.vlm_description.trim_end_matches('.')));
    }
    if let Some(first) = item.inclusive_info.first() {
        s.push_str(&format!(" It includes {first}."));
    }
    if !item.matched {
        s.push_str(" It is not on the map.");
    }
    s
}

/// Deterministic tour text for a description request.
pub(crate) fn template_tour(request: &DescribeRequest) -> String {
    let mut parts = vec![format!(
        "From left to right you can see {} feature{}.",
        request.items.len(),
        if request.items.len() == 1 { "" } else { "s" }
    )];
    parts.extend(request.items.iter().map(describe_item));
    parts.join(" ")
}

impl VlmProvider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn detect(&self, _prompt: &str, photo: &[u8]) -> Result<String, ProviderError> {
        self.count(VlmOp::Detect);
        if let Some(s) = self.read(&self.response_path(VlmOp::Detect, &[photo]))? {
            return Ok(s);
        }
        let fallback = self.dir.join("vlm").join("detect").join("default.txt");
        Ok(self.read(&fallback)?.unwrap_or_default())
    }

    fn ground(&self, _photo: &[u8], label: &str) -> Result<String, ProviderError> {
        self.count(VlmOp::Ground);
        Ok(self
            .read(&self.response_path(VlmOp::Ground, &[label.as_bytes()]))?
            .unwrap_or_else(|| r#"{"found": false}"#.to_string()))
    }

    fn fix(&self, _photo: &[u8], draft: &LabeledBox) -> Result<String, ProviderError> {
        self.count(VlmOp::Fix);
        let b = draft.bounding_box.canonical_text();
        let path = self.response_path(VlmOp::Fix, &[draft.label.as_bytes(), b.as_bytes()]);
        match self.read(&path)? {
            Some(s) => Ok(s),
            None => Ok(serde_json::json!({
                "label": draft.label,
                "modified": "no",
                "bounding_box": draft.bounding_box,
            })
            .to_string()),
        }
    }

    fn describe(&self, _photo: &[u8], request: &DescribeRequest) -> Result<String, ProviderError> {
        self.count(VlmOp::Describe);
        Ok(template_tour(request))
    }
}
