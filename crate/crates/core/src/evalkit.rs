//! Evaluation metrics: weighted rating scores, identification and matching
//! recall/precision, and distance or density bucketing.

use std::collections::BTreeMap;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::osm::FeatureCategory;
use crate::presentation::SceneResult;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("weights must be non-negative and sum to 1, got {0:?}")]
    InvalidWeights([f64; 4]),
    #[error("rating {0} outside [1, 4]")]
    RatingOutOfRange(f64),
    #[error("zero denominator for {0}")]
    ZeroDenominator(Ratio),
    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
    #[error("no samples")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ratio {
    IR,
    IP,
    MR,
    MP,
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.3,
            gamma: 0.2,
            delta: 0.2,
        }
    }
}

impl MetricWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self, EvalError> {
        let w = [alpha, beta, gamma, delta];
        if w.iter().any(|v| !(*v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidWeights(w));
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            delta,
        })
    }
}

/// Mean 1–4 ratings for completeness, matching, bounding box and
/// description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingSet {
    pub c: f64,
    pub m: f64,
    pub b: f64,
    pub d: f64,
}

impl RatingSet {
    pub fn new(c: f64, m: f64, b: f64, d: f64) -> Result<Self, EvalError> {
        for v in [c, m, b, d] {
            if !(1.0..=4.0).contains(&v) {
                return Err(EvalError::RatingOutOfRange(v));
            }
        }
        Ok(Self { c, m, b, d })
    }

    fn as_array(&self) -> [f64; 4] {
        [self.c, self.m, self.b, self.d]
    }
}

pub fn weighted_score(r: &RatingSet, w: &MetricWeights) -> f64 {
    w.alpha * r.c + w.beta * r.m + w.gamma * r.b + w.delta * r.d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SystemCounts {
    pub n_correct_identified: u64,
    pub n_ground_truth: u64,
    pub n_total_identified: u64,
    pub n_correct_matches: u64,
    pub n_total_matches: u64,
}

impl std::ops::Add for SystemCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            n_correct_identified: self.n_correct_identified + o.n_correct_identified,
            n_ground_truth: self.n_ground_truth + o.n_ground_truth,
            n_total_identified: self.n_total_identified + o.n_total_identified,
            n_correct_matches: self.n_correct_matches + o.n_correct_matches,
            n_total_matches: self.n_total_matches + o.n_total_matches,
        }
    }
}

impl std::iter::Sum for SystemCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    pub ir: f64,
    pub ip: f64,
    pub mr: f64,
    pub mp: f64,
    pub f1_id: f64,
    pub f1_match: f64,
}

/// Harmonic mean, 0 when either input is 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64, which: Ratio) -> Result<f64, EvalError> {
    if den == 0 {
        return Err(EvalError::ZeroDenominator(which));
    }
    Ok(num as f64 / den as f64)
}

/// Matching recall is taken over ground-truth features and matching
/// precision over the matches the system produced.
pub fn system_metrics(c: &SystemCounts) -> Result<SystemMetrics, EvalError> {
    if c.n_correct_identified > c.n_ground_truth.min(c.n_total_identified) {
        return Err(EvalError::InconsistentCounts("correct identifications exceed a total".into()));
    }
    if c.n_correct_matches > c.n_total_matches {
        return Err(EvalError::InconsistentCounts("correct matches exceed total matches".into()));
    }
    let ir = ratio(c.n_correct_identified, c.n_ground_truth, Ratio::IR)?;
    let ip = ratio(c.n_correct_identified, c.n_total_identified, Ratio::IP)?;
    let mr = ratio(c.n_correct_matches, c.n_ground_truth, Ratio::MR)?;
    let mp = ratio(c.n_correct_matches, c.n_total_matches, Ratio::MP)?;
    Ok(SystemMetrics {
        ir,
        ip,
        mr,
        mp,
        f1_id: f1(ip, ir),
        f1_match: f1(mp, mr),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DistanceBucket {
    #[serde(rename = "<10m")]
    Under10,
    #[serde(rename = "10-30m")]
    From10To30,
    #[serde(rename = "30-50m")]
    From30To50,
    #[serde(rename = ">50m")]
    Over50,
}

impl DistanceBucket {
    pub fn of(distance_m: f64) -> Self {
        if distance_m < 10.0 {
            Self::Under10
        } else if distance_m < 30.0 {
            Self::From10To30
        } else if distance_m <= 50.0 {
            Self::From30To50
        } else {
            Self::Over50
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BucketKey {
    Distance(f64),
    /// Features per photo.
    Density(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bucket {
    Distance(DistanceBucket),
    Density(u32),
}

impl Bucket {
    pub fn of(key: BucketKey) -> Self {
        match key {
            BucketKey::Distance(d) => Bucket::Distance(DistanceBucket::of(d)),
            BucketKey::Density(n) => Bucket::Density(n.clamp(1, 5)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketMean {
    pub count: usize,
    pub mean: RatingSet,
}

/// Per-bucket means. Buckets without samples are absent from the map.
pub fn bucket_scores(samples: &[(BucketKey, RatingSet)]) -> Result<BTreeMap<Bucket, BucketMean>, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }
    let mut sums: BTreeMap<Bucket, (usize, [f64; 4])> = BTreeMap::new();
    for (k, r) in samples {
        let e = sums.entry(Bucket::of(*k)).or_insert((0, [0.0; 4]));
        e.0 += 1;
        for (s, v) in e.1.iter_mut().zip(r.as_array()) {
            *s += v;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(b, (n, s))| {
            let m = s.map(|v| v / n as f64);
            (
                b,
                BucketMean {
                    count: n,
                    mean: RatingSet {
                        c: m[0],
                        m: m[1],
                        b: m[2],
                        d: m[3],
                    },
                },
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFeature {
    pub name: String,
    #[serde(default)]
    pub category: Option<FeatureCategory>,
    #[serde(default)]
    pub osm_id: Option<String>,
    #[serde(default)]
    pub distance_m: Option<f64>,
}

/// Human-annotated record for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scene: String,
    pub features: Vec<TruthFeature>,
    #[serde(default)]
    pub ratings: Option<RatingSet>,
}

/// Minimum name-token Jaccard overlap for an identification to count.
pub const NAME_OVERLAP_MIN: f64 = 0.5;

pub fn name_tokens(s: &str) -> HashSet<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Jaccard overlap of lower-cased alphanumeric tokens.
pub fn name_overlap(a: &str, b: &str) -> f64 {
    let (ta, tb) = (name_tokens(a), name_tokens(b));
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub counts: SystemCounts,
    /// Predicted labels that matched no truth feature.
    pub hallucinations: Vec<String>,
}

/// Counts for one scene. Predictions pair greedily one-to-one with truth
/// features by best name overlap; a pair needs overlap ≥ 0.5 against the
/// prediction's label or its detected name. A produced match is correct
/// when its OSM id equals the paired truth feature's id.
pub fn score_scene(predicted: &SceneResult, truth: &GroundTruth) -> SceneScore {
    let names: Vec<[&str; 2]> = predicted
        .annotations
        .iter()
        .map(|a| [a.label.as_str(), a.detected_name.as_str()])
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, ns) in names.iter().enumerate() {
        for (j, t) in truth.features.iter().enumerate() {
            let s = ns.iter().map(|n| name_overlap(n, &t.name)).fold(0.0, f64::max);
            if s >= NAME_OVERLAP_MIN {
                pairs.push((s, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pred_used = vec![false; names.len()];
    let mut truth_used = vec![false; truth.features.len()];
    let mut paired: Vec<Option<usize>> = vec![None; names.len()];
    for (_, i, j) in pairs {
        if !pred_used[i] && !truth_used[j] {
            pred_used[i] = true;
            truth_used[j] = true;
            paired[i] = Some(j);
        }
    }
    let mut counts = SystemCounts {
        n_ground_truth: truth.features.len() as u64,
        n_total_identified: predicted.annotations.len() as u64,
        ..Default::default()
    };
    let mut hallucinations = Vec::new();
    for (a, p) in predicted.annotations.iter().zip(&paired) {
        if a.matched_feature_id.is_some() {
            counts.n_total_matches += 1;
        }
        match p {
            Some(j) => {
                counts.n_correct_identified += 1;
                let t = &truth.features[*j];
                if a.matched_feature_id.is_some() && a.matched_feature_id == t.osm_id {
                    counts.n_correct_matches += 1;
                }
            }
            None => hallucinations.push(a.label.clone()),
        }
    }
    SceneScore { counts, hallucinations }
}
