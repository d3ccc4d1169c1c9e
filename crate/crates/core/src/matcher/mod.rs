//! Fuzzy object matching.
//!
//! Each descriptor attribute is scored in [0, 1] against a candidate (edit
//! distance for strings, a scaled Euclidean or cosine measure for positions
//! and sizes, a compatibility table for types). The overall score is the
//! weighted mean over the attributes the descriptor specifies.

mod ahp;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ObjType, ObjectView};
use crate::repo::{AttrKey, ObjectDescriptor};

pub use ahp::{ahp_weights, AhpError, AhpWeights, PairwiseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericMetric {
    #[default]
    Euclidean,
    Cosine,
}

/// Symmetric type-compatibility table with an implicit diagonal of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeCompatibility(BTreeMap<(ObjType, ObjType), f64>);

impl TypeCompatibility {
    pub fn empty() -> Self {
        TypeCompatibility(BTreeMap::new())
    }

    fn key(a: ObjType, b: ObjType) -> (ObjType, ObjType) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn set(&mut self, a: ObjType, b: ObjType, score: f64) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(ConfigError::Compatibility(format!(
                "{a}/{b}: {score} not in [0,1]"
            )));
        }
        if a == b && score != 1.0 {
            return Err(ConfigError::Compatibility(format!("{a}/{a} must be 1")));
        }
        if a != b {
            self.0.insert(Self::key(a, b), score);
        }
        Ok(())
    }

    pub fn get(&self, a: ObjType, b: ObjType) -> f64 {
        if a == b {
            1.0
        } else {
            self.0.get(&Self::key(a, b)).copied().unwrap_or(0.0)
        }
    }
}

impl Default for TypeCompatibility {
    fn default() -> Self {
        let mut t = TypeCompatibility::empty();
        t.0.insert(Self::key(ObjType::Listbox, ObjType::Combobox), 0.5);
        t.0.insert(Self::key(ObjType::Textfield, ObjType::PasswordField), 0.5);
        t
    }
}

impl Serialize for TypeCompatibility {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<(ObjType, ObjType, f64)> =
            self.0.iter().map(|(&(a, b), &v)| (a, b, v)).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TypeCompatibility {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<(ObjType, ObjType, f64)>::deserialize(d)?;
        let mut t = TypeCompatibility::empty();
        for (a, b, v) in rows {
            t.set(a, b, v).map_err(serde::de::Error::custom)?;
        }
        Ok(t)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("similarity weights: {0}")]
    Weights(String),
    #[error("threshold {0} not in [0,1]")]
    Threshold(f64),
    #[error("type compatibility: {0}")]
    Compatibility(String),
    #[error("`weights` and `ahp_matrix` are mutually exclusive")]
    WeightsAndMatrix,
    #[error(transparent)]
    Ahp(#[from] AhpError),
}

/// Consistency summary kept when weights were derived from a pairwise matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhpSummary {
    pub consistency_ratio: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityConfig {
    pub weights: BTreeMap<AttrKey, f64>,
    pub threshold: f64,
    pub numeric_metric: NumericMetric,
    pub case_insensitive: bool,
    pub type_compatibility: TypeCompatibility,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ahp: Option<AhpSummary>,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            weights: BTreeMap::from([
                (AttrKey::Name, 0.35),
                (AttrKey::ObjType, 0.20),
                (AttrKey::ParentName, 0.15),
                (AttrKey::Text, 0.15),
                (AttrKey::Position, 0.10),
                (AttrKey::Size, 0.05),
            ]),
            threshold: 0.65,
            numeric_metric: NumericMetric::Euclidean,
            case_insensitive: true,
            type_compatibility: TypeCompatibility::default(),
            ahp: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimilarityConfigFile {
    weights: Option<BTreeMap<AttrKey, f64>>,
    ahp_matrix: Option<Vec<Vec<f64>>>,
    /// Criteria order for `ahp_matrix`; defaults to the first n attribute keys.
    ahp_criteria: Option<Vec<AttrKey>>,
    threshold: Option<f64>,
    numeric_metric: Option<NumericMetric>,
    case_insensitive: Option<bool>,
    type_compatibility: Option<TypeCompatibility>,
    // accepted so that a serialized config reads back
    #[serde(rename = "ahp")]
    _ahp: Option<AhpSummary>,
}

impl<'de> Deserialize<'de> for SimilarityConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let f = SimilarityConfigFile::deserialize(d)?;
        SimilarityConfig::from_file(f).map_err(serde::de::Error::custom)
    }
}

impl SimilarityConfig {
    fn from_file(f: SimilarityConfigFile) -> Result<Self, ConfigError> {
        let mut c = SimilarityConfig::default();
        match (f.weights, f.ahp_matrix) {
            (Some(_), Some(_)) => return Err(ConfigError::WeightsAndMatrix),
            (Some(w), None) => c.weights = w,
            (None, Some(entries)) => {
                let n = entries.len();
                let criteria = f
                    .ahp_criteria
                    .unwrap_or_else(|| AttrKey::ALL.iter().take(n).copied().collect());
                if criteria.len() != n {
                    return Err(ConfigError::Weights(format!(
                        "{} criteria for a {n}x{n} matrix",
                        criteria.len()
                    )));
                }
                let m = PairwiseMatrix {
                    criteria: criteria.iter().map(|k| k.as_str().to_string()).collect(),
                    entries,
                };
                let res = ahp_weights(&m)?;
                c.weights = criteria.into_iter().zip(res.weights).collect();
                c.ahp = Some(AhpSummary {
                    consistency_ratio: res.cr,
                    consistent: res.consistent,
                });
            }
            (None, None) => {}
        }
        if let Some(t) = f.threshold {
            c.threshold = t;
        }
        if let Some(m) = f.numeric_metric {
            c.numeric_metric = m;
        }
        if let Some(ci) = f.case_insensitive {
            c.case_insensitive = ci;
        }
        if let Some(tc) = f.type_compatibility {
            c.type_compatibility = tc;
        }
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.weights.values().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ConfigError::Weights("weights must be non-negative".into()));
        }
        if !self.weights.values().any(|w| *w > 0.0) {
            return Err(ConfigError::Weights(
                "at least one weight must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Threshold(self.threshold));
        }
        Ok(())
    }
}

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - lev(a, b) / max(|a|, |b|)`; two empty strings score 1.
pub fn string_similarity(a: &str, b: &str, case_insensitive: bool) -> f64 {
    let (a, b) = if case_insensitive {
        (a.to_lowercase(), b.to_lowercase())
    } else {
        (a.to_string(), b.to_string())
    };
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&a, &b) as f64 / longest as f64
}

#[derive(Debug, Error, PartialEq)]
pub enum NumericError {
    #[error("dimension mismatch: {0} vs {1} (scale {2})")]
    DimensionMismatch(usize, usize, usize),
    #[error("scale components must be positive")]
    NonPositiveScale,
}

pub fn numeric_similarity(
    u: &[f64],
    v: &[f64],
    metric: NumericMetric,
    scale: &[f64],
) -> Result<f64, NumericError> {
    if u.len() != v.len() || u.len() != scale.len() {
        return Err(NumericError::DimensionMismatch(
            u.len(),
            v.len(),
            scale.len(),
        ));
    }
    if scale.iter().any(|s| s.is_nan() || *s <= 0.0) {
        return Err(NumericError::NonPositiveScale);
    }
    let nu: Vec<f64> = u.iter().zip(scale).map(|(x, s)| x / s).collect();
    let nv: Vec<f64> = v.iter().zip(scale).map(|(x, s)| x / s).collect();
    Ok(match metric {
        NumericMetric::Euclidean => {
            let d = nu
                .iter()
                .zip(&nv)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            1.0 - d.min(1.0)
        }
        NumericMetric::Cosine => {
            let norm = |x: &[f64]| x.iter().map(|c| c * c).sum::<f64>().sqrt();
            let (a, b) = (norm(&nu), norm(&nv));
            match (a == 0.0, b == 0.0) {
                (true, true) => 1.0,
                (true, false) | (false, true) => 0.0,
                _ => {
                    let dot: f64 = nu.iter().zip(&nv).map(|(x, y)| x * y).sum();
                    (dot / (a * b)).clamp(0.0, 1.0)
                }
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub candidate: String,
    pub overall: f64,
    pub per_attribute: BTreeMap<AttrKey, f64>,
    /// 1-based position in the ranking.
    pub rank: usize,
}

impl MatchResult {
    fn name_score(&self) -> f64 {
        self.per_attribute
            .get(&AttrKey::Name)
            .copied()
            .unwrap_or(0.0)
    }
}

pub fn effective_weight(
    descriptor: &ObjectDescriptor,
    key: AttrKey,
    config: &SimilarityConfig,
) -> f64 {
    descriptor
        .weights
        .as_ref()
        .and_then(|w| w.get(&key))
        .or_else(|| config.weights.get(&key))
        .copied()
        .unwrap_or(0.0)
}

fn pair(p: (i64, i64)) -> [f64; 2] {
    [p.0 as f64, p.1 as f64]
}

fn usize_pair(p: (u32, u32)) -> [f64; 2] {
    [f64::from(p.0), f64::from(p.1)]
}

/// Per-attribute and overall similarity of `candidate` to `descriptor`.
/// `screen_dims` scales positions.
pub fn object_similarity(
    descriptor: &ObjectDescriptor,
    candidate: &ObjectView,
    screen_dims: (u32, u32),
    config: &SimilarityConfig,
) -> MatchResult {
    let a = &descriptor.attributes;
    let ci = config.case_insensitive;
    let mut per = BTreeMap::new();
    if let Some(n) = &a.name {
        per.insert(AttrKey::Name, string_similarity(n, &candidate.name, ci));
    }
    if let Some(t) = a.obj_type {
        per.insert(
            AttrKey::ObjType,
            config.type_compatibility.get(t, candidate.obj_type),
        );
    }
    if let Some(p) = &a.parent_name {
        let cand = candidate.parent_name.as_deref().unwrap_or("");
        per.insert(AttrKey::ParentName, string_similarity(p, cand, ci));
    }
    if let Some(t) = &a.text {
        per.insert(AttrKey::Text, string_similarity(t, &candidate.text, ci));
    }
    if let Some(p) = a.position {
        let s = numeric_similarity(
            &pair(p),
            &pair(candidate.position),
            config.numeric_metric,
            &usize_pair(screen_dims),
        )
        .unwrap_or(0.0);
        per.insert(AttrKey::Position, s);
    }
    if let Some(sz) = a.size {
        let s = numeric_similarity(
            &usize_pair(sz),
            &usize_pair(candidate.size),
            config.numeric_metric,
            &usize_pair(sz),
        )
        .unwrap_or(0.0);
        per.insert(AttrKey::Size, s);
    }
    let (num, den) = per.iter().fold((0.0, 0.0), |(num, den), (k, s)| {
        let w = effective_weight(descriptor, *k, config);
        (num + w * s, den + w)
    });
    let overall = if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    };
    MatchResult {
        candidate: candidate.id.clone(),
        overall,
        per_attribute: per,
        rank: 0,
    }
}

/// Total order used everywhere candidates are ranked: overall score, then
/// name score (both descending), then candidate id.
pub fn ranking_order(a: &MatchResult, b: &MatchResult) -> Ordering {
    b.overall
        .total_cmp(&a.overall)
        .then_with(|| b.name_score().total_cmp(&a.name_score()))
        .then_with(|| a.candidate.cmp(&b.candidate))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyMatch {
    pub best: Option<MatchResult>,
    pub ranking: Vec<MatchResult>,
}

/// Ranks every candidate; `best` is the top one if it reaches the threshold.
pub fn fuzzy_match(
    descriptor: &ObjectDescriptor,
    candidates: &[ObjectView],
    screen_dims: (u32, u32),
    config: &SimilarityConfig,
) -> FuzzyMatch {
    let mut ranking: Vec<MatchResult> = candidates
        .iter()
        .map(|c| object_similarity(descriptor, c, screen_dims, config))
        .collect();
    ranking.sort_by(ranking_order);
    for (i, r) in ranking.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    let best = ranking
        .first()
        .filter(|r| r.overall >= config.threshold)
        .cloned();
    FuzzyMatch { best, ranking }
}
