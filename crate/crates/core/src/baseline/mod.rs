//! Embedding-similarity search: rank every utterance against a milestone's
//! reference sentences and propose the top `k` above a threshold.

mod embed;
#[cfg(feature = "http")]
mod http;

use std::cmp::Ordering;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::prompting::{MilestoneSpec, PuzzleSpec};
use crate::transcript::Transcript;

pub use embed::{text_key, CachedEmbedder, StubEmbedder, STUB_DIMENSION};
#[cfg(feature = "http")]
pub use http::HttpEmbedder;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EmbedError {
    #[error("vectors differ in dimension: {0} vs {1}")]
    Mismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("embedding has dimension {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("embedding cache: {0}")]
    Cache(String),
    #[error("embedding backend: {0}")]
    Backend(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("thresholds: {0}")]
    Thresholds(String),
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::Mismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub utterance_id: usize,
    pub score: f64,
    /// Index into [`MilestoneSpec::references`]; 0 is the solution statement.
    pub best_paraphrase_index: usize,
}

/// Scores are compared at 1e-9 resolution so that rounding noise (for
/// example from rescaled embeddings) cannot reorder near-equal candidates.
pub fn rank_key(score: f64) -> i64 {
    (score * 1e9).round() as i64
}

/// Descending score, earlier utterance first on ties.
pub fn rank_order(a: &RankedCandidate, b: &RankedCandidate) -> Ordering {
    rank_key(b.score)
        .cmp(&rank_key(a.score))
        .then(a.utterance_id.cmp(&b.utterance_id))
}

/// Rank already-embedded utterances against embedded references.
pub fn rank_vectors(
    utterances: &[Vec<f64>],
    references: &[Vec<f64>],
    exec: Execution,
) -> Result<Vec<RankedCandidate>, EmbedError> {
    if references.is_empty() {
        return Err(EmbedError::Empty("milestone has no reference sentences".into()));
    }
    let scored: Vec<Result<RankedCandidate, EmbedError>> = exec.map_range(utterances.len(), |id| {
        let mut best = (f64::NEG_INFINITY, 0);
        for (j, r) in references.iter().enumerate() {
            let s = cosine(&utterances[id], r)?;
            if s > best.0 {
                best = (s, j);
            }
        }
        Ok(RankedCandidate {
            utterance_id: id,
            score: best.0,
            best_paraphrase_index: best.1,
        })
    });
    let mut ranked = scored.into_iter().collect::<Result<Vec<_>, _>>()?;
    ranked.sort_by(rank_order);
    Ok(ranked)
}

fn embed_all(provider: &dyn EmbeddingProvider, texts: &[&str], exec: Execution) -> Result<Vec<Vec<f64>>, EmbedError> {
    let vectors: Vec<Result<Vec<f64>, EmbedError>> = exec.map(texts, |t| provider.embed(t));
    let vectors = vectors.into_iter().collect::<Result<Vec<_>, _>>()?;
    if let Some(v) = vectors.iter().find(|v| v.len() != provider.dimension()) {
        return Err(EmbedError::Dimension {
            expected: provider.dimension(),
            found: v.len(),
        });
    }
    Ok(vectors)
}

pub fn score_candidates(
    transcript: &Transcript,
    milestone: &MilestoneSpec,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<RankedCandidate>, EmbedError> {
    score_candidates_with(transcript, milestone, provider, Execution::Sequential)
}

/// Every utterance scored by its best cosine against the milestone's
/// solution statement and paraphrases.
pub fn score_candidates_with(
    transcript: &Transcript,
    milestone: &MilestoneSpec,
    provider: &dyn EmbeddingProvider,
    exec: Execution,
) -> Result<Vec<RankedCandidate>, EmbedError> {
    if transcript.is_empty() {
        return Err(EmbedError::Empty(format!(
            "transcript {} has no utterances",
            transcript.team_id
        )));
    }
    let texts: Vec<&str> = transcript.utterances().iter().map(|u| u.text.as_str()).collect();
    let refs: Vec<&str> = milestone.references().collect();
    let u = embed_all(provider, &texts, exec)?;
    let r = embed_all(provider, &refs, exec)?;
    rank_vectors(&u, &r, exec)
}

/// The first `min(k, above-threshold count)` candidates of a ranked list.
pub fn top_k_detect(ranked: &[RankedCandidate], threshold: f64, k: usize) -> Vec<RankedCandidate> {
    ranked
        .iter()
        .take_while(|c| c.score >= threshold)
        .take(k)
        .cloned()
        .collect()
}

/// Milestone name → similarity threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdTable(IndexMap<String, f64>);

impl ThresholdTable {
    /// Every milestone at [`DEFAULT_THRESHOLD`].
    pub fn uniform(spec: &PuzzleSpec, value: f64) -> Self {
        Self(spec.milestones.iter().map(|m| (m.name.clone(), value)).collect())
    }

    pub fn from_json(text: &str) -> Result<Self, EmbedError> {
        let table: Self = serde_json::from_str(text).map_err(|e| EmbedError::Thresholds(e.to_string()))?;
        if let Some((k, v)) = table.0.iter().find(|(_, v)| !(-1.0..=1.0).contains(*v)) {
            return Err(EmbedError::Thresholds(format!("{k} = {v} is outside [-1, 1]")));
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| EmbedError::Thresholds(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn check_complete(&self, spec: &PuzzleSpec) -> Result<(), EmbedError> {
        let missing: Vec<&str> = spec
            .milestones
            .iter()
            .map(|m| m.name.as_str())
            .filter(|n| !self.0.contains_key(*n))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(EmbedError::Thresholds(format!(
                "no threshold for {}",
                missing.join(", ")
            )))
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.0).expect("thresholds serialize")
    }
}

/// Top-k proposals for one team at one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub team_id: String,
    pub embedder: String,
    pub k: usize,
    pub proposals: IndexMap<String, Vec<RankedCandidate>>,
}

/// Full rankings for one team, reusable for any `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamRanking {
    pub team_id: String,
    pub embedder: String,
    pub rankings: IndexMap<String, Vec<RankedCandidate>>,
}

impl TeamRanking {
    pub fn compute(
        transcript: &Transcript,
        spec: &PuzzleSpec,
        provider: &dyn EmbeddingProvider,
        exec: Execution,
    ) -> Result<Self, EmbedError> {
        let mut rankings = IndexMap::new();
        for m in &spec.milestones {
            rankings.insert(m.name.clone(), score_candidates_with(transcript, m, provider, exec)?);
        }
        Ok(Self {
            team_id: transcript.team_id.clone(),
            embedder: provider.name().to_string(),
            rankings,
        })
    }

    pub fn detect(&self, thresholds: &ThresholdTable, k: usize) -> Result<BaselineResult, EmbedError> {
        let mut proposals = IndexMap::new();
        for (name, ranked) in &self.rankings {
            let threshold = thresholds
                .get(name)
                .ok_or_else(|| EmbedError::Thresholds(format!("no threshold for {name}")))?;
            proposals.insert(name.clone(), top_k_detect(ranked, threshold, k));
        }
        Ok(BaselineResult {
            team_id: self.team_id.clone(),
            embedder: self.embedder.clone(),
            k,
            proposals,
        })
    }
}
